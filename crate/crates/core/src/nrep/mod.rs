//! Neural parametric representation of a surface: a small perceptron from
//! parametric to physical coordinates, its parameter Jacobian and training.

mod network;
mod text;
mod train;

pub use network::{count_params, ActivationKind, ActivationSpec, MlpNetwork, OutputMode, ParamJacobian};
pub use text::{fmt_f64, from_text, to_text};
pub use train::{fit, FitResult, TrainingConfig};
