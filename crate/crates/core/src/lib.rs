//! Shape optimisation of Kirchhoff–Love thin shells whose mid-surface is
//! represented by a small multilayer perceptron.

pub mod bench;
pub mod error;
pub mod export;
pub mod geometry;
pub mod lattice;
pub mod nrep;
pub mod optimizer;
pub mod sensitivity;
pub mod shape;
pub mod shell;

pub use error::{Error, Result};
