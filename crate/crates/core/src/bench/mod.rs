//! Benchmark problems: the catenary strip, the square roof and its
//! variants, and the surface-fitting study, with analytic references.

mod catenary;
mod experiment;
mod fitting;

pub use catenary::{catenary_reference, centerline_vertices, mse_to_catenary, CatenaryReference};
pub use experiment::{
    min_sqrt_a, periodic, run_experiment, ExperimentOutcome, ExperimentSpec, ExperimentSummary, LoadConfig,
    NetworkConfig, OptimizerConfig, RoofCase, StripVariant, SupportConfig,
};
pub use fitting::{cosine_surface_samples, fit_cosine_surface, FitStudyConfig};
