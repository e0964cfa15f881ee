//! Fitting a heightfield network to `5 cos(x/2) cos(y/2)` over a 20 x 20
//! plan.

use crate::error::Result;
use crate::nrep::{fit, ActivationSpec, FitResult, MlpNetwork, OutputMode, TrainingConfig};

const SIZE: f64 = 20.0;

/// Inputs in the unit square and target heights on an `(n + 1)^2` grid.
pub fn cosine_surface_samples(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut inputs = Vec::with_capacity(2 * (n + 1) * (n + 1));
    let mut targets = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
            inputs.extend([a, b]);
            targets.push(5.0 * (0.5 * SIZE * a).cos() * (0.5 * SIZE * b).cos());
        }
    }
    (inputs, targets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitStudyConfig {
    /// Elements per side of the sampling grid.
    pub grid: usize,
    pub hidden: Vec<usize>,
    pub omega: f64,
    pub delta: f64,
    pub training: TrainingConfig,
}

impl Default for FitStudyConfig {
    fn default() -> Self {
        Self {
            grid: 64,
            hidden: vec![10, 10, 10],
            omega: 0.5,
            delta: std::f64::consts::FRAC_PI_4,
            training: TrainingConfig {
                epochs: 20_000,
                learning_rate: 0.01,
                ..TrainingConfig::default()
            },
        }
    }
}

/// Initialise with the training seed and fit.
pub fn fit_cosine_surface(cfg: &FitStudyConfig) -> Result<FitResult> {
    let mut sizes = vec![2];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let mut net = MlpNetwork::uniform(
        sizes,
        ActivationSpec::sinusoidal(cfg.omega, cfg.delta),
        OutputMode::Heightfield,
        [SIZE, SIZE, 0.0],
    )?;
    net.init_params(cfg.training.seed);
    let (x, t) = cosine_surface_samples(cfg.grid);
    fit(&net, &x, &t, &cfg.training)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_cover_the_grid() {
        let (x, t) = cosine_surface_samples(64);
        assert_eq!(t.len(), 4225);
        assert_eq!(x.len(), 2 * 4225);
        assert!((t[0] - 5.0).abs() < 1e-15);
        let last = t[t.len() - 1];
        assert!((last - 5.0 * 10f64.cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn default_network_has_261_parameters() {
        let mut cfg = FitStudyConfig::default();
        cfg.training.epochs = 1;
        cfg.grid = 2;
        assert_eq!(fit_cosine_surface(&cfg).unwrap().network.count_params(), 261);
    }
}
