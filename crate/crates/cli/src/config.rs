//! Run configuration files (TOML).
//!
//! Every file carries `version = 1` and exactly one command section. Unknown
//! keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use shellnrep::bench::{ExperimentSpec, FitStudyConfig};
use shellnrep::nrep::{ActivationSpec, TrainingConfig};
use shellnrep::geometry::HoleRect;

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Overridden by `--seed`.
    pub seed: Option<u64>,
    /// Overridden by `--out`.
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub deterministic: bool,
    pub fit: Option<FitSection>,
    pub optimize: Option<ExperimentSpec>,
    pub gradcheck: Option<GradcheckSection>,
    pub lattice: Option<LatticeSection>,
}

/// Fit of a sinusoidal heightfield network to `5 cos(x/2) cos(y/2)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "default_fit_grid")]
    pub grid: usize,
    pub hidden: Vec<usize>,
    pub omega: f64,
    #[serde(default = "quarter_pi")]
    pub delta: f64,
    #[serde(default)]
    pub training: TrainingConfig,
}

fn default_fit_grid() -> usize {
    64
}

fn quarter_pi() -> f64 {
    std::f64::consts::FRAC_PI_4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradPoint {
    /// Freshly initialised parameters (a curved surface).
    Initial,
    /// Parameters after fitting the flat template.
    Fitted,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSection {
    pub problem: ExperimentSpec,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "initial_point")]
    pub at: GradPoint,
    /// Test hook: scale the analytic gradient by this factor.
    #[serde(default = "one")]
    pub gradient_scale: f64,
}

fn default_directions() -> usize {
    20
}

fn default_step() -> f64 {
    1e-4
}

fn default_tolerance() -> f64 {
    1e-3
}

fn initial_point() -> GradPoint {
    GradPoint::Initial
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    /// Heightfield network describing the lower skin; relative paths are
    /// resolved against the config file's directory.
    pub network: PathBuf,
    pub grid: [usize; 2],
    #[serde(default)]
    pub holes: Vec<HoleRect>,
    pub height: f64,
    pub cells: [usize; 2],
    pub layers: usize,
    pub diameter: f64,
    #[serde(default)]
    pub edges: bool,
    pub map: MapSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub hidden: Vec<usize>,
    pub activation: ActivationSpec,
    #[serde(default)]
    pub training: TrainingConfig,
}

/// The single command section present in a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Fit,
    Optimize,
    Gradcheck,
    Lattice,
}

impl Section {
    pub fn name(&self) -> &'static str {
        match self {
            Section::Fit => "fit",
            Section::Optimize => "optimize",
            Section::Gradcheck => "gradcheck",
            Section::Lattice => "lattice",
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(format!("malformed config: {e}")))?;
        if cfg.version != CONFIG_VERSION {
            return Err(invalid(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Check that the section for `section` exists and is consistent.
    pub fn validate(&self, section: Section) -> Result<(), CliError> {
        let present = [
            (Section::Fit, self.fit.is_some()),
            (Section::Optimize, self.optimize.is_some()),
            (Section::Gradcheck, self.gradcheck.is_some()),
            (Section::Lattice, self.lattice.is_some()),
        ];
        if let Some((other, _)) = present.iter().find(|(s, p)| *p && *s != section) {
            return Err(invalid(format!(
                "config for `{}` also contains a [{}] section",
                section.name(),
                other.name()
            )));
        }
        let model = |e: shellnrep::Error| invalid(e.to_string());
        match section {
            Section::Fit => {
                let f = self.fit.as_ref().ok_or_else(|| invalid("missing [fit] section"))?;
                if f.grid == 0 || f.hidden.is_empty() || f.hidden.contains(&0) {
                    return Err(invalid("fit grid and hidden layer sizes must be positive"));
                }
                if !(f.omega.is_finite() && f.omega != 0.0 && f.delta.is_finite()) {
                    return Err(invalid("fit omega must be finite and nonzero, delta finite"));
                }
                f.training.validate().map_err(model)
            }
            Section::Optimize => {
                let s = self.optimize.as_ref().ok_or_else(|| invalid("missing [optimize] section"))?;
                s.validate().map_err(model)?;
                s.build_model().map(|_| ()).map_err(model)
            }
            Section::Gradcheck => {
                let g = self.gradcheck.as_ref().ok_or_else(|| invalid("missing [gradcheck] section"))?;
                g.problem.validate().map_err(model)?;
                g.problem.build_model().map_err(model)?;
                if g.directions == 0 || !(g.step > 0.0) || !(g.tolerance > 0.0) || !g.gradient_scale.is_finite() {
                    return Err(invalid("gradcheck needs directions >= 1, positive step and tolerance"));
                }
                Ok(())
            }
            Section::Lattice => {
                let l = self.lattice.as_ref().ok_or_else(|| invalid("missing [lattice] section"))?;
                if l.grid[0] == 0 || l.grid[1] == 0 {
                    return Err(invalid("lattice grid must be positive"));
                }
                if !(l.height > 0.0 && l.diameter > 0.0) || l.layers == 0 {
                    return Err(invalid("lattice height, diameter and layer count must be positive"));
                }
                if l.cells[0] == 0 || l.cells[1] == 0 || l.grid[0] % l.cells[0] != 0 || l.grid[1] % l.cells[1] != 0 {
                    return Err(invalid(format!("lattice cells {:?} must divide the grid {:?}", l.cells, l.grid)));
                }
                if l.map.hidden.is_empty() || l.map.hidden.contains(&0) {
                    return Err(invalid("map network hidden layer sizes must be positive"));
                }
                l.map.training.validate().map_err(model)
            }
        }
    }
}

impl FitSection {
    pub fn study(&self, seed: Option<u64>) -> FitStudyConfig {
        let mut training = self.training.clone();
        if let Some(s) = seed {
            training.seed = s;
        }
        FitStudyConfig {
            grid: self.grid,
            hidden: self.hidden.clone(),
            omega: self.omega,
            delta: self.delta,
            training,
        }
    }
}
