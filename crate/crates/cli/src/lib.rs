//! Command implementations behind the `shellnrep` binary.
//!
//! Exit codes: 0 success, 2 configuration or missing input, 3 iteration
//! budget exhausted, 4 computation failure, 5 gradient check failed.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use shellnrep::bench::{fit_cosine_surface, run_experiment};
use shellnrep::export::write_obj;
use shellnrep::geometry::build_structured_grid;
use shellnrep::lattice::{bcc_counts, build_lattice_skin, lattice_to_text, LatticeConfig};
use shellnrep::nrep::{fit, from_text, to_text, OutputMode, TrainingConfig};
use shellnrep::optimizer::Termination;
use shellnrep::shape::{check_directions, ShapeProblem};
use shellnrep::shell::{Discretisation, Material, ShellModel};

use config::{GradPoint, RunConfig, Section};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    MaxIterations,
    Failure(String),
    GradientMismatch(f64),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::MaxIterations => 3,
            CliError::Failure(_) => 4,
            CliError::GradientMismatch(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::MaxIterations => write!(f, "optimisation stopped at the iteration limit"),
            CliError::Failure(m) => write!(f, "failed: {m}"),
            CliError::GradientMismatch(e) => write!(f, "gradient check failed: max relative error {e:e}"),
        }
    }
}

impl std::error::Error for CliError {}

fn failure(e: impl std::fmt::Display) -> CliError {
    CliError::Failure(e.to_string())
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub deterministic: bool,
}

/// A loaded config with the overrides resolved.
pub struct Run {
    pub config: RunConfig,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub deterministic: bool,
    /// Directory of the config file, for resolving relative paths.
    pub base: PathBuf,
}

impl Run {
    pub fn load(path: &Path, section: Section, o: &Overrides) -> Result<Self, CliError> {
        let config = RunConfig::load(path)?;
        config.validate(section)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = o
            .out
            .clone()
            .or_else(|| config.out.as_ref().map(|p| base.join(p)))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok(Self {
            seed: o.seed.or(config.seed),
            deterministic: o.deterministic || config.deterministic,
            config,
            out,
            base,
        })
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(failure)?;
        fs::write(self.out.join(name), contents).map_err(failure)
    }
}

pub fn cmd_fit(run: &Run) -> Result<(), CliError> {
    let section = run.config.fit.as_ref().expect("validated");
    let study = section.study(run.seed);
    if study.training.learning_rate == 0.0 {
        eprintln!("warning: learning_rate is 0, the parameters will not change");
    }
    let result = fit_cosine_surface(&study).map_err(failure)?;
    if !result.mse.is_finite() {
        return Err(CliError::Failure("fit diverged".into()));
    }
    let mut csv = String::from("epoch,mse\n");
    for (epoch, mse) in &result.history {
        let _ = writeln!(csv, "{epoch},{mse:.12e}");
    }
    run.write("fit_report.csv", csv)?;
    run.write("network.txt", to_text(&result.network))?;
    println!("final_mse={:e}", result.mse);
    println!("epochs={}", result.epochs_run);
    Ok(())
}

pub fn cmd_optimize(run: &Run) -> Result<(), CliError> {
    let mut spec = run.config.optimize.clone().expect("validated");
    if let Some(s) = run.seed {
        spec.seed = s;
    }
    let outcome = run_experiment(&spec, Some(&run.out)).map_err(failure)?;
    print!("{}", outcome.summary.to_text());
    match outcome.summary.status {
        Termination::Converged => Ok(()),
        Termination::MaxIterations => Err(CliError::MaxIterations),
        Termination::LineFailure => Err(CliError::Failure(
            outcome.summary.message.unwrap_or_else(|| "line search failed".into()),
        )),
    }
}

pub fn cmd_gradcheck(run: &Run) -> Result<(), CliError> {
    let g = run.config.gradcheck.as_ref().expect("validated");
    let mut spec = g.problem.clone();
    if let Some(s) = run.seed {
        spec.seed = s;
    }
    let template = spec.build_model().map_err(failure)?;
    let mut net = spec.build_network().map_err(failure)?;
    if g.at == GradPoint::Fitted {
        let inputs: Vec<f64> = template.mesh().vertices().iter().flatten().copied().collect();
        let targets = vec![0.0; template.n_vertices()];
        net = fit(&net, &inputs, &targets, &spec.fit).map_err(failure)?.network;
    }
    let theta = net.params().to_vec();
    let problem = ShapeProblem::new(template, net).map_err(failure)?;
    let rows = check_directions(&problem, &theta, g.directions, spec.seed, g.step, g.gradient_scale).map_err(failure)?;
    let mut csv = String::from(
        "direction,analytic,finite_difference,relative_error,volume_analytic,volume_finite_difference,volume_relative_error\n",
    );
    let mut worst = 0.0f64;
    for (i, r) in rows.iter().enumerate() {
        let (ej, ev) = (r.compliance_error(), r.volume_error());
        worst = worst.max(ej).max(ev);
        let _ = writeln!(
            csv,
            "{i},{:.12e},{:.12e},{ej:.6e},{:.12e},{:.12e},{ev:.6e}",
            r.compliance_analytic, r.compliance_fd, r.volume_analytic, r.volume_fd
        );
    }
    run.write("gradcheck.csv", csv)?;
    println!("directions={}", rows.len());
    println!("max_relative_error={worst:e}");
    if worst <= g.tolerance {
        Ok(())
    } else {
        Err(CliError::GradientMismatch(worst))
    }
}

pub fn cmd_lattice(run: &Run) -> Result<(), CliError> {
    let l = run.config.lattice.as_ref().expect("validated");
    let path = run.base.join(&l.network);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("cannot read network {}: {e}", path.display())))?;
    let net = from_text(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if net.output_mode != OutputMode::Heightfield {
        return Err(CliError::Config("the skin network must be a heightfield network".into()));
    }
    let mesh = build_structured_grid(l.grid[0], l.grid[1], &l.holes).map_err(|e| CliError::Config(e.to_string()))?;
    let disc = Arc::new(Discretisation::new(mesh));
    let material = Material {
        youngs_modulus: 1.0,
        poisson: 0.3,
    };
    let flat = ShellModel::flat(disc, [net.extents[0], net.extents[1]], l.height, material);
    let inputs: Vec<f64> = flat.mesh().vertices().iter().flatten().copied().collect();
    let lower = flat.with_coords(net.physical_points(&inputs).map_err(failure)?);
    let mut training: TrainingConfig = l.map.training.clone();
    if let Some(s) = run.seed {
        training.seed = s;
    }
    let cfg = LatticeConfig {
        height: l.height,
        cells: l.cells,
        layers: l.layers,
        diameter: l.diameter,
        edges: l.edges,
        hidden: l.map.hidden.clone(),
        activation: l.map.activation,
        training,
    };
    let skin = build_lattice_skin(&lower, &cfg).map_err(failure)?;
    let mut buf = Vec::new();
    write_obj(&mut buf, skin.lower.mesh(), &skin.lower.coords).map_err(failure)?;
    run.write("lower_skin.obj", &buf)?;
    buf.clear();
    write_obj(&mut buf, skin.upper.mesh(), &skin.upper.coords).map_err(failure)?;
    run.write("upper_skin.obj", &buf)?;
    run.write("lattice.txt", lattice_to_text(&skin.positions, &skin.lattice.struts))?;
    run.write("map_network.txt", to_text(&skin.map_net))?;
    let (nodes, struts) = bcc_counts(l.cells[0], l.cells[1], l.layers, l.edges);
    let mut summary = String::new();
    let _ = writeln!(summary, "nodes={}", skin.positions.len());
    let _ = writeln!(summary, "struts={}", skin.lattice.struts.len());
    let _ = writeln!(summary, "expected_nodes={nodes}");
    let _ = writeln!(summary, "expected_struts={struts}");
    let _ = writeln!(summary, "couplings={}", skin.lattice.couplings.len());
    let _ = writeln!(summary, "map_mse={:e}", skin.map_mse);
    run.write("summary.txt", &summary)?;
    print!("{summary}");
    Ok(())
}
