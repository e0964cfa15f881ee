use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shellnrep_cli::config::Section;
use shellnrep_cli::{cmd_fit, cmd_gradcheck, cmd_lattice, cmd_optimize, CliError, Overrides, Run};

/// Thin-shell shape optimisation with neural surface representations.
#[derive(Parser)]
#[command(name = "shellnrep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a heightfield network to the cosine test surface.
    Fit(Common),
    /// Fit to the flat template, then minimise compliance.
    Optimize(Common),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(Common),
    /// Generate a lattice-skin from a saved network.
    Lattice(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Single-threaded, reproducible run.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (section, common) = match &cli.command {
        Command::Fit(c) => (Section::Fit, c),
        Command::Optimize(c) => (Section::Optimize, c),
        Command::Gradcheck(c) => (Section::Gradcheck, c),
        Command::Lattice(c) => (Section::Lattice, c),
    };
    match execute(section, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(section: Section, common: &Common) -> Result<(), CliError> {
    let overrides = Overrides {
        out: common.out.clone(),
        seed: common.seed,
        deterministic: common.deterministic,
    };
    let run = Run::load(&common.config, section, &overrides)?;
    let threads = if run.deterministic { Some(1) } else { common.threads };
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failure(e.to_string()))?;
    }
    match section {
        Section::Fit => cmd_fit(&run),
        Section::Optimize => cmd_optimize(&run),
        Section::Gradcheck => cmd_gradcheck(&run),
        Section::Lattice => cmd_lattice(&run),
    }
}
