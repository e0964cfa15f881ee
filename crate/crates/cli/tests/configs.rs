//! The shipped example configs parse, validate and agree with the presets.

use std::path::PathBuf;

use shellnrep::bench::{ExperimentSpec, FitStudyConfig, LoadConfig, RoofCase, StripVariant};
use shellnrep_cli::config::{RunConfig, Section};

fn load(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn optimize(name: &str) -> ExperimentSpec {
    let cfg = load(name);
    cfg.validate(Section::Optimize).unwrap();
    cfg.optimize.unwrap()
}

#[test]
fn strip_matches_preset() {
    let spec = optimize("strip.toml");
    let preset = ExperimentSpec::strip(StripVariant::PeriodicPeriodic, 0);
    assert_eq!(spec, ExperimentSpec { name: spec.name.clone(), ..preset });
}

#[test]
fn roof_matches_preset() {
    let spec = optimize("roof.toml");
    let preset = ExperimentSpec::roof(8, 0);
    assert_eq!(spec, ExperimentSpec { name: spec.name.clone(), ..preset });
}

#[test]
fn roof_opening_matches_robustness_case() {
    let mut spec = optimize("roof_opening.toml");
    let preset = ExperimentSpec::roof_case(RoofCase::RegionalOpeningCorners, 0);
    let (LoadConfig::Regions { regions: a, .. }, LoadConfig::Regions { regions: b, .. }) = (&spec.load, &preset.load) else {
        panic!("regional load expected");
    };
    let close = a.iter().flatten().flatten().zip(b.iter().flatten().flatten()).all(|(x, y)| (x - y).abs() < 1e-12);
    assert!(close && a.len() == b.len(), "{a:?} vs {b:?}");
    spec.load = preset.load.clone();
    assert_eq!(spec, ExperimentSpec { name: spec.name.clone(), ..preset });
}

#[test]
fn fit_matches_study_defaults() {
    let cfg = load("fit.toml");
    cfg.validate(Section::Fit).unwrap();
    let study = cfg.fit.unwrap().study(cfg.seed);
    assert_eq!(study.grid, 64);
    assert_eq!(study.hidden, FitStudyConfig::default().hidden);
    assert_eq!(study.training.epochs, FitStudyConfig::default().training.epochs);
    assert_eq!(study.training.learning_rate, 0.01);
}

#[test]
fn gradcheck_and_lattice_validate() {
    load("gradcheck.toml").validate(Section::Gradcheck).unwrap();
    let lattice = load("lattice.toml");
    lattice.validate(Section::Lattice).unwrap();
    let net = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(&lattice.lattice.unwrap().network);
    assert!(net.exists(), "{}", net.display());
}
