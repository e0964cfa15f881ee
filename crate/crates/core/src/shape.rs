//! Compliance and volume of a shell whose vertices are placed by a network,
//! with gradients in the network parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nrep::{MlpNetwork, OutputMode};
use crate::optimizer::OptEvaluation;
use crate::sensitivity::{area_gradient_x, chain_to_theta, compliance_gradient_x, richardson_derivative, SensitivityBundle};
use crate::shell::{area_and_volume, solve, ShellModel, Solution};

/// A template model (mesh, material, load, supports) plus the network that
/// positions its vertices.
#[derive(Debug, Clone)]
pub struct ShapeProblem {
    pub template: ShellModel,
    pub network: MlpNetwork,
    /// Parametric vertex coordinates, two per vertex.
    inputs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ShapeEvaluation {
    pub compliance: f64,
    pub area: f64,
    pub volume: f64,
    pub solution: Solution,
    pub sensitivities: SensitivityBundle,
}

impl ShapeProblem {
    pub fn new(template: ShellModel, network: MlpNetwork) -> Result<Self> {
        if network.output_mode == OutputMode::Map3d {
            return Err(Error::InvalidNetwork("a shell surface needs a 2D-input network".into()));
        }
        if network.output_mode == OutputMode::Heightfield
            && (network.extents[0] != template.plan_extents[0] || network.extents[1] != template.plan_extents[1])
        {
            return Err(Error::InvalidNetwork(format!(
                "heightfield extents {:?} differ from plan extents {:?}",
                &network.extents[..2],
                template.plan_extents
            )));
        }
        template.validate()?;
        let inputs = template.mesh().vertices().iter().flatten().copied().collect();
        Ok(Self {
            template,
            network,
            inputs,
        })
    }

    pub fn n_params(&self) -> usize {
        self.network.count_params()
    }

    pub fn network_at(&self, theta: &[f64]) -> Result<MlpNetwork> {
        self.network.with_params(theta)
    }

    pub fn coords(&self, theta: &[f64]) -> Result<Vec<[f64; 3]>> {
        let coords = self.network_at(theta)?.physical_points(&self.inputs)?;
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("network vertex positions"));
        }
        Ok(coords)
    }

    pub fn model_at(&self, theta: &[f64]) -> Result<ShellModel> {
        Ok(self.template.with_coords(self.coords(theta)?))
    }

    /// Compliance and volume only.
    pub fn compliance_and_volume(&self, theta: &[f64]) -> Result<(f64, f64)> {
        let model = self.model_at(theta)?;
        let (_, volume) = area_and_volume(&model)?;
        Ok((solve(&model)?.compliance, volume))
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<ShapeEvaluation> {
        let net = self.network_at(theta)?;
        let model = self.template.with_coords(self.coords(theta)?);
        let (area, volume) = area_and_volume(&model)?;
        let solution = solve(&model)?;
        let dj_dx = compliance_gradient_x(&model, &solution)?;
        let da_dx = area_gradient_x(&model)?;
        let jac = net.jacobian_wrt_params(&self.inputs)?;
        let sensitivities = chain_to_theta(&dj_dx, &da_dx, model.thickness, &jac)?;
        Ok(ShapeEvaluation {
            compliance: solution.compliance,
            area,
            volume,
            solution,
            sensitivities,
        })
    }

    pub fn opt_evaluation(&self, theta: &[f64]) -> Result<OptEvaluation> {
        let e = self.evaluate(theta)?;
        Ok(OptEvaluation {
            objective: e.compliance,
            gradient: e.sensitivities.dj_dtheta,
            volume: e.volume,
            volume_gradient: e.sensitivities.dv_dtheta,
        })
    }
}

/// Analytic and finite-difference directional derivatives along one
/// direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionCheck {
    pub compliance_analytic: f64,
    pub compliance_fd: f64,
    pub volume_analytic: f64,
    pub volume_fd: f64,
}

fn rel_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs())
    }
}

impl DirectionCheck {
    pub fn compliance_error(&self) -> f64 {
        rel_error(self.compliance_analytic, self.compliance_fd)
    }

    pub fn volume_error(&self) -> f64 {
        rel_error(self.volume_analytic, self.volume_fd)
    }
}

/// Compare `dJ/dtheta . d` and `dV/dtheta . d` with Richardson-extrapolated
/// central differences of step `h` along `count` random unit directions.
/// `gradient_scale` multiplies the analytic gradients (1 for a real check).
pub fn check_directions(
    problem: &ShapeProblem,
    theta: &[f64],
    count: usize,
    seed: u64,
    h: f64,
    gradient_scale: f64,
) -> Result<Vec<DirectionCheck>> {
    let e = problem.evaluate(theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        let mut d: Vec<f64> = (0..theta.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.iter_mut().for_each(|x| *x /= n);
        let dot = |g: &[f64]| gradient_scale * g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>();
        let along = |which: usize| {
            let d = &d;
            move |s: f64| -> Result<f64> {
                let t: Vec<f64> = theta.iter().zip(d).map(|(t, d)| t + s * d).collect();
                let (c, v) = problem.compliance_and_volume(&t)?;
                Ok(if which == 0 { c } else { v })
            }
        };
        rows.push(DirectionCheck {
            compliance_analytic: dot(&e.sensitivities.dj_dtheta),
            compliance_fd: richardson_derivative(along(0), h)?,
            volume_analytic: dot(&e.sensitivities.dv_dtheta),
            volume_fd: richardson_derivative(along(1), h)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_structured_grid;
    use crate::nrep::ActivationSpec;
    use crate::sensitivity::richardson_derivative;
    use crate::shell::{Discretisation, LoadSpec, Material};
    use std::sync::Arc;

    fn problem() -> ShapeProblem {
        let disc = Arc::new(Discretisation::new(build_structured_grid(8, 2, &[]).unwrap()));
        let material = Material {
            youngs_modulus: 7e7,
            poisson: 0.35,
        };
        let mut model = ShellModel::flat(disc, [20.0, 1.0], 0.1, material).with_load(LoadSpec::Uniform { magnitude: 10.0 });
        let ends: Vec<usize> = (0..=2)
            .flat_map(|q| [model.mesh().vertex_at(0, q).unwrap(), model.mesh().vertex_at(8, q).unwrap()])
            .collect();
        model.pin(&ends);
        let net = MlpNetwork::new(
            vec![2, 4, 4, 1],
            vec![ActivationSpec::sinusoidal(1.0, std::f64::consts::FRAC_PI_4), ActivationSpec::tanh()],
            OutputMode::Heightfield,
            [20.0, 1.0, 0.0],
        )
        .unwrap();
        ShapeProblem::new(model, net).unwrap()
    }

    #[test]
    fn gradient_matches_richardson() {
        let p = problem();
        let mut theta = p.network.params().to_vec();
        let mut net = p.network.clone();
        net.init_params(3);
        theta.copy_from_slice(net.params());
        let e = p.evaluate(&theta).unwrap();
        assert!(e.compliance > 0.0);
        // Solve round-off sets an absolute floor on the finite differences.
        let floor_j = 0.1 * e.sensitivities.dj_dtheta.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let floor_v = 0.1 * e.sensitivities.dv_dtheta.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for j in [0, 7, theta.len() / 2, theta.len() - 1] {
            let f = |which: usize| {
                let theta = theta.clone();
                let p = &p;
                move |h: f64| {
                    let mut t = theta.clone();
                    t[j] += h;
                    let (c, v) = p.compliance_and_volume(&t)?;
                    Ok(if which == 0 { c } else { v })
                }
            };
            let dj = richardson_derivative(f(0), 1e-4).unwrap();
            let dv = richardson_derivative(f(1), 1e-4).unwrap();
            let (aj, av) = (e.sensitivities.dj_dtheta[j], e.sensitivities.dv_dtheta[j]);
            assert!((aj - dj).abs() <= 1e-5 * dj.abs().max(floor_j), "J param {j}: {aj} vs {dj}");
            assert!((av - dv).abs() <= 1e-5 * dv.abs().max(floor_v), "V param {j}: {av} vs {dv}");
        }
    }

    #[test]
    fn extents_must_match_plan() {
        let p = problem();
        let net = MlpNetwork::uniform(vec![2, 3, 1], ActivationSpec::tanh(), OutputMode::Heightfield, [10.0, 1.0, 0.0]).unwrap();
        assert!(ShapeProblem::new(p.template, net).is_err());
    }

    #[test]
    fn random_directions_agree() {
        let mut p = problem();
        p.network.init_params(5);
        let theta = p.network.params().to_vec();
        let rows = check_directions(&p, &theta, 4, 1, 1e-4, 1.0).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.compliance_error() < 1e-5, "{r:?}");
            assert!(r.volume_error() < 1e-6, "{r:?}");
        }
        let bad = check_directions(&p, &theta, 2, 1, 1e-4, 1.1).unwrap();
        assert!(bad.iter().all(|r| r.compliance_error() > 0.05));
    }
}
