use serde::{Deserialize, Serialize};

use super::network::MlpNetwork;
use crate::error::{Error, Result};

/// Full-batch Adam on the mean squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Seed for parameter initialisation when the caller asks for it.
    pub seed: u64,
    /// Stop early once the loss drops to this value.
    pub target_mse: Option<f64>,
    /// Record the loss every this many epochs (0 disables the trace).
    pub report_every: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 2000,
            learning_rate: 0.01,
            seed: 0,
            target_mse: None,
            report_every: 100,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidNetwork("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidNetwork(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub network: MlpNetwork,
    pub mse: f64,
    pub epochs_run: usize,
    /// `(epoch, mse)` samples taken every `report_every` epochs and at the end.
    pub history: Vec<(usize, f64)>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

/// Layer-wise batched buffers; avoids per-point allocation in the hot loop.
struct Workspace {
    /// Activations per layer, `n x width`, input first.
    h: Vec<Vec<f64>>,
    /// Activation derivatives of hidden layers.
    dh: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

fn forward_batch(net: &MlpNetwork, ws: &mut Workspace, n: usize) {
    let sizes = net.layer_sizes();
    let nl = sizes.len() - 1;
    let params = net.params();
    let mut off = 0;
    for l in 0..nl {
        let (fi, fo) = (sizes[l], sizes[l + 1]);
        let w = &params[off..off + fi * fo];
        let b = &params[off + fi * fo..off + fi * fo + fo];
        off += fi * fo + fo;
        let (before, after) = ws.h.split_at_mut(l + 1);
        let prev = &before[l];
        let cur = &mut after[0];
        for p in 0..n {
            let x = &prev[p * fi..(p + 1) * fi];
            for o in 0..fo {
                let row = &w[o * fi..(o + 1) * fi];
                let mut c = b[o];
                for k in 0..fi {
                    c += row[k] * x[k];
                }
                cur[p * fo + o] = c;
            }
        }
        if l + 1 < nl {
            let act = net.activations()[l];
            let d = &mut ws.dh[l];
            for (c, dc) in cur.iter_mut().zip(d.iter_mut()) {
                let (v, dv) = act.eval(*c);
                *c = v;
                *dc = dv;
            }
        }
    }
}

/// Loss and gradient for the batch already in `ws.h[0]`.
fn loss_and_gradient(net: &MlpNetwork, ws: &mut Workspace, targets: &[f64], n: usize, grad: &mut [f64]) -> f64 {
    forward_batch(net, ws, n);
    let sizes = net.layer_sizes();
    let nl = sizes.len() - 1;
    let n_out = sizes[nl];
    let scale = 1.0 / (n * n_out) as f64;
    let out = &ws.h[nl];
    let mut loss = 0.0;
    {
        let d = &mut ws.delta[nl - 1];
        for i in 0..n * n_out {
            let r = out[i] - targets[i];
            loss += r * r;
            d[i] = 2.0 * r * scale;
        }
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    let params = net.params();
    let offsets: Vec<usize> = (0..nl).map(|l| super::count_params(&sizes[..=l])).collect();
    for l in (0..nl).rev() {
        let (fi, fo) = (sizes[l], sizes[l + 1]);
        let off = offsets[l];
        let prev = &ws.h[l];
        {
            let delta = &ws.delta[l];
            let (gw, gb) = grad[off..off + fi * fo + fo].split_at_mut(fi * fo);
            for p in 0..n {
                let d = &delta[p * fo..(p + 1) * fo];
                let x = &prev[p * fi..(p + 1) * fi];
                for o in 0..fo {
                    let dv = d[o];
                    gb[o] += dv;
                    let row = &mut gw[o * fi..(o + 1) * fi];
                    for k in 0..fi {
                        row[k] += dv * x[k];
                    }
                }
            }
        }
        if l == 0 {
            break;
        }
        let w = &params[off..off + fi * fo];
        let (lower, upper) = ws.delta.split_at_mut(l);
        let next = &mut lower[l - 1];
        let delta = &upper[0];
        let dact = &ws.dh[l - 1];
        for p in 0..n {
            let d = &delta[p * fo..(p + 1) * fo];
            let nx = &mut next[p * fi..(p + 1) * fi];
            nx.iter_mut().for_each(|v| *v = 0.0);
            for o in 0..fo {
                let dv = d[o];
                let row = &w[o * fi..(o + 1) * fi];
                for k in 0..fi {
                    nx[k] += dv * row[k];
                }
            }
            for k in 0..fi {
                nx[k] *= dact[p * fi + k];
            }
        }
    }
    loss * scale
}

/// Train `net` on `(inputs, targets)`, both stored point-major. Targets are
/// raw network outputs (heights for a heightfield network).
pub fn fit(net: &MlpNetwork, inputs: &[f64], targets: &[f64], config: &TrainingConfig) -> Result<FitResult> {
    config.validate()?;
    let sizes = net.layer_sizes().to_vec();
    let (n_in, n_out) = (sizes[0], sizes[sizes.len() - 1]);
    let n = inputs.len() / n_in;
    if n == 0 || inputs.len() != n * n_in {
        return Err(Error::DimensionMismatch {
            expected: n_in,
            got: inputs.len(),
            context: "training inputs",
        });
    }
    if targets.len() != n * n_out {
        return Err(Error::DimensionMismatch {
            expected: n * n_out,
            got: targets.len(),
            context: "training targets",
        });
    }
    let mut ws = Workspace {
        h: sizes.iter().map(|&s| vec![0.0; n * s]).collect(),
        dh: sizes[1..sizes.len() - 1].iter().map(|&s| vec![0.0; n * s]).collect(),
        delta: sizes[1..].iter().map(|&s| vec![0.0; n * s]).collect(),
    };
    ws.h[0].copy_from_slice(inputs);

    let mut net = net.clone();
    let np = net.count_params();
    let mut theta = net.params().to_vec();
    let mut grad = vec![0.0; np];
    let mut m = vec![0.0; np];
    let mut v = vec![0.0; np];
    let mut history = Vec::new();
    let mut last_finite = f64::NAN;
    let mut loss = f64::NAN;
    let mut epochs_run = 0;
    for epoch in 0..config.epochs {
        net.set_params(&theta)?;
        loss = loss_and_gradient(&net, &mut ws, targets, n, &mut grad);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss,
                last_finite,
            });
        }
        last_finite = loss;
        if config.report_every > 0 && epoch % config.report_every == 0 {
            history.push((epoch, loss));
        }
        if config.target_mse.is_some_and(|t| loss <= t) {
            break;
        }
        let t = (epoch + 1) as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        for i in 0..np {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            theta[i] -= config.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + EPSILON);
        }
        epochs_run = epoch + 1;
    }
    net.set_params(&theta)?;
    // loss of the returned parameters
    let final_mse = if epochs_run == 0 { loss } else { net.mse(inputs, targets)? };
    if !final_mse.is_finite() {
        return Err(Error::Diverged {
            epoch: epochs_run,
            loss: final_mse,
            last_finite,
        });
    }
    if config.report_every > 0 {
        history.push((epochs_run, final_mse));
    }
    Ok(FitResult {
        network: net,
        mse: final_mse,
        epochs_run,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nrep::{ActivationSpec, OutputMode};
    use std::f64::consts::FRAC_PI_4;

    fn grid(n: usize) -> Vec<f64> {
        let mut v = Vec::new();
        for j in 0..=n {
            for i in 0..=n {
                v.extend([i as f64 / n as f64, j as f64 / n as f64]);
            }
        }
        v
    }

    #[test]
    fn batched_gradient_matches_pointwise() {
        let mut net =
            MlpNetwork::uniform(vec![2, 6, 5, 1], ActivationSpec::sinusoidal(1.0, FRAC_PI_4), OutputMode::Heightfield, [1.0; 3])
                .unwrap();
        net.init_params(9);
        let x = grid(4);
        let t: Vec<f64> = x.chunks(2).map(|p| (p[0] * 3.0).sin() * p[1]).collect();
        let (l_ref, g_ref) = net.mse_and_gradient(&x, &t).unwrap();
        let sizes = net.layer_sizes().to_vec();
        let n = t.len();
        let mut ws = Workspace {
            h: sizes.iter().map(|&s| vec![0.0; n * s]).collect(),
            dh: sizes[1..sizes.len() - 1].iter().map(|&s| vec![0.0; n * s]).collect(),
            delta: sizes[1..].iter().map(|&s| vec![0.0; n * s]).collect(),
        };
        ws.h[0].copy_from_slice(&x);
        let mut g = vec![0.0; net.count_params()];
        let l = loss_and_gradient(&net, &mut ws, &t, n, &mut g);
        assert!((l - l_ref).abs() <= 1e-14 * l_ref);
        for (a, b) in g.iter().zip(&g_ref) {
            assert!((a - b).abs() <= 1e-13 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let mut net = MlpNetwork::uniform(vec![2, 5, 1], ActivationSpec::sinusoidal(1.0, 0.0), OutputMode::Heightfield, [1.0; 3])
            .unwrap();
        net.init_params(1);
        let x = grid(3);
        let t = net.forward(&x).unwrap();
        let cfg = TrainingConfig {
            epochs: 1,
            learning_rate: 0.0,
            ..Default::default()
        };
        let r = fit(&net, &x, &t, &cfg).unwrap();
        assert_eq!(r.network.params(), net.params());
        assert!(r.mse < 1e-30);
    }

    #[test]
    fn fits_flat_target() {
        let mut net =
            MlpNetwork::uniform(vec![2, 5, 5, 1], ActivationSpec::sinusoidal(1.0, FRAC_PI_4), OutputMode::Heightfield, [1.0; 3])
                .unwrap();
        net.init_params(4);
        let x = grid(8);
        let t = vec![0.0; x.len() / 2];
        let cfg = TrainingConfig {
            epochs: 2000,
            ..Default::default()
        };
        let r = fit(&net, &x, &t, &cfg).unwrap();
        assert!(r.mse <= 1e-6, "mse {}", r.mse);
    }

    #[test]
    fn divergence_is_reported() {
        let mut net = MlpNetwork::uniform(vec![2, 3, 1], ActivationSpec::identity(), OutputMode::Heightfield, [1.0; 3]).unwrap();
        net.init_params(0);
        let x = grid(2);
        let t = vec![f64::INFINITY; x.len() / 2];
        match fit(&net, &x, &t, &TrainingConfig::default()) {
            Err(Error::Diverged { epoch, .. }) => assert_eq!(epoch, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn early_stop_at_target() {
        let mut net = MlpNetwork::uniform(vec![2, 4, 1], ActivationSpec::tanh(), OutputMode::Heightfield, [1.0; 3]).unwrap();
        net.init_params(2);
        let x = grid(4);
        let t = vec![0.0; x.len() / 2];
        let cfg = TrainingConfig {
            epochs: 50_000,
            target_mse: Some(1e-4),
            ..Default::default()
        };
        let r = fit(&net, &x, &t, &cfg).unwrap();
        assert!(r.epochs_run < 50_000 && r.mse <= 1e-4);
    }
}
