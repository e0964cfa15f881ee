use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationKind {
    Sinusoidal,
    Relu,
    Tanh,
    Identity,
}

/// Hidden-layer activation with its fixed period coefficient and phase.
/// `omega` and `delta` only matter for the sinusoidal kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default)]
    pub delta: f64,
}

fn one() -> f64 {
    1.0
}

impl ActivationSpec {
    pub fn sinusoidal(omega: f64, delta: f64) -> Self {
        Self {
            kind: ActivationKind::Sinusoidal,
            omega,
            delta,
        }
    }

    pub fn relu() -> Self {
        Self::plain(ActivationKind::Relu)
    }

    pub fn tanh() -> Self {
        Self::plain(ActivationKind::Tanh)
    }

    pub fn identity() -> Self {
        Self::plain(ActivationKind::Identity)
    }

    fn plain(kind: ActivationKind) -> Self {
        Self {
            kind,
            omega: 1.0,
            delta: 0.0,
        }
    }

    /// Value and derivative at pre-activation `c`.
    #[inline]
    pub fn eval(&self, c: f64) -> (f64, f64) {
        match self.kind {
            ActivationKind::Sinusoidal => {
                let (s, co) = (self.omega * c + self.delta).sin_cos();
                (s, self.omega * co)
            }
            ActivationKind::Relu => {
                if c > 0.0 {
                    (c, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            ActivationKind::Tanh => {
                let t = c.tanh();
                (t, 1.0 - t * t)
            }
            ActivationKind::Identity => (c, 1.0),
        }
    }
}

/// How network outputs become physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMode {
    /// `(Lx eta1, Ly eta2, N(eta))` with a scalar network output.
    Heightfield,
    /// `N(eta)` with three outputs.
    Surface3d,
    /// `N(xi)` from the unit cube to space.
    Map3d,
}

impl OutputMode {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            OutputMode::Heightfield => (2, 1),
            OutputMode::Surface3d => (2, 3),
            OutputMode::Map3d => (3, 3),
        }
    }

    /// Physical coordinate components driven by the network outputs.
    pub fn components(&self) -> &'static [usize] {
        match self {
            OutputMode::Heightfield => &[2],
            _ => &[0, 1, 2],
        }
    }
}

/// Derivatives of physical coordinates with respect to the flattened
/// parameters. Row `p * components.len() + k` is coordinate
/// `components[k]` of point `p`; rows are dense over all parameters.
#[derive(Debug, Clone)]
pub struct ParamJacobian {
    pub rows: usize,
    pub cols: usize,
    pub components: Vec<usize>,
    pub data: Vec<f64>,
}

impl ParamJacobian {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn n_points(&self) -> usize {
        self.rows / self.components.len()
    }
}

/// Multilayer perceptron with fixed activations and an affine output layer.
///
/// Parameters are flattened layer by layer: the weight matrix in row-major
/// order (`W[out][in]`) followed by the bias vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    activations: Vec<ActivationSpec>,
    params: Vec<f64>,
    pub output_mode: OutputMode,
    /// Physical domain extents; heightfield mode scales `eta` by the first two.
    pub extents: [f64; 3],
}

/// Intermediate values of one forward pass.
struct Trace {
    /// Post-activation values per layer, starting with the input.
    h: Vec<Vec<f64>>,
    /// Activation derivatives per hidden layer.
    dh: Vec<Vec<f64>>,
}

impl MlpNetwork {
    /// Network with zero parameters. `activations` has one entry per hidden
    /// layer.
    pub fn new(
        layer_sizes: Vec<usize>,
        activations: Vec<ActivationSpec>,
        output_mode: OutputMode,
        extents: [f64; 3],
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidNetwork(format!("bad layer sizes {layer_sizes:?}")));
        }
        if activations.len() != layer_sizes.len() - 2 {
            return Err(Error::InvalidNetwork(format!(
                "{} hidden layers but {} activations",
                layer_sizes.len() - 2,
                activations.len()
            )));
        }
        let (n_in, n_out) = output_mode.dims();
        if layer_sizes[0] != n_in || layer_sizes[layer_sizes.len() - 1] != n_out {
            return Err(Error::InvalidNetwork(format!(
                "{output_mode:?} needs {n_in} inputs and {n_out} outputs, got {layer_sizes:?}"
            )));
        }
        for a in &activations {
            if a.kind == ActivationKind::Sinusoidal && !(a.omega > 0.0) {
                return Err(Error::InvalidNetwork(format!("omega must be positive, got {}", a.omega)));
            }
            if !a.omega.is_finite() || !a.delta.is_finite() {
                return Err(Error::InvalidNetwork("non-finite activation constants".into()));
            }
        }
        if extents.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidNetwork("non-finite extents".into()));
        }
        let n = count_params(&layer_sizes);
        Ok(Self {
            layer_sizes,
            activations,
            params: vec![0.0; n],
            output_mode,
            extents,
        })
    }

    /// Same activation on every hidden layer.
    pub fn uniform(
        layer_sizes: Vec<usize>,
        activation: ActivationSpec,
        output_mode: OutputMode,
        extents: [f64; 3],
    ) -> Result<Self> {
        let hidden = layer_sizes.len().saturating_sub(2);
        Self::new(layer_sizes, vec![activation; hidden], output_mode, extents)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activations(&self) -> &[ActivationSpec] {
        &self.activations
    }

    pub fn count_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_outputs(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 1]
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
                context: "network parameters",
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    pub fn with_params(&self, params: &[f64]) -> Result<Self> {
        let mut n = self.clone();
        n.set_params(params)?;
        Ok(n)
    }

    /// Offset of layer `l`'s weights in the flattened vector; biases follow
    /// the weights.
    fn layer_offset(&self, l: usize) -> usize {
        count_params(&self.layer_sizes[..=l])
    }

    fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Random parameters: sinusoidal layers uniform in `+-sqrt(6/fan_in)/omega`,
    /// ReLU layers in `+-sqrt(6/fan_in)`, other layers in `+-sqrt(3/fan_in)`,
    /// biases in `+-1/sqrt(fan_in)`.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..self.n_layers() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let bound = self.weight_bound(l);
            let off = self.layer_offset(l);
            for i in 0..fan_in * fan_out {
                self.params[off + i] = rng.gen_range(-bound..=bound);
            }
            let bb = 1.0 / (fan_in as f64).sqrt();
            for i in 0..fan_out {
                self.params[off + fan_in * fan_out + i] = rng.gen_range(-bb..=bb);
            }
        }
    }

    /// Initialisation bound of the weights of layer `l`.
    pub fn weight_bound(&self, l: usize) -> f64 {
        let fan_in = self.layer_sizes[l] as f64;
        match self.activations.get(l) {
            Some(a) if a.kind == ActivationKind::Sinusoidal => (6.0 / fan_in).sqrt() / a.omega,
            Some(a) if a.kind == ActivationKind::Relu => (6.0 / fan_in).sqrt(),
            _ => (3.0 / fan_in).sqrt(),
        }
    }

    fn trace(&self, input: &[f64]) -> Trace {
        let nl = self.n_layers();
        let mut h = Vec::with_capacity(nl + 1);
        let mut dh = Vec::with_capacity(nl - 1);
        h.push(input.to_vec());
        for l in 0..nl {
            let (fi, fo) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = self.layer_offset(l);
            let w = &self.params[off..off + fi * fo];
            let b = &self.params[off + fi * fo..off + fi * fo + fo];
            let prev = &h[l];
            let mut c: Vec<f64> = (0..fo)
                .map(|o| b[o] + w[o * fi..(o + 1) * fi].iter().zip(prev).map(|(a, x)| a * x).sum::<f64>())
                .collect();
            if l + 1 < nl {
                let act = self.activations[l];
                let mut d = vec![0.0; fo];
                for (ci, di) in c.iter_mut().zip(d.iter_mut()) {
                    let (v, dv) = act.eval(*ci);
                    *ci = v;
                    *di = dv;
                }
                dh.push(d);
            }
            h.push(c);
        }
        Trace { h, dh }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                got: input.len(),
                context: "network input",
            });
        }
        Ok(())
    }

    /// Raw network outputs for one input.
    pub fn evaluate(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        Ok(self.trace(input).h.pop().unwrap_or_default())
    }

    /// Raw outputs for a batch stored input-major (`n_inputs` values per point).
    pub fn forward(&self, inputs: &[f64]) -> Result<Vec<f64>> {
        let n_in = self.n_inputs();
        if inputs.len() % n_in != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_in,
                got: inputs.len() % n_in,
                context: "batch of network inputs",
            });
        }
        let mut out = Vec::with_capacity(inputs.len() / n_in * self.n_outputs());
        for x in inputs.chunks(n_in) {
            out.extend(self.trace(x).h.pop().unwrap_or_default());
        }
        Ok(out)
    }

    /// Physical coordinates of the given network inputs.
    pub fn physical_points(&self, inputs: &[f64]) -> Result<Vec<[f64; 3]>> {
        let raw = self.forward(inputs)?;
        let n_in = self.n_inputs();
        Ok(match self.output_mode {
            OutputMode::Heightfield => inputs
                .chunks(n_in)
                .zip(&raw)
                .map(|(e, z)| [self.extents[0] * e[0], self.extents[1] * e[1], *z])
                .collect(),
            _ => raw.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    }

    /// Physical coordinates at parametric points of a surface network.
    pub fn surface_points(&self, eta: &[[f64; 2]]) -> Result<Vec<[f64; 3]>> {
        let flat: Vec<f64> = eta.iter().flatten().copied().collect();
        self.physical_points(&flat)
    }

    /// Gradient of every raw output for one input: `grads[k]` has
    /// `d out_k / d theta` over all parameters.
    pub fn output_gradients(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(input)?;
        let tr = self.trace(input);
        Ok((0..self.n_outputs())
            .map(|k| {
                let mut seed = vec![0.0; self.n_outputs()];
                seed[k] = 1.0;
                let mut g = vec![0.0; self.params.len()];
                self.backward(&tr, seed, &mut g);
                g
            })
            .collect())
    }

    /// Accumulate `d (seed . out) / d theta` into `grad`.
    fn backward(&self, tr: &Trace, mut delta: Vec<f64>, grad: &mut [f64]) {
        for l in (0..self.n_layers()).rev() {
            let (fi, fo) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let off = self.layer_offset(l);
            let prev = &tr.h[l];
            for o in 0..fo {
                let d = delta[o];
                if d != 0.0 {
                    let row = &mut grad[off + o * fi..off + (o + 1) * fi];
                    for (g, x) in row.iter_mut().zip(prev) {
                        *g += d * x;
                    }
                }
                grad[off + fi * fo + o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + fi * fo];
            let dact = &tr.dh[l - 1];
            let mut next = vec![0.0; fi];
            for o in 0..fo {
                let d = delta[o];
                if d != 0.0 {
                    for (n, a) in next.iter_mut().zip(&w[o * fi..(o + 1) * fi]) {
                        *n += d * a;
                    }
                }
            }
            for (n, da) in next.iter_mut().zip(dact) {
                *n *= da;
            }
            delta = next;
        }
    }

    /// Jacobian of the physical coordinates at a batch of inputs with respect
    /// to the parameters. Heightfield networks only contribute z rows.
    pub fn jacobian_wrt_params(&self, inputs: &[f64]) -> Result<ParamJacobian> {
        let n_in = self.n_inputs();
        if inputs.len() % n_in != 0 {
            return Err(Error::DimensionMismatch {
                expected: n_in,
                got: inputs.len() % n_in,
                context: "batch of network inputs",
            });
        }
        let comps = self.output_mode.components().to_vec();
        let cols = self.params.len();
        let mut data = Vec::with_capacity(inputs.len() / n_in * comps.len() * cols);
        for x in inputs.chunks(n_in) {
            for g in self.output_gradients(x)? {
                data.extend(g);
            }
        }
        Ok(ParamJacobian {
            rows: data.len() / cols,
            cols,
            components: comps,
            data,
        })
    }

    /// Mean squared error over all raw outputs and its parameter gradient.
    pub fn mse_and_gradient(&self, inputs: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n_in = self.n_inputs();
        let n_out = self.n_outputs();
        let n = inputs.len() / n_in;
        if inputs.len() != n * n_in || targets.len() != n * n_out {
            return Err(Error::DimensionMismatch {
                expected: n * n_out,
                got: targets.len(),
                context: "training targets",
            });
        }
        let scale = 1.0 / (n * n_out).max(1) as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for (x, t) in inputs.chunks(n_in).zip(targets.chunks(n_out)) {
            let tr = self.trace(x);
            let out = &tr.h[tr.h.len() - 1];
            let seed: Vec<f64> = out.iter().zip(t).map(|(o, t)| 2.0 * (o - t) * scale).collect();
            loss += out.iter().zip(t).map(|(o, t)| (o - t).powi(2)).sum::<f64>();
            self.backward(&tr, seed, &mut grad);
        }
        Ok((loss * scale, grad))
    }

    pub fn mse(&self, inputs: &[f64], targets: &[f64]) -> Result<f64> {
        let out = self.forward(inputs)?;
        if out.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                got: targets.len(),
                context: "training targets",
            });
        }
        Ok(out.iter().zip(targets).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / out.len().max(1) as f64)
    }
}

/// `sum_i (fan_in_i * fan_out_i + fan_out_i)` over consecutive layer pairs.
pub fn count_params(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}
