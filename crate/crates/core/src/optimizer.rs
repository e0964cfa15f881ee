//! Method of moving asymptotes for one inequality constraint.
//!
//! The problem is `min f(theta)` subject to `V(theta) <= v_max`. Each
//! iteration builds the usual separable convex approximation around the
//! current point and solves its dual by bisection on the single multiplier.

use std::io::Write;

use crate::error::{Error, Result};

/// Objective, volume and their gradients at one parameter vector.
#[derive(Debug, Clone)]
pub struct OptEvaluation {
    pub objective: f64,
    pub gradient: Vec<f64>,
    pub volume: f64,
    pub volume_gradient: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MmaSettings {
    pub asy_init: f64,
    pub asy_incr: f64,
    pub asy_decr: f64,
    pub albefa: f64,
    /// Closest and farthest asymptote distance, relative to the box width.
    pub asy_min: f64,
    pub asy_max: f64,
    /// Add a secant estimate of the objective's diagonal curvature to the
    /// approximation; without it the step does not shrink near an interior
    /// minimum.
    pub secant_curvature: bool,
    /// Penalty on the constraint slack; large enough to keep it at zero
    /// whenever the subproblem is feasible.
    pub slack_penalty: f64,
}

impl Default for MmaSettings {
    fn default() -> Self {
        Self {
            asy_init: 0.5,
            asy_incr: 1.2,
            asy_decr: 0.7,
            albefa: 0.1,
            asy_min: 1e-6,
            asy_max: 10.0,
            secant_curvature: true,
            slack_penalty: 1000.0,
        }
    }
}

const RAA0: f64 = 1e-5;

/// Asymptotes and the two previous iterates.
#[derive(Debug, Clone)]
pub struct MmaState {
    pub settings: MmaSettings,
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
    df_old: Vec<f64>,
    curvature: Vec<f64>,
    pub iteration: usize,
}

impl MmaState {
    pub fn new(n: usize, settings: MmaSettings) -> Self {
        Self {
            settings,
            low: vec![0.0; n],
            upp: vec![0.0; n],
            xold1: vec![0.0; n],
            xold2: vec![0.0; n],
            df_old: vec![0.0; n],
            curvature: vec![0.0; n],
            iteration: 0,
        }
    }
}

/// Bounds of the current step: global box and per-variable move limit.
#[derive(Debug, Clone)]
pub struct StepBounds<'a> {
    pub xmin: &'a [f64],
    pub xmax: &'a [f64],
    pub move_limit: &'a [f64],
}

/// One MMA update. `g <= 0` is the constraint value at `x`.
pub fn mma_step(
    state: &mut MmaState,
    x: &[f64],
    f: f64,
    df: &[f64],
    g: f64,
    dg: &[f64],
    bounds: &StepBounds<'_>,
) -> Result<Vec<f64>> {
    let n = x.len();
    for (len, context) in [
        (df.len(), "objective gradient"),
        (dg.len(), "constraint gradient"),
        (bounds.xmin.len(), "lower bounds"),
        (bounds.xmax.len(), "upper bounds"),
        (bounds.move_limit.len(), "move limits"),
        (state.low.len(), "optimiser state"),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
                context,
            });
        }
    }
    if !f.is_finite() || !g.is_finite() || df.iter().chain(dg).chain(x).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("optimiser input"));
    }
    let s = state.settings.clone();
    state.iteration += 1;
    let k = state.iteration;
    if s.secant_curvature && k > 1 {
        for j in 0..n {
            let dx = x[j] - state.xold1[j];
            if dx != 0.0 {
                let h = (df[j] - state.df_old[j]) / dx;
                state.curvature[j] = if h.is_finite() { h.max(0.0) } else { 0.0 };
            }
        }
    }
    for j in 0..n {
        let range = (bounds.xmax[j] - bounds.xmin[j]).max(1e-12);
        if k <= 2 {
            state.low[j] = x[j] - s.asy_init * range;
            state.upp[j] = x[j] + s.asy_init * range;
        } else {
            let osc = (x[j] - state.xold1[j]) * (state.xold1[j] - state.xold2[j]);
            let factor = if osc > 0.0 {
                s.asy_incr
            } else if osc < 0.0 {
                s.asy_decr
            } else {
                1.0
            };
            state.low[j] = x[j] - factor * (state.xold1[j] - state.low[j]);
            state.upp[j] = x[j] + factor * (state.upp[j] - state.xold1[j]);
            state.low[j] = state.low[j].clamp(x[j] - s.asy_max * range, x[j] - s.asy_min * range);
            state.upp[j] = state.upp[j].clamp(x[j] + s.asy_min * range, x[j] + s.asy_max * range);
        }
    }

    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut p0 = vec![0.0; n];
    let mut q0 = vec![0.0; n];
    let mut p1 = vec![0.0; n];
    let mut q1 = vec![0.0; n];
    let mut r1 = g;
    for j in 0..n {
        let (l, u) = (state.low[j], state.upp[j]);
        alpha[j] = bounds.xmin[j]
            .max(l + s.albefa * (x[j] - l))
            .max(x[j] - bounds.move_limit[j]);
        beta[j] = bounds.xmax[j]
            .min(u - s.albefa * (u - x[j]))
            .min(x[j] + bounds.move_limit[j]);
        if alpha[j] > beta[j] {
            // x outside the box: pin to the nearest feasible value
            let v = x[j].clamp(bounds.xmin[j], bounds.xmax[j]);
            alpha[j] = v;
            beta[j] = v;
        }
        let range = (bounds.xmax[j] - bounds.xmin[j]).max(1e-12);
        let (ux2, xl2) = ((u - x[j]).powi(2), (x[j] - l).powi(2));
        let reg = RAA0 / range;
        // matches the second derivative at x to the curvature estimate
        let curv = state.curvature[j] * (u - x[j]) * (x[j] - l) / (2.0 * (u - l));
        p0[j] = ux2 * (1.001 * df[j].max(0.0) + 0.001 * (-df[j]).max(0.0) + reg + curv);
        q0[j] = xl2 * (0.001 * df[j].max(0.0) + 1.001 * (-df[j]).max(0.0) + reg + curv);
        p1[j] = ux2 * (1.001 * dg[j].max(0.0) + 0.001 * (-dg[j]).max(0.0) + reg);
        q1[j] = xl2 * (0.001 * dg[j].max(0.0) + 1.001 * (-dg[j]).max(0.0) + reg);
        r1 -= p1[j] / (u - x[j]) + q1[j] / (x[j] - l);
    }

    let primal = |lam: f64| -> Vec<f64> {
        (0..n)
            .map(|j| {
                let pp = (p0[j] + lam * p1[j]).sqrt();
                let qq = (q0[j] + lam * q1[j]).sqrt();
                let xj = (pp * state.low[j] + qq * state.upp[j]) / (pp + qq);
                xj.clamp(alpha[j], beta[j])
            })
            .collect()
    };
    // derivative of the dual function: approximate constraint minus slack
    let dual_slope = |lam: f64| -> f64 {
        let xs = primal(lam);
        let mut gt = r1;
        for j in 0..n {
            gt += p1[j] / (state.upp[j] - xs[j]) + q1[j] / (xs[j] - state.low[j]);
        }
        gt - (lam - s.slack_penalty).max(0.0)
    };
    let lam = if dual_slope(0.0) <= 0.0 {
        0.0
    } else {
        let mut hi = 1.0;
        while dual_slope(hi) > 0.0 {
            hi *= 2.0;
            if hi > 1e15 {
                return Err(Error::OptimisationFailed("dual bracket not found".into()));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if dual_slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let next = primal(lam);
    state.xold2 = std::mem::replace(&mut state.xold1, x.to_vec());
    state.df_old.copy_from_slice(df);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
    LineFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iter",
            Termination::LineFailure => "line_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptRecord {
    pub iteration: usize,
    pub objective: f64,
    pub volume: f64,
    pub violation: f64,
    pub theta_norm: f64,
    pub step_norm: f64,
}

#[derive(Debug, Clone)]
pub struct OptHistory {
    pub records: Vec<OptRecord>,
    pub status: Termination,
    /// Diagnostic of the failure that stopped the run, if any.
    pub message: Option<String>,
}

impl OptHistory {
    /// CSV with header `iter,compliance,volume,violation,step_norm`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,compliance,volume,violation,step_norm")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.12e},{:.12e},{:.12e},{:.12e}",
                r.iteration, r.objective, r.volume, r.violation, r.step_norm
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OptSettings {
    pub max_iterations: usize,
    /// Relative objective change counted as stalled.
    pub rel_tol: f64,
    /// Consecutive stalled iterations needed to stop.
    pub patience: usize,
    /// Feasibility tolerance relative to `v_max`.
    pub feasibility_tol: f64,
    /// Minimise `ln f` instead of `f`; needs a positive objective.
    pub log_objective: bool,
    pub max_backtracks: usize,
    pub mma: MmaSettings,
}

impl Default for OptSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tol: 1e-4,
            patience: 5,
            feasibility_tol: 1e-6,
            log_objective: false,
            max_backtracks: 10,
            mma: MmaSettings::default(),
        }
    }
}

/// Box and move limits derived from the initial point: per-iteration move
/// `0.2 (range + 1)` and global bounds `theta0 +- width (range + 1)`, where
/// `range` is the spread of `theta0`.
pub fn default_bounds(theta0: &[f64], width: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (lo, hi) = theta0
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let scale = if theta0.is_empty() { 1.0 } else { hi - lo + 1.0 };
    (
        theta0.iter().map(|t| t - width * scale).collect(),
        theta0.iter().map(|t| t + width * scale).collect(),
        vec![0.2 * scale; theta0.len()],
    )
}

pub struct OptProblem<'a> {
    pub evaluate: Box<dyn Fn(&[f64]) -> Result<OptEvaluation> + 'a>,
    pub v_max: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub move_limit: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptOutcome {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub volume: f64,
    pub history: OptHistory,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Run MMA from `theta0` until the objective stalls at a feasible point or
/// the iteration budget runs out. Returns the best feasible iterate seen
/// (or the least infeasible one when none was feasible).
pub fn run(problem: &OptProblem<'_>, theta0: &[f64], settings: &OptSettings) -> Result<OptOutcome> {
    let n = theta0.len();
    if !(problem.v_max > 0.0) {
        return Err(Error::OptimisationFailed(format!("v_max must be positive, got {}", problem.v_max)));
    }
    if theta0.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("initial parameters"));
    }
    let check = |e: &OptEvaluation| -> Result<()> {
        if e.gradient.len() != n || e.volume_gradient.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: e.gradient.len().min(e.volume_gradient.len()),
                context: "evaluation gradients",
            });
        }
        if !e.objective.is_finite() || !e.volume.is_finite() || e.gradient.iter().chain(&e.volume_gradient).any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("objective evaluation"));
        }
        if settings.log_objective && !(e.objective > 0.0) {
            return Err(Error::OptimisationFailed(format!(
                "log objective needs positive values, got {}",
                e.objective
            )));
        }
        Ok(())
    };
    let eval = |t: &[f64]| -> Result<OptEvaluation> {
        let e = (problem.evaluate)(t)?;
        check(&e)?;
        Ok(e)
    };

    let vmax = problem.v_max;
    let violation = |v: f64| (v - vmax).max(0.0);
    let feasible = |v: f64| violation(v) <= settings.feasibility_tol * vmax;

    let mut theta = theta0.to_vec();
    let mut current = eval(&theta)?;
    let mut records = vec![OptRecord {
        iteration: 0,
        objective: current.objective,
        volume: current.volume,
        violation: violation(current.volume),
        theta_norm: norm(&theta),
        step_norm: 0.0,
    }];
    // (theta, objective, volume) of the best iterate
    let mut best = (theta.clone(), current.objective, current.volume);
    let better = |obj: f64, vol: f64, best: &(Vec<f64>, f64, f64)| match (feasible(vol), feasible(best.2)) {
        (true, false) => true,
        (true, true) => obj < best.1,
        (false, true) => false,
        (false, false) => violation(vol) < violation(best.2),
    };
    let mut state = MmaState::new(n, settings.mma.clone());
    let mut stalled = 0;
    let mut status = Termination::MaxIterations;
    let mut message = None;
    let bounds = StepBounds {
        xmin: &problem.lower,
        xmax: &problem.upper,
        move_limit: &problem.move_limit,
    };
    for it in 1..=settings.max_iterations {
        let (f, df): (f64, Vec<f64>) = if settings.log_objective {
            (current.objective.ln(), current.gradient.iter().map(|g| g / current.objective).collect())
        } else {
            (current.objective, current.gradient.clone())
        };
        let g = current.volume / vmax - 1.0;
        let dg: Vec<f64> = current.volume_gradient.iter().map(|d| d / vmax).collect();
        let proposal = mma_step(&mut state, &theta, f, &df, g, &dg, &bounds)?;

        let mut step: Vec<f64> = proposal.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let mut accepted = None;
        let mut last_err = None;
        for _ in 0..=settings.max_backtracks {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + s).collect();
            match eval(&trial) {
                Ok(e) => {
                    accepted = Some((trial, e));
                    break;
                }
                Err(err) => {
                    last_err = Some(err);
                    step.iter_mut().for_each(|s| *s *= 0.5);
                }
            }
        }
        let Some((next, e)) = accepted else {
            status = Termination::LineFailure;
            message = last_err.map(|e| e.to_string());
            break;
        };
        let step_norm = norm(&step);
        let rel = (e.objective - current.objective).abs() / current.objective.abs().max(1e-300);
        theta = next;
        current = e;
        records.push(OptRecord {
            iteration: it,
            objective: current.objective,
            volume: current.volume,
            violation: violation(current.volume),
            theta_norm: norm(&theta),
            step_norm,
        });
        if better(current.objective, current.volume, &best) {
            best = (theta.clone(), current.objective, current.volume);
        }
        if rel < settings.rel_tol && feasible(current.volume) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if stalled >= settings.patience {
            status = Termination::Converged;
            break;
        }
    }
    Ok(OptOutcome {
        theta: best.0,
        objective: best.1,
        volume: best.2,
        history: OptHistory {
            records,
            status,
            message,
        },
    })
}
