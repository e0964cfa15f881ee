//! Analytic catenary reference for the strip benchmark.

use crate::error::{Error, Result};
use crate::shell::ShellModel;

/// Catenary arch of span `L` and arc length `S`, with both ends at `z = 0`
/// and the rise pointing towards `+z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CatenaryReference {
    pub a: f64,
    pub span: f64,
    pub arc_length: f64,
    /// Equispaced samples `(x, z)` over `[0, L]`.
    pub points: Vec<[f64; 2]>,
}

fn arc_residual(a: f64, span: f64, arc_length: f64) -> f64 {
    2.0 * a * (span / (2.0 * a)).sinh() - arc_length
}

/// Solve `2 a sinh(L / 2a) = S` for `a` by bisection and sample the arch.
pub fn catenary_reference(span: f64, arc_length: f64, samples: usize) -> Result<CatenaryReference> {
    if !(span > 0.0 && span.is_finite() && arc_length.is_finite()) {
        return Err(Error::InvalidModel(format!("catenary span must be positive, got {span}")));
    }
    if arc_length <= span {
        return Err(Error::InvalidModel(format!(
            "no catenary of span {span} has arc length {arc_length}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidModel("a catenary needs at least two samples".into()));
    }
    // The residual decreases in `a`. Nearly flat curves need `a` beyond the
    // nominal bracket, so its upper end grows until it brackets the root.
    let mut lo = span / 100.0;
    let mut hi = 100.0 * span;
    while arc_residual(hi, span, arc_length) > 0.0 {
        lo = hi;
        hi *= 10.0;
        if !hi.is_finite() {
            return Err(Error::InvalidModel("catenary parameter overflow".into()));
        }
    }
    while arc_residual(lo, span, arc_length) < 0.0 {
        hi = lo;
        lo /= 10.0;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::InvalidModel("catenary parameter underflow".into()));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if arc_residual(mid, span, arc_length) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * lo {
            break;
        }
    }
    let a = 0.5 * (lo + hi);
    let mut r = CatenaryReference {
        a,
        span,
        arc_length,
        points: Vec::new(),
    };
    r.points = (0..samples)
        .map(|k| {
            let x = span * k as f64 / (samples - 1) as f64;
            [x, r.z_at(x)]
        })
        .collect();
    Ok(r)
}

impl CatenaryReference {
    /// Height of the arch at `x`, `a (cosh(L/2a) - cosh((x - L/2)/a))`,
    /// written as a product of sinh terms to avoid cancellation.
    pub fn z_at(&self, x: f64) -> f64 {
        let u = self.span / (2.0 * self.a);
        let v = (x - 0.5 * self.span) / self.a;
        2.0 * self.a * (0.5 * (u + v)).sinh() * (0.5 * (u - v)).sinh()
    }

    pub fn residual(&self) -> f64 {
        arc_residual(self.a, self.span, self.arc_length)
    }
}

/// Vertices on the centre line `eta2 = 1/2` of a strip; both middle rows
/// when the row count is odd.
pub fn centerline_vertices(model: &ShellModel) -> Vec<usize> {
    let mesh = model.mesh();
    let (nx, ny) = mesh.grid_dims();
    let rows = if ny % 2 == 0 { vec![ny / 2] } else { vec![ny / 2, ny / 2 + 1] };
    rows.iter()
        .flat_map(|&q| (0..=nx).filter_map(move |p| mesh.vertex_at(p, q)))
        .collect()
}

/// Mean squared vertical deviation of the centre line from the catenary,
/// evaluated at each vertex's `x`. Heights are measured from the chord
/// through the two end heights, and the catenary is mirrored when the shape
/// sags instead of rising.
pub fn mse_to_catenary(model: &ShellModel, reference: &CatenaryReference) -> f64 {
    let mesh = model.mesh();
    let (nx, _) = mesh.grid_dims();
    let line = centerline_vertices(model);
    let end = |p: usize| {
        let at: Vec<[f64; 3]> = line
            .iter()
            .filter(|&&v| mesh.vertex_grid(v).0 == p)
            .map(|&v| model.coords[v])
            .collect();
        let n = at.len() as f64;
        [at.iter().map(|x| x[0]).sum::<f64>() / n, at.iter().map(|x| x[2]).sum::<f64>() / n]
    };
    let (a, b) = (end(0), end(nx));
    let datum = |x: f64| a[1] + (b[1] - a[1]) * (x - a[0]) / (b[0] - a[0]);
    let rise: f64 = line
        .iter()
        .filter(|&&v| mesh.vertex_grid(v).0 == nx / 2)
        .map(|&v| model.coords[v][2] - datum(model.coords[v][0]))
        .sum();
    let sign = if rise < 0.0 { -1.0 } else { 1.0 };
    let sum: f64 = line
        .iter()
        .map(|&v| {
            let x = model.coords[v];
            (x[2] - datum(x[0]) - sign * reference.z_at(x[0])).powi(2)
        })
        .sum();
    sum / line.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_structured_grid;
    use crate::shell::{Discretisation, Material};
    use std::sync::Arc;

    fn strip() -> ShellModel {
        let disc = Arc::new(Discretisation::new(build_structured_grid(32, 2, &[]).unwrap()));
        let material = Material {
            youngs_modulus: 7e7,
            poisson: 0.35,
        };
        ShellModel::flat(disc, [20.0, 1.0], 0.1, material)
    }

    #[test]
    fn five_percent_arch() {
        let c = catenary_reference(20.0, 21.0, 11).unwrap();
        assert!(c.residual().abs() <= 1e-10);
        // Arc length of the analytic curve by dense polyline.
        let n = 200_000;
        let mut s = 0.0;
        let mut prev = [0.0, c.z_at(0.0)];
        for k in 1..=n {
            let x = 20.0 * k as f64 / n as f64;
            let z = c.z_at(x);
            s += ((x - prev[0]).powi(2) + (z - prev[1]).powi(2)).sqrt();
            prev = [x, z];
        }
        assert!((s - 21.0).abs() <= 1e-6, "{s}");
        for (p, q) in c.points.iter().zip(c.points.iter().rev()) {
            assert!((p[1] - q[1]).abs() <= 1e-12);
        }
        assert!(c.points[0][1].abs() <= 1e-12 && c.points[5][1] > 0.0);
    }

    #[test]
    fn nearly_flat_limit() {
        let c = catenary_reference(20.0, 20.0 * (1.0 + 1e-9), 101).unwrap();
        let max = c.points.iter().fold(0.0f64, |m, p| m.max(p[1].abs()));
        assert!(max <= 1e-3 * 20.0, "{max}");
    }

    #[test]
    fn rejects_short_arc() {
        assert!(catenary_reference(20.0, 20.0, 5).is_err());
        assert!(catenary_reference(20.0, 19.0, 5).is_err());
    }

    #[test]
    fn mse_of_flat_and_exact_strips() {
        let c = catenary_reference(20.0, 21.0, 33).unwrap();
        let mut m = strip();
        let line = centerline_vertices(&m);
        assert_eq!(line.len(), 33);
        let expected = line.iter().map(|&v| c.z_at(m.coords[v][0]).powi(2)).sum::<f64>() / 33.0;
        assert!((mse_to_catenary(&m, &c) - expected).abs() <= 1e-14 * expected);
        for x in m.coords.iter_mut() {
            x[2] = c.z_at(x[0]);
        }
        assert!(mse_to_catenary(&m, &c) <= 1e-24);
        // A hanging shape is compared with the mirrored arch, and a linear
        // trend between the supports is ignored.
        for x in m.coords.iter_mut() {
            x[2] = 3.0 - 0.1 * x[0] - x[2];
        }
        assert!(mse_to_catenary(&m, &c) <= 1e-24);
    }
}
