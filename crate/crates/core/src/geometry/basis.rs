//! Uniform bicubic B-spline basis on structured grids.
//!
//! Element `(i, j)` is spanned by the 4x4 lattice block `i-1..=i+2` by
//! `j-1..=j+2`. Lattice positions that are not mesh vertices (outside the
//! grid or inside an opening) are linear extrapolations across the nearest
//! rim; folding them into the real vertices gives an interpolatory end
//! condition: the surface passes through the boundary vertex rows and the
//! basis is still a partition of unity that reproduces affine maps.

use super::mesh::{accumulate, ParametricMesh};

/// Basis functions of one element evaluated at one point. Derivatives are
/// taken with respect to the global parametric coordinates `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEvaluation {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
    /// `[dB/deta1, dB/deta2]`
    pub d1: Vec<[f64; 2]>,
    /// `[d2B/deta1^2, d2B/deta2^2, d2B/deta1 deta2]`
    pub d2: Vec<[f64; 3]>,
}

impl BasisEvaluation {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Interpolate vertex data `x` at the evaluation point.
    pub fn interpolate(&self, x: &[[f64; 3]]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, &v) in self.support.iter().enumerate() {
            for d in 0..3 {
                out[d] += self.values[k] * x[v][d];
            }
        }
        out
    }
}

/// Mapping from an element's 16 lattice slots to its supporting vertices.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    pub support: Vec<usize>,
    /// For each slot `a + 4 b`, pairs of (position in `support`, coefficient).
    pub slots: Vec<Vec<(usize, f64)>>,
}

pub(crate) fn build_stencil(mesh: &ParametricMesh, element: usize) -> Stencil {
    let (i, j) = mesh.elements()[element].grid;
    let mut support: Vec<usize> = Vec::with_capacity(16);
    let mut slots = Vec::with_capacity(16);
    for b in 0..4isize {
        for a in 0..4isize {
            let combo = mesh.resolve(i as isize - 1 + a, j as isize - 1 + b);
            let mut slot = Vec::new();
            for (v, c) in combo {
                if c == 0.0 {
                    continue;
                }
                let pos = match support.iter().position(|&s| s == v) {
                    Some(p) => p,
                    None => {
                        support.push(v);
                        support.len() - 1
                    }
                };
                accumulate(&mut slot, pos, c);
            }
            slots.push(slot);
        }
    }
    Stencil { support, slots }
}

/// Uniform cubic B-spline segment weights and their first and second
/// derivatives at local coordinate `t` in `[0, 1]`.
pub fn cubic_bspline(t: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
    let s = 1.0 - t;
    let t2 = t * t;
    let t3 = t2 * t;
    let n = [
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ];
    let dn = [
        -0.5 * s * s,
        1.5 * t2 - 2.0 * t,
        -1.5 * t2 + t + 0.5,
        0.5 * t2,
    ];
    let ddn = [s, 3.0 * t - 2.0, -3.0 * t + 1.0, t];
    (n, dn, ddn)
}

/// Evaluate the element's basis functions at local reference point `point`
/// in `[0, 1]^2`.
pub fn element_basis(mesh: &ParametricMesh, element: usize, point: [f64; 2]) -> BasisEvaluation {
    let stencil = mesh.stencil(element);
    evaluate_stencil(stencil, mesh.grid_dims(), point)
}

pub(crate) fn evaluate_stencil(
    stencil: &Stencil,
    (nx, ny): (usize, usize),
    point: [f64; 2],
) -> BasisEvaluation {
    let (nu, du, ddu) = cubic_bspline(point[0]);
    let (nv, dv, ddv) = cubic_bspline(point[1]);
    // chain rule from local element coordinates to eta
    let (sx, sy) = (nx as f64, ny as f64);
    let m = stencil.support.len();
    let mut values = vec![0.0; m];
    let mut d1 = vec![[0.0; 2]; m];
    let mut d2 = vec![[0.0; 3]; m];
    for b in 0..4 {
        for a in 0..4 {
            let slot = &stencil.slots[a + 4 * b];
            if slot.is_empty() {
                continue;
            }
            let val = nu[a] * nv[b];
            let g = [du[a] * nv[b] * sx, nu[a] * dv[b] * sy];
            let h = [
                ddu[a] * nv[b] * sx * sx,
                nu[a] * ddv[b] * sy * sy,
                du[a] * dv[b] * sx * sy,
            ];
            for &(k, c) in slot {
                values[k] += c * val;
                d1[k][0] += c * g[0];
                d1[k][1] += c * g[1];
                d2[k][0] += c * h[0];
                d2[k][1] += c * h[1];
                d2[k][2] += c * h[2];
            }
        }
    }
    BasisEvaluation {
        support: stencil.support.clone(),
        values,
        d1,
        d2,
    }
}

/// Point on the spline surface defined by vertex positions `coords`.
pub fn surface_point(
    mesh: &ParametricMesh,
    coords: &[[f64; 3]],
    element: usize,
    point: [f64; 2],
) -> [f64; 3] {
    element_basis(mesh, element, point).interpolate(coords)
}
