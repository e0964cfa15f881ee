//! Surface metrics and linearised Kirchhoff–Love strain operators.
//!
//! All kernels are generic over the scalar type so that the same code runs
//! on plain `f64` and on dual numbers when geometric derivatives are needed.

use num_dual::DualNum;

use crate::error::{Error, Result};
use crate::geometry::BasisEvaluation;

/// Scalar type accepted by the element kernels.
pub trait Real: DualNum<Primitive = f64> + Copy {}
impl<T: DualNum<Primitive = f64> + Copy> Real for T {}

pub type Vec3<D> = [D; 3];

#[inline]
pub(crate) fn dot<D: Real>(a: &Vec3<D>, b: &Vec3<D>) -> D {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross<D: Real>(a: &Vec3<D>, b: &Vec3<D>) -> Vec3<D> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
fn lift<D: Real>(x: f64) -> D {
    D::from(x)
}

/// Geometry of the mid-surface at one point.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceMetrics<D = f64> {
    pub a1: Vec3<D>,
    pub a2: Vec3<D>,
    pub a3: Vec3<D>,
    pub sqrt_a: D,
    pub a1_con: Vec3<D>,
    pub a2_con: Vec3<D>,
    /// Contravariant metric `[a^11, a^22, a^12]`.
    pub metric_con: [D; 3],
    /// Second derivatives `[a_{1,1}, a_{2,2}, a_{1,2}]`.
    pub a_second: [Vec3<D>; 3],
}

/// Compute the metrics from basis data and the supporting vertex positions
/// (in the order of `basis.support`).
pub fn metrics_from_basis<D: Real>(
    basis: &BasisEvaluation,
    support_coords: &[Vec3<D>],
    element: usize,
) -> Result<SurfaceMetrics<D>> {
    let (a1, a2, a_second) = surface_vectors(basis, support_coords);
    metrics_from_vectors(a1, a2, a_second, element)
}

/// Tangents `a_1, a_2` and second derivatives `[a_{1,1}, a_{2,2}, a_{1,2}]`
/// interpolated from the supporting vertex positions.
#[allow(clippy::type_complexity)]
pub(crate) fn surface_vectors<D: Real>(
    basis: &BasisEvaluation,
    support_coords: &[Vec3<D>],
) -> (Vec3<D>, Vec3<D>, [Vec3<D>; 3]) {
    let zero = lift::<D>(0.0);
    let mut a1 = [zero; 3];
    let mut a2 = [zero; 3];
    let mut a_second = [[zero; 3]; 3];
    for (k, x) in support_coords.iter().enumerate() {
        let g = basis.d1[k];
        let h = basis.d2[k];
        for d in 0..3 {
            a1[d] += x[d] * g[0];
            a2[d] += x[d] * g[1];
            a_second[0][d] += x[d] * h[0];
            a_second[1][d] += x[d] * h[1];
            a_second[2][d] += x[d] * h[2];
        }
    }
    (a1, a2, a_second)
}

/// Metrics from the tangent and second-derivative vectors.
pub(crate) fn metrics_from_vectors<D: Real>(
    a1: Vec3<D>,
    a2: Vec3<D>,
    a_second: [Vec3<D>; 3],
    element: usize,
) -> Result<SurfaceMetrics<D>> {
    let zero = lift::<D>(0.0);
    let n = cross(&a1, &a2);
    let sqrt_a = dot(&n, &n).sqrt();
    let scale = (dot(&a1, &a1) * dot(&a2, &a2)).sqrt();
    if !(sqrt_a.re() > 1e-12 * scale.re()) || !sqrt_a.re().is_finite() {
        return Err(Error::SingularGeometry {
            element,
            sqrt_a: sqrt_a.re(),
        });
    }
    let inv = sqrt_a.recip();
    let a3 = [n[0] * inv, n[1] * inv, n[2] * inv];

    let g11 = dot(&a1, &a1);
    let g22 = dot(&a2, &a2);
    let g12 = dot(&a1, &a2);
    let det_inv = (g11 * g22 - g12 * g12).recip();
    let c11 = g22 * det_inv;
    let c22 = g11 * det_inv;
    let c12 = -g12 * det_inv;
    let mut a1_con = [zero; 3];
    let mut a2_con = [zero; 3];
    for d in 0..3 {
        a1_con[d] = a1[d] * c11 + a2[d] * c12;
        a2_con[d] = a1[d] * c12 + a2[d] * c22;
    }
    Ok(SurfaceMetrics {
        a1,
        a2,
        a3,
        sqrt_a,
        a1_con,
        a2_con,
        metric_con: [c11, c22, c12],
        a_second,
    })
}

/// Strain operator: for every nodal displacement component (columns ordered
/// vertex-major, `3 k + d`), the three Voigt strain components
/// `[e11, e22, 2 e12]` it produces.
#[derive(Debug, Clone)]
pub struct StrainOperator<D = f64> {
    pub columns: Vec<[D; 3]>,
}

impl<D: Real> StrainOperator<D> {
    pub fn n_dofs(&self) -> usize {
        self.columns.len()
    }

    /// Strain produced by the nodal displacement vector `u` (length `n_dofs`).
    pub fn apply(&self, u: &[f64]) -> [D; 3] {
        let zero = lift::<D>(0.0);
        let mut out = [zero; 3];
        for (c, col) in self.columns.iter().enumerate() {
            if u[c] != 0.0 {
                for r in 0..3 {
                    out[r] += col[r] * u[c];
                }
            }
        }
        out
    }
}

/// Linearised membrane strain `1/2 (a_a . u,b + u,a . a_b)`.
pub fn membrane_strain_operator<D: Real>(
    m: &SurfaceMetrics<D>,
    basis: &BasisEvaluation,
) -> StrainOperator<D> {
    let mut columns = Vec::with_capacity(3 * basis.len());
    for g in &basis.d1 {
        for d in 0..3 {
            columns.push([
                m.a1[d] * g[0],
                m.a2[d] * g[1],
                m.a1[d] * g[1] + m.a2[d] * g[0],
            ]);
        }
    }
    StrainOperator { columns }
}

/// Linearised bending strain, all three terms of the Kirchhoff–Love
/// curvature change including the `1/sqrt(a)` normal-variation terms.
pub fn bending_strain_operator<D: Real>(
    m: &SurfaceMetrics<D>,
    basis: &BasisEvaluation,
) -> StrainOperator<D> {
    let inv = m.sqrt_a.recip();
    // per curvature component (11, 22, 12)
    let mut t1 = [[lift::<D>(0.0); 3]; 3];
    let mut t2 = t1;
    let c23 = cross(&m.a2, &m.a3);
    let c31 = cross(&m.a3, &m.a1);
    for (c, aab) in m.a_second.iter().enumerate() {
        let x1 = cross(aab, &m.a2);
        let x2 = cross(&m.a1, aab);
        let proj = dot(&m.a3, aab) * inv;
        for d in 0..3 {
            t1[c][d] = x1[d] * inv + c23[d] * proj;
            t2[c][d] = x2[d] * inv + c31[d] * proj;
        }
    }
    let mut columns = Vec::with_capacity(3 * basis.len());
    for (g, h) in basis.d1.iter().zip(&basis.d2) {
        for d in 0..3 {
            let mut col = [lift::<D>(0.0); 3];
            for c in 0..3 {
                col[c] = m.a3[d] * (-h[c]) + t1[c][d] * g[0] + t2[c][d] * g[1];
            }
            // engineering twist
            col[2] = col[2] * 2.0;
            columns.push(col);
        }
    }
    StrainOperator { columns }
}

/// Strains of a given displacement field directly from its parametric
/// derivatives; cheaper than building the operators when only `u^T K u` is
/// needed.
pub(crate) struct DisplacementDerivatives {
    pub du: [Vec3<f64>; 2],
    pub ddu: [Vec3<f64>; 3],
}

impl DisplacementDerivatives {
    pub fn new(basis: &BasisEvaluation, u_support: &[Vec3<f64>]) -> Self {
        let mut du = [[0.0; 3]; 2];
        let mut ddu = [[0.0; 3]; 3];
        for (k, u) in u_support.iter().enumerate() {
            for d in 0..3 {
                du[0][d] += basis.d1[k][0] * u[d];
                du[1][d] += basis.d1[k][1] * u[d];
                for c in 0..3 {
                    ddu[c][d] += basis.d2[k][c] * u[d];
                }
            }
        }
        Self { du, ddu }
    }
}

fn dot_mixed<D: Real>(a: &Vec3<D>, b: &Vec3<f64>) -> D {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn membrane_strain_of<D: Real>(m: &SurfaceMetrics<D>, u: &DisplacementDerivatives) -> [D; 3] {
    [
        dot_mixed(&m.a1, &u.du[0]),
        dot_mixed(&m.a2, &u.du[1]),
        dot_mixed(&m.a1, &u.du[1]) + dot_mixed(&m.a2, &u.du[0]),
    ]
}

pub(crate) fn bending_strain_of<D: Real>(m: &SurfaceMetrics<D>, u: &DisplacementDerivatives) -> [D; 3] {
    let inv = m.sqrt_a.recip();
    let c23 = cross(&m.a2, &m.a3);
    let c31 = cross(&m.a3, &m.a1);
    let base = dot_mixed(&c23, &u.du[0]) + dot_mixed(&c31, &u.du[1]);
    let mut out = [lift::<D>(0.0); 3];
    for (c, aab) in m.a_second.iter().enumerate() {
        let x1 = cross(aab, &m.a2);
        let x2 = cross(&m.a1, aab);
        let proj = dot(&m.a3, aab) * inv;
        out[c] = -dot_mixed(&m.a3, &u.ddu[c])
            + (dot_mixed(&x1, &u.du[0]) + dot_mixed(&x2, &u.du[1])) * inv
            + proj * base;
    }
    out[2] = out[2] * 2.0;
    out
}

/// Isotropic material tensor in Voigt form for strains `[e11, e22, 2 e12]`,
/// expressed with the contravariant metric. Multiply by the membrane or
/// bending rigidity.
pub fn isotropic_tensor<D: Real>(metric_con: &[D; 3], poisson: f64) -> [[D; 3]; 3] {
    let [g11, g22, g12] = *metric_con;
    let nu = poisson;
    let h11 = g11 * g11;
    let h22 = g22 * g22;
    let h12 = g11 * g22 * nu + g12 * g12 * (1.0 - nu);
    let h13 = g11 * g12;
    let h23 = g22 * g12;
    let h33 = (g11 * g22 * (1.0 - nu) + g12 * g12 * (1.0 + nu)) * 0.5;
    [[h11, h12, h13], [h12, h22, h23], [h13, h23, h33]]
}

#[inline]
pub(crate) fn quadratic_form<D: Real>(h: &[[D; 3]; 3], e: &[D; 3]) -> D {
    let mut s = lift::<D>(0.0);
    for r in 0..3 {
        let mut row = lift::<D>(0.0);
        for c in 0..3 {
            row += h[r][c] * e[c];
        }
        s += row * e[r];
    }
    s
}
