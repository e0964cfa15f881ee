//! Geometric sensitivities of compliance and volume.
//!
//! Derivatives with respect to vertex coordinates come from forward-mode
//! dual numbers pushed through the element kernels. They are then chained
//! with the network Jacobian to obtain derivatives with respect to the
//! network parameters.

use num_dual::Dual64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nrep::ParamJacobian;
use crate::shell::{
    energy_density, metrics_from_vectors, stiffness_kernel, surface_vectors, DisplacementDerivatives, ElementQuadrature,
    ElementStiffness, ShellModel, Solution, SurfaceMetrics,
};

#[derive(Debug, Clone)]
pub struct SensitivityBundle {
    /// `dJ/dx`, three entries per vertex.
    pub dj_dx: Vec<f64>,
    /// `dA/dx`, three entries per vertex.
    pub da_dx: Vec<f64>,
    pub dj_dtheta: Vec<f64>,
    pub dv_dtheta: Vec<f64>,
}

/// Element coordinates as dual numbers, seeding coordinate `component` of
/// support slot `slot`.
fn seeded(coords: &[[f64; 3]], slot: usize, component: usize) -> Vec<[Dual64; 3]> {
    coords
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut d = [Dual64::from(x[0]), Dual64::from(x[1]), Dual64::from(x[2])];
            if k == slot {
                d[component] = d[component].derivative();
            }
            d
        })
        .collect()
}

/// `dK_e / dx` for coordinate `component` of global vertex `vertex`. Zero
/// when the vertex does not support the element.
pub fn element_stiffness_derivative(
    model: &ShellModel,
    element: usize,
    vertex: usize,
    component: usize,
) -> Result<ElementStiffness> {
    if component > 2 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: component,
            context: "coordinate component",
        });
    }
    let support = model.mesh().element_support(element);
    let dof_map: Vec<usize> = support.iter().flat_map(|&v| [3 * v, 3 * v + 1, 3 * v + 2]).collect();
    let n = dof_map.len();
    let Some(slot) = support.iter().position(|&v| v == vertex) else {
        return Ok(ElementStiffness {
            matrix: vec![0.0; n * n],
            dof_map,
        });
    };
    let quad = ElementQuadrature::cached(model, element);
    let coords = seeded(&model.element_coords(element), slot, component);
    let (km, kb) = stiffness_kernel(&quad, &coords, &model.material, model.thickness, element)?;
    Ok(ElementStiffness {
        matrix: km.iter().zip(&kb).map(|(a, b)| (*a + *b).eps).collect(),
        dof_map,
    })
}

/// Gradient with respect to the support coordinates of one element of
/// `sum_q w_q phi_q(metrics)`. The metrics depend on the coordinates only
/// through `a_1, a_2, a_{1,1}, a_{2,2}, a_{1,2}`, so each quadrature point
/// needs fifteen dual evaluations of `phi`, which are then scattered with
/// the basis derivatives.
fn element_gradient<F>(model: &ShellModel, element: usize, mut density: F) -> Result<Vec<(usize, f64)>>
where
    F: FnMut(usize, &SurfaceMetrics<Dual64>) -> Dual64,
{
    let quad = ElementQuadrature::cached(model, element);
    let coords = model.element_coords(element);
    let support = model.mesh().element_support(element);
    let mut grad = vec![[0.0; 3]; support.len()];
    for (q, (basis, &w)) in quad.basis.iter().zip(&quad.weights).enumerate() {
        let (a1, a2, a_second) = surface_vectors(basis, &coords);
        let vectors = [a1, a2, a_second[0], a_second[1], a_second[2]];
        let mut g = [[0.0; 3]; 5];
        for v in 0..5 {
            for d in 0..3 {
                let mut dv = vectors.map(|x| x.map(Dual64::from));
                dv[v][d] = dv[v][d].derivative();
                let m = metrics_from_vectors(dv[0], dv[1], [dv[2], dv[3], dv[4]], element)?;
                g[v][d] = density(q, &m).eps * w;
            }
        }
        for (k, gk) in grad.iter_mut().enumerate() {
            let (n, h) = (basis.d1[k], basis.d2[k]);
            for d in 0..3 {
                gk[d] += g[0][d] * n[0] + g[1][d] * n[1] + g[2][d] * h[0] + g[3][d] * h[1] + g[4][d] * h[2];
            }
        }
    }
    Ok(support
        .iter()
        .zip(&grad)
        .flat_map(|(&v, g)| (0..3).map(move |d| (3 * v + d, g[d])))
        .collect())
}

fn gather(n: usize, parts: Vec<Vec<(usize, f64)>>) -> Vec<f64> {
    let mut g = vec![0.0; n];
    for part in parts {
        for (i, v) in part {
            g[i] += v;
        }
    }
    g
}

/// `dJ/dx_i = -sum_e u_e^T (dK_e/dx_i) u_e` for a load that does not depend
/// on the geometry.
pub fn compliance_gradient_x(model: &ShellModel, solution: &Solution) -> Result<Vec<f64>> {
    let n = model.n_dofs();
    if solution.displacements.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: solution.displacements.len(),
            context: "displacement vector",
        });
    }
    let u = &solution.displacements;
    let parts = (0..model.mesh().n_elements())
        .into_par_iter()
        .map(|e| {
            let us: Vec<[f64; 3]> = model
                .mesh()
                .element_support(e)
                .iter()
                .map(|&v| [u[3 * v], u[3 * v + 1], u[3 * v + 2]])
                .collect();
            if us.iter().flatten().all(|x| *x == 0.0) {
                return Ok(Vec::new());
            }
            let quad = ElementQuadrature::cached(model, e);
            let du: Vec<DisplacementDerivatives> = quad.basis.iter().map(|b| DisplacementDerivatives::new(b, &us)).collect();
            element_gradient(model, e, |q, m| -energy_density(m, &du[q], &model.material, model.thickness))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(gather(n, parts))
}

/// Gradient of the quadrature-evaluated mid-surface area.
pub fn area_gradient_x(model: &ShellModel) -> Result<Vec<f64>> {
    let parts = (0..model.mesh().n_elements())
        .into_par_iter()
        .map(|e| element_gradient(model, e, |_, m| m.sqrt_a))
        .collect::<Result<Vec<_>>>()?;
    Ok(gather(model.n_dofs(), parts))
}

/// Chain coordinate gradients through the network Jacobian. Only the
/// coordinate components listed in the Jacobian take part.
pub fn chain_to_theta(dj_dx: &[f64], da_dx: &[f64], thickness: f64, jacobian: &ParamJacobian) -> Result<SensitivityBundle> {
    let nc = jacobian.components.len();
    let n_points = jacobian.n_points();
    if nc == 0 || jacobian.rows != n_points * nc {
        return Err(Error::DimensionMismatch {
            expected: n_points * nc,
            got: jacobian.rows,
            context: "jacobian rows",
        });
    }
    for (len, context) in [(dj_dx.len(), "dJ/dx length"), (da_dx.len(), "dA/dx length")] {
        if len != 3 * n_points {
            return Err(Error::DimensionMismatch {
                expected: 3 * n_points,
                got: len,
                context,
            });
        }
    }
    let mut dj = vec![0.0; jacobian.cols];
    let mut da = vec![0.0; jacobian.cols];
    for p in 0..n_points {
        for (k, &c) in jacobian.components.iter().enumerate() {
            let (gj, ga) = (dj_dx[3 * p + c], da_dx[3 * p + c]);
            if gj == 0.0 && ga == 0.0 {
                continue;
            }
            for (j, &jv) in jacobian.row(p * nc + k).iter().enumerate() {
                dj[j] += gj * jv;
                da[j] += ga * jv;
            }
        }
    }
    Ok(SensitivityBundle {
        dj_dx: dj_dx.to_vec(),
        da_dx: da_dx.to_vec(),
        dj_dtheta: dj,
        dv_dtheta: da.iter().map(|a| a * thickness).collect(),
    })
}

/// Central difference with one Richardson extrapolation step:
/// `(4 D(h/2) - D(h)) / 3`.
pub fn richardson_derivative<F>(mut f: F, h: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut central = |h: f64| -> Result<f64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let d1 = central(h)?;
    let d2 = central(0.5 * h)?;
    Ok((4.0 * d2 - d1) / 3.0)
}
