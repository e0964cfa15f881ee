use num_dual::DualStruct;

use super::metrics::{
    bending_strain_of, bending_strain_operator, isotropic_tensor, membrane_strain_of,
    membrane_strain_operator, metrics_from_basis, quadratic_form, DisplacementDerivatives, Real,
    StrainOperator, SurfaceMetrics, Vec3,
};
use super::model::{Material, ShellModel};
use crate::error::Result;
use crate::geometry::{element_basis, BasisEvaluation, QuadratureRule};

/// Dense symmetric element stiffness over the element's supporting dofs.
#[derive(Debug, Clone)]
pub struct ElementStiffness<D = f64> {
    /// Row-major `n x n` with `n = 3 * support.len()`.
    pub matrix: Vec<D>,
    /// Global dof index of each row/column (`3 * vertex + component`).
    pub dof_map: Vec<usize>,
}

impl<D: Copy> ElementStiffness<D> {
    pub fn size(&self) -> usize {
        self.dof_map.len()
    }

    pub fn get(&self, r: usize, c: usize) -> D {
        self.matrix[r * self.dof_map.len() + c]
    }
}

/// Integration data for one element: basis at the quadrature points,
/// quadrature weights already multiplied by the parametric element area.
pub(crate) struct ElementQuadrature<'a> {
    pub basis: &'a [BasisEvaluation],
    pub weights: Vec<f64>,
}

impl<'a> ElementQuadrature<'a> {
    pub fn cached(model: &'a ShellModel, element: usize) -> Self {
        let area = model.disc.element_param_area();
        Self {
            basis: model.disc.basis(element),
            weights: model.disc.rule.weights.iter().map(|w| w * area).collect(),
        }
    }
}

fn accumulate_btdb<D: Real>(k: &mut [D], op: &StrainOperator<D>, h: &[[D; 3]; 3], factor: D) {
    let n = op.n_dofs();
    // D * B, column by column
    let db: Vec<[D; 3]> = op
        .columns
        .iter()
        .map(|col| {
            let mut out = [D::from(0.0); 3];
            for r in 0..3 {
                out[r] = h[r][0] * col[0] + h[r][1] * col[1] + h[r][2] * col[2];
            }
            out
        })
        .collect();
    for i in 0..n {
        let bi = op.columns[i];
        for j in i..n {
            let v = (bi[0] * db[j][0] + bi[1] * db[j][1] + bi[2] * db[j][2]) * factor;
            k[i * n + j] += v;
        }
    }
}

fn symmetrise<D: Real>(k: &mut [D], n: usize) {
    for i in 0..n {
        for j in 0..i {
            k[i * n + j] = k[j * n + i];
        }
    }
}

/// Membrane and bending stiffness contributions, kept separate.
pub(crate) fn stiffness_kernel<D: Real>(
    quad: &ElementQuadrature<'_>,
    coords: &[Vec3<D>],
    material: &Material,
    thickness: f64,
    element: usize,
) -> Result<(Vec<D>, Vec<D>)> {
    let n = 3 * coords.len();
    let mut km = vec![D::from(0.0); n * n];
    let mut kb = vec![D::from(0.0); n * n];
    let cm = material.membrane_rigidity(thickness);
    let cb = material.bending_rigidity(thickness);
    for (basis, &w) in quad.basis.iter().zip(&quad.weights) {
        let m = metrics_from_basis(basis, coords, element)?;
        let h = isotropic_tensor(&m.metric_con, material.poisson);
        let jw = m.sqrt_a * w;
        accumulate_btdb(&mut km, &membrane_strain_operator(&m, basis), &h, jw * cm);
        accumulate_btdb(&mut kb, &bending_strain_operator(&m, basis), &h, jw * cb);
    }
    symmetrise(&mut km, n);
    symmetrise(&mut kb, n);
    Ok((km, kb))
}

/// `u_e^T K_e u_e` evaluated from the displacement derivatives at the
/// quadrature points.
pub(crate) fn energy_kernel<D: Real>(
    quad: &ElementQuadrature<'_>,
    coords: &[Vec3<D>],
    u_support: &[Vec3<f64>],
    material: &Material,
    thickness: f64,
    element: usize,
) -> Result<D> {
    let mut total = D::from(0.0);
    for (basis, &w) in quad.basis.iter().zip(&quad.weights) {
        let m = metrics_from_basis(basis, coords, element)?;
        let du = DisplacementDerivatives::new(basis, u_support);
        total += energy_density(&m, &du, material, thickness) * w;
    }
    Ok(total)
}

/// `u^T K u` per unit parametric area at one point, including `sqrt(a)`.
pub(crate) fn energy_density<D: Real>(
    m: &SurfaceMetrics<D>,
    du: &DisplacementDerivatives,
    material: &Material,
    thickness: f64,
) -> D {
    let cm = material.membrane_rigidity(thickness);
    let cb = material.bending_rigidity(thickness);
    let h = isotropic_tensor(&m.metric_con, material.poisson);
    let em = membrane_strain_of(m, du);
    let eb = bending_strain_of(m, du);
    (quadratic_form(&h, &em) * cm + quadratic_form(&h, &eb) * cb) * m.sqrt_a
}

/// Mid-surface area of one element.
pub(crate) fn area_kernel<D: Real>(
    quad: &ElementQuadrature<'_>,
    coords: &[Vec3<D>],
    element: usize,
) -> Result<D> {
    let mut area = D::from(0.0);
    for (basis, &w) in quad.basis.iter().zip(&quad.weights) {
        let m = metrics_from_basis(basis, coords, element)?;
        area += m.sqrt_a * w;
    }
    Ok(area)
}

fn dof_map(model: &ShellModel, element: usize) -> Vec<usize> {
    model
        .mesh()
        .element_support(element)
        .iter()
        .flat_map(|&v| [3 * v, 3 * v + 1, 3 * v + 2])
        .collect()
}

/// Element stiffness integrated with `rule` on the reference square.
pub fn element_stiffness(model: &ShellModel, element: usize, rule: &QuadratureRule) -> Result<ElementStiffness> {
    let basis: Vec<BasisEvaluation> = rule
        .points
        .iter()
        .map(|&p| element_basis(model.mesh(), element, p))
        .collect();
    let area = model.disc.element_param_area();
    let quad = ElementQuadrature {
        basis: &basis,
        weights: rule.weights.iter().map(|w| w * area).collect(),
    };
    let (km, kb) = stiffness_kernel(&quad, &model.element_coords(element), &model.material, model.thickness, element)?;
    Ok(ElementStiffness {
        matrix: km.iter().zip(&kb).map(|(a, b)| a + b).collect(),
        dof_map: dof_map(model, element),
    })
}

/// Element stiffness with the model's cached 3x3 rule.
pub(crate) fn element_stiffness_cached(model: &ShellModel, element: usize) -> Result<ElementStiffness> {
    let quad = ElementQuadrature::cached(model, element);
    let (km, kb) = stiffness_kernel(&quad, &model.element_coords(element), &model.material, model.thickness, element)?;
    Ok(ElementStiffness {
        matrix: km.iter().zip(&kb).map(|(a, b)| a + b).collect(),
        dof_map: dof_map(model, element),
    })
}

/// Membrane and bending parts of the element stiffness separately.
pub fn element_stiffness_parts(model: &ShellModel, element: usize) -> Result<(ElementStiffness, ElementStiffness)> {
    let quad = ElementQuadrature::cached(model, element);
    let (km, kb) = stiffness_kernel(&quad, &model.element_coords(element), &model.material, model.thickness, element)?;
    let map = dof_map(model, element);
    Ok((
        ElementStiffness {
            matrix: km,
            dof_map: map.clone(),
        },
        ElementStiffness { matrix: kb, dof_map: map },
    ))
}

/// Strain energy `1/2 u_e^T K_e u_e` of one element for global displacements `u`.
pub fn element_strain_energy(model: &ShellModel, element: usize, u: &[f64]) -> Result<f64> {
    let quad = ElementQuadrature::cached(model, element);
    let support = model.mesh().element_support(element);
    let us: Vec<[f64; 3]> = support.iter().map(|&v| [u[3 * v], u[3 * v + 1], u[3 * v + 2]]).collect();
    let e: f64 = energy_kernel(&quad, &model.element_coords(element), &us, &model.material, model.thickness, element)?;
    Ok(0.5 * e.re())
}
