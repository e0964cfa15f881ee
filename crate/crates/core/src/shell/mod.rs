//! Linear Kirchhoff–Love shell finite elements on the spline basis.
//!
//! Displacements use the same basis as the geometry. Every element couples
//! the 16 vertices of its support, three translations each.

mod element;
mod metrics;
mod model;
mod system;

pub use element::{element_strain_energy, element_stiffness, element_stiffness_parts, ElementStiffness};
pub(crate) use element::{energy_density, stiffness_kernel, ElementQuadrature};
pub(crate) use metrics::{metrics_from_vectors, surface_vectors, DisplacementDerivatives};
pub use metrics::{
    bending_strain_operator, isotropic_tensor, membrane_strain_operator, metrics_from_basis, Real,
    StrainOperator, SurfaceMetrics, Vec3,
};
pub use model::{Discretisation, LoadRegion, LoadSpec, Material, ShellModel};
pub use system::{
    area_and_volume, assemble_stiffness, compliance, element_stiffnesses, fixed_dofs, load_vector, solve,
    solve_prescribed, unconstrained_rigid_modes, Solution,
};

/// Surface metrics of `element` at local point `point`.
pub fn surface_metrics(model: &ShellModel, element: usize, point: [f64; 2]) -> crate::Result<SurfaceMetrics> {
    let b = crate::geometry::element_basis(model.mesh(), element, point);
    metrics_from_basis(&b, &model.element_coords(element), element)
}
