//! Structured parametric meshes, spline basis evaluation and quadrature.

mod basis;
mod mesh;
mod quadrature;

pub use basis::{cubic_bspline, element_basis, surface_point, BasisEvaluation};
pub use mesh::{build_structured_grid, Element, HoleRect, ParametricMesh};
pub use quadrature::{gauss_legendre, quadrature, QuadratureRule};
