use std::sync::{Arc, Mutex};

use super::system::ReducedPattern;
use crate::error::{Error, Result};
use crate::geometry::{element_basis, BasisEvaluation, ParametricMesh, QuadratureRule};

/// Mesh plus basis functions pre-evaluated at the quadrature points of every
/// element. Shared by all models built on the same parameterisation.
#[derive(Debug)]
pub struct Discretisation {
    pub mesh: ParametricMesh,
    pub rule: QuadratureRule,
    basis: Vec<Vec<BasisEvaluation>>,
    /// Reduced stiffness pattern of the most recent support set.
    pub(crate) pattern: Mutex<Option<Arc<ReducedPattern>>>,
}

impl Discretisation {
    pub fn new(mesh: ParametricMesh) -> Self {
        Self::with_rule(mesh, QuadratureRule::default_shell())
    }

    pub fn with_rule(mesh: ParametricMesh, rule: QuadratureRule) -> Self {
        let basis = (0..mesh.n_elements())
            .map(|e| rule.points.iter().map(|&p| element_basis(&mesh, e, p)).collect())
            .collect();
        Self {
            mesh,
            rule,
            basis,
            pattern: Mutex::new(None),
        }
    }

    /// Basis data of `element` at every quadrature point.
    pub fn basis(&self, element: usize) -> &[BasisEvaluation] {
        &self.basis[element]
    }

    /// Parametric area of one element, the Jacobian of the reference map.
    pub fn element_param_area(&self) -> f64 {
        let h = self.mesh.element_size();
        h[0] * h[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub youngs_modulus: f64,
    pub poisson: f64,
}

impl Material {
    pub fn membrane_rigidity(&self, thickness: f64) -> f64 {
        self.youngs_modulus * thickness / (1.0 - self.poisson * self.poisson)
    }

    pub fn bending_rigidity(&self, thickness: f64) -> f64 {
        self.youngs_modulus * thickness.powi(3) / (12.0 * (1.0 - self.poisson * self.poisson))
    }
}

/// Rectangle of the parameter square carrying a load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRegion {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub magnitude: f64,
}

/// Surface load per unit plan area, acting along the model's load direction.
/// Plan area is the parameter square scaled by the model's plan extents, so
/// the load vector does not change with the geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadSpec {
    Uniform { magnitude: f64 },
    Regions(Vec<LoadRegion>),
    /// The same point force on every vertex; independent of the plan area.
    PerVertex { magnitude: f64 },
}

impl LoadSpec {
    pub fn none() -> Self {
        LoadSpec::Uniform { magnitude: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct ShellModel {
    pub disc: Arc<Discretisation>,
    pub coords: Vec<[f64; 3]>,
    pub thickness: f64,
    pub material: Material,
    pub load: LoadSpec,
    /// Unit vector of the load direction; defaults to `-z`.
    pub load_direction: [f64; 3],
    /// Physical size of the plan rectangle the parameter square maps to.
    pub plan_extents: [f64; 2],
    /// Fixed translation flags per vertex.
    pub supports: Vec<[bool; 3]>,
}

impl ShellModel {
    /// Model with coordinates, material and plan extents; no load and no
    /// supports yet.
    pub fn new(
        disc: Arc<Discretisation>,
        coords: Vec<[f64; 3]>,
        thickness: f64,
        material: Material,
        plan_extents: [f64; 2],
    ) -> Self {
        let n = disc.mesh.n_vertices();
        Self {
            disc,
            coords,
            thickness,
            material,
            load: LoadSpec::none(),
            load_direction: [0.0, 0.0, -1.0],
            plan_extents,
            supports: vec![[false; 3]; n],
        }
    }

    /// Flat model `x = (Lx eta1, Ly eta2, 0)`.
    pub fn flat(disc: Arc<Discretisation>, plan_extents: [f64; 2], thickness: f64, material: Material) -> Self {
        let coords = disc
            .mesh
            .vertices()
            .iter()
            .map(|e| [plan_extents[0] * e[0], plan_extents[1] * e[1], 0.0])
            .collect();
        Self::new(disc, coords, thickness, material, plan_extents)
    }

    pub fn mesh(&self) -> &ParametricMesh {
        &self.disc.mesh
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.coords.len()
    }

    pub fn with_load(mut self, load: LoadSpec) -> Self {
        self.load = load;
        self
    }

    /// Fix all three translations of the given vertices.
    pub fn pin(&mut self, vertices: &[usize]) {
        for &v in vertices {
            self.supports[v] = [true; 3];
        }
    }

    /// Same model with different vertex positions.
    pub fn with_coords(&self, coords: Vec<[f64; 3]>) -> Self {
        Self {
            coords,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.len() != self.disc.mesh.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: self.disc.mesh.n_vertices(),
                got: self.coords.len(),
                context: "vertex coordinates",
            });
        }
        if self.supports.len() != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                got: self.supports.len(),
                context: "support flags",
            });
        }
        if !(self.thickness > 0.0) {
            return Err(Error::InvalidModel(format!("thickness must be positive, got {}", self.thickness)));
        }
        if !(self.material.youngs_modulus > 0.0) {
            return Err(Error::InvalidModel(format!(
                "Young's modulus must be positive, got {}",
                self.material.youngs_modulus
            )));
        }
        if !(0.0..0.5).contains(&self.material.poisson) {
            return Err(Error::InvalidModel(format!(
                "Poisson's ratio must lie in [0, 0.5), got {}",
                self.material.poisson
            )));
        }
        if self.coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("vertex coordinates"));
        }
        Ok(())
    }

    /// Support coordinates of an element, in `basis.support` order.
    pub(crate) fn element_coords(&self, element: usize) -> Vec<[f64; 3]> {
        self.disc
            .mesh
            .element_support(element)
            .iter()
            .map(|&v| self.coords[v])
            .collect()
    }
}
