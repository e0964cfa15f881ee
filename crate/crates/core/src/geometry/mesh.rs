//! Structured quadrilateral parameterisations with optional rectangular openings.
//!
//! Vertices live on an `(nx + 1) x (ny + 1)` lattice in the unit parameter
//! square. An opening removes a rectangular block of elements together with
//! the vertices strictly inside it; the vertices on its rim are kept and
//! marked as boundary vertices.

use super::basis::{build_stencil, Stencil};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Rectangular block of removed elements, as half-open element index ranges
/// `[i0, i1) x [j0, j1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoleRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl HoleRect {
    pub fn new(i0: usize, i1: usize, j0: usize, j1: usize) -> Self {
        Self { i0, i1, j0, j1 }
    }

    pub fn contains_element(&self, i: usize, j: usize) -> bool {
        (self.i0..self.i1).contains(&i) && (self.j0..self.j1).contains(&j)
    }

    /// Grid vertex strictly inside the opening (removed from the mesh).
    pub fn contains_vertex_strictly(&self, p: isize, q: isize) -> bool {
        p > self.i0 as isize && p < self.i1 as isize && q > self.j0 as isize && q < self.j1 as isize
    }

    fn on_rim(&self, p: usize, q: usize) -> bool {
        let in_i = (self.i0..=self.i1).contains(&p);
        let in_j = (self.j0..=self.j1).contains(&q);
        in_i && in_j && !self.contains_vertex_strictly(p as isize, q as isize)
    }
}

/// Quad element of the structured grid; `vertices` are counter-clockwise
/// starting at the lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    pub grid: (usize, usize),
    pub vertices: [usize; 4],
}

/// A grid vertex expressed as a linear combination of mesh vertices.
///
/// Lattice positions outside the grid or inside an opening do not exist as
/// mesh vertices; the spline evaluation uses linear extrapolations of the
/// neighbouring rows in their place.
pub(crate) type Combination = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
pub struct ParametricMesh {
    nx: usize,
    ny: usize,
    holes: Vec<HoleRect>,
    vertices: Vec<[f64; 2]>,
    vertex_grid: Vec<(usize, usize)>,
    grid_to_vertex: Vec<Option<usize>>,
    elements: Vec<Element>,
    boundary: Vec<bool>,
    stencils: Vec<Stencil>,
}

/// Build an `nx x ny` structured grid over the unit parameter square with
/// the given rectangular openings removed.
pub fn build_structured_grid(nx: usize, ny: usize, holes: &[HoleRect]) -> Result<ParametricMesh> {
    ParametricMesh::new(nx, ny, holes)
}

impl ParametricMesh {
    pub fn new(nx: usize, ny: usize, holes: &[HoleRect]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!(
                "element counts must be at least 1, got {nx} x {ny}"
            )));
        }
        validate_holes(nx, ny, holes)?;

        let mut grid_to_vertex = vec![None; (nx + 1) * (ny + 1)];
        let mut vertices = Vec::new();
        let mut vertex_grid = Vec::new();
        let mut boundary = Vec::new();
        for q in 0..=ny {
            for p in 0..=nx {
                if holes
                    .iter()
                    .any(|h| h.contains_vertex_strictly(p as isize, q as isize))
                {
                    continue;
                }
                grid_to_vertex[q * (nx + 1) + p] = Some(vertices.len());
                vertices.push([p as f64 / nx as f64, q as f64 / ny as f64]);
                vertex_grid.push((p, q));
                let outer = p == 0 || q == 0 || p == nx || q == ny;
                boundary.push(outer || holes.iter().any(|h| h.on_rim(p, q)));
            }
        }

        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                if holes.iter().any(|h| h.contains_element(i, j)) {
                    continue;
                }
                let at = |p: usize, q: usize| {
                    grid_to_vertex[q * (nx + 1) + p].expect("element corner removed by opening")
                };
                elements.push(Element {
                    grid: (i, j),
                    vertices: [at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)],
                });
            }
        }

        let mut mesh = Self {
            nx,
            ny,
            holes: holes.to_vec(),
            vertices,
            vertex_grid,
            grid_to_vertex,
            elements,
            boundary,
            stencils: Vec::new(),
        };
        mesh.stencils = (0..mesh.elements.len())
            .map(|e| build_stencil(&mesh, e))
            .collect();
        Ok(mesh)
    }

    pub(crate) fn stencil(&self, element: usize) -> &Stencil {
        &self.stencils[element]
    }

    /// Vertices whose basis functions are nonzero on `element`.
    pub fn element_support(&self, element: usize) -> &[usize] {
        &self.stencils[element].support
    }

    pub fn grid_dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn holes(&self) -> &[HoleRect] {
        &self.holes
    }

    /// Parametric coordinates of every vertex, in `[0, 1]^2`.
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_vertices(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.boundary[v]).collect()
    }

    /// Lattice position `(p, q)` of a vertex.
    pub fn vertex_grid(&self, v: usize) -> (usize, usize) {
        self.vertex_grid[v]
    }

    pub fn vertex_at(&self, p: usize, q: usize) -> Option<usize> {
        if p > self.nx || q > self.ny {
            return None;
        }
        self.grid_to_vertex[q * (self.nx + 1) + p]
    }

    /// Vertex closest to the parametric point `eta`.
    pub fn nearest_vertex(&self, eta: [f64; 2]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (v, x) in self.vertices.iter().enumerate() {
            let d = (x[0] - eta[0]).powi(2) + (x[1] - eta[1]).powi(2);
            if d < best_d - 1e-14 {
                best = v;
                best_d = d;
            }
        }
        best
    }

    /// Parametric size `(1/nx, 1/ny)` of every element.
    pub fn element_size(&self) -> [f64; 2] {
        [1.0 / self.nx as f64, 1.0 / self.ny as f64]
    }

    /// Parametric bounding box `[lo, hi]` of an element.
    pub fn element_box(&self, e: usize) -> [[f64; 2]; 2] {
        let (i, j) = self.elements[e].grid;
        let h = self.element_size();
        [
            [i as f64 * h[0], j as f64 * h[1]],
            [(i + 1) as f64 * h[0], (j + 1) as f64 * h[1]],
        ]
    }

    /// Locate the element containing `eta` and the local reference point in
    /// `[0, 1]^2`. Points on shared edges go to the lower-index element
    /// among those that exist.
    pub fn locate(&self, eta: [f64; 2]) -> Result<(usize, [f64; 2])> {
        let tol = 1e-12;
        if !(-tol..=1.0 + tol).contains(&eta[0]) || !(-tol..=1.0 + tol).contains(&eta[1]) {
            return Err(Error::OutsideMesh(eta));
        }
        let s = [eta[0] * self.nx as f64, eta[1] * self.ny as f64];
        let candidates = |s: f64, n: usize| -> Vec<usize> {
            let f = s.round();
            let base = (s.floor() as isize).clamp(0, n as isize - 1) as usize;
            let mut out = vec![base];
            // on a grid line both neighbouring cells are candidates
            if (s - f).abs() < 1e-9 {
                for c in [f as isize - 1, f as isize] {
                    if (0..n as isize).contains(&c) && c as usize != base {
                        out.push(c as usize);
                    }
                }
            }
            out
        };
        for i in candidates(s[0], self.nx) {
            for j in candidates(s[1], self.ny) {
                if let Some(e) = self.element_index(i, j) {
                    let local = [
                        (s[0] - i as f64).clamp(0.0, 1.0),
                        (s[1] - j as f64).clamp(0.0, 1.0),
                    ];
                    return Ok((e, local));
                }
            }
        }
        Err(Error::OutsideMesh(eta))
    }

    /// Element index of grid cell `(i, j)`, `None` if it lies in an opening.
    pub fn element_index(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.nx || j >= self.ny {
            return None;
        }
        // elements are stored row-major with opening cells skipped
        let idx = self
            .elements
            .binary_search_by(|el| (el.grid.1, el.grid.0).cmp(&(j, i)));
        idx.ok()
    }

    /// Resolve lattice position `(p, q)` to mesh vertices. Positions beyond
    /// the outer boundary and inside openings are linear extrapolations
    /// across the nearest rim, so affine vertex data stays affine.
    pub(crate) fn resolve(&self, p: isize, q: isize) -> Combination {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        if p < 0 {
            return extrapolate(self.resolve(0, q), self.resolve(1, q));
        }
        if p > nx {
            return extrapolate(self.resolve(nx, q), self.resolve(nx - 1, q));
        }
        if q < 0 {
            return extrapolate(self.resolve(p, 0), self.resolve(p, 1));
        }
        if q > ny {
            return extrapolate(self.resolve(p, ny), self.resolve(p, ny - 1));
        }
        if let Some(v) = self.grid_to_vertex[(q * (nx + 1) + p) as usize] {
            return vec![(v, 1.0)];
        }
        let hole = self
            .holes
            .iter()
            .find(|h| h.contains_vertex_strictly(p, q))
            .expect("missing vertex must lie in an opening");
        let (i0, i1, j0, j1) = (
            hole.i0 as isize,
            hole.i1 as isize,
            hole.j0 as isize,
            hole.j1 as isize,
        );
        let mut rules = Vec::new();
        if p == i0 + 1 {
            rules.push(extrapolate(self.resolve(i0, q), self.resolve(i0 - 1, q)));
        }
        if p == i1 - 1 {
            rules.push(extrapolate(self.resolve(i1, q), self.resolve(i1 + 1, q)));
        }
        if q == j0 + 1 {
            rules.push(extrapolate(self.resolve(p, j0), self.resolve(p, j0 - 1)));
        }
        if q == j1 - 1 {
            rules.push(extrapolate(self.resolve(p, j1), self.resolve(p, j1 + 1)));
        }
        assert!(
            !rules.is_empty(),
            "vertex ({p}, {q}) lies deeper than one ring inside an opening"
        );
        let w = 1.0 / rules.len() as f64;
        let mut out = Combination::new();
        for r in rules {
            for (v, c) in r {
                accumulate(&mut out, v, c * w);
            }
        }
        out
    }
}

fn extrapolate(rim: Combination, inner: Combination) -> Combination {
    let mut out = Combination::new();
    for (v, c) in rim {
        accumulate(&mut out, v, 2.0 * c);
    }
    for (v, c) in inner {
        accumulate(&mut out, v, -c);
    }
    out
}

pub(crate) fn accumulate(out: &mut Combination, v: usize, c: f64) {
    match out.iter_mut().find(|(w, _)| *w == v) {
        Some((_, acc)) => *acc += c,
        None => out.push((v, c)),
    }
}

fn validate_holes(nx: usize, ny: usize, holes: &[HoleRect]) -> Result<()> {
    for (k, h) in holes.iter().enumerate() {
        let bad = |reason: String| Error::InvalidHole { index: k, reason };
        if h.i0 >= h.i1 || h.j0 >= h.j1 {
            return Err(bad(format!("empty range [{}, {}) x [{}, {})", h.i0, h.i1, h.j0, h.j1)));
        }
        if h.i0 < 1 || h.j0 < 1 || h.i1 + 1 > nx || h.j1 + 1 > ny {
            return Err(bad(format!(
                "opening [{}, {}) x [{}, {}) touches or crosses the outer boundary of the {nx} x {ny} grid",
                h.i0, h.i1, h.j0, h.j1
            )));
        }
        for (m, g) in holes.iter().enumerate().take(k) {
            // openings need at least one element row between them
            let sep_i = h.i1 < g.i0 || g.i1 < h.i0;
            let sep_j = h.j1 < g.j0 || g.j1 < h.j0;
            if !(sep_i || sep_j) {
                return Err(bad(format!("overlaps or touches opening {m}")));
            }
        }
    }
    Ok(())
}
