use std::sync::Arc;

use rayon::prelude::*;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::LltRegularization;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, SymbolicCholesky};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};
use sprs::{CsMat, TriMat};

use super::element::{area_kernel, element_stiffness_cached, ElementQuadrature, ElementStiffness};
use super::model::{LoadSpec, ShellModel};
use crate::error::{Error, Result};
use crate::geometry::{element_basis, QuadratureRule};

/// Relative pivot size below which the reduced stiffness is treated as singular.

/// Displacements and compliance of a linear static solve.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Global displacement vector, `3 * vertex + component`.
    pub displacements: Vec<f64>,
    /// `f^T u`.
    pub compliance: f64,
}

impl Solution {
    pub fn displacement(&self, vertex: usize) -> [f64; 3] {
        let u = &self.displacements;
        [u[3 * vertex], u[3 * vertex + 1], u[3 * vertex + 2]]
    }
}

/// Element stiffness matrices of every element, in element order.
pub fn element_stiffnesses(model: &ShellModel) -> Result<Vec<ElementStiffness>> {
    (0..model.mesh().n_elements())
        .into_par_iter()
        .map(|e| element_stiffness_cached(model, e))
        .collect()
}

/// Assembled global stiffness in CSC form.
pub fn assemble_stiffness(model: &ShellModel) -> Result<CsMat<f64>> {
    model.validate()?;
    let n = model.n_dofs();
    let mut tri = TriMat::new((n, n));
    for k in element_stiffnesses(model)? {
        let m = k.size();
        for (r, &gr) in k.dof_map.iter().enumerate() {
            for (c, &gc) in k.dof_map.iter().enumerate() {
                tri.add_triplet(gr, gc, k.matrix[r * m + c]);
            }
        }
    }
    Ok(tri.to_csc())
}

/// Nodal load vector. Area loads are integrated consistently against the
/// basis per unit plan area, so the vector does not depend on the current
/// vertex positions.
pub fn load_vector(model: &ShellModel) -> Vec<f64> {
    let mesh = model.mesh();
    let mut f = vec![0.0; model.n_dofs()];
    let plan = model.plan_extents[0] * model.plan_extents[1];
    let dir = model.load_direction;
    let mut add = |e: usize, rule: &QuadratureRule, magnitude: f64, jac: f64| {
        let support = mesh.element_support(e);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let b = element_basis(mesh, e, *p);
            for (k, &v) in support.iter().enumerate() {
                let s = b.values[k] * w * jac * plan * magnitude;
                for d in 0..3 {
                    f[3 * v + d] += s * dir[d];
                }
            }
        }
    };
    let base = QuadratureRule::default_shell();
    let elem_area = model.disc.element_param_area();
    match &model.load {
        LoadSpec::PerVertex { magnitude } => {
            for v in 0..model.n_vertices() {
                for d in 0..3 {
                    f[3 * v + d] += magnitude * dir[d];
                }
            }
        }
        LoadSpec::Uniform { magnitude } => {
            if *magnitude != 0.0 {
                for e in 0..mesh.n_elements() {
                    add(e, &base, *magnitude, elem_area);
                }
            }
        }
        LoadSpec::Regions(regions) => {
            for region in regions {
                for e in 0..mesh.n_elements() {
                    let [lo, hi] = mesh.element_box(e);
                    let size = [hi[0] - lo[0], hi[1] - lo[1]];
                    let a = [region.lo[0].max(lo[0]), region.lo[1].max(lo[1])];
                    let b = [region.hi[0].min(hi[0]), region.hi[1].min(hi[1])];
                    if b[0] <= a[0] || b[1] <= a[1] {
                        continue;
                    }
                    let local_lo = [(a[0] - lo[0]) / size[0], (a[1] - lo[1]) / size[1]];
                    let local_hi = [(b[0] - lo[0]) / size[0], (b[1] - lo[1]) / size[1]];
                    add(e, &base.mapped(local_lo, local_hi), region.magnitude, elem_area);
                }
            }
        }
    }
    f
}

/// Flags of the fixed global dofs.
pub fn fixed_dofs(model: &ShellModel) -> Vec<bool> {
    model.supports.iter().flat_map(|s| s.iter().copied()).collect()
}

/// Number of independent rigid-body motions left free by the supports.
pub fn unconstrained_rigid_modes(model: &ShellModel) -> usize {
    let fixed: Vec<(usize, usize)> = model
        .supports
        .iter()
        .enumerate()
        .flat_map(|(v, s)| (0..3).filter(move |&d| s[d]).map(move |d| (v, d)))
        .collect();
    if fixed.is_empty() {
        return 6;
    }
    let n = model.n_vertices() as f64;
    let mut centre = [0.0; 3];
    for x in &model.coords {
        for d in 0..3 {
            centre[d] += x[d] / n;
        }
    }
    let length = model
        .coords
        .iter()
        .map(|x| (0..3).map(|d| (x[d] - centre[d]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    // columns: restriction of each rigid mode to the fixed dofs
    let mut modes: Vec<Vec<f64>> = Vec::with_capacity(6);
    for t in 0..3 {
        modes.push(fixed.iter().map(|&(_, d)| if d == t { 1.0 } else { 0.0 }).collect());
    }
    for axis in 0..3 {
        let mut w = [0.0; 3];
        w[axis] = 1.0;
        modes.push(
            fixed
                .iter()
                .map(|&(v, d)| {
                    let r: Vec<f64> = (0..3).map(|k| (model.coords[v][k] - centre[k]) / length).collect();
                    let c = [w[1] * r[2] - w[2] * r[1], w[2] * r[0] - w[0] * r[2], w[0] * r[1] - w[1] * r[0]];
                    c[d]
                })
                .collect(),
        );
    }
    // modified Gram-Schmidt with pivoting on the largest remaining column
    let mut rank = 0;
    let mut remaining = modes;
    while !remaining.is_empty() {
        let (idx, norm) = remaining
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.iter().map(|x| x * x).sum::<f64>().sqrt()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm < 1e-9 {
            break;
        }
        let q: Vec<f64> = remaining.swap_remove(idx).iter().map(|x| x / norm).collect();
        rank += 1;
        for c in remaining.iter_mut() {
            let proj: f64 = c.iter().zip(&q).map(|(a, b)| a * b).sum();
            for (ci, qi) in c.iter_mut().zip(&q) {
                *ci -= proj * qi;
            }
        }
    }
    6 - rank
}

/// Column-compressed sparsity of the stiffness restricted to the free dofs,
/// with the destination of every element-matrix entry.
#[derive(Debug)]
pub(crate) struct ReducedPattern {
    fixed: Vec<bool>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    /// Per element, row-major; `usize::MAX` where a row or column is fixed.
    scatter: Vec<Vec<usize>>,
    /// Fill-reducing ordering and elimination structure, shared by every
    /// numeric factorisation with this pattern.
    symbolic: Option<SymbolicCholesky<usize>>,
}

impl ReducedPattern {
    fn build(model: &ShellModel, fixed: Vec<bool>, index: &[usize], m: usize) -> Self {
        let mesh = model.mesh();
        let maps: Vec<Vec<usize>> = (0..mesh.n_elements())
            .map(|e| {
                mesh.element_support(e)
                    .iter()
                    .flat_map(|&v| [3 * v, 3 * v + 1, 3 * v + 2])
                    .map(|g| index[g])
                    .collect()
            })
            .collect();
        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); m];
        for map in &maps {
            for &c in map.iter().filter(|&&c| c != usize::MAX) {
                columns[c].extend(map.iter().copied().filter(|&r| r != usize::MAX));
            }
        }
        let mut indptr = Vec::with_capacity(m + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for col in columns.iter_mut() {
            col.sort_unstable();
            col.dedup();
            indices.extend_from_slice(col);
            indptr.push(indices.len());
        }
        let scatter = maps
            .iter()
            .map(|map| {
                let mut out = Vec::with_capacity(map.len() * map.len());
                for &r in map {
                    for &c in map {
                        out.push(if r == usize::MAX || c == usize::MAX {
                            usize::MAX
                        } else {
                            let col = &indices[indptr[c]..indptr[c + 1]];
                            indptr[c] + col.binary_search(&r).expect("row in column pattern")
                        });
                    }
                }
                out
            })
            .collect();
        let symbolic = (m > 0).then(|| {
            let pattern = SymbolicSparseColMatRef::new_checked(m, m, &indptr, None, &indices);
            factorize_symbolic_cholesky(pattern, Side::Lower, Default::default(), Default::default())
                .expect("symbolic factorisation of a valid pattern")
        });
        Self {
            fixed,
            indptr,
            indices,
            scatter,
            symbolic,
        }
    }

    /// Pattern for the model's supports, reusing the cached one when the
    /// supports have not changed.
    fn for_model(model: &ShellModel, fixed: &[bool], index: &[usize], m: usize) -> Arc<Self> {
        let mut cache = model.disc.pattern.lock().unwrap_or_else(|e| e.into_inner());
        match cache.as_ref() {
            Some(p) if p.fixed == fixed => p.clone(),
            _ => {
                let p = Arc::new(Self::build(model, fixed.to_vec(), index, m));
                *cache = Some(p.clone());
                p
            }
        }
    }
}

/// Solve `K u = f` with supported dofs held at zero.
pub fn solve(model: &ShellModel) -> Result<Solution> {
    solve_prescribed(model, &[])
}

/// Solve with supported dofs held at zero except those listed in
/// `prescribed` as `(dof, value)`, which must be supported dofs.
pub fn solve_prescribed(model: &ShellModel, prescribed: &[(usize, f64)]) -> Result<Solution> {
    model.validate()?;
    let unconstrained = unconstrained_rigid_modes(model);
    if unconstrained > 0 {
        return Err(Error::UnconstrainedModes { unconstrained });
    }
    let n = model.n_dofs();
    let fixed = fixed_dofs(model);
    let mut u = vec![0.0; n];
    for &(dof, value) in prescribed {
        if dof >= n || !fixed[dof] {
            return Err(Error::InvalidModel(format!("prescribed dof {dof} is not a supported dof")));
        }
        u[dof] = value;
    }
    let mut index = vec![usize::MAX; n];
    let mut m = 0;
    for i in 0..n {
        if !fixed[i] {
            index[i] = m;
            m += 1;
        }
    }
    let f = load_vector(model);
    let mut rhs: Vec<f64> = (0..n).filter(|&i| !fixed[i]).map(|i| f[i]).collect();
    let pattern = ReducedPattern::for_model(model, &fixed, &index, m);
    let mut data = vec![0.0; pattern.indices.len()];
    let correct = prescribed.iter().any(|p| p.1 != 0.0);
    for (k, scatter) in element_stiffnesses(model)?.iter().zip(&pattern.scatter) {
        for (&pos, &v) in scatter.iter().zip(&k.matrix) {
            if pos != usize::MAX {
                data[pos] += v;
            }
        }
        if correct {
            let s = k.size();
            for (r, &gr) in k.dof_map.iter().enumerate() {
                let ir = index[gr];
                if ir == usize::MAX {
                    continue;
                }
                for (c, &gc) in k.dof_map.iter().enumerate() {
                    if index[gc] == usize::MAX {
                        rhs[ir] -= k.matrix[r * s + c] * u[gc];
                    }
                }
            }
        }
    }
    if m > 0 {
        let symbolic = pattern.symbolic.as_ref().expect("pattern with free dofs");
        let kff = SparseColMatRef::new(
            SymbolicSparseColMatRef::new_checked(m, m, &pattern.indptr, None, &pattern.indices),
            &data,
        );
        let par = Par::Seq;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut buf = MemBuffer::new(symbolic.factorize_numeric_llt_scratch::<f64>(par, Default::default()));
        let llt = symbolic
            .factorize_numeric_llt(
                &mut values,
                kff,
                Side::Lower,
                LltRegularization::default(),
                par,
                MemStack::new(&mut buf),
                Default::default(),
            )
            // a symmetric stiffness that is not positive definite has a
            // mechanism the rigid-mode check did not see
            .map_err(|_| Error::UnconstrainedModes { unconstrained: 1 })?;
        let mut x = rhs;
        let mut buf = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, par));
        llt.solve_in_place_with_conj(Conj::No, MatMut::from_column_major_slice_mut(&mut x, m, 1), par, MemStack::new(&mut buf));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("displacements"));
        }
        for i in 0..n {
            if index[i] != usize::MAX {
                u[i] = x[index[i]];
            }
        }
    }
    let compliance = f.iter().zip(&u).map(|(a, b)| a * b).sum();
    Ok(Solution {
        displacements: u,
        compliance,
    })
}

/// Compliance `f^T u` of the model.
pub fn compliance(model: &ShellModel) -> Result<f64> {
    Ok(solve(model)?.compliance)
}

/// Mid-surface area and shell volume `area * thickness`.
pub fn area_and_volume(model: &ShellModel) -> Result<(f64, f64)> {
    let areas: Vec<f64> = (0..model.mesh().n_elements())
        .into_par_iter()
        .map(|e| {
            let quad = ElementQuadrature::cached(model, e);
            area_kernel::<f64>(&quad, &model.element_coords(e), e)
        })
        .collect::<Result<_>>()?;
    let area: f64 = areas.iter().sum();
    Ok((area, area * model.thickness))
}
