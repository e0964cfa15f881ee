//! Lattice-skin geometry: two shell skins a vertical distance apart joined
//! by a body-centred cubic strut lattice.
//!
//! Lattice nodes are generated in the unit cube. Nodes on the bottom and top
//! faces are bound to the lower and upper skins and placed by evaluating
//! the skin's spline surface; all other nodes go through a 3D-to-3D network
//! fitted to the slab between the skins.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::element_basis;
use crate::nrep::{fit, fmt_f64, ActivationSpec, MlpNetwork, OutputMode, TrainingConfig};
use crate::shell::ShellModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Skin {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strut {
    pub a: usize,
    pub b: usize,
    pub diameter: f64,
}

/// A lattice node tied to a point of one skin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub node: usize,
    pub skin: Skin,
    /// Parametric point on the skin.
    pub eta: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BccLattice {
    /// Cell counts `(nx, ny, layers)`.
    pub cells: [usize; 3],
    /// Node positions in the unit cube.
    pub nodes: Vec<[f64; 3]>,
    pub struts: Vec<Strut>,
    pub couplings: Vec<Coupling>,
}

impl BccLattice {
    pub fn corner_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.cells;
        i + (nx + 1) * (j + (ny + 1) * k)
    }

    pub fn centre_index(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, nz] = self.cells;
        (nx + 1) * (ny + 1) * (nz + 1) + i + nx * (j + ny * k)
    }
}

/// Closed-form node and strut counts `(nodes, struts)`; `edges` adds the
/// cube edges to the eight body diagonals of each cell.
pub fn bcc_counts(nx: usize, ny: usize, layers: usize, edges: bool) -> (usize, usize) {
    let nodes = (nx + 1) * (ny + 1) * (layers + 1) + nx * ny * layers;
    let mut struts = 8 * nx * ny * layers;
    if edges {
        struts += nx * (ny + 1) * (layers + 1) + (nx + 1) * ny * (layers + 1) + (nx + 1) * (ny + 1) * layers;
    }
    (nodes, struts)
}

/// Body-centred cubic cells on an `nx x ny x layers` grid of the unit cube.
/// Each cell joins its centre to its eight corners; with `edges` the cube
/// edges are added once each.
pub fn generate_bcc_lattice(nx: usize, ny: usize, layers: usize, diameter: f64, edges: bool) -> Result<BccLattice> {
    if nx == 0 || ny == 0 || layers == 0 {
        return Err(Error::InvalidModel(format!(
            "lattice needs at least one cell per direction, got {nx} x {ny} x {layers}"
        )));
    }
    if !(diameter > 0.0) || !diameter.is_finite() {
        return Err(Error::InvalidModel(format!("strut diameter must be positive, got {diameter}")));
    }
    let mut lat = BccLattice {
        cells: [nx, ny, layers],
        nodes: Vec::new(),
        struts: Vec::new(),
        couplings: Vec::new(),
    };
    let h = [1.0 / nx as f64, 1.0 / ny as f64, 1.0 / layers as f64];
    for k in 0..=layers {
        for j in 0..=ny {
            for i in 0..=nx {
                lat.nodes.push([i as f64 * h[0], j as f64 * h[1], k as f64 * h[2]]);
            }
        }
    }
    for k in 0..layers {
        for j in 0..ny {
            for i in 0..nx {
                lat.nodes
                    .push([(i as f64 + 0.5) * h[0], (j as f64 + 0.5) * h[1], (k as f64 + 0.5) * h[2]]);
            }
        }
    }
    for k in 0..layers {
        for j in 0..ny {
            for i in 0..nx {
                let c = lat.centre_index(i, j, k);
                for dk in 0..2 {
                    for dj in 0..2 {
                        for di in 0..2 {
                            lat.struts.push(Strut {
                                a: c,
                                b: lat.corner_index(i + di, j + dj, k + dk),
                                diameter,
                            });
                        }
                    }
                }
            }
        }
    }
    if edges {
        for k in 0..=layers {
            for j in 0..=ny {
                for i in 0..=nx {
                    let a = lat.corner_index(i, j, k);
                    let mut next = Vec::with_capacity(3);
                    if i < nx {
                        next.push(lat.corner_index(i + 1, j, k));
                    }
                    if j < ny {
                        next.push(lat.corner_index(i, j + 1, k));
                    }
                    if k < layers {
                        next.push(lat.corner_index(i, j, k + 1));
                    }
                    lat.struts.extend(next.into_iter().map(|b| Strut { a, b, diameter }));
                }
            }
        }
    }
    for (k, skin) in [(0, Skin::Lower), (layers, Skin::Upper)] {
        for j in 0..=ny {
            for i in 0..=nx {
                let node = lat.corner_index(i, j, k);
                let p = lat.nodes[node];
                lat.couplings.push(Coupling {
                    node,
                    skin,
                    eta: [p[0], p[1]],
                });
            }
        }
    }
    Ok(lat)
}

/// Upper skin: every vertex raised by `h`.
pub fn offset_shell(lower: &ShellModel, h: f64) -> Result<Vec<[f64; 3]>> {
    if h == 0.0 || !h.is_finite() {
        return Err(Error::InvalidModel(format!("offset height must be finite and non-zero, got {h}")));
    }
    Ok(lower.coords.iter().map(|x| [x[0], x[1], x[2] + h]).collect())
}

/// Point of a skin's spline surface at the parametric point `eta`.
pub fn skin_point(model: &ShellModel, eta: [f64; 2]) -> Result<[f64; 3]> {
    let (e, local) = model.mesh().locate(eta)?;
    Ok(element_basis(model.mesh(), e, local).interpolate(&model.coords))
}

/// Physical node positions: coupled nodes on their skins, all others
/// through the map network.
pub fn map_lattice(lattice: &BccLattice, net: &MlpNetwork, lower: &ShellModel, upper: &ShellModel) -> Result<Vec<[f64; 3]>> {
    if net.output_mode != OutputMode::Map3d {
        return Err(Error::InvalidNetwork("lattice mapping needs a map3d network".into()));
    }
    let flat: Vec<f64> = lattice.nodes.iter().flatten().copied().collect();
    let mut out = net.physical_points(&flat)?;
    for c in &lattice.couplings {
        let skin = match c.skin {
            Skin::Lower => lower,
            Skin::Upper => upper,
        };
        out[c.node] = skin_point(skin, c.eta)?;
    }
    Ok(out)
}

/// Training pairs for the map network: skin vertices at the bottom and top
/// of the unit cube plus `levels` linearly interpolated slices between them.
pub fn map3d_samples(lower: &ShellModel, upper: &[[f64; 3]], levels: usize) -> (Vec<f64>, Vec<f64>) {
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (eta, (xl, xu)) in lower.mesh().vertices().iter().zip(lower.coords.iter().zip(upper)) {
        for k in 0..levels + 2 {
            let s = k as f64 / (levels + 1) as f64;
            inputs.extend([eta[0], eta[1], s]);
            targets.extend((0..3).map(|d| (1.0 - s) * xl[d] + s * xu[d]));
        }
    }
    (inputs, targets)
}

/// Fit a `3 -> 3` network to the slab between the skins, five interior
/// levels; returns the network and its training MSE.
pub fn build_map3d_net(
    lower: &ShellModel,
    h: f64,
    hidden: &[usize],
    activation: ActivationSpec,
    training: &TrainingConfig,
) -> Result<(MlpNetwork, f64)> {
    let upper = offset_shell(lower, h)?;
    let (inputs, targets) = map3d_samples(lower, &upper, 5);
    let mut sizes = vec![3];
    sizes.extend(hidden);
    sizes.push(3);
    let mut net = MlpNetwork::uniform(sizes, activation, OutputMode::Map3d, [1.0; 3])?;
    net.init_params(training.seed);
    let r = fit(&net, &inputs, &targets, training)?;
    Ok((r.network, r.mse))
}

/// Edge list: `v x y z` per node, then `e i j d` per strut with 0-based
/// node indices.
pub fn lattice_to_text(nodes: &[[f64; 3]], struts: &[Strut]) -> String {
    let mut s = String::new();
    for x in nodes {
        let _ = writeln!(s, "v {} {} {}", fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(x[2]));
    }
    for t in struts {
        let _ = writeln!(s, "e {} {} {}", t.a, t.b, fmt_f64(t.diameter));
    }
    s
}

pub fn lattice_from_text(text: &str) -> Result<(Vec<[f64; 3]>, Vec<Strut>)> {
    let mut nodes = Vec::new();
    let mut struts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let err = |m: &str| Error::Parse {
            line: i + 1,
            message: m.to_string(),
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        match f.as_slice() {
            [] => {}
            ["v", x, y, z] => {
                let p = |s: &str| s.parse::<f64>().map_err(|_| err("invalid coordinate"));
                nodes.push([p(x)?, p(y)?, p(z)?]);
            }
            ["e", a, b, d] => {
                let n = |s: &str| s.parse::<usize>().map_err(|_| err("invalid node index"));
                let (a, b) = (n(a)?, n(b)?);
                if a >= nodes.len() || b >= nodes.len() {
                    return Err(err("strut refers to an unknown node"));
                }
                struts.push(Strut {
                    a,
                    b,
                    diameter: d.parse().map_err(|_| err("invalid diameter"))?,
                });
            }
            _ => return Err(err("expected `v x y z` or `e i j d`")),
        }
    }
    Ok((nodes, struts))
}

/// Complete lattice-skin geometry.
#[derive(Debug, Clone)]
pub struct LatticeSkin {
    pub lower: ShellModel,
    pub upper: ShellModel,
    pub lattice: BccLattice,
    pub positions: Vec<[f64; 3]>,
    pub map_net: MlpNetwork,
    pub map_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub height: f64,
    /// Cells per direction in plan; must divide the shell grid.
    pub cells: [usize; 2],
    pub layers: usize,
    pub diameter: f64,
    pub edges: bool,
    pub hidden: Vec<usize>,
    pub activation: ActivationSpec,
    pub training: TrainingConfig,
}

/// Offset the skin, fit the map network, generate and map the lattice.
pub fn build_lattice_skin(lower: &ShellModel, cfg: &LatticeConfig) -> Result<LatticeSkin> {
    let (gx, gy) = lower.mesh().grid_dims();
    if cfg.cells[0] == 0 || cfg.cells[1] == 0 || gx % cfg.cells[0] != 0 || gy % cfg.cells[1] != 0 {
        return Err(Error::InvalidModel(format!(
            "lattice cells {:?} must divide the shell grid {gx} x {gy} so coupled nodes sit on grid lines",
            cfg.cells
        )));
    }
    let upper = lower.with_coords(offset_shell(lower, cfg.height)?);
    let (map_net, map_mse) = build_map3d_net(lower, cfg.height, &cfg.hidden, cfg.activation, &cfg.training)?;
    let lattice = generate_bcc_lattice(cfg.cells[0], cfg.cells[1], cfg.layers, cfg.diameter, cfg.edges)?;
    let positions = map_lattice(&lattice, &map_net, lower, &upper)?;
    Ok(LatticeSkin {
        lower: lower.clone(),
        upper,
        lattice,
        positions,
        map_net,
        map_mse,
    })
}

/// Number of struts per unordered node pair; every value is 1 in a valid
/// lattice.
pub fn strut_multiplicity(struts: &[Strut]) -> HashMap<(usize, usize), usize> {
    let mut m = HashMap::new();
    for s in struts {
        *m.entry((s.a.min(s.b), s.a.max(s.b))).or_insert(0) += 1;
    }
    m
}
