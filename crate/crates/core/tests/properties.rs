use std::sync::Arc;

use proptest::prelude::*;
use shellnrep::bench::catenary_reference;
use shellnrep::geometry::{build_structured_grid, cubic_bspline, element_basis, quadrature, HoleRect};
use shellnrep::lattice::{generate_bcc_lattice, strut_multiplicity};
use shellnrep::nrep::{from_text, to_text, ActivationSpec, MlpNetwork, OutputMode};
use shellnrep::optimizer::{default_bounds, run, OptEvaluation, OptProblem, OptSettings};
use shellnrep::shell::{element_stiffness, solve, Discretisation, LoadSpec, Material, ShellModel};

fn material() -> Material {
    Material {
        youngs_modulus: 7e7,
        poisson: 0.35,
    }
}

fn activation(k: u8) -> ActivationSpec {
    match k % 3 {
        0 => ActivationSpec::sinusoidal(1.3, 0.4),
        1 => ActivationSpec::tanh(),
        _ => ActivationSpec::identity(),
    }
}

/// Random smooth surface over a 4 x 3 plan.
fn curved(nx: usize, ny: usize, a: f64, b: f64, c: f64) -> ShellModel {
    let disc = Arc::new(Discretisation::new(build_structured_grid(nx, ny, &[]).unwrap()));
    let coords = disc
        .mesh
        .vertices()
        .iter()
        .map(|e| {
            let (x, y) = (4.0 * e[0], 3.0 * e[1]);
            [x, y, a * (x - 2.0).powi(2) + b * x * y + c * (y * 1.3).sin()]
        })
        .collect();
    ShellModel::new(disc, coords, 0.1, material(), [4.0, 3.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cubic_weights_partition_unity(t in 0.0f64..=1.0) {
        let (n, dn, ddn) = cubic_bspline(t);
        prop_assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        prop_assert!(n.iter().all(|&v| v >= 0.0));
        prop_assert!(dn.iter().sum::<f64>().abs() < 1e-13);
        prop_assert!(ddn.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn element_basis_partition_of_unity(
        nx in 1usize..7, ny in 1usize..7, x in 0.0f64..1.0, y in 0.0f64..1.0,
    ) {
        let mesh = build_structured_grid(nx, ny, &[]).unwrap();
        let (i, j) = (((x * nx as f64) as usize).min(nx - 1), ((y * ny as f64) as usize).min(ny - 1));
        let e = mesh.element_index(i, j).unwrap();
        let local = [x * nx as f64 - i as f64, y * ny as f64 - j as f64];
        let b = element_basis(&mesh, e, local);
        prop_assert!((b.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let scale = (nx * ny) as f64;
        for d in 0..2 {
            prop_assert!(b.d1.iter().map(|g| g[d]).sum::<f64>().abs() < 1e-10 * scale);
        }
        for d in 0..3 {
            prop_assert!(b.d2.iter().map(|g| g[d]).sum::<f64>().abs() < 1e-8 * scale * scale);
        }
        // affine maps are reproduced, including near the boundary
        let verts = mesh.vertices();
        let affine: Vec<[f64; 3]> = verts.iter().map(|v| [2.0 * v[0] - v[1], 0.5 + v[1], 3.0 * v[0]]).collect();
        let p = b.interpolate(&affine);
        prop_assert!((p[0] - (2.0 * x - y)).abs() < 1e-12);
        prop_assert!((p[1] - (0.5 + y)).abs() < 1e-12);
        prop_assert!((p[2] - 3.0 * x).abs() < 1e-12);
    }

    #[test]
    fn element_basis_with_opening(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let mesh = build_structured_grid(6, 6, &[HoleRect::new(2, 4, 2, 4)]).unwrap();
        let (i, j) = (((x * 6.0) as usize).min(5), ((y * 6.0) as usize).min(5));
        if let Some(e) = mesh.element_index(i, j) {
            let b = element_basis(&mesh, e, [x * 6.0 - i as f64, y * 6.0 - j as f64]);
            prop_assert!((b.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn element_stiffness_symmetric_with_rigid_modes(
        a in -0.3f64..0.3, b in -0.2f64..0.2, c in -0.5f64..0.5, e in 0usize..12,
    ) {
        let model = curved(4, 3, a, b, c);
        let k = element_stiffness(&model, e, &quadrature(5)).unwrap();
        let n = k.size();
        let scale = k.matrix.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..n {
            for j in 0..i {
                prop_assert!((k.get(i, j) - k.get(j, i)).abs() <= 1e-10 * scale);
            }
        }
        let support = model.mesh().element_support(e);
        let x = &model.coords;
        // three translations and three infinitesimal rotations about the origin
        let modes: Vec<Vec<f64>> = (0..6)
            .map(|m| {
                support
                    .iter()
                    .flat_map(|&v| {
                        let p = x[v];
                        match m {
                            0 => [1.0, 0.0, 0.0],
                            1 => [0.0, 1.0, 0.0],
                            2 => [0.0, 0.0, 1.0],
                            3 => [0.0, -p[2], p[1]],
                            4 => [p[2], 0.0, -p[0]],
                            _ => [-p[1], p[0], 0.0],
                        }
                    })
                    .collect()
            })
            .collect();
        for (m, r) in modes.iter().enumerate() {
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            let kr = (0..n)
                .map(|i| (0..n).map(|j| k.get(i, j) * r[j]).sum::<f64>().powi(2))
                .sum::<f64>()
                .sqrt();
            prop_assert!(kr <= 1e-8 * scale * rn, "mode {m}: {kr:e}");
        }
    }

    #[test]
    fn network_jacobian_matches_finite_differences(
        seed in 0u64..1000, k0 in 0u8..3, k1 in 0u8..3, x in 0.0f64..1.0, y in 0.0f64..1.0,
    ) {
        let mut net = MlpNetwork::new(
            vec![2, 4, 3, 1],
            vec![activation(k0), activation(k1)],
            OutputMode::Heightfield,
            [20.0, 1.0, 0.0],
        ).unwrap();
        net.init_params(seed);
        let inputs = [x, y];
        let jac = net.jacobian_wrt_params(&inputs).unwrap();
        let theta = net.params().to_vec();
        let h = 1e-6;
        for p in 0..theta.len() {
            let at = |s: f64| {
                let mut t = theta.clone();
                t[p] += s;
                net.with_params(&t).unwrap().physical_points(&inputs).unwrap()[0][2]
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let an = jac.get(0, p);
            prop_assert!((an - fd).abs() <= 1e-6 * an.abs().max(1.0), "param {p}: {an} vs {fd}");
        }
    }

    #[test]
    fn network_text_round_trips(seed in 0u64..1000, k0 in 0u8..3) {
        let mut net = MlpNetwork::uniform(vec![2, 5, 5, 1], activation(k0), OutputMode::Heightfield, [20.0, 1.0, 0.0]).unwrap();
        net.init_params(seed);
        let back = from_text(&to_text(&net)).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn catenary_invariants(span in 1.0f64..50.0, excess in 1e-3f64..0.5) {
        let arc = span * (1.0 + excess);
        let c = catenary_reference(span, arc, 33).unwrap();
        prop_assert!(c.residual() <= 1e-9 * arc);
        prop_assert!(c.z_at(0.0).abs() < 1e-12 * span && c.z_at(span).abs() < 1e-9 * span);
        for k in 1..10 {
            let x = span * k as f64 / 20.0;
            prop_assert!((c.z_at(x) - c.z_at(span - x)).abs() <= 1e-9 * span);
            prop_assert!(c.z_at(x) > 0.0);
        }
    }

    #[test]
    fn compliance_scales_inversely_with_modulus(scale in 0.5f64..4.0, load in 1.0f64..20.0) {
        let mut model = curved(4, 3, 0.1, -0.05, 0.2).with_load(LoadSpec::Uniform { magnitude: load });
        let corners: Vec<usize> = [(0, 0), (4, 0), (0, 3), (4, 3)]
            .iter()
            .map(|&(p, q)| model.mesh().vertex_at(p, q).unwrap())
            .collect();
        model.pin(&corners);
        let j = solve(&model).unwrap().compliance;
        let mut stiffer = model.clone();
        stiffer.material.youngs_modulus *= scale;
        let js = solve(&stiffer).unwrap().compliance;
        prop_assert!(j > 0.0);
        prop_assert!((js * scale - j).abs() <= 1e-8 * j);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lattice_struts_are_unique(nx in 1usize..5, ny in 1usize..5, l in 1usize..4, edges in any::<bool>()) {
        let lat = generate_bcc_lattice(nx, ny, l, 0.1, edges).unwrap();
        prop_assert!(strut_multiplicity(&lat.struts).values().all(|&m| m == 1));
        prop_assert!(lat.struts.iter().all(|s| s.a != s.b && s.a < lat.nodes.len() && s.b < lat.nodes.len()));
    }

    /// Same problem, same start, same settings: bitwise identical histories.
    #[test]
    fn mma_is_deterministic(c0 in 0.5f64..3.0, c1 in 0.5f64..3.0, v in 0.5f64..2.0) {
        let eval = |t: &[f64]| -> shellnrep::Result<OptEvaluation> {
            Ok(OptEvaluation {
                objective: c0 / (t[0] * t[0] + 0.1) + c1 / (t[1] * t[1] + 0.1) + 1.0,
                gradient: vec![
                    -2.0 * c0 * t[0] / (t[0] * t[0] + 0.1).powi(2),
                    -2.0 * c1 * t[1] / (t[1] * t[1] + 0.1).powi(2),
                ],
                volume: t[0] * t[0] + t[1] * t[1],
                volume_gradient: vec![2.0 * t[0], 2.0 * t[1]],
            })
        };
        let theta0 = [0.3, 0.2];
        let (lower, upper, move_limit) = default_bounds(&theta0, 2.0);
        let problem = OptProblem { evaluate: Box::new(eval), v_max: v, lower, upper, move_limit };
        let settings = OptSettings { max_iterations: 50, ..OptSettings::default() };
        let a = run(&problem, &theta0, &settings).unwrap();
        let b = run(&problem, &theta0, &settings).unwrap();
        prop_assert_eq!(&a.theta, &b.theta);
        prop_assert_eq!(&a.history.records, &b.history.records);
        prop_assert!(a.volume <= v * (1.0 + 1e-6));
    }
}
