use hyperfrac::inverse::*;
use hyperfrac::operator::PolyharmonicSpec;
use hyperfrac::quadrature::GaussRule;
use hyperfrac::solver::radial::RadialBackend;
use hyperfrac::solver::*;
use hyperfrac::Error;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn backend(h: f64) -> RadialBackend {
    let cfg = MeshConfig {
        h,
        ..MeshConfig::recovery_default()
    };
    RadialBackend::new(build_mesh(&cfg).unwrap()).unwrap()
}

/// ∫_{B_1} q u v dV by Gauss quadrature on point values, independent of the cell mass matrices.
fn quadrature_product(b: &RadialBackend, q: impl Fn(f64) -> f64, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
    let rule: GaussRule<f64> = GaussRule::new(16);
    let h = b.h();
    let n = (1.0 / h).round() as usize;
    (0..n)
        .map(|m| {
            let a = m as f64 * h;
            rule.integrate(a, a + h, |r| {
                q(r) * b.eval_radius(u, r) * b.eval_radius(v, r) * 4.0 * std::f64::consts::PI * r.sinh().powi(2)
            })
        })
        .sum()
}

#[test]
fn integral_identity_sweep() {
    let b = backend(0.05);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let energy = b.energy_matrix(&spec).unwrap();
    let f = b.window_modes(Window::W1, 4).unwrap();
    let g = b.window_modes(Window::W2, 4).unwrap();
    let cases = [(0.5, 1.0, 0.0), (0.5, 0.5, -0.5), (1.0, 2.0, 0.5), (0.25, 3.0, 1.0), (0.75, -0.3, 0.2)];
    for (k, (a, c1, c2)) in cases.iter().enumerate() {
        let q1 = Potential::ball_indicator(&b, *a, *c1);
        let q2 = Potential::ball_indicator(&b, 1.0, *c2);
        let chk = integral_identity_check(&b, &energy, &q1, &q2, &f[k % 4], &g[(k + 1) % 4]).unwrap();
        assert!(chk.gap < 1e-9, "case {k}: {chk:?}");
        assert!(chk.lhs.abs() > 1e-8, "case {k}: identity is trivial");
    }
}

#[test]
fn integral_identity_matches_quadrature_oracle() {
    let b = backend(0.05);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let energy = b.energy_matrix(&spec).unwrap();
    let f = &b.window_modes(Window::W1, 2).unwrap()[1];
    let g = &b.window_modes(Window::W2, 1).unwrap()[0];
    let q1 = Potential::ball_indicator(&b, 0.5, 1.5);
    let q2 = Potential::zero(&b);
    let chk = integral_identity_check(&b, &energy, &q1, &q2, f, g).unwrap();
    let s1 = StiffnessSystem::new(&b, &energy, &q1).unwrap();
    let s2 = StiffnessSystem::new(&b, &energy, &q2).unwrap();
    let u1 = solve_exterior(&s1, f, None).unwrap();
    let u2 = solve_exterior(&s2, g, None).unwrap();
    let oracle = quadrature_product(&b, |r| if r < 0.5 { 1.5 } else { 0.0 }, &u1.coeffs, &u2.coeffs);
    assert!((chk.rhs - oracle).abs() < 1e-10 * oracle.abs(), "{} vs {oracle}", chk.rhs);
}

#[test]
fn integral_identity_degenerate_and_linear() {
    let b = backend(0.05);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let energy = b.energy_matrix(&spec).unwrap();
    let f = &b.window_modes(Window::W1, 1).unwrap()[0];
    let g = &b.window_modes(Window::W2, 1).unwrap()[0];
    let q = Potential::ball_indicator(&b, 0.5, 0.7);
    let same = integral_identity_check(&b, &energy, &q, &q, f, g).unwrap();
    assert!(same.lhs.abs() < 1e-10 && same.rhs.abs() < 1e-10, "{same:?}");
    let z = Potential::zero(&b);
    let one = integral_identity_check(&b, &energy, &q, &z, f, g).unwrap();
    let two = integral_identity_check(&b, &energy, &q, &z, &(f * 2.0), g).unwrap();
    assert!((two.lhs - 2.0 * one.lhs).abs() < 1e-12 * one.lhs.abs());
    assert!((two.rhs - 2.0 * one.rhs).abs() < 1e-12 * one.rhs.abs());
}

#[test]
fn sensitivity_matches_finite_differences() {
    let b = backend(0.05);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let setup = DnSetup::new(&b, &spec, 6, 6).unwrap();
    let rings = Rings::new(&b, 4).unwrap();
    let p = [0.3, -0.2, 0.5, 0.1];
    let (_, jac) = setup.dn_and_jacobian(&b, &rings.expand(&p), &rings).unwrap();
    let eps = 1e-3;
    for r in 0..4 {
        let mut hi = p;
        let mut lo = p;
        hi[r] += eps;
        lo[r] -= eps;
        let dp = setup.dn(&b, &rings.expand(&hi)).unwrap();
        let dm = setup.dn(&b, &rings.expand(&lo)).unwrap();
        let fd = (&dp.values - &dm.values) / (2.0 * eps);
        let col = DVector::from_column_slice(fd.as_slice());
        let err = (&col - jac.column(r)).norm() / jac.column(r).norm();
        assert!(err < 1e-4, "ring {r}: relative error {err:e}");
    }
}

#[test]
fn rings_roundtrip_and_limits() {
    let b = backend(0.05);
    let rings = Rings::new(&b, 4).unwrap();
    assert_eq!(rings.ring_of_cell.len(), b.omega_cells().len());
    let p = [1.0, 2.0, 3.0, 4.0];
    let back = rings.project(&b, &rings.expand(&p));
    for (x, y) in p.iter().zip(&back) {
        assert!((x - y).abs() < 1e-14);
    }
    // 20 cells cannot fill 40 rings
    assert!(matches!(Rings::new(&b, 40), Err(Error::Geometry(_))));
    assert!(Rings::new(&b, 0).is_err());
}

#[test]
fn born_of_zero_data_is_zero() {
    let b = backend(0.05);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let setup = DnSetup::new(&b, &spec, 8, 8).unwrap();
    let zero = DnMatrix {
        values: nalgebra::DMatrix::zeros(8, 8),
    };
    let rec = born_recover(&b, &setup, &zero, 0.0, &RecoveryConfig::default()).unwrap();
    assert!(rec.potential.values.iter().all(|v| *v == 0.0));
}

#[test]
fn born_is_exact_for_linear_data() {
    // data generated by the linearized model itself
    let b = backend(0.05);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let setup = DnSetup::new(&b, &spec, 8, 8).unwrap();
    let rings = Rings::new(&b, 2).unwrap();
    let (_, jac) = setup.dn_and_jacobian(&b, &Potential::zero(&b), &rings).unwrap();
    let d = &jac * DVector::from_column_slice(&[0.5, 0.0]);
    let gap = DnMatrix {
        values: nalgebra::DMatrix::from_column_slice(8, 8, d.as_slice()),
    };
    let cfg = RecoveryConfig {
        n_rings: 2,
        ..Default::default()
    };
    let rec = born_recover(&b, &setup, &gap, 1e-6 * d.norm(), &cfg).unwrap();
    assert!((rec.rings[0] - 0.5).abs() < 1e-4 && rec.rings[1].abs() < 1e-4, "{:?}", rec.rings);
    assert!(rec.misfit < 1.5e-6 * d.norm());
}

#[test]
fn gauss_newton_zero_target_takes_no_step() {
    let b = backend(0.05);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let setup = DnSetup::new(&b, &spec, 8, 8).unwrap();
    let meas = setup.dn(&b, &Potential::zero(&b)).unwrap();
    let cfg = RecoveryConfig {
        n_rings: 2,
        ..Default::default()
    };
    let rec = recover_potential(&b, &setup, &meas, 0.0, &[0.0, 0.0], &cfg).unwrap();
    assert!(rec.log.is_empty());
    assert_eq!(rec.rings, vec![0.0, 0.0]);
}

#[test]
fn gauss_newton_two_mesh_recovery() {
    let coarse = backend(0.05);
    let fine = backend(0.025);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let sc = DnSetup::new(&coarse, &spec, 16, 16).unwrap();
    let sf = DnSetup::transferred(&fine, &coarse, &spec, &sc).unwrap();
    let gap = sf
        .dn(&fine, &Potential::ball_indicator(&fine, 0.5, 0.5))
        .unwrap()
        .sub(&sf.dn(&fine, &Potential::zero(&fine)).unwrap());
    // background-corrected measurement in model units
    let meas = DnMatrix {
        values: &gap.values + &sc.dn(&coarse, &Potential::zero(&coarse)).unwrap().values,
    };
    let cfg = RecoveryConfig {
        n_rings: 2,
        ..Default::default()
    };
    let floor = model_floor(&coarse, &sc, &gap, 2).unwrap();
    let rec = recover_potential(&coarse, &sc, &meas, floor, &[0.0, 0.0], &cfg).unwrap();
    let truth = Potential::ball_indicator(&coarse, 0.5, 0.5);
    let err = relative_l2_error(&coarse, &rec.potential, &truth);
    assert!(err < 0.3, "relative error {err}");
    // objective decreases at every accepted step within a β stage
    for w in rec.log.windows(2) {
        if w[0].beta == w[1].beta {
            assert!(w[1].objective < w[0].objective, "{:?}", w);
        }
    }
    let mut buf = Vec::new();
    rec.write_log(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), rec.log.len());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["iter", "objective", "misfit", "regterm", "step_norm"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}

#[test]
fn recovery_config_validation() {
    assert!(RecoveryConfig::default().validate().is_ok());
    let bad = RecoveryConfig {
        beta: 0.0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let bad = RecoveryConfig {
        max_iter: 0,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
}

fn runge_setup() -> (RadialBackend, StiffnessSystem, Vec<DVector<f64>>) {
    let b = backend(0.05);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let energy = b.energy_matrix(&spec).unwrap();
    let sys = StiffnessSystem::new(&b, &energy, &Potential::ball_indicator(&b, 0.5, 1.0)).unwrap();
    let modes = b.window_modes(Window::W1, 32).unwrap();
    (b, sys, modes)
}

#[test]
fn runge_reproduces_a_solution() {
    let (b, sys, modes) = runge_setup();
    let u = solve_exterior(&sys, &modes[2], None).unwrap();
    let r = runge_approximate(
        &b,
        &sys,
        &RungeProblem {
            target: RungeTarget::Function(u.coeffs),
            controls: modes[..8].to_vec(),
            beta: 1e-12,
        },
    )
    .unwrap();
    assert!(r.relative_error < 1e-12, "{}", r.relative_error);
    assert!((r.coefficients[2] - 1.0).abs() < 1e-6);
}

#[test]
fn runge_error_is_monotone_in_controls_and_beta() {
    let (b, sys, modes) = runge_setup();
    let nc = b.omega_cells().len();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let targets = [
        RungeTarget::Cellwise(vec![1.0; nc]),
        RungeTarget::Cellwise((0..nc).map(|_| rng.gen_range(-1.0..1.0)).collect()),
    ];
    for t in &targets {
        let err = |k: usize, beta: f64| {
            runge_approximate(
                &b,
                &sys,
                &RungeProblem {
                    target: t.clone(),
                    controls: modes[..k].to_vec(),
                    beta,
                },
            )
            .unwrap()
            .error
        };
        let e: Vec<f64> = [8, 16, 32].iter().map(|k| err(*k, 1e-12)).collect();
        assert!(e[1] <= e[0] * (1.0 + 1e-12) && e[2] <= e[1] * (1.0 + 1e-12), "{e:?}");
        let eb: Vec<f64> = [1e-4, 1e-8, 1e-12].iter().map(|bt| err(32, *bt)).collect();
        assert!(eb[1] <= eb[0] * (1.0 + 1e-12) && eb[2] <= eb[1] * (1.0 + 1e-12), "{eb:?}");
    }
}

#[test]
fn runge_without_regularization_flags_dependent_controls() {
    let (b, sys, modes) = runge_setup();
    let nc = b.omega_cells().len();
    let r = runge_approximate(
        &b,
        &sys,
        &RungeProblem {
            target: RungeTarget::Cellwise(vec![1.0; nc]),
            controls: modes,
            beta: 0.0,
        },
    );
    assert!(matches!(r, Err(Error::IllConditioned { .. })), "{r:?}");
}
