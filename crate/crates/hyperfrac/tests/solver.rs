use hyperfrac::inverse::integral_identity_check;
use hyperfrac::operator::PolyharmonicSpec;
use hyperfrac::solver::fem::FemBackend;
use hyperfrac::solver::radial::RadialBackend;
use hyperfrac::solver::*;
use hyperfrac::Error;
use nalgebra::{DMatrix, DVector};
use std::sync::OnceLock;

fn radial(h: f64) -> RadialBackend {
    let cfg = MeshConfig {
        h,
        ..MeshConfig::radial_default()
    };
    RadialBackend::new(build_mesh(&cfg).unwrap()).unwrap()
}

fn asymmetry(a: &DMatrix<f64>) -> f64 {
    (a - a.transpose()).norm() / a.norm()
}

fn small_disk() -> &'static (FemBackend, DMatrix<f64>) {
    static CELL: OnceLock<(FemBackend, DMatrix<f64>)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = MeshConfig {
            kind: MeshKind::Disk,
            radius: 1.5,
            h: 0.25,
            omega_radius: 0.25,
            w1: [0.25, 0.75],
            w2: [1.0, 1.5],
        };
        let b = FemBackend::new(build_mesh(&cfg).unwrap()).unwrap();
        let a = b.energy_matrix(&PolyharmonicSpec::single(0.5).unwrap()).unwrap();
        (b, a)
    })
}

#[test]
fn mesh_layouts() {
    let cfg = MeshConfig {
        radius: 6.0,
        ..MeshConfig::radial_default()
    };
    let m = build_mesh(&cfg).unwrap();
    assert!(m.tags.contains(&Region::W1) && m.tags.contains(&Region::W2));
    let fine = build_mesh(&cfg.refined()).unwrap();
    assert_eq!(fine.cells.len(), 2 * m.cells.len());
    for (k, t) in m.tags.iter().enumerate() {
        assert_eq!(fine.tags[2 * k], *t);
        assert_eq!(fine.tags[2 * k + 1], *t);
    }
    let empty = MeshConfig {
        w1: [1.2, 1.2],
        ..MeshConfig::radial_default()
    };
    assert!(matches!(build_mesh(&empty), Err(Error::Geometry(_))));
}

#[test]
fn radial_energy_is_symmetric_positive_and_matches_kernel_form() {
    let b = radial(0.05);
    let a = b.energy_matrix(&PolyharmonicSpec::single(0.5).unwrap()).unwrap();
    assert!(asymmetry(&a) < 1e-10);
    let aii = a.select_rows(b.interior()).select_columns(b.interior());
    assert!(aii.symmetric_eigenvalues().min() > 0.0);
    // diagonal entries of interior basis functions against the singular-integral form
    for &i in &b.interior()[2..5] {
        let mut e = DVector::zeros(b.n_dofs());
        e[i] = 1.0;
        let kernel = b.kernel_quadratic_form(&b.cell_poly(&e), 0.5).unwrap();
        assert!((a[(i, i)] - kernel).abs() < 1e-4 * kernel, "dof {i}: {} vs {kernel}", a[(i, i)]);
    }
}

#[test]
fn radial_solve_is_linear_and_exact_on_the_exterior() {
    let b = radial(0.05);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let energy = b.energy_matrix(&spec).unwrap();
    let sys = StiffnessSystem::new(&b, &energy, &Potential::ball_indicator(&b, 0.5, 1.0)).unwrap();
    let zero = solve_exterior(&sys, &DVector::zeros(sys.exterior.len()), None).unwrap();
    assert_eq!(zero.coeffs.norm(), 0.0);
    let f = &b.window_modes(Window::W1, 2).unwrap()[1];
    let u = solve_exterior(&sys, f, None).unwrap();
    let u10 = solve_exterior(&sys, &(f * 10.0), None).unwrap();
    assert!(u.residual < 1e-10);
    assert!((&u10.coeffs - &u.coeffs * 10.0).norm() < 1e-12 * u10.coeffs.norm());
    for (k, &e) in sys.exterior.iter().enumerate() {
        assert_eq!(u.coeffs[e], f[k]);
    }
}

#[test]
fn radial_dn_routes_agree_and_symmetry_holds() {
    let b = radial(0.025);
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let energy = b.energy_matrix(&spec).unwrap();
    let q = Potential::ball_indicator(&b, 0.5, 1.0);
    let sys = StiffnessSystem::new(&b, &energy, &q).unwrap();
    let w1 = b.window_modes(Window::W1, 4).unwrap();
    let w2 = b.window_modes(Window::W2, 4).unwrap();
    let sols = solve_family(&sys, &w1).unwrap();
    let dn = dn_from_solutions(&sys, &sols, &w2);
    let full: Vec<DVector<f64>> = sols.iter().map(|s| s.coeffs.clone()).collect();
    let kernel = b.kernel_dn(&spec, &full, &w2).unwrap();
    let rel = (&kernel - &dn.values).norm() / dn.values.norm();
    assert!(rel < 1e-6, "two-route gap {rel:e}");
    // same window for data and tests
    let same = assemble_dn(&sys, &w1, &w1).unwrap();
    assert!(same.asymmetry() < 1e-8, "{}", same.asymmetry());
    // q = 0 against itself
    let z = StiffnessSystem::new(&b, &energy, &Potential::zero(&b)).unwrap();
    let d1 = assemble_dn(&z, &w1, &w2).unwrap();
    let d2 = assemble_dn(&z, &w1, &w2).unwrap();
    assert_eq!(d1.sub(&d2).values.norm(), 0.0);
}

#[test]
fn dirichlet_eigenvalue_is_reported() {
    let b = radial(0.05);
    let energy = b.energy_matrix(&PolyharmonicSpec::single(0.5).unwrap()).unwrap();
    // q = −μ on all of Ω with μ the smallest generalized eigenvalue of (A_II, M_II)
    let ones = Potential {
        values: vec![1.0; b.omega_cells().len()],
    };
    let m = potential_mass(&b, &ones).unwrap();
    let aii = energy.select_rows(b.interior()).select_columns(b.interior());
    let mii = m.select_rows(b.interior()).select_columns(b.interior());
    let l = mii.clone().cholesky().unwrap();
    let li = l.l().try_inverse().unwrap();
    let mu = (&li * &aii * li.transpose()).symmetric_eigenvalues().min();
    let q = Potential {
        values: vec![-mu; b.omega_cells().len()],
    };
    match StiffnessSystem::new(&b, &energy, &q) {
        Err(Error::SingularSystem { sigma_min }) => assert!(sigma_min < 1e-10),
        other => panic!("expected a singular system, got {:?}", other.map(|s| s.sigma_min)),
    }
}

#[test]
fn fem_energy_is_symmetric_and_coercive() {
    let (b, a) = small_disk();
    assert!(asymmetry(a) < 1e-10);
    let aii = a.select_rows(b.interior()).select_columns(b.interior());
    assert!(aii.symmetric_eigenvalues().min() > 0.0);
}

#[test]
fn fem_dn_routes_agree() {
    let (b, a) = small_disk();
    let spec = PolyharmonicSpec::single(0.5).unwrap();
    let sys = StiffnessSystem::new(b, a, &Potential::ball_indicator(b, 0.25, 1.0)).unwrap();
    let w1 = b.window_modes(Window::W1, 3).unwrap();
    let w2 = b.window_modes(Window::W2, 3).unwrap();
    let sols = solve_family(&sys, &w1).unwrap();
    let dn = dn_from_solutions(&sys, &sols, &w2);
    let full: Vec<DVector<f64>> = sols.iter().map(|s| s.coeffs.clone()).collect();
    let kernel = b.kernel_dn(&spec, &full, &w2).unwrap();
    let rel = (&kernel - &dn.values).norm() / dn.values.norm();
    assert!(rel < 1e-6, "two-route gap {rel:e}");
}

#[test]
fn fem_integral_identity() {
    let (b, a) = small_disk();
    let f = &b.window_modes(Window::W1, 2).unwrap()[0];
    let g = &b.window_modes(Window::W2, 1).unwrap()[0];
    let q1 = Potential {
        values: vec![2.0; b.omega_cells().len()],
    };
    let q2 = Potential::zero(b);
    let chk = integral_identity_check(b, a, &q1, &q2, f, g).unwrap();
    assert!(chk.gap < 1e-3, "{chk:?}");
    assert!(chk.lhs.abs() > 0.0);
}

#[test]
fn fem_rejects_orders_above_one() {
    let (b, _) = small_disk();
    let spec = PolyharmonicSpec::single(1.5).unwrap();
    assert!(matches!(b.energy_matrix(&spec), Err(Error::Spec(_))));
}
