use std::sync::Arc;

use hyperfrac::entangle::*;
use hyperfrac::geometry::{Dim, HyperPoint};
use hyperfrac::specfun::bessel_k;
use hyperfrac::spectral::{HelgasonTransform, RadialFunction, RadialGrid, SpectralGrid};
use hyperfrac::Error;

/// Adaptive Simpson on [a, b], independent of the Gauss machinery under test.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn default_grid() -> TimeGrid {
    TimeGrid::new(1e-4, 1e3, 0.25).unwrap()
}

#[test]
fn moments_of_a_reference_profile() {
    let grid = default_grid();
    let f = grid.sample(|t| t * t * (-t - 1.0 / t).exp());
    for m in 0..=6 {
        let est = grid.moment(&f, m).unwrap();
        // ∫ t^{2−m} e^{−t−1/t} dt = 2 K_{3−m}(2)
        let closed = 2.0 * bessel_k((3 - m).abs() as f64, 2.0).unwrap();
        let p = 2.0 - m as f64;
        let g = move |t: f64| t.powf(p) * (-t - 1.0 / t).exp();
        let simpson = adaptive_simpson(&g, 1e-3, 1.0, 1e-14) + adaptive_simpson(&g, 1.0, 60.0, 1e-14);
        assert!(((est.value - closed) / closed).abs() < 1e-8, "m={m}: {} vs {closed}", est.value);
        assert!(((simpson - closed) / closed).abs() < 1e-8, "oracle disagrees at m={m}");
        assert!(est.error < 1e-6 * closed.abs());
    }
}

#[test]
fn moment_sum_is_linear_and_vanishes_on_zero() {
    let grid = default_grid();
    let a = grid.sample(|t| t * (-t - 1.0 / t).exp());
    let b = grid.sample(|t| (-t / 2.0 - 2.0 / t).exp());
    let window = MomentWindow::new(1, 6).unwrap();
    let zero = MomentSystem::new(vec![0.3, 0.6], grid.clone(), &[vec![0.0; grid.len()], vec![0.0; grid.len()]], window)
        .unwrap();
    let sys = |p: Vec<f64>, q: Vec<f64>| MomentSystem::new(vec![0.3, 0.6], grid.clone(), &[p, q], window).unwrap();
    let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
    for m in window.indices() {
        assert_eq!(moment_sum(&zero, m).unwrap().value, 0.0);
        let z = vec![0.0; grid.len()];
        let lhs = moment_sum(&sys(combo.clone(), b.clone()), m).unwrap().value;
        let rhs = 2.0 * moment_sum(&sys(a.clone(), z.clone()), m).unwrap().value
            - 3.0 * moment_sum(&sys(b.clone(), z.clone()), m).unwrap().value
            + moment_sum(&sys(z.clone(), b.clone()), m).unwrap().value;
        assert!(((lhs - rhs) / lhs).abs() < 1e-12, "m={m}");
    }
    assert!(moment_sum(&zero, 0).is_err());
}

#[test]
fn undominated_growth_near_zero_is_flagged() {
    // e^{−0.001/t} cannot control t^{−12} on a grid starting at 1e−4
    let grid = TimeGrid::new(1e-4, 1e3, 0.25).unwrap();
    let f = grid.sample(|t| (-t - 0.001 / t).exp());
    assert!(matches!(grid.moment(&f, 12), Err(Error::Quadrature(_))));
}

#[test]
fn single_exponent_decoupling() {
    let grid = default_grid();
    let basis = bump_profiles(&grid, 8, 2f64.sqrt());
    let r = decoupling_test(&[0.5], &grid, &basis, MomentWindow::new(0, 12).unwrap()).unwrap();
    assert!(r.sigma_min > 1e-6, "{}", r.sigma_min);
    assert!(!r.resonant);
    assert_eq!(r.m_range, [0, 12]);
}

#[test]
fn distinct_exponents_decouple_and_improve_with_the_window() {
    let grid = default_grid();
    let basis = bump_profiles(&grid, 4, 2.0);
    let mut last = 0.0;
    for m in [8, 12, 16, 24] {
        let r = decoupling_test(&[0.3, 0.7], &grid, &basis, MomentWindow::new(1, m).unwrap()).unwrap();
        assert!(r.sigma_min > 1e-7);
        assert!(r.sigma_min >= last, "M={m}: {} < {last}", r.sigma_min);
        last = r.sigma_min;
    }
}

#[test]
fn repeated_exponent_has_an_explicit_null_vector() {
    let grid = default_grid();
    let basis = bump_profiles(&grid, 4, 2.0);
    let r = decoupling_test(&[0.5, 0.5], &grid, &basis, MomentWindow::default()).unwrap();
    assert!(r.resonant);
    assert!(r.sigma_min < 1e-10, "{}", r.sigma_min);
    // opposite-sign equal profiles
    for (a, b) in r.minimizer[0].iter().zip(&r.minimizer[1]) {
        assert!((a + b).abs() < 1e-8);
    }
    // and the explicit combination f_1 = φ, f_2 = −φ has vanishing moment sums
    let phi = basis[1].clone();
    let neg: Vec<f64> = phi.iter().map(|v| -v).collect();
    let ms = MomentSystem {
        alphas: vec![0.5, 0.5],
        grid: grid.clone(),
        f_values: nalgebra::DMatrix::from_fn(2, grid.len(), |k, i| if k == 0 { phi[i] } else { neg[i] }),
        window: MomentWindow::default(),
    };
    for m in 1..=13 {
        assert_eq!(moment_sum(&ms, m).unwrap().value, 0.0);
    }
}

#[test]
fn sigma_min_ignores_profile_scaling() {
    let grid = default_grid();
    let basis = bump_profiles(&grid, 4, 2.0);
    let w = MomentWindow::new(1, 16).unwrap();
    let base = decoupling_test(&[0.3, 0.7], &grid, &basis, w).unwrap();
    let mut scaled = basis.clone();
    for v in scaled[2].iter_mut() {
        *v *= 37.5;
    }
    let r = decoupling_test(&[0.3, 0.7], &grid, &scaled, w).unwrap();
    assert!(((r.sigma_min - base.sigma_min) / base.sigma_min).abs() < 1e-12);
}

#[test]
fn short_window_is_rejected() {
    let grid = default_grid();
    let basis = bump_profiles(&grid, 8, 2.0);
    assert!(decoupling_test(&[0.3, 0.7], &grid, &basis, MomentWindow::default()).is_err());
}

fn ring(plan: &HelgasonTransform, a: f64, b: f64, power: i32) -> RadialFunction {
    let (c, w) = (0.5 * (a + b), 0.5 * (b - a));
    plan.radial_fn(|r| {
        let x = (r - c) / w;
        if x.abs() < 1.0 {
            (1.0 - x * x).powi(power)
        } else {
            0.0
        }
    })
    .unwrap()
}

#[test]
fn heat_trace_envelopes() {
    for dim in [Dim::Three, Dim::Two] {
        let plan = HelgasonTransform::shared(dim);
        let v = ring(&plan, 1.0, 3.0, 8);
        let x = HyperPoint::origin(dim.n());
        let small = TimeGrid::new(1e-3, 1e-1, 0.25).unwrap();
        let large = TimeGrid::new(5.0, 50.0, 0.5).unwrap();
        let fs = heat_trace_f(&v, &x, 0.5, &small.nodes, 1.0).unwrap();
        let fl = heat_trace_f(&v, &x, 0.5, &large.nodes, 1.0).unwrap();
        assert!(fs.iter().chain(&fl).all(|f| *f < 0.0));
        let es = fit_envelope(&small.nodes, &fs, DecayRegime::SmallTime, 1e-3, 1e-1).unwrap();
        let el = fit_envelope(&large.nodes, &fl, DecayRegime::LargeTime, 5.0, 50.0).unwrap();
        let n1 = dim.n() as f64 - 1.0;
        assert!(es.relative_deviation(0.25) < 0.25, "n={} small δ = {}", dim.n(), es.delta);
        assert!(el.relative_deviation(n1 * n1 / 4.0) < 0.25, "n={} large δ = {}", dim.n(), el.delta);
    }
}

#[test]
fn heat_trace_requires_separation() {
    let plan = HelgasonTransform::shared(Dim::Three);
    let v = ring(&plan, 0.5, 2.0, 8);
    let x = HyperPoint::origin(3);
    assert!(matches!(heat_trace_f(&v, &x, 0.5, &[0.1], 1.0), Err(Error::Support(_))));
    let zero = plan.radial_fn(|_| 0.0).unwrap();
    assert!(heat_trace_f(&zero, &x, 0.5, &[0.1, 1.0], 1.0).unwrap().iter().all(|f| *f == 0.0));
}

#[test]
fn heat_trace_off_center() {
    // x at distance 0.3 from e₀; v supported in r ≥ 2 stays 1.7 away
    let plan = HelgasonTransform::shared(Dim::Three);
    let v = ring(&plan, 2.0, 3.5, 8);
    let x = hyperfrac::geometry::polar_to_point(&hyperfrac::geometry::PolarCoord::axial(0.3, 3));
    let f = heat_trace_f(&v, &x, 0.4, &[0.5, 1.0, 2.0], 1.5).unwrap();
    assert!(f.iter().all(|v| *v < 0.0 && v.is_finite()));
    assert!(matches!(heat_trace_f(&v, &x, 0.4, &[1.0], 1.8), Err(Error::Support(_))));
}

#[test]
fn resonance_residuals() {
    let radial = Arc::new(RadialGrid::new(Dim::Three, 10.0, 2048).unwrap());
    let spectral = Arc::new(SpectralGrid::new(Dim::Three, 100.0, 2048).unwrap());
    let plan = HelgasonTransform::new(radial, spectral).unwrap();
    let u = ring(&plan, 2.0, 3.0, 24);
    for s in [0.25, 0.5, 0.75] {
        for m in [1, 2] {
            let r = resonance_counterexample(&plan, &u, s, m, 1.0).unwrap();
            assert!(r.residual < 1e-8, "s={s} m={m}: {}", r.residual);
            assert_eq!(r.leak_u2, 0.0);
            assert!(r.leak_u1 < 1e-6, "s={s} m={m}: leak {}", r.leak_u1);
        }
    }
    let r = resonance_counterexample(&plan, &u, 0.5, 0, 1.0).unwrap();
    assert!(r.residual < 1e-12);
}

#[test]
fn compact_support_bound() {
    let plan = HelgasonTransform::shared(Dim::Three);
    let w = DecayWeight::new(2.0, Dim::Three).unwrap();
    let u = plan.radial_fn(|r| if r < 1.0 { (1.0 - r * r).powi(4) } else { 0.0 }).unwrap();
    let probes = |k: usize| -> Vec<RadialFunction> {
        (0..k)
            .map(|j| {
                let c = 3.0 * j as f64 / k as f64;
                plan.radial_fn(|r| (-(r - c) * (r - c) / 0.5).exp()).unwrap()
            })
            .collect()
    };
    let coarse = compact_support_decay_check(&plan, &u, 1.0, &w, &probes(6), 0.0).unwrap();
    let fine = compact_support_decay_check(&plan, &u, 1.0, &w, &probes(12), 0.0).unwrap();
    assert!(coarse.constant.is_finite() && coarse.constant > 0.0);
    assert!(coarse.constant <= coarse.a_priori);
    assert!(fine.constant <= fine.a_priori);
    assert!((fine.constant / coarse.constant - 1.0).abs() < 0.1);
    let u3 = u.scaled(3.0);
    let tripled = compact_support_decay_check(&plan, &u3, 1.0, &w, &probes(6), 0.0).unwrap();
    assert!((tripled.constant / coarse.constant - 3.0).abs() < 1e-12);
    let zero = plan.radial_fn(|_| 0.0).unwrap();
    assert_eq!(compact_support_decay_check(&plan, &zero, 1.0, &w, &probes(6), 0.0).unwrap().constant, 0.0);
    assert!(compact_support_decay_check(&plan, &u, 0.5, &w, &probes(6), 0.0).is_err());
}
