use hyperfrac::geometry::{boost_from_origin, distance, point_to_polar, polar_to_point, PolarCoord};
use hyperfrac::specfun::{bessel_k, bessel_k_scaled, gamma, ln_gamma};
use hyperfrac::spectral::HelgasonTransform;
use hyperfrac::Dim;
use proptest::prelude::*;

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
    v.into_iter().map(|x| x / n).collect()
}

fn point(r: f64, dir: Vec<f64>) -> hyperfrac::HyperPoint {
    polar_to_point(&PolarCoord::new(r, unit(dir)).unwrap())
}

fn dir() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 3).prop_filter("nonzero", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_is_a_metric(r1 in 0.0..6.0f64, r2 in 0.0..6.0f64, r3 in 0.0..6.0f64, d1 in dir(), d2 in dir(), d3 in dir()) {
        let (x, y, z) = (point(r1, d1), point(r2, d2), point(r3, d3));
        let (xy, yx) = (distance(&x, &y), distance(&y, &x));
        prop_assert!((xy - yx).abs() <= 1e-10 * (1.0 + xy));
        prop_assert!(distance(&x, &x) < 1e-6);
        prop_assert!(xy <= distance(&x, &z) + distance(&z, &y) + 1e-7);
    }

    #[test]
    fn polar_round_trip(r in 0.01..12.0f64, d in dir()) {
        let x = point(r, d.clone());
        let p = point_to_polar(&x);
        prop_assert!((p.r - r).abs() < 1e-9 * (1.0 + r));
        for (a, b) in p.omega().iter().zip(unit(d)) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn boost_preserves_distance_to_base(r1 in 0.0..5.0f64, r2 in 0.0..5.0f64, d1 in dir(), d2 in dir()) {
        let x = point(r1, d1);
        let y = point(r2, d2);
        let moved = boost_from_origin(&x, &y);
        prop_assert!((distance(&x, &moved) - r2).abs() < 1e-8 * (1.0 + r2));
    }

    #[test]
    fn gamma_recurrence(x in 0.05..30.0f64) {
        let g = gamma(x).unwrap();
        let g1 = gamma(x + 1.0).unwrap();
        prop_assert!((g1 - x * g).abs() <= 1e-13 * g1.abs());
        prop_assert!((ln_gamma(x).unwrap() - g.ln()).abs() < 1e-12 * (1.0 + g.ln().abs()));
    }

    #[test]
    fn bessel_k_three_term_recurrence(nu in 0.05..4.0f64, x in 0.01..40.0f64) {
        // K_{ν+1} = K_{ν−1} + (2ν/x) K_ν, with K_{−μ} = K_μ
        let s = |m: f64| bessel_k_scaled(m.abs(), x).unwrap();
        let lhs = s(nu + 1.0);
        let rhs = s(nu - 1.0) + 2.0 * nu / x * s(nu);
        prop_assert!((lhs - rhs).abs() <= 1e-11 * lhs);
    }

    #[test]
    fn bessel_k_is_positive_and_decreasing(nu in 0.0..3.0f64, x in 0.01..30.0f64) {
        let a = bessel_k(nu, x).unwrap();
        let b = bessel_k(nu, x * 1.1).unwrap();
        prop_assert!(a > 0.0 && b < a);
    }

    #[test]
    fn helgason_transform_is_linear(a in 2.0..4.0f64, b in 2.0..4.0f64, c in -3.0..3.0f64) {
        let plan = HelgasonTransform::shared(Dim::Three);
        let bump = |w: f64| plan.radial_fn(move |r| if r < w { (1.0 - (r / w).powi(2)).powi(8) } else { 0.0 }).unwrap();
        let (f, g) = (bump(a), bump(b));
        let lhs = plan.forward(&f.add(&g.scaled(c))).unwrap();
        let rhs = plan.forward(&f).unwrap().add(&plan.forward(&g).unwrap().scaled(c));
        let scale = lhs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in lhs.values.iter().zip(&rhs.values) {
            prop_assert!((u - v).abs() <= 1e-12 * scale);
        }
    }
}

#[test]
fn geometry_and_specfun_run_in_single_precision() {
    let x = polar_to_point(&PolarCoord::<f32>::new(1.5, vec![1.0, 0.0, 0.0]).unwrap());
    let y = polar_to_point(&PolarCoord::<f32>::new(0.5, vec![-1.0, 0.0, 0.0]).unwrap());
    assert!((distance(&x, &y) - 2.0).abs() < 1e-4);
    assert!((gamma(5.0f32).unwrap() - 24.0).abs() < 1e-3);
    let k64 = bessel_k(0.5f64, 2.0).unwrap();
    let k32 = bessel_k(0.5f32, 2.0).unwrap();
    assert!((k32 as f64 - k64).abs() < 1e-5 * k64);
}
