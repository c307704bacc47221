//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::sync::Arc;
use std::time::{Duration, Instant};

use hyperfrac::entangle::*;
use hyperfrac::geometry::{Dim, HyperPoint};
use hyperfrac::inverse::*;
use hyperfrac::operator::*;
use hyperfrac::solver::radial::RadialBackend;
use hyperfrac::solver::*;
use hyperfrac::spectral::*;
use hyperfrac::Result;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn bump(plan: &HelgasonTransform, a: f64) -> RadialFunction {
    plan.radial_fn(|r| if r < a { (1.0 - (r / a).powi(2)).powi(8) } else { 0.0 })
        .unwrap()
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

fn radial_backend(base: MeshConfig, h: f64) -> Result<RadialBackend> {
    RadialBackend::new(build_mesh(&MeshConfig { h, ..base })?)
}

const BUMP_RADII: [f64; 5] = [2.0, 2.5, 3.0, 3.5, 4.0];

fn c01_plancherel() -> Result<Outcome> {
    let plan = HelgasonTransform::shared(Dim::Three);
    let mut worst = 0.0f64;
    for a in BUMP_RADII {
        let f = bump(&plan, a);
        let l2 = f.l2_norm().powi(2);
        let spec = plan.spectral_energy(&plan.forward(&f)?);
        worst = worst.max((l2 - spec).abs() / l2);
    }
    outcome(worst < 1e-6, format!("max relative error {worst:.3e} over 5 bumps"))
}

fn c02_three_routes() -> Result<Outcome> {
    let plan = HelgasonTransform::shared(Dim::Three);
    let f = bump(&plan, 2.0);
    let origin = HyperPoint::origin(3);
    let (mut heat_gap, mut si_gap) = (0.0f64, 0.0f64);
    for s in [0.25, 0.5, 0.75] {
        let m = multiplier_apply(&plan, &f, s)?;
        let b = balakrishnan_apply(&plan, &f, s, &BalakrishnanConfig::default())?;
        heat_gap = heat_gap.max(m.sub(&b).l2_norm() / m.l2_norm());
        let si = singular_integral_apply(&f, &origin, s, &SingularIntegralConfig::default())?;
        let m0 = m.eval(0.0);
        si_gap = si_gap.max((si - m0).abs() / m0.abs());
    }
    outcome(
        heat_gap < 1e-5 && si_gap < 1e-3,
        format!("multiplier vs semigroup {heat_gap:.3e}, vs singular integral at e0 {si_gap:.3e}"),
    )
}

/// (min, max) of p_t/bound over a log-t by uniform-ρ grid with `k` points per axis.
fn sandwich(k: usize) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let (lt0, lt1) = (1e-3f64.ln(), 50f64.ln());
    for i in 0..k {
        let t = (lt0 + (lt1 - lt0) * i as f64 / (k - 1) as f64).exp();
        for j in 0..k {
            let rho = 20.0 * j as f64 / (k - 1) as f64;
            let r = (ln_heat_kernel(rho, t, Dim::Three) - ln_heat_kernel_bound(rho, t, Dim::Three)).exp();
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

fn c03_heat_sandwich() -> Result<Outcome> {
    let (c1, c2) = sandwich(101);
    let (d1, d2) = sandwich(201);
    let drift = ((d1 / c1 - 1.0).abs()).max((d2 / c2 - 1.0).abs());
    outcome(
        c1 > 0.0 && c2.is_finite() && drift < 0.05,
        format!("c1 = {c1:.6e}, c2 = {c2:.6e}; change under grid doubling {drift:.2e}"),
    )
}

fn c04_semigroup() -> Result<Outcome> {
    let plan = HelgasonTransform::shared(Dim::Three);
    let f = bump(&plan, 2.0);
    let mut worst = 0.0f64;
    for t in [0.1, 1.0] {
        for t2 in [0.1, 1.0] {
            let composed = plan.semigroup_apply(&plan.semigroup_apply(&f, t2)?, t)?;
            let direct = plan.semigroup_apply(&f, t + t2)?;
            worst = worst.max(composed.sub(&direct).l2_norm() / direct.l2_norm());
        }
    }
    outcome(worst < 1e-6, format!("max relative defect {worst:.3e}"))
}

fn c05_kernel_asymptotics() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    for dim in [Dim::Two, Dim::Three] {
        let n = dim.n() as f64;
        let s = 0.5;
        // small ρ: 60 log-spaced points in [1e−4, 1]; large ρ: 60 points in [1, 30]
        let small: Vec<f64> = (0..60).map(|k| 10f64.powf(-4.0 + 4.0 * k as f64 / 59.0)).collect();
        let large: Vec<f64> = (0..60).map(|k| 1.0 + 29.0 * k as f64 / 59.0).collect();
        let near = small
            .iter()
            .map(|r| Ok(kernel_k(*r, dim, s)? * r.powf(n + 2.0 * s)))
            .collect::<Result<Vec<f64>>>()?;
        let far = large
            .iter()
            .map(|r| Ok(kernel_k(*r, dim, s)? * r.powf(1.0 + s) * ((n - 1.0) * r).exp()))
            .collect::<Result<Vec<f64>>>()?;
        for (name, v) in [("near", &near), ("far", &far)] {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(0.0, f64::max);
            ok &= lo > 0.0 && hi.is_finite();
            parts.push(format!("n={} {name} [{lo:.3e}, {hi:.3e}]", dim.n()));
        }
    }
    outcome(ok, parts.join("; "))
}

fn c06_sobolev_mapping() -> Result<Outcome> {
    let plan = HelgasonTransform::shared(Dim::Three);
    let mut worst = 0.0f64;
    for a in BUMP_RADII {
        let f = bump(&plan, a);
        for (p, r) in [(0.5, 1.0), (0.75, 2.0)] {
            let lhs = sobolev_norm(&plan, &multiplier_apply(&plan, &f, p)?, SobolevIndex(r - 2.0 * p))?;
            let rhs = sobolev_norm(&plan, &f, SobolevIndex(r))?;
            worst = worst.max(lhs / rhs);
        }
    }
    outcome(worst <= 1.0 + 1e-8, format!("max norm ratio {worst:.10}"))
}

fn c07_manufactured() -> Result<Outcome> {
    let plan = HelgasonTransform::shared(Dim::Three);
    let spec = PolyharmonicSpec::single(0.5)?;
    let a = 1.8;
    let exact = move |r: f64| if r < a { (1.0 - (r / a).powi(2)).powi(8) } else { 0.0 };
    let pu = multiplier_apply(&plan, &plan.radial_fn(exact)?, 0.5)?;
    let mut errors = Vec::new();
    for h in [0.05, 0.025, 0.0125] {
        let b = radial_backend(MeshConfig::radial_default(), h)?;
        let energy = b.energy_matrix(&spec)?;
        let q = Potential::ball_indicator(&b, 0.5, 1.0);
        let sys = StiffnessSystem::new(&b, &energy, &q)?;
        let load = b.load_vector(&sys.interior, |r| pu.eval(r) + if r < 0.5 { exact(r) } else { 0.0 });
        let proj = b.project(exact)?;
        let f = DVector::from_iterator(sys.exterior.len(), sys.exterior.iter().map(|&e| proj[e]));
        let u = solve_exterior(&sys, &f, Some(&load))?;
        errors.push(b.l2_error_within(&u.coeffs, exact, 1.0));
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let pass = orders.iter().all(|p| *p >= 0.5);
    outcome(
        pass,
        format!(
            "L2(Omega) errors {:.3e} {:.3e} {:.3e}; orders {:.2} {:.2}",
            errors[0], errors[1], errors[2], orders[0], orders[1]
        ),
    )
}

fn c08_dn_symmetry() -> Result<Outcome> {
    let b = radial_backend(MeshConfig::recovery_default(), 0.025)?;
    let energy = b.energy_matrix(&PolyharmonicSpec::single(0.5)?)?;
    let sys = StiffnessSystem::new(&b, &energy, &Potential::ball_indicator(&b, 0.5, 1.0))?;
    let w1 = b.window_modes(Window::W1, 8)?;
    let asym = assemble_dn(&sys, &w1, &w1)?.asymmetry();

    // f and f + δ with δ supported on the Ω dofs, both read through the exterior trace
    let w2 = b.window_modes(Window::W2, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut change = 0.0f64;
    for f in &w1 {
        let full = sys.embed_exterior(f);
        let mut perturbed = full.clone();
        for &i in &sys.interior {
            perturbed[i] += rng.gen_range(-1.0..1.0);
        }
        let trace = |v: &DVector<f64>| DVector::from_iterator(sys.exterior.len(), sys.exterior.iter().map(|&e| v[e]));
        let a = assemble_dn(&sys, &[trace(&full)], &w2)?;
        let p = assemble_dn(&sys, &[trace(&perturbed)], &w2)?;
        change = change.max(a.sub(&p).values.norm() / a.values.norm());
    }
    outcome(
        asym < 1e-8 && change < 1e-10,
        format!("asymmetry {asym:.3e}; change under Omega perturbation {change:.3e}"),
    )
}

fn c09_integral_identity() -> Result<Outcome> {
    let b = radial_backend(MeshConfig::recovery_default(), 0.05)?;
    let f = b.window_modes(Window::W1, 5)?;
    let g = b.window_modes(Window::W2, 5)?;
    let cases = [
        (0.5, 0.5, 1.0, 0.0),
        (0.5, 0.5, 0.5, -0.5),
        (0.5, 1.0, 2.0, 0.5),
        (0.5, 0.25, 3.0, 1.0),
        (0.5, 0.75, -0.3, 0.2),
        (0.25, 0.5, 1.0, 0.0),
        (0.25, 0.9, -0.5, 0.8),
        (0.75, 0.5, 1.0, 0.0),
        (0.75, 0.3, 4.0, -1.0),
        (0.75, 1.0, 0.6, 0.1),
    ];
    let mut worst = 0.0f64;
    let mut energies: Vec<(f64, DMatrix<f64>)> = Vec::new();
    for (k, &(s, a, c1, c2)) in cases.iter().enumerate() {
        if !energies.iter().any(|(t, _)| *t == s) {
            energies.push((s, b.energy_matrix(&PolyharmonicSpec::single(s)?)?));
        }
        let energy = &energies.iter().find(|(t, _)| *t == s).expect("cached").1;
        let q1 = Potential::ball_indicator(&b, a, c1);
        let q2 = Potential::ball_indicator(&b, 1.0, c2);
        let chk = integral_identity_check(&b, energy, &q1, &q2, &f[k % 5], &g[(k + 2) % 5])?;
        worst = worst.max(chk.gap);
    }
    outcome(worst < 1e-6, format!("max gap {worst:.3e} over 10 cases"))
}

fn c10_entanglement() -> Result<Outcome> {
    let grid = TimeGrid::new(1e-4, 1e3, 0.25)?;
    let basis = bump_profiles(&grid, 4, 2.0);
    let mut sigmas = Vec::new();
    for m in [8, 12, 16, 24] {
        sigmas.push(decoupling_test(&[0.3, 0.7], &grid, &basis, MomentWindow::new(1, m)?)?.sigma_min);
    }
    let decoupled = sigmas[0] > 0.0 && sigmas.windows(2).all(|w| w[1] >= w[0]);

    let res = decoupling_test(&[0.5, 0.5], &grid, &basis, MomentWindow::default())?;
    let null_ok = res.resonant
        && res.sigma_min < 1e-10
        && res.minimizer[0].iter().zip(&res.minimizer[1]).all(|(a, b)| (a + b).abs() < 1e-8);

    let plan = HelgasonTransform::new(
        Arc::new(RadialGrid::new(Dim::Three, 10.0, 2048)?),
        Arc::new(SpectralGrid::new(Dim::Three, 100.0, 2048)?),
    )?;
    let u = ring(&plan, 2.0, 3.0, 24);
    let mut residual = 0.0f64;
    for s in [0.25, 0.5, 0.75] {
        for m in [1, 2] {
            residual = residual.max(resonance_counterexample(&plan, &u, s, m, 1.0)?.residual);
        }
    }
    outcome(
        decoupled && null_ok && residual < 1e-8,
        format!(
            "sigma_min over M=8,12,16,24: {:.3e} {:.3e} {:.3e} {:.3e}; resonant sigma_min {:.3e}; resonance residual {residual:.3e}",
            sigmas[0], sigmas[1], sigmas[2], sigmas[3], res.sigma_min
        ),
    )
}

fn c11_heat_trace() -> Result<Outcome> {
    let mut ok = true;
    let mut parts = Vec::new();
    let kappa = 1.0;
    for dim in [Dim::Three, Dim::Two] {
        let plan = HelgasonTransform::shared(dim);
        let v = ring(&plan, 1.0, 3.0, 8);
        let x = HyperPoint::origin(dim.n());
        let small = TimeGrid::new(1e-3, 1e-1, 0.25)?;
        let large = TimeGrid::new(5.0, 50.0, 0.5)?;
        let fs = heat_trace_f(&v, &x, 0.5, &small.nodes, kappa)?;
        let fl = heat_trace_f(&v, &x, 0.5, &large.nodes, kappa)?;
        let es = fit_envelope(&small.nodes, &fs, DecayRegime::SmallTime, 1e-3, 1e-1)?;
        let el = fit_envelope(&large.nodes, &fl, DecayRegime::LargeTime, 5.0, 50.0)?;
        let n1 = dim.n() as f64 - 1.0;
        let (ds, dl) = (es.relative_deviation(kappa * kappa / 4.0), el.relative_deviation(n1 * n1 / 4.0));
        ok &= ds < 0.25 && dl < 0.25;
        parts.push(format!(
            "n={} small {:.4} (dev {ds:.3}), large {:.4} (dev {dl:.3})",
            dim.n(),
            es.delta,
            el.delta
        ));
    }
    outcome(ok, parts.join("; "))
}

fn c12_runge() -> Result<Outcome> {
    let b = radial_backend(MeshConfig::recovery_default(), 0.05)?;
    let energy = b.energy_matrix(&PolyharmonicSpec::single(0.5)?)?;
    let sys = StiffnessSystem::new(&b, &energy, &Potential::ball_indicator(&b, 0.5, 1.0))?;
    let controls = b.window_modes(Window::W1, 32)?;
    let nc = b.omega_cells().len();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let far = solve_exterior(&sys, &b.window_modes(Window::W2, 1)?[0], None)?;
    let targets = [
        ("constant", RungeTarget::Cellwise(vec![1.0; nc])),
        ("W2 solution", RungeTarget::Function(far.coeffs)),
        ("random", RungeTarget::Cellwise((0..nc).map(|_| rng.gen_range(-1.0..1.0)).collect())),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, t) in &targets {
        let e = [8, 16, 32]
            .iter()
            .map(|k| {
                let p = RungeProblem {
                    target: t.clone(),
                    controls: controls[..*k].to_vec(),
                    beta: 1e-12,
                };
                Ok(runge_approximate(&b, &sys, &p)?.relative_error)
            })
            .collect::<Result<Vec<f64>>>()?;
        ok &= e[1] <= e[0] && e[2] <= e[1];
        parts.push(format!("{name} {:.3e} {:.3e} {:.3e}", e[0], e[1], e[2]));
    }
    outcome(ok, parts.join("; "))
}

fn c13_recovery() -> Result<Outcome> {
    let spec = PolyharmonicSpec::single(0.5)?;
    let base = MeshConfig::recovery_default();
    let coarse = RadialBackend::new(build_mesh(&base)?)?;
    let fine = RadialBackend::new(build_mesh(&base.refined())?)?;
    let sc = DnSetup::new(&coarse, &spec, 32, 32)?;
    let sf = DnSetup::transferred(&fine, &coarse, &spec, &sc)?;

    let dn_fine0 = sf.dn(&fine, &Potential::zero(&fine))?;
    let dn_coarse0 = sc.dn(&coarse, &Potential::zero(&coarse))?;
    let gap_fine = |q: &dyn Fn(&RadialBackend) -> Potential| -> Result<DnMatrix> {
        Ok(sf.dn(&fine, &q(&fine))?.sub(&dn_fine0))
    };
    let gap_coarse = |q: &dyn Fn(&RadialBackend) -> Potential| -> Result<DnMatrix> {
        Ok(sc.dn(&coarse, &q(&coarse))?.sub(&dn_coarse0))
    };
    let star = |b: &RadialBackend| Potential::ball_indicator(b, 0.5, 0.5);
    let other = |b: &RadialBackend| Potential::ball_indicator(b, 0.25, 0.5);

    // Born recovery from fine-mesh data inverted on the coarse mesh
    let data = gap_fine(&star)?;
    let cfg = RecoveryConfig {
        n_rings: 2,
        ..Default::default()
    };
    let floor = model_floor(&coarse, &sc, &data, cfg.n_rings)?;
    let rec = born_recover(&coarse, &sc, &data, floor, &cfg)?;
    let err = relative_l2_error(&coarse, &rec.potential, &star(&coarse));

    // distinguishability against the two-mesh discretization floor
    let noise = dn_distance(&data, &gap_coarse(&star)?);
    let separation = dn_distance(&data, &gap_fine(&other)?);
    let ratio = separation / noise;
    outcome(
        err < 0.3 && ratio > 10.0,
        format!(
            "Born relative L2 error {err:.3}; DN separation {separation:.3e} vs two-mesh floor {noise:.3e} (ratio {ratio:.1})"
        ),
    )
}

type Criterion = (&'static str, fn() -> Result<Outcome>, Duration);

fn main() {
    let criteria: [Criterion; 13] = [
        ("Plancherel identity", c01_plancherel, Duration::from_secs(10)),
        ("operator three-route equivalence", c02_three_routes, Duration::from_secs(120)),
        ("heat-kernel sandwich", c03_heat_sandwich, Duration::from_secs(30)),
        ("semigroup law", c04_semigroup, Duration::from_secs(10)),
        ("kernel asymptotics", c05_kernel_asymptotics, Duration::from_secs(30)),
        ("Sobolev mapping", c06_sobolev_mapping, Duration::from_secs(10)),
        ("manufactured-solution convergence", c07_manufactured, Duration::from_secs(120)),
        ("DN symmetry and trace dependence", c08_dn_symmetry, Duration::from_secs(60)),
        ("integral identity", c09_integral_identity, Duration::from_secs(120)),
        ("entanglement evidence", c10_entanglement, Duration::from_secs(60)),
        ("heat-trace envelopes", c11_heat_trace, Duration::from_secs(60)),
        ("Runge monotonicity", c12_runge, Duration::from_secs(180)),
        ("recovery distinguishability", c13_recovery, Duration::from_secs(600)),
    ];
    let mut failures = 0;
    for (k, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} | {name} | {detail} | {:.2}s (budget {}s)",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
