use hyperfrac::entangle::{bump_profiles, decoupling_test, MomentWindow, TimeGrid};
use hyperfrac::geometry::{Dim, HyperPoint};
use hyperfrac::io::{Cell, Table};
use hyperfrac::operator::{
    balakrishnan_apply_frac, multiplier_apply, singular_integral_apply, BalakrishnanConfig, FracPower,
    PolyharmonicSpec, SingularIntegralConfig,
};
use hyperfrac::solver::{dn_from_solutions, solve_family, Potential, StiffnessSystem, Window};
use hyperfrac::spectral::{ln_heat_kernel, ln_heat_kernel_bound, HelgasonTransform, RadialFunction};
use nalgebra::DVector;
use serde_json::json;

use super::{dim, Backend};
use crate::config::{Backend as Route, Entangle, HeatkernelBounds, OperatorEquivalence, TransformCheck};
use crate::error::CliError;
use crate::output::{Check, Outputs, Relation};

fn bump(plan: &HelgasonTransform, a: f64) -> Result<RadialFunction, CliError> {
    Ok(plan.radial_fn(|r| if r < a { (1.0 - (r / a).powi(2)).powi(8) } else { 0.0 })?)
}

pub fn transform_check(c: &TransformCheck, out: &mut Outputs) -> Result<(), CliError> {
    let plan = HelgasonTransform::shared(dim(c.n)?);
    let mut norms = Table::new(&["bump", "radius", "l2_squared", "spectral_energy", "relative_error"]);
    let names: Vec<String> = std::iter::once("lambda".to_string())
        .chain((0..c.bump_radii.len()).map(|k| format!("fhat_{k}")))
        .collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut spectra = Table::new(&refs);
    let mut worst = 0.0f64;
    let mut transforms = Vec::new();
    for (k, a) in c.bump_radii.iter().enumerate() {
        let f = bump(&plan, *a)?;
        let fh = plan.forward(&f)?;
        let l2 = f.l2_norm().powi(2);
        let e = plan.spectral_energy(&fh);
        let rel = (l2 - e).abs() / l2;
        worst = worst.max(rel);
        norms.push(vec![Cell::Index(k), Cell::Value(*a), Cell::Value(l2), Cell::Value(e), Cell::Value(rel)]);
        transforms.push(fh.values);
    }
    for (j, l) in plan.spectral.nodes().iter().enumerate() {
        let mut row = vec![Cell::Value(*l)];
        row.extend(transforms.iter().map(|t| Cell::Value(t[j])));
        spectra.push(row);
    }
    out.table("plancherel.csv", &norms)?;
    out.table("transform.csv", &spectra)?;
    out.check(Check::new("plancherel_relerr", worst, Relation::Less, c.tolerances.plancherel));
    out.payload = json!({ "n": c.n, "plancherel_relerr": worst });
    Ok(())
}

pub fn operator_equivalence(c: &OperatorEquivalence, out: &mut Outputs) -> Result<(), CliError> {
    match c.backend {
        Route::Spectral => spectral_routes(c, out),
        Route::Fem => fem_routes(c, out),
    }
}

fn spectral_routes(c: &OperatorEquivalence, out: &mut Outputs) -> Result<(), CliError> {
    let plan = HelgasonTransform::shared(dim(c.dim())?);
    let f = bump(&plan, c.bump_radius)?;
    let origin = HyperPoint::origin(c.dim());
    let mut table = Table::new(&["s", "semigroup_relerr", "multiplier_at_e0", "singular_integral_at_e0", "singular_integral_relerr"]);
    let mut profiles = Vec::new();
    let (mut heat_gap, mut si_gap) = (0.0f64, None::<f64>);
    for &s in &c.s {
        let m = multiplier_apply(&plan, &f, s)?;
        let b = balakrishnan_apply_frac(&plan, &f, FracPower::new(s)?, &BalakrishnanConfig::default())?;
        let gap = m.sub(&b).l2_norm() / m.l2_norm();
        heat_gap = heat_gap.max(gap);
        let m0 = m.eval(0.0);
        // the kernel form exists for 0 < s < 1 only; NaN marks "not applicable"
        let (si, rel) = if s < 1.0 {
            let si = singular_integral_apply(&f, &origin, s, &SingularIntegralConfig::default())?;
            let rel = (si - m0).abs() / m0.abs();
            si_gap = Some(si_gap.unwrap_or(0.0).max(rel));
            (si, rel)
        } else {
            (f64::NAN, f64::NAN)
        };
        table.push(vec![Cell::Value(s), Cell::Value(gap), Cell::Value(m0), Cell::Value(si), Cell::Value(rel)]);
        profiles.push((m, b));
    }
    let mut cols = vec!["r".to_string(), "f".to_string()];
    for k in 0..c.s.len() {
        cols.push(format!("multiplier_{k}"));
        cols.push(format!("semigroup_{k}"));
    }
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut prof = Table::new(&refs);
    let n_r = ((c.bump_radius + 2.0) / 0.02).round() as usize;
    for i in 0..=n_r {
        let r = i as f64 * 0.02;
        let mut row = vec![Cell::Value(r), Cell::Value(f.eval(r))];
        for (m, b) in &profiles {
            row.push(Cell::Value(m.eval(r)));
            row.push(Cell::Value(b.eval(r)));
        }
        prof.push(row);
    }
    out.table("routes.csv", &table)?;
    out.table("profiles.csv", &prof)?;
    out.check(Check::new("semigroup_relerr", heat_gap, Relation::Less, c.tolerances.semigroup));
    if let Some(g) = si_gap {
        out.check(Check::new("singular_integral_relerr", g, Relation::Less, c.tolerances.singular_integral));
    }
    out.payload = json!({
        "backend": "spectral",
        "n": c.dim(),
        "semigroup_relerr": heat_gap,
        "singular_integral_relerr": si_gap,
        "s": c.s,
    });
    Ok(())
}

fn fem_routes(c: &OperatorEquivalence, out: &mut Outputs) -> Result<(), CliError> {
    let backend = Backend::build(&c.mesh())?;
    let disc = backend.disc();
    let w1 = disc.window_modes(Window::W1, c.modes)?;
    let w2 = disc.window_modes(Window::W2, c.modes)?;
    let mut table = Table::new(&["s", "two_route_relerr"]);
    let mut worst = 0.0f64;
    for &s in &c.s {
        let spec = PolyharmonicSpec::single(s)?;
        let energy = disc.energy_matrix(&spec)?;
        let sys = StiffnessSystem::new(disc, &energy, &Potential::zero(disc))?;
        let sols = solve_family(&sys, &w1)?;
        let dn = dn_from_solutions(&sys, &sols, &w2);
        let full: Vec<DVector<f64>> = sols.into_iter().map(|u| u.coeffs).collect();
        let kernel = disc.kernel_dn(&spec, &full, &w2)?;
        let gap = (&kernel - &dn.values).norm() / dn.values.norm();
        worst = worst.max(gap);
        table.push(vec![Cell::Value(s), Cell::Value(gap)]);
    }
    out.table("routes.csv", &table)?;
    out.check(Check::new("two_route_relerr", worst, Relation::Less, c.tolerances.two_route));
    out.payload = json!({ "backend": "fem", "n": 2, "n_dofs": disc.n_dofs(), "two_route_relerr": worst });
    Ok(())
}

/// (min, max) of p_t/bound on a log-t by uniform-ρ grid, plus the samples.
fn sandwich(c: &HeatkernelBounds, d: Dim, k: usize, keep: bool) -> (f64, f64, Vec<[f64; 5]>) {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let (lt0, lt1) = (c.t_min.ln(), c.t_max.ln());
    let mut rows = Vec::new();
    for i in 0..k {
        let t = (lt0 + (lt1 - lt0) * i as f64 / (k - 1) as f64).exp();
        for j in 0..k {
            let rho = c.rho_max * j as f64 / (k - 1) as f64;
            let (lp, lb) = (ln_heat_kernel(rho, t, d), ln_heat_kernel_bound(rho, t, d));
            let r = (lp - lb).exp();
            lo = lo.min(r);
            hi = hi.max(r);
            if keep {
                rows.push([rho, t, lp, lb, r]);
            }
        }
    }
    (lo, hi, rows)
}

pub fn heatkernel_bounds(c: &HeatkernelBounds, out: &mut Outputs) -> Result<(), CliError> {
    let d = dim(c.n)?;
    let (c1, c2, rows) = sandwich(c, d, c.points, true);
    let (d1, d2, _) = sandwich(c, d, 2 * c.points - 1, false);
    let drift = (d1 / c1 - 1.0).abs().max((d2 / c2 - 1.0).abs());
    let mut t = Table::new(&["rho", "t", "ln_heat_kernel", "ln_bound", "ratio"]);
    for r in rows {
        t.push(r.iter().map(|v| Cell::Value(*v)).collect());
    }
    out.table("ratio.csv", &t)?;
    out.check(Check::new("c1", c1, Relation::Greater, 0.0));
    out.check(Check::new("c2", c2, Relation::Less, f64::MAX));
    out.check(Check::new("grid_stability", drift, Relation::Less, c.tolerances.grid_stability));
    out.payload = json!({ "n": c.n, "c1": c1, "c2": c2, "c1_doubled": d1, "c2_doubled": d2, "grid_change": drift });
    Ok(())
}

pub fn entangle(c: &Entangle, out: &mut Outputs) -> Result<(), CliError> {
    let grid = TimeGrid::new(c.grid.t_min, c.grid.t_max, c.grid.panel_width)?;
    let basis = bump_profiles(&grid, c.profiles, c.profile_ratio);
    let window = MomentWindow::new(c.window[0], c.window[1])?;
    let r = decoupling_test(&c.alphas, &grid, &basis, window)?;
    let mut sv = Table::new(&["index", "sigma"]);
    for (k, s) in r.singular_values.iter().enumerate() {
        sv.push(vec![Cell::Index(k), Cell::Value(*s)]);
    }
    let mut mv = Table::new(&["exponent", "profile", "coefficient"]);
    for (a, row) in r.minimizer.iter().enumerate() {
        for (p, v) in row.iter().enumerate() {
            mv.push(vec![Cell::Index(a), Cell::Index(p), Cell::Value(*v)]);
        }
    }
    out.table("singular_values.csv", &sv)?;
    out.table("minimizer.csv", &mv)?;
    let null_vector = r.sigma_min < c.tolerances.null;
    if r.resonant {
        // expected degeneracy: the run succeeds when the null vector is found
        out.check(Check::new("resonance_sigma_min", r.sigma_min, Relation::Less, c.tolerances.null));
    } else {
        out.check(Check::new("sigma_min", r.sigma_min, Relation::Greater, c.tolerances.null));
    }
    out.payload = json!({
        "alphas": c.alphas,
        "window": r.m_range,
        "sigma_min": r.sigma_min,
        "sigma_max": r.sigma_max,
        "condition_number": r.condition_number,
        "resonant": r.resonant,
        "null_vector": null_vector,
        "minimizer": r.minimizer,
    });
    Ok(())
}
