use hyperfrac::geometry::point_to_polar;
use hyperfrac::inverse::{
    born_recover, dn_distance, model_floor, recover_potential, relative_l2_error, runge_approximate, DnSetup,
    RungeProblem, RungeTarget,
};
use hyperfrac::io::{dn_table, Cell, Table};
use hyperfrac::solver::radial::RadialBackend;
use hyperfrac::solver::{build_mesh, solve_exterior, Discretization, DnMatrix, Potential, StiffnessSystem, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{potential, Backend};
use crate::config::{Method, Recover, Runge, RungeTargetKind};
use crate::error::CliError;
use crate::output::{Check, Outputs, Relation};

pub fn runge(c: &Runge, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let spec = c.spec.build().map_err(CliError::Config)?;
    let backend = Backend::build(&c.mesh)?;
    let disc = backend.disc();
    let energy = disc.energy_matrix(&spec)?;
    let sys = StiffnessSystem::new(disc, &energy, &potential(disc, &c.q))?;
    let max_controls = *c.controls.iter().max().expect("validated non-empty");
    let controls = disc.window_modes(Window::W1, max_controls)?;
    let nc = disc.omega_cells().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut t = Table::new(&["target", "controls", "error", "relative_error", "floor", "rank"]);
    let mut names = Vec::new();
    let mut results = Vec::new();
    for (ti, kind) in c.targets.iter().enumerate() {
        let target = match kind {
            RungeTargetKind::Constant => RungeTarget::Cellwise(vec![1.0; nc]),
            RungeTargetKind::Random => RungeTarget::Cellwise((0..nc).map(|_| rng.gen_range(-1.0..1.0)).collect()),
            RungeTargetKind::Solution => {
                let g = &disc.window_modes(Window::W2, 1)?[0];
                RungeTarget::Function(solve_exterior(&sys, g, None)?.coeffs)
            }
        };
        let mut errors = Vec::new();
        for &k in &c.controls {
            let r = runge_approximate(
                disc,
                &sys,
                &RungeProblem {
                    target: target.clone(),
                    controls: controls[..k].to_vec(),
                    beta: c.beta,
                },
            )?;
            t.push(vec![
                Cell::Index(ti),
                Cell::Index(k),
                Cell::Value(r.error),
                Cell::Value(r.relative_error),
                Cell::Value(r.floor),
                Cell::Index(r.rank),
            ]);
            errors.push(r.error);
        }
        // largest increase between consecutive control counts; 0 when nonincreasing
        let increase = errors.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        let name = serde_json::to_value(kind).expect("enum serializes");
        let name = name.as_str().expect("string tag").to_string();
        out.check(Check::new(format!("monotone_{name}"), increase, Relation::AtMost, 0.0));
        results.push(json!({ "target": name, "controls": c.controls, "errors": errors }));
        names.push(name);
    }
    out.table("runge.csv", &t)?;
    out.payload = json!({ "targets": names, "results": results });
    Ok(())
}

pub fn recover(c: &Recover, seed: u64, out: &mut Outputs) -> Result<(), CliError> {
    let spec = c.spec.build().map_err(CliError::Config)?;
    let base = c.mesh.resolve();
    let coarse = RadialBackend::new(build_mesh(&base)?)?;
    let fine = RadialBackend::new(build_mesh(&base.refined())?)?;
    let sc = DnSetup::new(&coarse, &spec, c.modes, c.modes)?;
    let sf = DnSetup::transferred(&fine, &coarse, &spec, &sc)?;

    let zero_fine = sf.dn(&fine, &Potential::zero(&fine))?;
    let zero_coarse = sc.dn(&coarse, &Potential::zero(&coarse))?;
    let data_clean = sf.dn(&fine, &potential(&fine, &c.q_true))?.sub(&zero_fine);
    let model_gap = sc.dn(&coarse, &potential(&coarse, &c.q_true))?.sub(&zero_coarse);
    let alt_gap = sf.dn(&fine, &potential(&fine, &c.q_alt))?.sub(&zero_fine);

    let mut data = data_clean.clone();
    if c.noise > 0.0 {
        let rms = data.values.norm() / (data.values.len() as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in data.values.iter_mut() {
            *v += c.noise * rms * rng.gen_range(-1.0..1.0);
        }
    }
    let floor = model_floor(&coarse, &sc, &data, c.recovery.n_rings)?;
    let rec = match c.method {
        Method::Born => born_recover(&coarse, &sc, &data, floor, &c.recovery)?,
        Method::GaussNewton => {
            let meas = DnMatrix {
                values: &data.values + &zero_coarse.values,
            };
            let start = vec![0.0; c.recovery.n_rings];
            recover_potential(&coarse, &sc, &meas, floor, &start, &c.recovery)?
        }
    };
    let truth = potential(&coarse, &c.q_true);
    let err = relative_l2_error(&coarse, &rec.potential, &truth);
    let two_mesh = dn_distance(&data_clean, &model_gap);
    let separation = dn_distance(&data_clean, &alt_gap);
    let ratio = separation / two_mesh;

    let mut pt = Table::new(&["cell", "radius", "q_recovered", "q_true"]);
    for ((cell, q), qt) in coarse.omega_cells().iter().zip(&rec.potential.values).zip(&truth.values) {
        pt.push(vec![
            Cell::Index(cell.cell),
            Cell::Value(point_to_polar(&cell.centroid).r),
            Cell::Value(*q),
            Cell::Value(*qt),
        ]);
    }
    out.table("potential.csv", &pt)?;
    out.table("dn_data.csv", &dn_table(&data))?;
    let mut log = Vec::new();
    rec.write_log(&mut log)?;
    out.lines(
        "iterations.jsonl",
        &log,
        &["iter", "objective", "misfit", "regterm", "step_norm", "beta"],
    )?;
    out.check(Check::new("relative_error", err, Relation::Less, c.tolerances.relative_error));
    out.check(Check::new("separation_ratio", ratio, Relation::Greater, c.tolerances.separation_ratio));
    out.payload = json!({
        "method": c.method,
        "relative_error": err,
        "rings": rec.rings,
        "beta": rec.beta,
        "misfit": rec.misfit,
        "model_floor": floor,
        "two_mesh_floor": two_mesh,
        "separation": separation,
        "separation_ratio": ratio,
        "iterations": rec.log.len(),
        "singular_values": rec.singular_values,
        "coarse_h": base.h,
        "fine_h": base.h / 2.0,
    });
    Ok(())
}
