use hyperfrac::geometry::point_to_polar;
use hyperfrac::inverse::integral_identity_check;
use hyperfrac::io::{dn_table, Cell, MeshJson, Table};
use hyperfrac::solver::{
    assemble_dn, dn_from_solutions, solve_exterior, solve_family, DnMatrix, StiffnessSystem, Window,
};
use nalgebra::DVector;
use serde_json::json;

use super::{potential, Backend};
use crate::config::{Dn, IntegralIdentity, Solve};
use crate::error::CliError;
use crate::output::{Check, Outputs, Relation};

fn write_mesh(out: &mut Outputs, b: &Backend) -> Result<(), CliError> {
    out.json("mesh.json", &MeshJson::from(b.disc().mesh()), &["vertices", "cells", "tags"])
}

pub fn solve(c: &Solve, out: &mut Outputs) -> Result<(), CliError> {
    let spec = c.spec.build().map_err(CliError::Config)?;
    let backend = Backend::build(&c.mesh)?;
    let disc = backend.disc();
    let energy = disc.energy_matrix(&spec)?;
    let sys = StiffnessSystem::new(disc, &energy, &potential(disc, &c.q))?;
    let modes = disc.window_modes(c.data.window, c.data.mode)?;
    let f = &modes[c.data.mode - 1] * c.data.amplitude;
    let u = solve_exterior(&sys, &f, None)?;

    let mut t = Table::new(&["vertex", "radius", "u"]);
    for (k, x) in disc.mesh().vertices.iter().enumerate() {
        t.push(vec![Cell::Index(k), Cell::Value(point_to_polar(x).r), Cell::Value(disc.eval(&u.coeffs, x))]);
    }
    out.table("solution.csv", &t)?;
    let mut coeffs = Table::new(&["dof", "coefficient"]);
    for (k, v) in u.coeffs.iter().enumerate() {
        coeffs.push(vec![Cell::Index(k), Cell::Value(*v)]);
    }
    out.table("coefficients.csv", &coeffs)?;
    write_mesh(out, &backend)?;
    out.check(Check::new("residual", u.residual, Relation::Less, c.tolerances.residual));
    out.payload = json!({
        "n_dofs": disc.n_dofs(),
        "n_interior": disc.interior().len(),
        "residual": u.residual,
        "sigma_min": sys.sigma_min,
        "sigma_max": sys.sigma_max,
        "lambda_min": sys.lambda_min(),
    });
    Ok(())
}

pub fn dn(c: &Dn, out: &mut Outputs) -> Result<(), CliError> {
    let spec = c.spec.build().map_err(CliError::Config)?;
    let backend = Backend::build(&c.mesh)?;
    let disc = backend.disc();
    let energy = disc.energy_matrix(&spec)?;
    let sys = StiffnessSystem::new(disc, &energy, &potential(disc, &c.q))?;
    let w1 = disc.window_modes(Window::W1, c.n_data)?;
    let w2 = disc.window_modes(Window::W2, c.n_tests)?;
    let sols = solve_family(&sys, &w1)?;
    let dn = dn_from_solutions(&sys, &sols, &w2);
    let full: Vec<DVector<f64>> = sols.into_iter().map(|u| u.coeffs).collect();
    let kernel = DnMatrix {
        values: disc.kernel_dn(&spec, &full, &w2)?,
    };
    let two_route = dn.sub(&kernel).values.norm() / dn.values.norm();
    let same = assemble_dn(&sys, &w1, &w1)?;
    let asym = same.asymmetry();

    out.table("dn.csv", &dn_table(&dn))?;
    out.table("dn_kernel.csv", &dn_table(&kernel))?;
    out.table("dn_w1w1.csv", &dn_table(&same))?;
    write_mesh(out, &backend)?;
    out.check(Check::new("two_route_relerr", two_route, Relation::Less, c.tolerances.two_route));
    out.check(Check::new("symmetry", asym, Relation::Less, c.tolerances.symmetry));
    out.payload = json!({
        "n_dofs": disc.n_dofs(),
        "dn_norm": dn.values.norm(),
        "two_route_relerr": two_route,
        "asymmetry": asym,
        "layout": "row j = test function on W2 (W1 for dn_w1w1.csv), column data_i = data mode i on W1",
    });
    Ok(())
}

pub fn integral_identity(c: &IntegralIdentity, out: &mut Outputs) -> Result<(), CliError> {
    let spec = c.spec.build().map_err(CliError::Config)?;
    let backend = Backend::build(&c.mesh)?;
    let disc = backend.disc();
    let energy = disc.energy_matrix(&spec)?;
    let nf = c.cases.iter().map(|k| k.f_mode).max().unwrap_or(1);
    let ng = c.cases.iter().map(|k| k.g_mode).max().unwrap_or(1);
    let f = disc.window_modes(Window::W1, nf)?;
    let g = disc.window_modes(Window::W2, ng)?;
    let mut t = Table::new(&["case", "lhs", "rhs", "gap"]);
    let mut worst = 0.0f64;
    for (k, case) in c.cases.iter().enumerate() {
        let q1 = potential(disc, &case.q1);
        let q2 = potential(disc, &case.q2);
        let chk = integral_identity_check(disc, &energy, &q1, &q2, &f[case.f_mode - 1], &g[case.g_mode - 1])?;
        worst = worst.max(chk.gap);
        t.push(vec![Cell::Index(k), Cell::Value(chk.lhs), Cell::Value(chk.rhs), Cell::Value(chk.gap)]);
    }
    out.table("identity.csv", &t)?;
    out.check(Check::new("max_gap", worst, Relation::Less, c.tolerances.gap));
    out.payload = json!({ "cases": c.cases.len(), "max_gap": worst });
    Ok(())
}
