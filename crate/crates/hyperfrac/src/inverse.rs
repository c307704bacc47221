//! Integral identity, Runge approximation and potential recovery from DN data.
//!
//! Potentials are recovered on rings: equal-width annuli of Ω on which q is
//! constant. The sensitivity of Λ_q[j,i] to a ring value is ∫_ring u_{f_i} u_{g_j} dV,
//! with both solutions computed under the same q.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::point_to_polar;
use crate::operator::PolyharmonicSpec;
use crate::solver::radial::RadialBackend;
use crate::solver::{
    cell_products, dn_from_solutions, omega_product, potential_mass, solve_exterior, solve_family, DiscreteSolution,
    Discretization, DnMatrix, Potential, StiffnessSystem, Window,
};

/// Regularizer in the integral-identity gap.
pub const GAP_EPS: f64 = 1e-300;

/// Both sides of ⟨(Λ_{q1} − Λ_{q2}) f, g⟩ = ∫_Ω (q1 − q2) u₁ u₂ dV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

/// Builds the stiffness systems for q1, q2 from a shared energy matrix and compares
/// the DN difference against the interior integral.
pub fn integral_identity_check(
    disc: &dyn Discretization,
    energy: &DMatrix<f64>,
    q1: &Potential,
    q2: &Potential,
    f: &DVector<f64>,
    g: &DVector<f64>,
) -> Result<IdentityCheck> {
    let s1 = StiffnessSystem::new(disc, energy, q1)?;
    let s2 = StiffnessSystem::new(disc, energy, q2)?;
    let u1 = solve_exterior(&s1, f, None)?;
    let u2f = solve_exterior(&s2, f, None)?;
    let u2 = solve_exterior(&s2, g, None)?;
    let gf = s1.embed_exterior(g);
    let lhs = (&s1.matrix * &gf).dot(&u1.coeffs) - (&s2.matrix * &gf).dot(&u2f.coeffs);
    let rhs = omega_product(disc, &q1.sub(q2), &u1.coeffs, &u2.coeffs);
    let gap = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + GAP_EPS);
    Ok(IdentityCheck {
        lhs,
        rhs,
        gap: if lhs == 0.0 && rhs == 0.0 { 0.0 } else { gap },
    })
}

// ---------------------------------------------------------------------------
// Ring parameterization

/// Cellwise potential that is constant on `n_rings` equal annuli of Ω.
#[derive(Debug, Clone, PartialEq)]
pub struct Rings {
    pub n_rings: usize,
    pub width: f64,
    /// Ring index of every Ω cell, in the order of `omega_cells()`.
    pub ring_of_cell: Vec<usize>,
}

impl Rings {
    pub fn new(disc: &dyn Discretization, n_rings: usize) -> Result<Self> {
        if n_rings == 0 {
            return Err(Error::Domain("need at least one ring".into()));
        }
        let width = disc.mesh().config.omega_radius / n_rings as f64;
        let ring_of_cell: Vec<usize> = disc
            .omega_cells()
            .iter()
            .map(|c| ((point_to_polar(&c.centroid).r / width) as usize).min(n_rings - 1))
            .collect();
        for r in 0..n_rings {
            if !ring_of_cell.contains(&r) {
                return Err(Error::Geometry(format!("ring {r} contains no cell; use fewer rings")));
            }
        }
        Ok(Self {
            n_rings,
            width,
            ring_of_cell,
        })
    }

    pub fn expand(&self, p: &[f64]) -> Potential {
        Potential {
            values: self.ring_of_cell.iter().map(|r| p[*r]).collect(),
        }
    }

    /// Ring averages of a cellwise potential (volume-weighted).
    pub fn project(&self, disc: &dyn Discretization, q: &Potential) -> Vec<f64> {
        let mut num = vec![0.0; self.n_rings];
        let mut den = vec![0.0; self.n_rings];
        for ((c, r), v) in disc.omega_cells().iter().zip(&self.ring_of_cell).zip(&q.values) {
            num[*r] += c.volume * v;
            den[*r] += c.volume;
        }
        num.iter().zip(&den).map(|(a, b)| a / b).collect()
    }

    /// Sums cellwise values per ring.
    fn reduce(&self, cell_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rings];
        for (r, v) in self.ring_of_cell.iter().zip(cell_values) {
            out[*r] += v;
        }
        out
    }
}

/// Relative L²(Ω) distance ‖q − q_ref‖/‖q_ref‖.
pub fn relative_l2_error(disc: &dyn Discretization, q: &Potential, q_ref: &Potential) -> f64 {
    q.sub(q_ref).l2_norm(disc) / q_ref.l2_norm(disc)
}

// ---------------------------------------------------------------------------
// Forward map

/// Exterior data and tests shared by every forward evaluation.
#[derive(Debug, Clone)]
pub struct DnSetup {
    /// Data on W1 (exterior vectors).
    pub data: Vec<DVector<f64>>,
    /// Tests on W2 (exterior vectors).
    pub tests: Vec<DVector<f64>>,
    pub energy: DMatrix<f64>,
}

impl DnSetup {
    pub fn new(disc: &dyn Discretization, spec: &PolyharmonicSpec, n_data: usize, n_tests: usize) -> Result<Self> {
        spec.require_positive()?;
        Ok(Self {
            data: disc.window_modes(Window::W1, n_data)?,
            tests: disc.window_modes(Window::W2, n_tests)?,
            energy: disc.energy_matrix(spec)?,
        })
    }

    /// Same measurement functions with a caller-supplied energy matrix.
    pub fn with_modes(
        disc: &dyn Discretization,
        spec: &PolyharmonicSpec,
        data: Vec<DVector<f64>>,
        tests: Vec<DVector<f64>>,
    ) -> Result<Self> {
        spec.require_positive()?;
        let n = disc.exterior().len();
        if data.iter().chain(&tests).any(|v| v.len() != n) {
            return Err(Error::Domain(format!("exterior vectors must have {n} entries")));
        }
        Ok(Self {
            data,
            tests,
            energy: disc.energy_matrix(spec)?,
        })
    }

    /// Measurement functions of a coarser radial mesh carried over to a finer one.
    pub fn transferred(fine: &RadialBackend, coarse: &RadialBackend, spec: &PolyharmonicSpec, from: &DnSetup) -> Result<Self> {
        let map = |w: Window, v: &[DVector<f64>]| -> Result<Vec<DVector<f64>>> {
            v.iter().map(|f| fine.transfer_exterior(coarse, w, f)).collect()
        };
        Self::with_modes(fine, spec, map(Window::W1, &from.data)?, map(Window::W2, &from.tests)?)
    }

    fn system(&self, disc: &dyn Discretization, q: &Potential) -> Result<StiffnessSystem> {
        StiffnessSystem::new(disc, &self.energy, q).map_err(|e| match e {
            Error::SingularSystem { sigma_min } => Error::EigenvalueCondition(format!(
                "0 is (numerically) a Dirichlet eigenvalue of P + q: sigma_min = {sigma_min:.3e}"
            )),
            other => other,
        })
    }

    /// Λ_q over (tests × data).
    pub fn dn(&self, disc: &dyn Discretization, q: &Potential) -> Result<DnMatrix> {
        let sys = self.system(disc, q)?;
        let sols = solve_family(&sys, &self.data)?;
        Ok(dn_from_solutions(&sys, &sols, &self.tests))
    }

    /// Λ_q together with the ring sensitivities ∂Λ[j,i]/∂p_r, stored as one column per
    /// ring with entries in column-major (j, i) order.
    pub fn dn_and_jacobian(
        &self,
        disc: &dyn Discretization,
        q: &Potential,
        rings: &Rings,
    ) -> Result<(DnMatrix, DMatrix<f64>)> {
        let sys = self.system(disc, q)?;
        let uf = solve_family(&sys, &self.data)?;
        let ug = solve_family(&sys, &self.tests)?;
        let dn = dn_from_solutions(&sys, &uf, &self.tests);
        Ok((dn, sensitivity(disc, &uf, &ug, rings)))
    }
}

fn sensitivity(disc: &dyn Discretization, uf: &[DiscreteSolution], ug: &[DiscreteSolution], rings: &Rings) -> DMatrix<f64> {
    let nt = ug.len();
    let rows: Vec<(usize, Vec<f64>)> = (0..uf.len() * nt)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / nt, k % nt);
            (k, rings.reduce(&cell_products(disc, &uf[i].coeffs, &ug[j].coeffs)))
        })
        .collect();
    let mut jac = DMatrix::zeros(uf.len() * nt, rings.n_rings);
    for (k, v) in rows {
        for (r, x) in v.iter().enumerate() {
            jac[(k, r)] = *x;
        }
    }
    jac
}

fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// ‖Λ_a − Λ_b‖_F, the resolution floor when a and b come from different meshes.
pub fn dn_distance(a: &DnMatrix, b: &DnMatrix) -> f64 {
    a.sub(b).values.norm()
}

// ---------------------------------------------------------------------------
// Runge approximation

/// What the exterior controls should reproduce on Ω.
#[derive(Debug, Clone, PartialEq)]
pub enum RungeTarget {
    /// One value per Ω cell.
    Cellwise(Vec<f64>),
    /// A discrete function given by its full coefficient vector.
    Function(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RungeProblem {
    pub target: RungeTarget,
    /// Control data supported in the control window (exterior vectors).
    pub controls: Vec<DVector<f64>>,
    /// Relative tolerance below which a control adds no new direction.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RungeResult {
    pub coefficients: Vec<f64>,
    /// ‖u_f − φ‖_{L²(Ω)}.
    pub error: f64,
    /// error / ‖φ‖_{L²(Ω)}.
    pub relative_error: f64,
    /// Distance from φ to the discrete function space on Ω (zero for function targets).
    pub floor: f64,
    /// Number of controls that contributed a new direction.
    pub rank: usize,
    pub singular_values: Vec<f64>,
}

/// Least-squares fit of φ by u_f|_Ω over f = Σ a_k c_k, regularized by dropping
/// controls that are numerically dependent on earlier ones.
pub fn runge_approximate(disc: &dyn Discretization, sys: &StiffnessSystem, problem: &RungeProblem) -> Result<RungeResult> {
    if problem.controls.is_empty() {
        return Err(Error::Domain("Runge problem needs controls".into()));
    }
    if !(problem.beta >= 0.0) {
        return Err(Error::Domain(format!("beta must be >= 0, got {}", problem.beta)));
    }
    let sols = solve_family(sys, &problem.controls)?;
    let n = disc.n_dofs();
    // Ω Gram restricted to the dofs that live on Ω
    let ones = Potential {
        values: vec![1.0; disc.omega_cells().len()],
    };
    let gram = potential_mass(disc, &ones)?;
    let mut idx: Vec<usize> = disc.omega_cells().iter().flat_map(|c| c.dofs.iter().cloned()).collect();
    idx.sort_unstable();
    idx.dedup();
    let g = gram.select_rows(&idx).select_columns(&idx);
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Assembly("Ω Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let (moments, norm2) = match &problem.target {
        RungeTarget::Cellwise(vals) => {
            if vals.len() != disc.omega_cells().len() {
                return Err(Error::Domain(format!(
                    "target has {} values for {} Ω cells",
                    vals.len(),
                    disc.omega_cells().len()
                )));
            }
            let mut m = DVector::zeros(n);
            let mut norm2 = 0.0;
            for (c, v) in disc.omega_cells().iter().zip(vals) {
                for (a, d) in c.dofs.iter().enumerate() {
                    m[*d] += v * c.moments[a];
                }
                norm2 += v * v * c.volume;
            }
            (m.select_rows(&idx), norm2)
        }
        RungeTarget::Function(phi) => {
            let m = &gram * phi;
            let norm2 = phi.dot(&m);
            (m.select_rows(&idx), norm2)
        }
    };
    let y = l
        .solve_lower_triangular(&moments)
        .ok_or_else(|| Error::Assembly("triangular solve failed".into()))?;
    let floor = match problem.target {
        RungeTarget::Cellwise(_) => (norm2 - y.norm_squared()).max(0.0).sqrt(),
        RungeTarget::Function(_) => 0.0,
    };
    let u = DMatrix::from_fn(idx.len(), sols.len(), |a, k| sols[k].coeffs[idx[a]]);
    let a = l.transpose() * u;
    let mut singular_values: Vec<f64> = a.clone().svd(false, false).singular_values.iter().cloned().collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));

    // Incremental Gram–Schmidt (two passes) in control order. A control whose new
    // direction is below β relative to its own norm is skipped, so the spans of
    // successive control sets are nested and the error cannot grow under enrichment.
    let k = a.ncols();
    let mut q: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut r = DMatrix::zeros(k, k);
    let mut resid = y.clone();
    for col in 0..k {
        let mut v = a.column(col).into_owned();
        let norm0 = v.norm();
        let mut coefs = vec![0.0; q.len()];
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&v);
                v -= qi * c;
                coefs[i] += c;
            }
        }
        let nv = v.norm();
        if problem.beta == 0.0 && nv <= 1e-13 * norm0 {
            return Err(Error::IllConditioned {
                condition_number: singular_values[0] / singular_values[singular_values.len() - 1],
                singular_values,
            });
        }
        if norm0 == 0.0 || nv <= problem.beta * norm0 {
            continue;
        }
        let j = q.len();
        for (i, c) in coefs.iter().enumerate() {
            r[(i, j)] = *c;
        }
        r[(j, j)] = nv;
        let qk = v / nv;
        let c = qk.dot(&resid);
        resid -= &qk * c;
        q.push(qk);
        kept.push(col);
    }
    let rank = q.len();
    let qty = DVector::from_iterator(rank, q.iter().map(|qi| qi.dot(&y)));
    let local = r
        .view((0, 0), (rank, rank))
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Assembly("triangular solve failed".into()))?;
    let mut coefficients = vec![0.0; k];
    for (c, v) in kept.iter().zip(local.iter()) {
        coefficients[*c] = *v;
    }
    let res = resid.norm();
    let error = (res * res + floor * floor).sqrt();
    let phi_norm = norm2.sqrt();
    Ok(RungeResult {
        coefficients,
        error,
        relative_error: if phi_norm > 0.0 { error / phi_norm } else { error },
        floor,
        rank,
        singular_values,
    })
}

// ---------------------------------------------------------------------------
// Recovery

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoveryConfig {
    /// Initial Tikhonov weight on ring values, relative to ‖J‖².
    pub beta: f64,
    /// The discrepancy loop stops halving below this weight.
    pub beta_min: f64,
    pub max_iter: usize,
    /// Stop when the Gauss–Newton step is shorter than this (∞-norm on ring values).
    pub step_tol: f64,
    pub n_rings: usize,
    /// Accept β once the misfit is below this multiple of the noise floor.
    pub discrepancy_factor: f64,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self {
            beta: 1e-2,
            beta_min: 1e-12,
            max_iter: 20,
            step_tol: 1e-8,
            n_rings: 2,
            discrepancy_factor: 1.5,
        }
    }
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta_min > 0.0 && self.beta_min <= self.beta) {
            return Err(Error::Domain(format!(
                "need 0 < beta_min <= beta, got {} and {}",
                self.beta_min, self.beta
            )));
        }
        if self.max_iter == 0 || self.n_rings == 0 || !(self.step_tol > 0.0) || !(self.discrepancy_factor >= 1.0) {
            return Err(Error::Domain("recovery config has a non-positive parameter".into()));
        }
        Ok(())
    }
}

/// One Gauss–Newton iteration, serialized as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub misfit: f64,
    pub regterm: f64,
    pub step_norm: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub rings: Vec<f64>,
    pub potential: Potential,
    pub beta: f64,
    /// ‖Λ_q − Λ_meas‖_F at the returned potential.
    pub misfit: f64,
    pub log: Vec<IterationRecord>,
    pub singular_values: Vec<f64>,
}

impl Recovery {
    pub fn write_log(&self, mut out: impl Write) -> Result<()> {
        for r in &self.log {
            let line = serde_json::to_string(r).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Tikhonov solve of min ‖J p − d‖² + β‖J‖²‖p‖² by SVD. Returns p and the
/// singular values of J.
fn tikhonov(j: &DMatrix<f64>, d: &DVector<f64>, beta_rel: f64) -> (DVector<f64>, Vec<f64>) {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let beta = beta_rel * smax * smax;
    let utd = svd.u.as_ref().expect("left vectors").tr_mul(d);
    let filtered = DVector::from_iterator(
        utd.len(),
        utd.iter()
            .zip(svd.singular_values.iter())
            .map(|(c, s)| if *s == 0.0 { 0.0 } else { c * s / (s * s + beta) }),
    );
    let p = svd.v_t.as_ref().expect("right vectors").tr_mul(&filtered);
    let mut sv: Vec<f64> = svd.singular_values.iter().cloned().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    (p, sv)
}

/// Smallest misfit the linearized ring model can reach on `dn_gap`: the part of
/// the data outside the range of the sensitivity matrix at q = 0. Used as the
/// noise floor when the data error is model error rather than known noise.
pub fn model_floor(disc: &dyn Discretization, setup: &DnSetup, dn_gap: &DnMatrix, n_rings: usize) -> Result<f64> {
    let rings = Rings::new(disc, n_rings)?;
    let (_, jac) = setup.dn_and_jacobian(disc, &Potential::zero(disc), &rings)?;
    let d = flatten(&dn_gap.values);
    let svd = jac.svd(true, false);
    let smax = svd.singular_values.max();
    let u = svd.u.expect("left vectors");
    let mut r = d.clone();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > 1e-14 * smax {
            let col = u.column(k);
            r -= col * col.dot(&d);
        }
    }
    Ok(r.norm())
}

/// Linearized recovery from ΔΛ = Λ_meas − Λ_0: solves ΔΛ[j,i] ≈ Σ_r p_r ∫_ring u⁰_{f_i} u⁰_{g_j},
/// halving β until the linear misfit drops below the discrepancy target.
pub fn born_recover(
    disc: &dyn Discretization,
    setup: &DnSetup,
    dn_gap: &DnMatrix,
    noise_floor: f64,
    cfg: &RecoveryConfig,
) -> Result<Recovery> {
    cfg.validate()?;
    let rings = Rings::new(disc, cfg.n_rings)?;
    let zero = Potential::zero(disc);
    let (_, jac) = setup.dn_and_jacobian(disc, &zero, &rings)?;
    let d = flatten(&dn_gap.values);
    if d.norm() == 0.0 {
        return Ok(Recovery {
            rings: vec![0.0; rings.n_rings],
            potential: zero,
            beta: cfg.beta,
            misfit: 0.0,
            log: Vec::new(),
            singular_values: Vec::new(),
        });
    }
    let target = cfg.discrepancy_factor * noise_floor;
    let mut beta = cfg.beta;
    loop {
        let (p, sv) = tikhonov(&jac, &d, beta);
        let misfit = (&jac * &p - &d).norm();
        if misfit <= target || beta / 2.0 < cfg.beta_min {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::IllConditioned {
                    condition_number: sv[0] / sv[sv.len() - 1],
                    singular_values: sv,
                });
            }
            let values: Vec<f64> = p.iter().cloned().collect();
            return Ok(Recovery {
                potential: rings.expand(&values),
                rings: values,
                beta,
                misfit,
                log: Vec::new(),
                singular_values: sv,
            });
        }
        beta /= 2.0;
    }
}

/// Damped Gauss–Newton on ‖Λ_q − Λ_meas‖_F² + β‖J₀‖²‖p − p_ref‖² over ring values.
/// Each β stage runs up to `max_iter` accepted steps; β is then halved (warm start)
/// until the misfit ‖Λ_q − Λ_meas‖_F falls below the discrepancy target.
pub fn recover_potential(
    disc: &dyn Discretization,
    setup: &DnSetup,
    dn_meas: &DnMatrix,
    noise_floor: f64,
    q_ref: &[f64],
    cfg: &RecoveryConfig,
) -> Result<Recovery> {
    cfg.validate()?;
    let rings = Rings::new(disc, cfg.n_rings)?;
    if q_ref.len() != rings.n_rings {
        return Err(Error::Domain(format!(
            "reference has {} ring values, expected {}",
            q_ref.len(),
            rings.n_rings
        )));
    }
    let d_meas = flatten(&dn_meas.values);
    let pref = DVector::from_column_slice(q_ref);
    let mut p = pref.clone();
    let (dn, jac) = setup.dn_and_jacobian(disc, &rings.expand(p.as_slice()), &rings)?;
    let scale = jac.clone().svd(false, false).singular_values.max().powi(2);
    let mut jac = jac;
    let mut resid = flatten(&dn.values) - &d_meas;
    let target = cfg.discrepancy_factor * noise_floor;
    let mut beta = cfg.beta;
    let mut log = Vec::new();
    let objective = |r: &DVector<f64>, p: &DVector<f64>, beta: f64| {
        let reg = beta * scale * (p - &pref).norm_squared();
        (r.norm_squared() + reg, reg)
    };

    while resid.norm() > 0.0 {
        for _ in 0..cfg.max_iter {
            let (obj, _) = objective(&resid, &p, beta);
            // (JᵀJ + λI) δ = −(Jᵀr + λ(p − p_ref))
            let lam = beta * scale;
            let mut h = jac.tr_mul(&jac);
            for k in 0..h.nrows() {
                h[(k, k)] += lam;
            }
            let grad = jac.tr_mul(&resid) + (&p - &pref) * lam;
            let step = h
                .cholesky()
                .ok_or_else(|| Error::Assembly("Gauss–Newton matrix not positive definite".into()))?
                .solve(&(-&grad));
            if step.amax() < cfg.step_tol {
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let trial = &p + &step * t;
                match setup.dn_and_jacobian(disc, &rings.expand(trial.as_slice()), &rings) {
                    Ok((dn, j)) => {
                        let r = flatten(&dn.values) - &d_meas;
                        if objective(&r, &trial, beta).0 < obj {
                            accepted = Some((trial, j, r));
                            break;
                        }
                    }
                    // trial potential hit a Dirichlet eigenvalue: shorten the step
                    Err(Error::EigenvalueCondition(_)) => {}
                    Err(e) => return Err(e),
                }
                t *= 0.5;
            }
            let Some((trial, j, r)) = accepted else {
                // no representable decrease left at this β
                if step.amax() * t < 1e-3 * cfg.step_tol.max(f64::EPSILON * p.amax()) {
                    break;
                }
                return Err(Error::LineSearch(format!(
                    "no decrease along the Gauss–Newton step (objective {obj:.6e}, beta {beta:.3e})"
                )));
            };
            let step_norm = (&trial - &p).amax();
            p = trial;
            jac = j;
            resid = r;
            let (obj, reg) = objective(&resid, &p, beta);
            log.push(IterationRecord {
                iter: log.len() + 1,
                objective: obj,
                misfit: resid.norm(),
                regterm: reg,
                step_norm,
                beta,
            });
            if step_norm < cfg.step_tol {
                break;
            }
        }
        if resid.norm() <= target || beta / 2.0 < cfg.beta_min {
            break;
        }
        beta /= 2.0;
    }
    let mut sv: Vec<f64> = jac.svd(false, false).singular_values.iter().cloned().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    let values: Vec<f64> = p.iter().cloned().collect();
    Ok(Recovery {
        potential: rings.expand(&values),
        rings: values,
        beta,
        misfit: resid.norm(),
        log,
        singular_values: sv,
    })
}
