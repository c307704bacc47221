//! Moment machinery for unique continuation of sums of fractional powers.
//!
//! For exponents α_k and heat-trace profiles f_k(t) = −(sin πα_k/π)(e^{tΔ}v_k)(x)t^{−1−α_k},
//! the relevant identities are Σ_k Γ(m+1+α_k) ∫₀^∞ f_k(t) t^{−m} dt = 0 for every m in a
//! window. [`decoupling_test`] measures how far that finite family is from forcing all
//! profiles to vanish. Pairwise distinct exponents keep it injective. Repeated
//! exponents leave an explicit kernel.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, volume_weight, Dim, HyperPoint};
use crate::operator::{sobolev_norm, spherical_mean, SobolevIndex};
use crate::quadrature::{uniform_breaks, Estimate, GaussRule, Panels};
use crate::specfun::gamma;
use crate::spectral::{heat_kernel, HelgasonTransform, RadialFunction};

// ---------------------------------------------------------------------------
// Decay weight

/// ρ_γ(x) = exp(−γ √(1 + d(e₀, x)²)) with γ > (n−1)/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayWeight {
    gamma: f64,
    dim: Dim,
}

impl DecayWeight {
    pub fn new(gamma: f64, dim: Dim) -> Result<Self> {
        if !(gamma > dim.rho()) {
            return Err(Error::Domain(format!(
                "decay weight needs gamma > (n-1)/2 = {}, got {gamma}",
                dim.rho()
            )));
        }
        Ok(Self { gamma, dim })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Weight at geodesic distance `d` from e₀.
    pub fn at_distance(&self, d: f64) -> f64 {
        (-self.gamma * (1.0 + d * d).sqrt()).exp()
    }
}

pub fn decay_weight_eval(x: &HyperPoint<f64>, w: &DecayWeight) -> f64 {
    let d = distance(&HyperPoint::origin(x.dim()), x);
    w.at_distance(d)
}

/// Outcome of [`compact_support_decay_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayBound {
    /// Smallest C with |⟨u, φ⟩| ≤ C ‖ρ_γ φ‖_{H^r} over the probes.
    pub constant: f64,
    /// The ratio for each probe.
    pub ratios: Vec<f64>,
    /// ‖u/ρ_γ‖_{L²}, which dominates `constant` for every r ≥ 0.
    pub a_priori: f64,
}

/// Probes the estimate |⟨u, φ⟩| ≤ C‖ρ_γ φ‖_{H^r} for u supported in B_{R₀}(e₀).
pub fn compact_support_decay_check(
    plan: &HelgasonTransform,
    u: &RadialFunction,
    support_radius: f64,
    weight: &DecayWeight,
    probes: &[RadialFunction],
    r_index: f64,
) -> Result<DecayBound> {
    if weight.dim() != u.dim() {
        return Err(Error::Domain("decay weight and function disagree on n".into()));
    }
    let nodes = u.grid.nodes();
    if let Some(r) = nodes
        .iter()
        .zip(&u.values)
        .find(|(r, v)| **r > support_radius && **v != 0.0)
        .map(|(r, _)| *r)
    {
        return Err(Error::Support(format!(
            "function is nonzero at r = {r} outside the declared radius {support_radius}"
        )));
    }
    let a_priori = u.map(|r, v| v / weight.at_distance(r)).l2_norm();
    let ratios = probes
        .par_iter()
        .map(|phi| {
            let pairing = u.inner(phi).abs();
            if pairing == 0.0 {
                return Ok(0.0);
            }
            let weighted = phi.map(|r, v| weight.at_distance(r) * v);
            let norm = sobolev_norm(plan, &weighted, SobolevIndex(r_index))?;
            Ok(pairing / norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    let constant = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(DecayBound {
        constant,
        ratios,
        a_priori,
    })
}

// ---------------------------------------------------------------------------
// Heat-trace profiles

/// (e^{tΔ}v)(x) for radial v, as ∫ p_t(ρ) M_v(x, ρ) |S^{n−1}| sinh^{n−1}ρ dρ, with
/// M_v the spherical mean of v about x. Integration starts at the distance from x to
/// the support and stops once p_t has dropped by e^{−200}.
pub fn heat_semigroup_at(v: &RadialFunction, x: &HyperPoint<f64>, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat time must be > 0, got {t}")));
    }
    let dim = v.dim();
    if x.dim() != dim.n() {
        return Err(Error::Domain("point and function disagree on n".into()));
    }
    let Some((a, b)) = support_hull(v) else {
        return Ok(0.0);
    };
    let rx = distance(&HyperPoint::origin(dim.n()), x);
    let lo = (a - rx).max(rx - b).max(0.0);
    let hi = (rx + b).min((lo * lo + 800.0 * t).sqrt());
    if hi <= lo {
        return Ok(0.0);
    }
    let width = (0.25 * t.sqrt()).min(0.1);
    let n_panels = ((hi - lo) / width).ceil().max(1.0) as usize;
    let panels = Panels::from_breaks(uniform_breaks(lo, hi, n_panels), &GaussRule::new(16));
    let n = dim.n();
    Ok(panels.integrate(|rho| {
        let mean = spherical_mean(v, rx, rho);
        if mean == 0.0 {
            return 0.0;
        }
        heat_kernel(rho, t, dim) * mean * volume_weight(rho, n)
    }))
}

/// Radii of the outermost zero samples enclosing the nonzero samples of `v`.
fn support_hull(v: &RadialFunction) -> Option<(f64, f64)> {
    let nodes = v.grid.nodes();
    let first = v.values.iter().position(|x| *x != 0.0)?;
    let last = v.values.iter().rposition(|x| *x != 0.0)?;
    let a = if first == 0 { 0.0 } else { nodes[first - 1] };
    let b = if last + 1 == nodes.len() {
        v.grid.r_max
    } else {
        nodes[last + 1]
    };
    Some((a, b))
}

/// Distance from x (at radius `rx`) to the nonzero samples of v.
fn gap_to_support(v: &RadialFunction, rx: f64) -> f64 {
    v.grid
        .nodes()
        .iter()
        .zip(&v.values)
        .filter(|(_, x)| **x != 0.0)
        .map(|(r, _)| (r - rx).abs())
        .fold(f64::INFINITY, f64::min)
}

/// f(t) = −(sin πα/π)(e^{tΔ}v)(x) t^{−(1+α)} on `t_grid`. `v` must vanish on the
/// ball of radius `kappa` about x.
pub fn heat_trace_f(
    v: &RadialFunction,
    x: &HyperPoint<f64>,
    alpha: f64,
    t_grid: &[f64],
    kappa: f64,
) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    if !(kappa > 0.0) {
        return Err(Error::Domain(format!("kappa must be > 0, got {kappa}")));
    }
    let rx = distance(&HyperPoint::origin(x.dim()), x);
    let gap = gap_to_support(v, rx);
    if gap < kappa {
        return Err(Error::Support(format!(
            "v is nonzero at distance {gap:.4} from x, inside the declared radius {kappa}"
        )));
    }
    let c = -(std::f64::consts::PI * alpha).sin() / std::f64::consts::PI;
    t_grid
        .par_iter()
        .map(|&t| Ok(c * heat_semigroup_at(v, x, t)? * t.powf(-1.0 - alpha)))
        .collect()
}

/// Which end of (0, ∞) an envelope describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayRegime {
    /// log|f| ≈ log c + p log t − δ/t
    SmallTime,
    /// log|f| ≈ log c + p log t − δ t
    LargeTime,
}

/// Least-squares fit of log|f| to an exponential envelope with a power prefactor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit {
    pub regime: DecayRegime,
    pub t_min: f64,
    pub t_max: f64,
    pub delta: f64,
    pub log_c: f64,
    pub power: f64,
    /// Largest excursion of log|f| above the fitted curve.
    pub max_excess: f64,
}

impl EnvelopeFit {
    pub fn relative_deviation(&self, expected: f64) -> f64 {
        (self.delta - expected).abs() / expected.abs()
    }
}

/// Fits the envelope on the nonzero samples with t in [t_min, t_max].
pub fn fit_envelope(t: &[f64], f: &[f64], regime: DecayRegime, t_min: f64, t_max: f64) -> Result<EnvelopeFit> {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(f)
        .filter(|(ti, fi)| **ti >= t_min && **ti <= t_max && **fi != 0.0 && fi.is_finite())
        .map(|(ti, fi)| (*ti, fi.abs().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Domain(format!(
            "envelope fit on [{t_min}, {t_max}] needs at least 4 nonzero samples, found {}",
            pts.len()
        )));
    }
    let decay = |ti: f64| match regime {
        DecayRegime::SmallTime => -1.0 / ti,
        DecayRegime::LargeTime => -ti,
    };
    let a = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => pts[i].0.ln(),
        _ => decay(pts[i].0),
    });
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::Domain(format!("envelope fit: {e}")))?;
    let resid = &y - &a * &coef;
    Ok(EnvelopeFit {
        regime,
        t_min,
        t_max,
        log_c: coef[0],
        power: coef[1],
        delta: coef[2],
        max_excess: resid.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

// ---------------------------------------------------------------------------
// Moments

/// Quadrature nodes t = e^u with 16-point Gauss panels of equal width in u.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub nodes: Vec<f64>,
    /// Weights for ∫ g(t) dt (the Jacobian t is included).
    pub weights: Vec<f64>,
    pub panel_len: usize,
    ref_nodes: Vec<f64>,
    ref_weights: Vec<f64>,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, panel_width: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && panel_width > 0.0) {
            return Err(Error::Domain(format!(
                "time grid needs 0 < t_min < t_max and a positive width, got {t_min}, {t_max}, {panel_width}"
            )));
        }
        let (u0, u1) = (t_min.ln(), t_max.ln());
        let n_panels = ((u1 - u0) / panel_width).ceil() as usize;
        let rule = GaussRule::new(16);
        let p = Panels::from_breaks(uniform_breaks(u0, u1, n_panels), &rule);
        let nodes: Vec<f64> = p.nodes.iter().map(|u| u.exp()).collect();
        let weights = p.weights.iter().zip(&nodes).map(|(w, t)| w * t).collect();
        Ok(Self {
            nodes,
            weights,
            panel_len: 16,
            ref_nodes: rule.nodes,
            ref_weights: rule.weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_panels(&self) -> usize {
        self.nodes.len() / self.panel_len
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|t| f(*t)).collect()
    }

    /// ∫ f(t) t^{−m} dt with an error estimate from the two highest Legendre
    /// coefficients of every panel. The first and last panels must carry a
    /// negligible share of ∫|·|, otherwise the integrand has not decayed at the ends
    /// of the grid.
    pub fn moment(&self, f: &[f64], m: i32) -> Result<Estimate<f64>> {
        if f.len() != self.len() {
            return Err(Error::Domain(format!(
                "profile has {} samples on a grid of {}",
                f.len(),
                self.len()
            )));
        }
        // u-space integrand g(u) = f(t) t^{1−m}; `weights` already carry one factor t
        let g: Vec<f64> = f
            .iter()
            .zip(&self.nodes)
            .map(|(fi, t)| if *fi == 0.0 { 0.0 } else { fi * t.powi(-m) })
            .collect();
        let terms: Vec<f64> = g.iter().zip(&self.weights).map(|(gi, w)| gi * w).collect();
        let total_abs: f64 = terms.iter().map(|x| x.abs()).sum();
        let value: f64 = terms.iter().sum();
        if total_abs == 0.0 {
            return Ok(Estimate { value: 0.0, error: 0.0 });
        }
        if !total_abs.is_finite() {
            return Err(Error::Quadrature(format!("moment m = {m} overflowed")));
        }
        let k = self.panel_len;
        let share = |range: std::ops::Range<usize>| terms[range].iter().map(|x| x.abs()).sum::<f64>() / total_abs;
        let (head, tail) = (share(0..k), share(self.len() - k..self.len()));
        const EDGE_TOL: f64 = 1e-12;
        if head > EDGE_TOL {
            return Err(Error::Quadrature(format!(
                "t^-{m} growth is not dominated near t = {:.3e}: first panel holds {head:.3e} of the mass",
                self.nodes[0]
            )));
        }
        if tail > EDGE_TOL {
            return Err(Error::Quadrature(format!(
                "moment m = {m} has not decayed by t = {:.3e}: last panel holds {tail:.3e} of the mass",
                self.nodes[self.len() - 1]
            )));
        }
        let mut error = (head + tail) * total_abs + 1e-15 * total_abs;
        for p in 0..self.n_panels() {
            let gi = &terms[p * k..(p + 1) * k];
            // dividing out the reference weights leaves the integrand times |J|
            let vals: Vec<f64> = gi.iter().zip(&self.ref_weights).map(|(x, w)| x / w).collect();
            let c_hi = legendre_coefficient(&self.ref_nodes, &self.ref_weights, &vals, k - 1);
            let c_lo = legendre_coefficient(&self.ref_nodes, &self.ref_weights, &vals, k - 2);
            error += 2.0 * (c_hi.abs() + c_lo.abs());
        }
        Ok(Estimate { value, error })
    }
}

/// (2k+1)/2 Σ_j w_j v_j P_k(x_j).
fn legendre_coefficient(x: &[f64], w: &[f64], v: &[f64], k: usize) -> f64 {
    let mut acc = 0.0;
    for ((xj, wj), vj) in x.iter().zip(w).zip(v) {
        let (mut p0, mut p1) = (1.0, *xj);
        let pk = if k == 0 {
            1.0
        } else {
            for n in 2..=k {
                let nf = n as f64;
                let p2 = ((2.0 * nf - 1.0) * xj * p1 - (nf - 1.0) * p0) / nf;
                p0 = p1;
                p1 = p2;
            }
            p1
        };
        acc += wj * vj * pk;
    }
    acc * (2.0 * k as f64 + 1.0) / 2.0
}

/// Moment indices ℓ, ℓ+1, …, ℓ+M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentWindow {
    pub ell: i32,
    pub m: i32,
}

impl Default for MomentWindow {
    fn default() -> Self {
        Self { ell: 1, m: 12 }
    }
}

impl MomentWindow {
    pub fn new(ell: i32, m: i32) -> Result<Self> {
        if ell < 0 || m < 0 {
            return Err(Error::Domain(format!("moment window needs ell, M >= 0, got {ell}, {m}")));
        }
        Ok(Self { ell, m })
    }

    pub fn indices(&self) -> impl Iterator<Item = i32> + Clone {
        self.ell..=self.ell + self.m
    }

    pub fn len(&self) -> usize {
        self.m as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn range(&self) -> [i32; 2] {
        [self.ell, self.ell + self.m]
    }
}

/// Heat-trace profiles f_k sampled on a [`TimeGrid`], one per exponent α_k.
#[derive(Debug, Clone)]
pub struct MomentSystem {
    pub alphas: Vec<f64>,
    pub grid: TimeGrid,
    /// Row k holds f_k(t_i).
    pub f_values: DMatrix<f64>,
    pub window: MomentWindow,
}

impl MomentSystem {
    pub fn new(alphas: Vec<f64>, grid: TimeGrid, profiles: &[Vec<f64>], window: MomentWindow) -> Result<Self> {
        if alphas.len() != profiles.len() || alphas.is_empty() {
            return Err(Error::Domain(format!(
                "{} exponents for {} profiles",
                alphas.len(),
                profiles.len()
            )));
        }
        check_alphas(&alphas)?;
        for (i, a) in alphas.iter().enumerate() {
            if alphas[..i].contains(a) {
                return Err(Error::Domain(format!("exponent {a} repeated")));
            }
        }
        let n = grid.len();
        for p in profiles {
            if p.len() != n {
                return Err(Error::Domain(format!("profile has {} samples, grid has {n}", p.len())));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("heat-trace profile".into()));
            }
            check_two_sided_decay(&grid, p)?;
        }
        let f_values = DMatrix::from_fn(profiles.len(), n, |k, i| profiles[k][i]);
        Ok(Self {
            alphas,
            grid,
            f_values,
            window,
        })
    }
}

fn check_alphas(alphas: &[f64]) -> Result<()> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::Domain(format!("exponents must lie in (0,1), got {a}")));
    }
    Ok(())
}

/// The samples must be negligible on the first and last panels of the grid.
fn check_two_sided_decay(grid: &TimeGrid, f: &[f64]) -> Result<()> {
    let peak = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Ok(());
    }
    let k = grid.panel_len;
    let edge = f[..k].iter().chain(&f[f.len() - k..]).fold(0.0f64, |m, v| m.max(v.abs()));
    if edge > 1e-12 * peak {
        return Err(Error::Domain(format!(
            "profile does not decay at both ends of the time grid (edge/peak = {:.3e})",
            edge / peak
        )));
    }
    Ok(())
}

/// Σ_k Γ(m+1+α_k) ∫₀^∞ f_k(t) t^{−m} dt.
pub fn moment_sum(ms: &MomentSystem, m: i32) -> Result<Estimate<f64>> {
    if m < ms.window.ell {
        return Err(Error::Domain(format!("moment index {m} below the window start {}", ms.window.ell)));
    }
    let mut value = 0.0;
    let mut error = 0.0;
    for (k, alpha) in ms.alphas.iter().enumerate() {
        let row: Vec<f64> = ms.f_values.row(k).iter().cloned().collect();
        let est = ms.grid.moment(&row, m)?;
        let g = gamma(m as f64 + 1.0 + alpha)?;
        value += g * est.value;
        error += g * est.error;
    }
    Ok(Estimate { value, error })
}

// ---------------------------------------------------------------------------
// Decoupling

/// Profiles (t/c) e^{2 − t/c − c/t}, unit peak at t = c, with centers spaced by
/// `ratio` symmetrically about t = 1.
pub fn bump_profiles(grid: &TimeGrid, count: usize, ratio: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|p| {
            let c = ratio.powf(p as f64 - (count as f64 - 1.0) / 2.0);
            grid.sample(|t| (t / c) * (2.0 - t / c - c / t).exp())
        })
        .collect()
}

/// Relative singular-value floor below which a non-resonant moment matrix is
/// reported as ill-conditioned rather than as evidence.
pub const RANK_TOL: f64 = 1e-10;

/// Result of [`decoupling_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub alphas: Vec<f64>,
    pub m_range: [i32; 2],
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub condition_number: f64,
    pub singular_values: Vec<f64>,
    /// Right singular vector of σ_min, split per exponent, in normalized-profile
    /// coefficients.
    pub minimizer: Vec<Vec<f64>>,
    /// True when two exponents coincide mod 1.
    pub resonant: bool,
}

/// Whether two exponents coincide modulo 1.
pub fn is_resonant(alphas: &[f64]) -> bool {
    alphas.iter().enumerate().any(|(i, a)| {
        alphas[..i].iter().any(|b| {
            let d = (a - b).rem_euclid(1.0);
            d.min(1.0 - d) < 1e-12
        })
    })
}

/// Smallest singular value of (c_{k,p}) ↦ (Σ_k Γ(m+1+α_k) Σ_p c_{k,p} ∫ φ̂_p t^{−m} dt)_m,
/// where every exponent uses the same basis and φ̂_p = φ_p / max|φ_p|. Rows are
/// scaled to unit max norm.
pub fn decoupling_test(
    alphas: &[f64],
    grid: &TimeGrid,
    basis: &[Vec<f64>],
    window: MomentWindow,
) -> Result<DecouplingReport> {
    check_alphas(alphas)?;
    if basis.is_empty() || alphas.is_empty() {
        return Err(Error::Domain("decoupling test needs exponents and profiles".into()));
    }
    let cols = alphas.len() * basis.len();
    if window.len() < cols {
        return Err(Error::Domain(format!(
            "moment window of {} rows cannot separate {cols} unknowns",
            window.len()
        )));
    }
    let normalized: Vec<Vec<f64>> = basis
        .iter()
        .map(|p| {
            let peak = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak == 0.0 {
                return Err(Error::Domain("zero profile in the basis".into()));
            }
            check_two_sided_decay(grid, p)?;
            Ok(p.iter().map(|v| v / peak).collect())
        })
        .collect::<Result<_>>()?;
    let ms: Vec<i32> = window.indices().collect();
    let moments: Vec<Vec<f64>> = ms
        .par_iter()
        .map(|&m| normalized.iter().map(|p| grid.moment(p, m).map(|e| e.value)).collect())
        .collect::<Result<_>>()?;
    let mut a = DMatrix::zeros(ms.len(), cols);
    for (i, &m) in ms.iter().enumerate() {
        for (k, alpha) in alphas.iter().enumerate() {
            let g = gamma(m as f64 + 1.0 + alpha)?;
            for (p, mu) in moments[i].iter().enumerate() {
                a[(i, k * basis.len() + p)] = g * mu;
            }
        }
        let peak = a.row(i).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if peak > 0.0 {
            a.row_mut(i).scale_mut(1.0 / peak);
        }
    }
    let svd = a.svd(false, true);
    let sv = &svd.singular_values;
    let (imin, sigma_min) = sv
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    let sigma_max = sv.iter().cloned().fold(0.0, f64::max);
    let condition_number = sigma_max / sigma_min;
    let mut singular_values: Vec<f64> = sv.iter().cloned().collect();
    singular_values.sort_by(|x, y| y.total_cmp(x));
    let resonant = is_resonant(alphas);
    if !resonant && sigma_min < RANK_TOL * sigma_max {
        return Err(Error::IllConditioned {
            condition_number,
            singular_values,
        });
    }
    let vt = svd.v_t.expect("right singular vectors requested");
    let v = vt.row(imin);
    let minimizer = (0..alphas.len())
        .map(|k| (0..basis.len()).map(|p| v[k * basis.len() + p]).collect())
        .collect();
    Ok(DecouplingReport {
        alphas: alphas.to_vec(),
        m_range: window.range(),
        sigma_min,
        sigma_max,
        condition_number,
        singular_values,
        minimizer,
        resonant,
    })
}

/// Serialized summary of a moment study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub alphas: Vec<f64>,
    pub m_range: [i32; 2],
    pub sigma_min: f64,
    pub condition_number: f64,
    pub envelope_fits: Vec<EnvelopeFit>,
}

impl MomentReport {
    pub fn new(report: &DecouplingReport, envelope_fits: Vec<EnvelopeFit>) -> Self {
        Self {
            alphas: report.alphas.clone(),
            m_range: report.m_range,
            sigma_min: report.sigma_min,
            condition_number: report.condition_number,
            envelope_fits,
        }
    }
}

// ---------------------------------------------------------------------------
// Resonance

/// Outcome of [`resonance_counterexample`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub s: f64,
    pub m: u32,
    /// ‖(−Δ)^s((−Δ)^m u) − (−Δ)^{s+m}u‖ / ‖(−Δ)^{s+m}u‖.
    pub residual: f64,
    /// sup_{r<R} |(−Δ)^m u| / sup |(−Δ)^m u|.
    pub leak_u1: f64,
    /// sup_{r<R} |u| / sup |u|.
    pub leak_u2: f64,
}

/// With u₁ = (−Δ)^m u and u₂ = u, (−Δ)^s u₁ − (−Δ)^{s+m} u₂ = 0 although both vanish
/// on B_R(e₀) whenever u does, so the orders s and s+m cannot be separated.
pub fn resonance_counterexample(
    plan: &HelgasonTransform,
    u: &RadialFunction,
    s: f64,
    m: u32,
    omega_radius: f64,
) -> Result<ResonanceReport> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("order s must lie in (0,1), got {s}")));
    }
    let uh = plan.forward(u)?;
    let mf = m as f64;
    let u1 = if m == 0 { u.clone() } else { plan.inverse(&uh.multiply_tau(|tau| tau.powf(mf)))? };
    let lhs = plan.inverse(&plan.forward(&u1)?.multiply_tau(|tau| tau.powf(s)))?;
    let rhs = plan.inverse(&uh.multiply_tau(|tau| tau.powf(s + mf)))?;
    let denom = rhs.l2_norm();
    let residual = if denom == 0.0 { 0.0 } else { lhs.sub(&rhs).l2_norm() / denom };
    let leak = |f: &RadialFunction| {
        let peak = f.sup_norm();
        if peak == 0.0 {
            return 0.0;
        }
        let inner = f
            .grid
            .nodes()
            .iter()
            .zip(&f.values)
            .filter(|(r, _)| **r < omega_radius)
            .fold(0.0f64, |acc, (_, v)| acc.max(v.abs()));
        inner / peak
    };
    Ok(ResonanceReport {
        s,
        m,
        residual,
        leak_u1: leak(&u1),
        leak_u2: leak(u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_weight_examples() {
        let w = DecayWeight::new(1.0, Dim::Two).unwrap();
        assert_eq!(decay_weight_eval(&HyperPoint::origin(2), &w), (-1.0f64).exp());
        assert!((w.at_distance(3f64.sqrt()) - (-2.0f64).exp()).abs() < 1e-15);
        // γ must exceed (n−1)/2 strictly
        assert!(DecayWeight::new(1.0, Dim::Three).is_err());
        assert!(DecayWeight::new(0.5, Dim::Two).is_err());
    }

    #[test]
    fn legendre_coefficients_recover_polynomials() {
        let r = GaussRule::<f64>::new(16);
        // 3 P_2 − P_5 sampled at the nodes
        let p2 = |x: f64| 0.5 * (3.0 * x * x - 1.0);
        let p5 = |x: f64| (63.0 * x.powi(5) - 70.0 * x.powi(3) + 15.0 * x) / 8.0;
        let v: Vec<f64> = r.nodes.iter().map(|x| 3.0 * p2(*x) - p5(*x)).collect();
        assert!((legendre_coefficient(&r.nodes, &r.weights, &v, 2) - 3.0).abs() < 1e-13);
        assert!((legendre_coefficient(&r.nodes, &r.weights, &v, 5) + 1.0).abs() < 1e-13);
        assert!(legendre_coefficient(&r.nodes, &r.weights, &v, 15).abs() < 1e-13);
    }

    #[test]
    fn resonance_detection_is_mod_one() {
        assert!(is_resonant(&[0.5, 0.5]));
        assert!(!is_resonant(&[0.3, 0.7]));
        assert!(is_resonant(&[0.25, 1.25]));
    }
}
