//! (−Δ)^s on H^n by three routes (spectral multiplier, heat semigroup,
//! principal-value singular integral), Sobolev norms, and P = Σ b_k (−Δ)^{s_k}.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_to_polar, Dim, HyperPoint};
use crate::quadrature::{graded_breaks, two_sided_breaks, GaussRule, Panels};
use crate::specfun::{bessel_k_scaled, gamma, kernel_constants, KernelConstants};
use crate::spectral::{HelgasonTransform, RadialFunction};

const INTEGRALITY_TOL: f64 = 1e-12;

/// s = m + α with m = ⌊s⌋ and α ∈ (0,1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracPower {
    pub s: f64,
    pub m: u32,
    pub alpha: f64,
}

impl FracPower {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Spec(format!("fractional order must be positive, got {s}")));
        }
        let m = s.floor();
        let alpha = s - m;
        if alpha < INTEGRALITY_TOL || 1.0 - alpha < INTEGRALITY_TOL {
            return Err(Error::Spec(format!("order {s} is an integer")));
        }
        Ok(Self { s, m: m as u32, alpha })
    }
}

/// One term b (−Δ)^s of a polyharmonic operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub b: f64,
    pub s: FracPower,
}

/// P = Σ b_k (−Δ)^{s_k} with strictly increasing orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyharmonicSpec {
    terms: Vec<Term>,
}

impl PolyharmonicSpec {
    /// Builds from (b_k, s_k) pairs; sorts by order and rejects repeated orders or zero b.
    pub fn new(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Spec("operator needs at least one term".into()));
        }
        let mut terms = pairs
            .iter()
            .map(|(b, s)| {
                if *b == 0.0 || !b.is_finite() {
                    return Err(Error::Spec(format!("coefficient must be finite and nonzero, got {b}")));
                }
                Ok(Term { b: *b, s: FracPower::new(*s)? })
            })
            .collect::<Result<Vec<_>>>()?;
        terms.sort_by(|a, b| a.s.s.total_cmp(&b.s.s));
        if terms.windows(2).any(|w| w[1].s.s - w[0].s.s <= INTEGRALITY_TOL) {
            return Err(Error::Spec("orders must be strictly increasing".into()));
        }
        Ok(Self { terms })
    }

    pub fn single(s: f64) -> Result<Self> {
        Self::new(&[(1.0, s)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Largest order s_N.
    pub fn top_order(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.s.s)
    }

    /// Solvers need b_k > 0.
    pub fn require_positive(&self) -> Result<()> {
        if let Some(t) = self.terms.iter().find(|t| t.b <= 0.0) {
            return Err(Error::Spec(format!(
                "solver requires positive coefficients, found b = {} at s = {}",
                t.b, t.s.s
            )));
        }
        Ok(())
    }

    /// Σ b_k τ^{s_k}.
    pub fn symbol(&self, tau: f64) -> f64 {
        self.terms.iter().map(|t| t.b * tau.powf(t.s.s)).sum()
    }
}

/// True iff the orders are strictly increasing and no two differ by an integer.
pub fn check_assumption_h(spec: &PolyharmonicSpec) -> bool {
    let s: Vec<f64> = spec.terms.iter().map(|t| t.s.s).collect();
    if s.windows(2).any(|w| w[1] <= w[0]) {
        return false;
    }
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            let d = s[j] - s[i];
            if (d - d.round()).abs() < INTEGRALITY_TOL {
                return false;
            }
        }
    }
    true
}

/// Regularity index a of H^a(H^n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevIndex(pub f64);

// ---------------------------------------------------------------------------
// Spectral route

/// (−Δ)^s f through the multiplier τ^s.
pub fn multiplier_apply(plan: &HelgasonTransform, f: &RadialFunction, s: f64) -> Result<RadialFunction> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("power must be >= 0, got {s}")));
    }
    let fh = plan.forward(f)?;
    plan.inverse(&fh.multiply_tau(|tau| tau.powf(s)))
}

/// P f = Σ b_k (−Δ)^{s_k} f.
pub fn apply_polyharmonic(
    plan: &HelgasonTransform,
    spec: &PolyharmonicSpec,
    f: &RadialFunction,
) -> Result<RadialFunction> {
    let fh = plan.forward(f)?;
    plan.inverse(&fh.multiply_tau(|tau| spec.symbol(tau)))
}

/// (∫ (1+τ)^a |f̂|² dμ)^{1/2}.
pub fn sobolev_norm(plan: &HelgasonTransform, f: &RadialFunction, a: SobolevIndex) -> Result<f64> {
    let fh = plan.forward(f)?;
    let mut total = 0.0;
    let mut last = 0.0;
    let tau = plan.spectral.tau();
    let n = tau.len();
    for (j, ((t, v), w)) in tau.iter().zip(&fh.values).zip(plan.spectral.measure_weights()).enumerate() {
        let c = (1.0 + t).powf(a.0) * v * v * w;
        total += c;
        if j + 16 >= n {
            last += c;
        }
    }
    if total > 0.0 && last > plan.tail_tol * total {
        return Err(Error::Truncation(format!(
            "H^{} energy not resolved: last panel holds {:.3e} of the total",
            a.0,
            last / total
        )));
    }
    Ok(total.sqrt())
}

// ---------------------------------------------------------------------------
// Heat-semigroup route

/// Quadrature parameters for the semigroup formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BalakrishnanConfig {
    /// Below t0 the semigroup is replaced by its Taylor expansion.
    pub t0: f64,
    /// Taylor terms on (0, t0].
    pub taylor_terms: usize,
    /// Gauss nodes per unit panel in u = −ln t on [t0, 1].
    pub order: usize,
    /// Panel width on [1, T_max].
    pub tail_panel: f64,
    /// Bound on the neglected tail ∫_{T_max}^∞, relative to ‖f‖.
    pub tail_tol: f64,
    /// Relative tolerance of the (t0, 1] self-check.
    pub self_check_tol: f64,
}

impl Default for BalakrishnanConfig {
    fn default() -> Self {
        Self {
            t0: 1e-5,
            taylor_terms: 4,
            order: 16,
            tail_panel: 2.0,
            tail_tol: 1e-12,
            self_check_tol: 1e-8,
        }
    }
}

/// (1/Γ(−s)) ∫₀^∞ (e^{tΔ}f − f) t^{−1−s} dt for s ∈ (0,1).
pub fn balakrishnan_apply(
    plan: &HelgasonTransform,
    f: &RadialFunction,
    s: f64,
    cfg: &BalakrishnanConfig,
) -> Result<RadialFunction> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("semigroup formula needs s in (0,1), got {s}")));
    }
    let dim = plan.dim();
    let fh = plan.forward(f)?;
    let npts = f.values.len();
    let mut acc = vec![0.0; npts];
    let axpy = |acc: &mut [f64], c: f64, g: &[f64]| {
        for (a, v) in acc.iter_mut().zip(g) {
            *a += c * v;
        }
    };

    // (0, t0]: Σ_j Δ^j f · t0^{j−s} / (j!(j−s)).
    let mut fact = 1.0;
    for j in 1..=cfg.taylor_terms {
        fact *= j as f64;
        let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
        let lap_j = plan.inverse_unchecked(&fh.multiply_tau(|tau| sign * tau.powi(j as i32)))?;
        let c = cfg.t0.powf(j as f64 - s) / (fact * (j as f64 - s));
        axpy(&mut acc, c, &lap_j.values);
    }

    // (t0, 1]: t = e^{−u}, ∫ (e^{tΔ}f − f) t^{−s} du over u ∈ [0, ln(1/t0)].
    let u_max = (1.0 / cfg.t0).ln();
    let n_panels = u_max.ceil() as usize;
    let breaks = crate::quadrature::uniform_breaks(0.0, u_max, n_panels);
    let panel_integral = |order: usize| -> Result<Vec<f64>> {
        let p = Panels::from_breaks(breaks.clone(), &GaussRule::new(order));
        let mut out = vec![0.0; npts];
        for (u, w) in p.nodes.iter().zip(&p.weights) {
            let t = (-u).exp();
            let heat = plan.inverse_unchecked(&fh.multiply_tau(|tau| (-t * tau).exp()))?;
            let c = w * t.powf(-s);
            for ((o, h), f0) in out.iter_mut().zip(&heat.values).zip(&f.values) {
                *o += c * (h - f0);
            }
        }
        Ok(out)
    };
    let fine = panel_integral(cfg.order)?;
    let coarse = panel_integral((cfg.order / 2).max(4))?;
    let scale = fine.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f.sup_norm() * 1e-300);
    let diff = fine
        .iter()
        .zip(&coarse)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if scale > 0.0 && diff > cfg.self_check_tol * scale {
        return Err(Error::Quadrature(format!(
            "semigroup panel on (t0,1] not converged: relative change {:.3e}",
            diff / scale
        )));
    }
    axpy(&mut acc, 1.0, &fine);

    // [1, T_max]: ∫ e^{tΔ}f t^{−1−s} dt; then −f/s for the constant part on [1, ∞).
    let decay = dim.rho().powi(2);
    let t_max = 1.0 + (1.0 / cfg.tail_tol).ln() / decay;
    let n_tail = ((t_max - 1.0) / cfg.tail_panel).ceil() as usize;
    let p = Panels::from_breaks(
        crate::quadrature::uniform_breaks(1.0, t_max, n_tail),
        &GaussRule::new(cfg.order),
    );
    for (t, w) in p.nodes.iter().zip(&p.weights) {
        let heat = plan.inverse_unchecked(&fh.multiply_tau(|tau| (-t * tau).exp()))?;
        axpy(&mut acc, w * t.powf(-1.0 - s), &heat.values);
    }
    axpy(&mut acc, -1.0 / s, &f.values);

    let g = gamma(-s)?;
    for a in acc.iter_mut() {
        *a /= g;
    }
    RadialFunction::new(plan.radial.clone(), acc)
}

/// (−Δ)^s for any non-integer s > 0 via (−Δ)^m ∘ (−Δ)^α: the fractional part by
/// the semigroup formula, the integer part by the (local) spectral power.
pub fn balakrishnan_apply_frac(
    plan: &HelgasonTransform,
    f: &RadialFunction,
    s: FracPower,
    cfg: &BalakrishnanConfig,
) -> Result<RadialFunction> {
    let g = balakrishnan_apply(plan, f, s.alpha, cfg)?;
    if s.m == 0 {
        return Ok(g);
    }
    multiplier_apply(plan, &g, s.m as f64)
}

// ---------------------------------------------------------------------------
// Singular-integral kernel

fn check_kernel_args(rho: f64, s: f64) -> Result<()> {
    if !(rho > 0.0) {
        return Err(Error::Domain(format!("kernel needs rho > 0, got {rho}")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("kernel order must lie in (0,1), got {s}")));
    }
    Ok(())
}

/// Kernel K_{n,s}(ρ) with the normalization C₁ of the singular-integral formula.
///
/// n = 3: C₁ ρ^{−ν} K_{ν+1}(ρ) / sinh ρ, ν = (1+2s)/2.
/// n = 2: C₁/(2√π) ∫_ρ^∞ r^{−ν} K_{ν+1}(r/2) / √(cosh r − cosh ρ) dr.
pub fn kernel_k(rho: f64, dim: Dim, s: f64) -> Result<f64> {
    check_kernel_args(rho, s)?;
    let kc = kernel_constants(dim, s)?;
    Ok(kc.c1 * kernel_shape(rho, dim, s))
}

/// K_{n,s}/C₁.
fn kernel_shape(rho: f64, dim: Dim, s: f64) -> f64 {
    let nu = 0.5 + s;
    match dim {
        Dim::Three => {
            let ks = bessel_k_scaled(nu + 1.0, rho).expect("positive argument");
            // e^{−ρ}/sinh ρ = 2/(e^{2ρ} − 1)
            rho.powf(-nu) * ks * 2.0 / (2.0 * rho).exp_m1()
        }
        Dim::Two => kernel_h2_integral(rho, s) / (2.0 * std::f64::consts::PI.sqrt()),
    }
}

/// ∫_ρ^∞ r^{−ν} K_{ν+1}(r/2)/√(cosh r − cosh ρ) dr via r = ρ + u².
fn kernel_h2_integral(rho: f64, s: f64) -> f64 {
    let nu = 0.5 + s;
    let su = rho.sqrt().min(1.0);
    let mut breaks = vec![0.0];
    let mut b = 0.125 * su;
    while b < 1.0 {
        breaks.push(b);
        b *= 2.0;
    }
    let u_max = 7.0;
    let mut x = 1.0;
    while x < u_max {
        breaks.push(x);
        x += 0.5;
    }
    breaks.push(u_max);
    let p = Panels::from_breaks(breaks, &GaussRule::new(16));
    p.integrate(|u| {
        let u2 = u * u;
        let r = rho + u2;
        let ks = bessel_k_scaled(nu + 1.0, 0.5 * r).expect("positive argument");
        // √(cosh r − cosh ρ) = √(2 sinh(ρ + u²/2) sinh(u²/2)); divide out e^{r/2} jointly.
        let half = 0.5 * u2;
        let a = -0.5 * (-2.0 * (rho + half)).exp_m1(); // e^{−(ρ+u²/2)} sinh(ρ+u²/2)
        let sh = if half < 1e-3 {
            // sinh(h)/u for small h = u²/2, times u later
            half * (1.0 + half * half / 6.0)
        } else {
            half.sinh()
        };
        // e^{−r/2}·√(cosh r − cosh ρ) = √(2a·sinh(u²/2)·e^{−u²/2})
        let root = (2.0 * a * sh * (-half).exp()).sqrt();
        if u == 0.0 {
            return 0.0;
        }
        // integrand·dr/du = 2u · r^{−ν} K_{ν+1}(r/2) / √(…), with K = ks·e^{−r/2}
        2.0 * u * r.powf(-nu) * ks * (-r).exp() / root
    })
}

/// Closed-form scale κ_{n,s} with (−Δ)^s f = κ P.V.∫ (f(x)−f(y)) K_{n,s} dV, obtained
/// from the subordination integral K = (1/|Γ(−s)|)∫₀^∞ p_t t^{−1−s} dt.
pub fn kernel_scale(dim: Dim, s: f64) -> Result<f64> {
    let kc = kernel_constants(dim, s)?;
    let g = gamma(-s)?.abs();
    let pi = std::f64::consts::PI;
    Ok(match dim {
        Dim::Three => 2f64.powf(2.5 + s) * (4.0 * pi).powf(-1.5) / (g * kc.c1),
        Dim::Two => 2.0 * 2f64.sqrt() * (4.0 * pi).powf(-1.5) / g * 2.0 * pi.sqrt() / kc.c1,
    })
}

/// κ·K_{n,s}(ρ): the kernel of (−Δ)^s itself.
pub fn operator_kernel(rho: f64, dim: Dim, s: f64) -> Result<f64> {
    Ok(kernel_scale(dim, s)? * kernel_k(rho, dim, s)?)
}

/// ∫_R^∞ K_{n,s}(ρ) sinh^{n−1}ρ dρ (without the sphere factor).
pub fn kernel_tail(r0: f64, dim: Dim, s: f64) -> Result<f64> {
    check_kernel_args(r0, s)?;
    let kc = kernel_constants(dim, s)?;
    let nu = 0.5 + s;
    // ρ = R w^{−1/s}, w ∈ (0,1]: the ρ^{−1−s} tail becomes bounded in w.
    let rule = GaussRule::new(16);
    let p = match dim {
        Dim::Three => Panels::from_breaks(graded_breaks(0.0, 1.0, 8, 24, 0.5), &rule),
        Dim::Two => Panels::from_breaks(two_sided_breaks(0.0, 1.0, 8, 24, 0.5), &rule),
    };
    let val = p.integrate(|w: f64| {
        if w == 0.0 {
            return 0.0;
        }
        let rho = r0 * w.powf(-1.0 / s);
        if !rho.is_finite() {
            return 0.0;
        }
        let jac = r0 / s * w.powf(-1.0 / s - 1.0);
        let h = match dim {
            // C1 ρ^{−ν} K_{ν+1}(ρ) sinh ρ
            Dim::Three => {
                let ks = bessel_k_scaled(nu + 1.0, rho).expect("positive");
                rho.powf(-nu) * ks * 0.5 * (-(-2.0 * rho).exp()).ln_1p().exp()
            }
            // (1/√π) r^{−ν} K_{ν+1}(r/2) √(cosh r − cosh R), order of integration swapped.
            Dim::Two => {
                let ks = bessel_k_scaled(nu + 1.0, 0.5 * rho).expect("positive");
                let inner = 0.5 * (1.0 + (-2.0 * rho).exp()) - (r0 - rho).exp() * 0.5 * (1.0 + (-2.0 * r0).exp());
                rho.powf(-nu) * ks * inner.max(0.0).sqrt() / std::f64::consts::PI.sqrt()
            }
        };
        h * jac
    });
    Ok(kc.c1 * val)
}

// ---------------------------------------------------------------------------
// Singular-integral route

/// Parameters of the principal-value evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularIntegralConfig {
    /// Scale κ; `None` uses [`kernel_scale`].
    pub kappa: Option<f64>,
    /// Initial excision radius.
    pub eps0: f64,
    /// Number of halvings of ε.
    pub levels: usize,
    /// Relative convergence tolerance of the ε sequence.
    pub tol: f64,
}

impl Default for SingularIntegralConfig {
    fn default() -> Self {
        Self {
            kappa: None,
            eps0: 0.02,
            levels: 5,
            tol: 1e-7,
        }
    }
}

/// Spherical mean of a radial function over the geodesic sphere of radius ρ
/// about a point at distance `rx` from e₀.
pub fn spherical_mean(f: &RadialFunction, rx: f64, rho: f64) -> f64 {
    if rx == 0.0 {
        return f.eval(rho);
    }
    match f.dim() {
        Dim::Three => {
            // (1/(2 sinh rx sinh ρ)) ∫_{|rx−ρ|}^{rx+ρ} f(r') sinh r' dr'
            let (a, b) = ((rx - rho).abs(), rx + rho);
            let rule = GaussRule::new(16);
            let mut breaks = vec![a];
            let nseg = ((b - a) / 0.25).ceil().max(1.0) as usize;
            for k in 1..nseg {
                breaks.push(a + (b - a) * k as f64 / nseg as f64);
            }
            breaks.push(b);
            let p = Panels::from_breaks(breaks, &rule);
            let v = p.integrate(|r| f.eval(r) * r.sinh());
            v / (2.0 * rx.sinh() * rho.sinh())
        }
        Dim::Two => {
            // (1/π) ∫₀^π f(r'(θ)) dθ, cosh r' = cosh rx cosh ρ − sinh rx sinh ρ cos θ.
            let rule = GaussRule::new(16);
            let p = Panels::from_breaks(crate::quadrature::uniform_breaks(0.0, std::f64::consts::PI, 8), &rule);
            let (sx, sr) = (rx.sinh(), rho.sinh());
            let v = p.integrate(|th| {
                // cosh r' − 1 = cosh(rx−ρ) − 1 + sinh rx sinh ρ (1 − cos θ)
                let d = rx - rho;
                let cm1 = 2.0 * (0.5 * d).sinh().powi(2) + sx * sr * 2.0 * (0.5 * th).sin().powi(2);
                let r = 2.0 * (0.5 * cm1).sqrt().asinh();
                f.eval(r)
            });
            v / std::f64::consts::PI
        }
    }
}

fn effective_support(f: &RadialFunction) -> f64 {
    let sup = f.sup_norm();
    let nodes = f.grid.nodes();
    let mut last = 0.0;
    for (r, v) in nodes.iter().zip(&f.values) {
        if v.abs() > 1e-15 * sup {
            last = *r;
        }
    }
    // Round up to a break so that the integration panels see the support edge.
    let breaks = f.grid.breaks();
    let idx = breaks.partition_point(|b| *b <= last);
    breaks.get(idx).copied().unwrap_or(f.grid.r_max)
}

fn support_edge(f: &RadialFunction) -> Option<f64> {
    // Outermost radius where f changes from nonzero to identically zero.
    let sup = f.sup_norm();
    let nodes = f.grid.nodes();
    let mut last = None;
    for (r, v) in nodes.iter().zip(&f.values) {
        if v.abs() > 1e-15 * sup {
            last = Some(*r);
        }
    }
    let last = last?;
    let breaks = f.grid.breaks();
    let idx = breaks.partition_point(|b| *b <= last);
    breaks.get(idx).copied()
}

/// κ·P.V.∫ (f(x) − f(y)) K_{n,s}(d(x,y)) dV(y) for radial f.
pub fn singular_integral_apply(
    f: &RadialFunction,
    x: &HyperPoint<f64>,
    s: f64,
    cfg: &SingularIntegralConfig,
) -> Result<f64> {
    let dim = f.dim();
    if x.dim() != dim.n() {
        return Err(Error::Domain("evaluation point lives in a different H^n".into()));
    }
    let kappa = match cfg.kappa {
        Some(k) => k,
        None => kernel_scale(dim, s)?,
    };
    let rx = point_to_polar(x).r;
    let n = dim.n() as f64;
    let area = dim.sphere_area();
    let fx = f.eval(rx);
    let support = effective_support(f);
    let r_s = support + rx;

    // Break points where the geodesic sphere about x crosses the support edge.
    let mut extra = Vec::new();
    if let Some(a) = support_edge(f) {
        for c in [(a - rx).abs(), a + rx] {
            if c > 0.0 && c < r_s {
                extra.push(c);
            }
        }
    }
    let kernel_vol = |rho: f64| -> f64 {
        kernel_shape(rho, dim, s) * crate::geometry::volume_weight(rho, dim.n())
    };
    let diff = |rho: f64| fx - spherical_mean(f, rx, rho);

    // Δf(x) from D(ρ) = −2n (f(x) − M(ρ))/ρ², Richardson in ρ².
    let d = |h: f64| -2.0 * n * diff(h) / (h * h);
    let (h1, h2, h3) = (0.08, 0.04, 0.02);
    let r12 = (4.0 * d(h2) - d(h1)) / 3.0;
    let r23 = (4.0 * d(h3) - d(h2)) / 3.0;
    let lap = (16.0 * r23 - r12) / 15.0;

    let rule = GaussRule::new(16);
    // Main part on [ε, R_s].
    let main = |eps: f64| -> f64 {
        let mut breaks = vec![eps];
        let mut b = eps * 2.0;
        while b < 0.25f64.min(r_s) {
            breaks.push(b);
            b *= 2.0;
        }
        let mut x = 0.25;
        while x < r_s {
            if x > eps {
                breaks.push(x);
            }
            x += 0.25;
        }
        breaks.extend(extra.iter().copied().filter(|c| *c > eps));
        breaks.push(r_s);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let p = Panels::from_breaks(breaks, &rule);
        p.integrate(|rho| diff(rho) * kernel_vol(rho))
    };
    // Taylor part on [0, ε]: −(Δf/2n)∫₀^ε ρ² K sinh^{n−1}.
    let taylor = |eps: f64| -> f64 {
        let p = Panels::from_breaks(graded_breaks(0.0, eps, 1, 40, 0.5), &rule);
        -lap / (2.0 * n) * p.integrate(|rho| if rho == 0.0 { 0.0 } else { rho * rho * kernel_vol(rho) })
    };

    let tail = kernel_tail(r_s, dim, s)? / kernel_constants(dim, s)?.c1 * fx;
    let mut seq = Vec::with_capacity(cfg.levels + 1);
    let mut eps = cfg.eps0;
    for _ in 0..=cfg.levels {
        seq.push(main(eps) + taylor(eps));
        eps *= 0.5;
    }
    let last = *seq.last().unwrap();
    let prev = seq[seq.len() - 2];
    let scale = last.abs().max(1e-300);
    if !last.is_finite() || (last - prev).abs() > cfg.tol * scale.max(fx.abs()) {
        return Err(Error::Singularity(format!(
            "excision sequence changes by {:.3e} (relative) between the last two radii",
            (last - prev).abs() / scale
        )));
    }
    let kc: KernelConstants = kernel_constants(dim, s)?;
    Ok(kappa * kc.c1 * area * (last + tail))
}

/// Result of fitting κ against the spectral route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCalibration {
    pub n: usize,
    pub s: f64,
    /// Least-squares fit of the singular-integral route to the multiplier route.
    pub kappa_fitted: f64,
    /// Closed form from the heat-kernel subordination integral.
    pub kappa_closed_form: f64,
    /// The printed constant c_{n,s} (negative).
    pub c_ns: f64,
    /// κ_fitted / c_{n,s}.
    pub ratio_to_printed: f64,
}

/// Fits κ so that κ·SI(f) matches (−Δ)^s f at the given radii.
pub fn calibrate_kernel_scale(
    plan: &HelgasonTransform,
    f: &RadialFunction,
    s: f64,
    radii: &[f64],
) -> Result<KernelCalibration> {
    let dim = plan.dim();
    let target = multiplier_apply(plan, f, s)?;
    let cfg = SingularIntegralConfig {
        kappa: Some(1.0),
        ..Default::default()
    };
    let (mut num, mut den) = (0.0, 0.0);
    for r in radii {
        let x = crate::geometry::polar_to_point(&crate::geometry::PolarCoord::axial(*r, dim.n()));
        let si = singular_integral_apply(f, &x, s, &cfg)?;
        let m = target.eval(*r);
        num += si * m;
        den += si * si;
    }
    let kappa_fitted = num / den;
    let kc = kernel_constants(dim, s)?;
    Ok(KernelCalibration {
        n: dim.n(),
        s,
        kappa_fitted,
        kappa_closed_form: kernel_scale(dim, s)?,
        c_ns: kc.c_ns,
        ratio_to_printed: kappa_fitted / kc.c_ns,
    })
}
