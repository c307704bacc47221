//! Radial Helgason–Fourier analysis on H^n.
//!
//! Conventions: for radial f,
//! f̂(λ) = |S^{n−1}| ∫₀^∞ f(r) φ_λ(r) sinh^{n−1} r dr, and
//! f(r) = ∫₀^∞ f̂(λ) φ_λ(r) dμ(λ) with dμ = 2|S^{n−1}|·plancherel_density(λ)·dλ.
//! For n = 3 this is dμ = λ²/(2π²) dλ; for n = 2 it is λ tanh(πλ)/(2π) dλ.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{volume_weight, Dim};
use crate::quadrature::{graded_breaks, uniform_breaks, Barycentric, GaussRule, Panels};
use crate::specfun::{ln_gamma_complex, plancherel_density};

const PANEL_ORDER: usize = 16;

/// Radial sampling grid on [0, r_max] made of 16-point Gauss panels, the first
/// of which is refined geometrically toward r = 0.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    pub dim: Dim,
    pub r_max: f64,
    panels: Panels<f64>,
    /// |S^{n−1}|·w_i·sinh^{n−1} r_i: integrates against the volume measure.
    volume_weights: Vec<f64>,
    bary: Barycentric<f64>,
}

impl RadialGrid {
    /// `n_nodes` must be a multiple of 16; panels are uniform apart from the
    /// graded first one.
    pub fn new(dim: Dim, r_max: f64, n_nodes: usize) -> Result<Self> {
        if r_max < 10.0 {
            return Err(Error::Domain(format!("radial grid needs r_max >= 10, got {r_max}")));
        }
        if !n_nodes.is_multiple_of(PANEL_ORDER) || n_nodes < 8 * PANEL_ORDER {
            return Err(Error::Domain(format!(
                "radial grid node count must be a multiple of {PANEL_ORDER} and at least {}",
                8 * PANEL_ORDER
            )));
        }
        let total = n_nodes / PANEL_ORDER;
        let levels = (total / 16).clamp(2, 8);
        Ok(Self::from_breaks(dim, graded_breaks(0.0, r_max, total - levels, levels, 0.25)))
    }

    /// Grid with explicitly supplied panel breaks (first break must be 0).
    pub fn from_breaks(dim: Dim, breaks: Vec<f64>) -> Self {
        let rule = GaussRule::new(PANEL_ORDER);
        let bary = Barycentric::new(&rule.nodes);
        let panels = Panels::from_breaks(breaks, &rule);
        let area = dim.sphere_area();
        let volume_weights = panels
            .nodes
            .iter()
            .zip(&panels.weights)
            .map(|(r, w)| area * w * volume_weight(*r, dim.n()))
            .collect();
        let r_max = *panels.breaks.last().expect("non-empty breaks");
        Self {
            dim,
            r_max,
            panels,
            volume_weights,
            bary,
        }
    }

    /// Default grid: r_max = 30, 2048 nodes.
    pub fn default_for(dim: Dim) -> Self {
        Self::new(dim, 30.0, 2048).expect("default radial grid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.panels.nodes
    }

    pub fn len(&self) -> usize {
        self.panels.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.nodes.is_empty()
    }

    pub fn volume_weights(&self) -> &[f64] {
        &self.volume_weights
    }

    pub fn breaks(&self) -> &[f64] {
        &self.panels.breaks
    }

    /// Interpolates grid samples at radius `r` (zero beyond r_max).
    pub fn interpolate(&self, values: &[f64], r: f64) -> f64 {
        if r > self.r_max || r < 0.0 {
            return 0.0;
        }
        let p = self.panels.panel_of(r);
        let (a, b) = (self.panels.breaks[p], self.panels.breaks[p + 1]);
        let x = (2.0 * r - a - b) / (b - a);
        let k = p * PANEL_ORDER;
        self.bary.eval(&values[k..k + PANEL_ORDER], x)
    }
}

/// Spectral grid on [0, λ_max] with Gauss panels and Plancherel weights.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    pub dim: Dim,
    pub lambda_max: f64,
    panels: Panels<f64>,
    /// w_j·dμ/dλ(λ_j).
    measure_weights: Vec<f64>,
}

/// Density of the Plancherel measure on λ ≥ 0 in the conventions above.
pub fn plancherel_measure(lambda: f64, dim: Dim) -> f64 {
    2.0 * dim.sphere_area() * plancherel_density(lambda, dim)
}

impl SpectralGrid {
    pub fn new(dim: Dim, lambda_max: f64, n_nodes: usize) -> Result<Self> {
        if lambda_max < 20.0 {
            return Err(Error::Domain(format!("spectral grid needs lambda_max >= 20, got {lambda_max}")));
        }
        if !n_nodes.is_multiple_of(PANEL_ORDER) || n_nodes == 0 {
            return Err(Error::Domain(format!(
                "spectral grid node count must be a positive multiple of {PANEL_ORDER}"
            )));
        }
        Ok(Self::from_breaks(dim, uniform_breaks(0.0, lambda_max, n_nodes / PANEL_ORDER)))
    }

    pub fn from_breaks(dim: Dim, breaks: Vec<f64>) -> Self {
        let panels = Panels::from_breaks(breaks, &GaussRule::new(PANEL_ORDER));
        let measure_weights = panels
            .nodes
            .iter()
            .zip(&panels.weights)
            .map(|(l, w)| w * plancherel_measure(*l, dim))
            .collect();
        let lambda_max = *panels.breaks.last().expect("non-empty breaks");
        Self {
            dim,
            lambda_max,
            panels,
            measure_weights,
        }
    }

    /// Default grid: λ_max = 40, 1024 nodes.
    pub fn default_for(dim: Dim) -> Self {
        Self::new(dim, 40.0, 1024).expect("default spectral grid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.panels.nodes
    }

    pub fn len(&self) -> usize {
        self.panels.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.nodes.is_empty()
    }

    pub fn measure_weights(&self) -> &[f64] {
        &self.measure_weights
    }

    /// τ(λ) = λ² + (n−1)²/4 at each node.
    pub fn tau(&self) -> Vec<f64> {
        let rho = self.dim.rho();
        self.nodes().iter().map(|l| l * l + rho * rho).collect()
    }
}

/// Samples of a radial function on a [`RadialGrid`].
#[derive(Debug, Clone)]
pub struct RadialFunction {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<f64>,
    /// Claimed exponential decay rate γ with |f(r)| ≤ C e^{−γ r}.
    pub decay_rate: Option<f64>,
}

impl RadialFunction {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("radial samples".into()));
        }
        Ok(Self {
            grid,
            values,
            decay_rate: None,
        })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|r| f(*r)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
            decay_rate: None,
        }
    }

    pub fn with_decay_rate(mut self, gamma: f64) -> Self {
        self.decay_rate = Some(gamma);
        self
    }

    pub fn dim(&self) -> Dim {
        self.grid.dim
    }

    /// Value at an arbitrary radius by panel-wise interpolation.
    pub fn eval(&self, r: f64) -> f64 {
        self.grid.interpolate(&self.values, r)
    }

    /// ∫ f g dV over H^n.
    pub fn inner(&self, other: &RadialFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.grid.volume_weights())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// ∫_{r < radius} f g dV, by panel-aligned quadrature when `radius` is a break.
    pub fn inner_within(&self, other: &RadialFunction, radius: f64) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .zip(self.grid.volume_weights().iter().zip(self.grid.nodes()))
            .filter(|(_, (_, r))| **r < radius)
            .map(|((a, b), (w, _))| a * b * w)
            .sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(r, v)| f(*r, *v))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
            decay_rate: self.decay_rate,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|_, v| c * v)
    }

    pub fn add(&self, other: &RadialFunction) -> Self {
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Self {
            grid: self.grid.clone(),
            values,
            decay_rate: None,
        }
    }

    pub fn sub(&self, other: &RadialFunction) -> Self {
        self.add(&other.scaled(-1.0))
    }
}

/// Samples of a Helgason transform on a [`SpectralGrid`].
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    pub grid: Arc<SpectralGrid>,
    pub values: Vec<f64>,
}

impl SpectralFunction {
    pub fn new(grid: Arc<SpectralGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain(format!(
                "expected {} spectral samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectral samples".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn dim(&self) -> Dim {
        self.grid.dim
    }

    /// Pointwise product with a multiplier m(τ).
    pub fn multiply_tau(&self, m: impl Fn(f64) -> f64) -> Self {
        let values = self
            .grid
            .tau()
            .iter()
            .zip(&self.values)
            .map(|(t, v)| m(*t) * v)
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    /// ∫ w(τ) |f̂|² dμ.
    pub fn weighted_energy(&self, w: impl Fn(f64) -> f64) -> f64 {
        self.grid
            .tau()
            .iter()
            .zip(&self.values)
            .zip(self.grid.measure_weights())
            .map(|((t, v), m)| w(*t) * v * v * m)
            .sum()
    }

    pub fn add(&self, other: &SpectralFunction) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Spherical functions

/// φ_λ(r): the radial eigenfunction with Δφ = −(λ² + (n−1)²/4)φ and φ(0) = 1.
pub fn spherical_function(lambda: f64, r: f64, dim: Dim) -> f64 {
    let lambda = lambda.abs();
    match dim {
        Dim::Three => phi3(lambda, r),
        Dim::Two => {
            if r >= 1.0 && lambda > 1e-3 {
                phi2_series(lambda, r)
            } else {
                phi2_angular(lambda, r)
            }
        }
    }
}

fn phi3(lambda: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let sr = if r < 1e-8 { 1.0 } else { r / r.sinh() };
    if lambda * r < 1e-8 {
        return sr;
    }
    // sin(λr)/(λ sinh r) = (sin(λr)/(λr))·(r/sinh r)
    (lambda * r).sin() / (lambda * r) * sr
}

/// Number of trapezoid nodes on [0, π] for the n = 2 angular integral.
fn angular_nodes(lambda: f64, r: f64) -> usize {
    (48.0 + 6.0 * lambda * r + 40.0 * r).ceil() as usize
}

/// (1/π)∫₀^π (cosh r − sinh r cos θ)^{−1/2} cos(λ ln(cosh r − sinh r cos θ)) dθ,
/// by the trapezoid rule (spectrally accurate for the periodic integrand).
pub fn phi2_angular(lambda: f64, r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let m = angular_nodes(lambda, r);
    let (c, s) = (r.cosh(), r.sinh());
    let h = std::f64::consts::PI / m as f64;
    let mut acc = 0.0;
    for k in 0..=m {
        let th = k as f64 * h;
        // cosh r − sinh r cos θ computed without cancellation near θ = 0.
        let z = (c - s) + 2.0 * s * (0.5 * th).sin().powi(2);
        let w = if k == 0 || k == m { 0.5 } else { 1.0 };
        acc += w * (lambda * z.ln()).cos() / z.sqrt();
    }
    acc / m as f64
}

/// Harish-Chandra c-function for n = 2: Γ(iλ)/(√π Γ(1/2 + iλ)).
fn c_function_h2(lambda: f64) -> Complex64 {
    let il = Complex64::new(0.0, lambda);
    let ln_c = ln_gamma_complex(il)
        - 0.5 * std::f64::consts::PI.ln()
        - ln_gamma_complex(Complex64::new(0.5, lambda));
    ln_c.exp()
}

/// Φ_λ(r) = (2 cosh r)^{iλ−ρ} ₂F₁((ρ−iλ)/2, (α−β+1−iλ)/2; 1−iλ; sech² r), α = (n−2)/2, β = −1/2.
fn harish_chandra_series(lambda: f64, r: f64, n: usize) -> Complex64 {
    let rho = (n as f64 - 1.0) / 2.0;
    let alpha = (n as f64 - 2.0) / 2.0;
    let il = Complex64::new(0.0, lambda);
    let a = (rho - il) * 0.5;
    let b = (alpha + 1.5 - il) * 0.5;
    let c = 1.0 - il;
    let z = 1.0 / r.cosh().powi(2);
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for k in 0..400 {
        let kf = k as f64;
        term = term * (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    // (2 cosh r)^{iλ−ρ} = exp((iλ−ρ)·ln(2 cosh r)); ln(2cosh r) = r + ln(1+e^{−2r}).
    let l2c = r + (-2.0 * r).exp().ln_1p();
    ((il - rho) * l2c).exp() * sum
}

/// n = 2 spherical function from the Harish-Chandra expansion φ = 2 Re[c(λ)Φ_λ].
pub fn phi2_series(lambda: f64, r: f64) -> f64 {
    2.0 * (c_function_h2(lambda) * harish_chandra_series(lambda, r, 2)).re
}

/// Reference angular integral for any n ∈ {2,3}, used as an oracle:
/// φ_λ(r) = ⟨[x, (1,θ)]^{iλ−ρ}⟩ over the sphere, real part.
pub fn spherical_function_reference(lambda: f64, r: f64, dim: Dim) -> f64 {
    match dim {
        Dim::Two => phi2_angular(lambda, r),
        Dim::Three => {
            // (1/2)∫_{−1}^{1} (cosh r − u sinh r)^{−1} cos(λ ln(cosh r − u sinh r)) du
            // v = 1 − u, graded toward v = 0 where the integrand varies on scale e^{−r}.
            let rule = GaussRule::<f64>::new(32);
            let p = Panels::from_breaks(graded_breaks(0.0, 2.0, 64, 40, 0.5), &rule);
            let (c, s) = (r.cosh(), r.sinh());
            0.5 * p.integrate(|v| {
                let z = (c - s) + v * s;
                (lambda * z.ln()).cos() / z
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Transform plan

/// Precomputed forward/inverse radial Helgason transform between a radial and a
/// spectral grid.
#[derive(Debug, Clone)]
pub struct HelgasonTransform {
    pub radial: Arc<RadialGrid>,
    pub spectral: Arc<SpectralGrid>,
    /// φ_{λ_j}(r_i), rows indexed by λ.
    phi: DMatrix<f64>,
    /// Relative tolerance for the spectral and radial tail checks.
    pub tail_tol: f64,
}

impl HelgasonTransform {
    pub fn new(radial: Arc<RadialGrid>, spectral: Arc<SpectralGrid>) -> Result<Self> {
        if radial.dim != spectral.dim {
            return Err(Error::Domain("radial and spectral grids disagree on n".into()));
        }
        let dim = radial.dim;
        let rs = radial.nodes().to_vec();
        let ls = spectral.nodes().to_vec();
        let rows: Vec<Vec<f64>> = ls
            .par_iter()
            .map(|l| rs.iter().map(|r| spherical_function(*l, *r, dim)).collect())
            .collect();
        let phi = DMatrix::from_fn(ls.len(), rs.len(), |j, i| rows[j][i]);
        Ok(Self {
            radial,
            spectral,
            phi,
            tail_tol: 1e-6,
        })
    }

    /// Plan on the default grids, built once per dimension and shared.
    pub fn shared(dim: Dim) -> Arc<HelgasonTransform> {
        static H2: OnceLock<Arc<HelgasonTransform>> = OnceLock::new();
        static H3: OnceLock<Arc<HelgasonTransform>> = OnceLock::new();
        let cell = match dim {
            Dim::Two => &H2,
            Dim::Three => &H3,
        };
        cell.get_or_init(|| {
            Arc::new(
                HelgasonTransform::new(
                    Arc::new(RadialGrid::default_for(dim)),
                    Arc::new(SpectralGrid::default_for(dim)),
                )
                .expect("default transform plan"),
            )
        })
        .clone()
    }

    pub fn dim(&self) -> Dim {
        self.radial.dim
    }

    pub fn radial_fn(&self, f: impl Fn(f64) -> f64) -> Result<RadialFunction> {
        RadialFunction::from_fn(self.radial.clone(), f)
    }

    /// f ↦ f̂ on the spectral grid.
    pub fn forward(&self, f: &RadialFunction) -> Result<SpectralFunction> {
        if !Arc::ptr_eq(&f.grid, &self.radial) && f.grid.len() != self.radial.len() {
            return Err(Error::Domain("radial function lives on a different grid".into()));
        }
        self.check_radial_tail(f)?;
        let g = DVector::from_iterator(
            f.values.len(),
            f.values
                .iter()
                .zip(self.radial.volume_weights())
                .map(|(v, w)| v * w),
        );
        let fh = &self.phi * g;
        SpectralFunction::new(self.spectral.clone(), fh.as_slice().to_vec())
    }

    fn check_radial_tail(&self, f: &RadialFunction) -> Result<()> {
        let rho = self.dim().rho();
        let n = self.dim().n();
        let nodes = self.radial.nodes();
        let contrib: Vec<f64> = nodes
            .iter()
            .zip(&f.values)
            .map(|(r, v)| v.abs() * volume_weight(*r, n) * (-rho * r).exp())
            .collect();
        let peak = contrib.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return Ok(());
        }
        let tail = contrib[contrib.len() - PANEL_ORDER..]
            .iter()
            .cloned()
            .fold(0.0, f64::max);
        let claimed_ok = f.decay_rate.is_none_or(|g| g > rho);
        if tail > self.tail_tol * peak || !claimed_ok && tail > 1e-14 * peak {
            return Err(Error::Tail(format!(
                "radial samples near r_max = {} are {:.3e} of the peak (decay rate {:?})",
                self.radial.r_max,
                tail / peak,
                f.decay_rate
            )));
        }
        Ok(())
    }

    /// f̂ ↦ f on the radial grid.
    pub fn inverse(&self, fh: &SpectralFunction) -> Result<RadialFunction> {
        self.check_spectral_tail(fh)?;
        self.inverse_unchecked(fh)
    }

    /// Inverse transform without the spectral tail check.
    pub fn inverse_unchecked(&self, fh: &SpectralFunction) -> Result<RadialFunction> {
        let g = DVector::from_iterator(
            fh.values.len(),
            fh.values
                .iter()
                .zip(self.spectral.measure_weights())
                .map(|(v, w)| v * w),
        );
        let f = self.phi.tr_mul(&g);
        RadialFunction::new(self.radial.clone(), f.as_slice().to_vec())
    }

    fn check_spectral_tail(&self, fh: &SpectralFunction) -> Result<()> {
        let contrib: Vec<f64> = fh
            .values
            .iter()
            .zip(self.spectral.measure_weights())
            .map(|(v, w)| (v * w).abs())
            .collect();
        let total: f64 = contrib.iter().sum();
        if total == 0.0 {
            return Ok(());
        }
        let tail: f64 = contrib[contrib.len() - PANEL_ORDER..].iter().sum();
        if tail > self.tail_tol * total {
            return Err(Error::Truncation(format!(
                "last spectral panel carries {:.3e} of the synthesis mass at lambda_max = {}",
                tail / total,
                self.spectral.lambda_max
            )));
        }
        Ok(())
    }

    /// Synthesis at an arbitrary radius.
    pub fn inverse_at(&self, fh: &SpectralFunction, r: f64) -> f64 {
        let dim = self.dim();
        self.spectral
            .nodes()
            .iter()
            .zip(self.spectral.measure_weights())
            .zip(&fh.values)
            .map(|((l, w), v)| w * v * spherical_function(*l, r, dim))
            .sum()
    }

    /// ∫ |f̂|² dμ.
    pub fn spectral_energy(&self, fh: &SpectralFunction) -> f64 {
        fh.weighted_energy(|_| 1.0)
    }

    /// e^{tΔ} f via the multiplier e^{−tτ}.
    pub fn semigroup_apply(&self, f: &RadialFunction, t: f64) -> Result<RadialFunction> {
        if t < 0.0 {
            return Err(Error::Domain(format!("heat time must be >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(f.clone());
        }
        let fh = self.forward(f)?;
        self.inverse_unchecked(&fh.multiply_tau(|tau| (-t * tau).exp()))
    }
}

// ---------------------------------------------------------------------------
// Heat kernel

/// p_t(ρ) on H^n: closed forms, the n = 2 one being a single integral.
pub fn heat_kernel(rho: f64, t: f64, dim: Dim) -> f64 {
    match dim {
        Dim::Three => {
            let sr = if rho < 1e-8 { 1.0 } else { rho / rho.sinh() };
            (4.0 * std::f64::consts::PI * t).powf(-1.5) * sr * (-t - rho * rho / (4.0 * t)).exp()
        }
        Dim::Two => {
            let (ln_pre, integral) = heat_kernel_h2_parts(rho, t);
            ln_pre.exp() * integral
        }
    }
}

/// ln p_t(ρ), finite where p_t itself underflows.
pub fn ln_heat_kernel(rho: f64, t: f64, dim: Dim) -> f64 {
    let ln_gauss = -1.5 * (4.0 * std::f64::consts::PI * t).ln() - rho * rho / (4.0 * t);
    match dim {
        Dim::Three => {
            // ln(ρ/sinh ρ) = ln(2ρ) − ρ − ln(1 − e^{−2ρ})
            let ln_sr = if rho < 1e-8 {
                0.0
            } else {
                (2.0 * rho).ln() - rho - (-(-2.0 * rho).exp_m1()).ln()
            };
            ln_gauss + ln_sr - t
        }
        Dim::Two => {
            let (ln_pre, integral) = heat_kernel_h2_parts(rho, t);
            ln_pre + integral.ln()
        }
    }
}

/// √2 e^{−t/4}(4πt)^{−3/2} ∫_ρ^∞ s e^{−s²/4t} (cosh s − cosh ρ)^{−1/2} ds, with
/// s = ρ + u² and the Gaussian factor e^{−ρ²/4t} pulled out, so small t keeps
/// full relative accuracy. Returns (log of the prefactor, remaining integral).
fn heat_kernel_h2_parts(rho: f64, t: f64) -> (f64, f64) {
    const LOG_CUT: f64 = 46.0;
    let u2_max = ((rho * rho + 4.0 * t * LOG_CUT).sqrt() - rho).min(4.0 * LOG_CUT);
    let p = Panels::from_breaks(uniform_breaks(0.0, u2_max.sqrt(), 12), &GaussRule::new(PANEL_ORDER));
    // the e^{−ρ} of sinh(ρ + u²/2) is moved into the prefactor as well
    let integral = p.integrate(|u| {
        let u2 = u * u;
        let s = rho + u2;
        let sh = 0.5 * (1.0 - (-2.0 * (rho + 0.5 * u2)).exp()) * (0.5 * u2).exp();
        let denom = (2.0 * sh * (0.5 * u2).sinh()).sqrt();
        2.0 * u * s * (-(2.0 * rho * u2 + u2 * u2) / (4.0 * t)).exp() / denom
    });
    let ln_pre = 0.5 * std::f64::consts::LN_2 - t / 4.0 - 1.5 * (4.0 * std::f64::consts::PI * t).ln()
        - rho * rho / (4.0 * t)
        - 0.5 * rho;
    (ln_pre, integral)
}

/// ∫₀^Λ e^{−t(λ²+1/4)} φ_λ(ρ) dμ(λ) with Λ = max(40, √(36/t)).
#[cfg(test)]
fn heat_kernel_h2_synthesis(rho: f64, t: f64) -> f64 {
    let lmax = 40f64.max((36.0 / t).sqrt());
    let width = (0.5f64).min(2.0 / (rho + 1.0)).max(0.05);
    let n_panels = (lmax / width).ceil() as usize;
    let p = Panels::from_breaks(uniform_breaks(0.0, lmax, n_panels), &GaussRule::new(PANEL_ORDER));
    p.integrate(|l| {
        (-t * (l * l + 0.25)).exp() * spherical_function(l, rho, Dim::Two) * plancherel_measure(l, Dim::Two)
    })
}

/// (1+ρ)(1+ρ+t)^{(n−3)/2} t^{−n/2} exp(−(n−1)²t/4 − (n−1)ρ/2 − ρ²/(4t)).
pub fn heat_kernel_bound(rho: f64, t: f64, dim: Dim) -> f64 {
    let n = dim.n() as f64;
    (1.0 + rho)
        * (1.0 + rho + t).powf((n - 3.0) / 2.0)
        * t.powf(-n / 2.0)
        * (-(n - 1.0).powi(2) * t / 4.0 - (n - 1.0) * rho / 2.0 - rho * rho / (4.0 * t)).exp()
}

/// ln of [`heat_kernel_bound`].
pub fn ln_heat_kernel_bound(rho: f64, t: f64, dim: Dim) -> f64 {
    let n = dim.n() as f64;
    (1.0 + rho).ln() + (n - 3.0) / 2.0 * (1.0 + rho + t).ln() - n / 2.0 * t.ln()
        - (n - 1.0).powi(2) * t / 4.0
        - (n - 1.0) * rho / 2.0
        - rho * rho / (4.0 * t)
}
