//! Radial reduction on H³: cubic B-splines in r, energy by the spectral
//! multiplier, plus kernel-form evaluations used as an independent route.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use super::mesh::{Mesh, MeshKind};
use super::{CellMass, Discretization, Window};
use crate::error::{Error, Result};
use crate::geometry::{point_to_polar, polar_to_point, Dim, HyperPoint, PolarCoord};
use crate::operator::{kernel_k, kernel_scale, kernel_tail, PolyharmonicSpec};
use crate::quadrature::{graded_breaks, GaussRule, Panels};
use crate::spectral::RadialFunction;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Piece coefficients of the cardinal cubic B-spline on t ∈ [p, p+1], p = −2..1.
const BSPLINE: [[f64; 4]; 4] = [
    [8.0 / 6.0, 2.0, 1.0, 1.0 / 6.0],
    [4.0 / 6.0, 0.0, -1.0, -0.5],
    [4.0 / 6.0, 0.0, -1.0, 0.5],
    [8.0 / 6.0, -2.0, 1.0, -1.0 / 6.0],
];

/// Coefficients in ξ of P(p + ξ/h) for a cubic P in t.
fn compose(poly: &[f64; 4], p: f64, h: f64) -> [f64; 4] {
    // Taylor expansion of P at t = p
    let d0 = poly[0] + p * (poly[1] + p * (poly[2] + p * poly[3]));
    let d1 = poly[1] + p * (2.0 * poly[2] + 3.0 * p * poly[3]);
    let d2 = poly[2] + 3.0 * p * poly[3];
    let d3 = poly[3];
    [d0, d1 / h, d2 / (h * h), d3 / (h * h * h)]
}

fn horner(c: &[f64; 4], x: f64) -> f64 {
    c[0] + x * (c[1] + x * (c[2] + x * c[3]))
}

/// A basis function as cubic pieces on mesh cells, in the local variable ξ = r − r_cell.
#[derive(Debug, Clone)]
struct SplineFn {
    pieces: Vec<(usize, [f64; 4])>,
}

impl SplineFn {
    /// B((r − c h)/h), plus its mirror B((r + c h)/h) when the support crosses r = 0.
    fn new(center: usize, h: f64, n_cells: usize) -> Self {
        let mut pieces: Vec<(usize, [f64; 4])> = Vec::new();
        let mut add = |c: i64| {
            for m in 0..n_cells as i64 {
                let p = m - c;
                if (-2..=1).contains(&p) {
                    let coef = compose(&BSPLINE[(p + 2) as usize], p as f64, h);
                    if let Some(e) = pieces.iter_mut().find(|(cell, _)| *cell == m as usize) {
                        for k in 0..4 {
                            e.1[k] += coef[k];
                        }
                    } else {
                        pieces.push((m as usize, coef));
                    }
                }
            }
        };
        add(center as i64);
        if center == 1 {
            add(-1);
        }
        pieces.sort_by_key(|p| p.0);
        Self { pieces }
    }

    fn support(&self, h: f64) -> (f64, f64) {
        let a = self.pieces.first().map_or(0.0, |p| p.0 as f64 * h);
        let b = self.pieces.last().map_or(0.0, |p| (p.0 + 1) as f64 * h);
        (a, b)
    }
}

/// ∫₀^x ξ^j cosh ξ dξ and ∫₀^x ξ^j sinh ξ dξ for j = 0..3, x ≤ 1.
fn hyperbolic_moments(x: f64) -> ([f64; 4], [f64; 4]) {
    let mut c = [0.0; 4];
    let mut s = [0.0; 4];
    for j in 0..4 {
        let mut term = x.powi(j as i32 + 1); // x^{n+j+1}/n! at n = 0
        let mut n = 0usize;
        loop {
            let v = term / (n + j + 1) as f64;
            if n.is_multiple_of(2) {
                c[j] += v;
            } else {
                s[j] += v;
            }
            if v.abs() < 1e-18 * (c[j].abs() + s[j].abs()) || n > 40 {
                break;
            }
            n += 1;
            term *= x / n as f64;
        }
    }
    (c, s)
}

/// ∫₀^h ξ^j e^{cξ} dξ for j = 0..3.
fn exp_moments(c: Complex64, h: f64) -> [Complex64; 4] {
    let mut out = [Complex64::new(0.0, 0.0); 4];
    if c.norm() * h < 1.0 {
        for (j, o) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(h.powi(j as i32 + 1), 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for n in 0..60 {
                let v = term / (n + j + 1) as f64;
                acc += v;
                if v.norm() < 1e-18 * acc.norm() {
                    break;
                }
                term *= c * h / (n + 1) as f64;
            }
            *o = acc;
        }
    } else {
        let e = (c * h).exp();
        out[0] = (e - 1.0) / c;
        let mut hp = 1.0;
        for j in 1..4 {
            hp *= h;
            out[j] = (e * hp - out[j - 1] * j as f64) / c;
        }
    }
    out
}

/// Piecewise-cubic function on the mesh with a cached ∫₀^r u sinh.
#[derive(Debug, Clone)]
pub struct CellPoly {
    h: f64,
    coeffs: Vec<[f64; 4]>,
    prefix: Vec<f64>,
}

impl CellPoly {
    fn new(h: f64, coeffs: Vec<[f64; 4]>) -> Self {
        let mut prefix = Vec::with_capacity(coeffs.len() + 1);
        prefix.push(0.0);
        let (cm, sm) = hyperbolic_moments(h);
        for (m, c) in coeffs.iter().enumerate() {
            let a = m as f64 * h;
            let v = partial_sinh(c, a, &cm, &sm);
            prefix.push(prefix[m] + v);
        }
        Self { h, coeffs, prefix }
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        let m = (r / self.h).floor() as usize;
        if m >= self.coeffs.len() {
            return 0.0;
        }
        horner(&self.coeffs[m], r - m as f64 * self.h)
    }

    /// ∫₀^t u(r') sinh r' dr'.
    pub fn sinh_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let m = (t / self.h).floor() as usize;
        if m >= self.coeffs.len() {
            return *self.prefix.last().unwrap();
        }
        let x = t - m as f64 * self.h;
        let (cm, sm) = hyperbolic_moments(x);
        self.prefix[m] + partial_sinh(&self.coeffs[m], m as f64 * self.h, &cm, &sm)
    }

    /// Outer edge of the support.
    pub fn support_radius(&self) -> f64 {
        let last = self.coeffs.iter().rposition(|c| c.iter().any(|v| *v != 0.0));
        last.map_or(0.0, |m| (m + 1) as f64 * self.h)
    }
}

/// ∫₀^x p(ξ) sinh(a + ξ) dξ from the cosh/sinh moments at x.
fn partial_sinh(p: &[f64; 4], a: f64, cm: &[f64; 4], sm: &[f64; 4]) -> f64 {
    let (sa, ca) = (a.sinh(), a.cosh());
    (0..4).map(|j| p[j] * (sa * cm[j] + ca * sm[j])).sum()
}

struct SpectralBasis {
    lambda: Vec<f64>,
    measure: Vec<f64>,
    /// Helgason transforms of the basis functions, dofs × λ.
    transforms: DMatrix<f64>,
    panel_len: usize,
}

/// Radial spectral-Galerkin backend on H³.
pub struct RadialBackend {
    mesh: Mesh,
    h: f64,
    n_cells: usize,
    funcs: Vec<SplineFn>,
    interior: Vec<usize>,
    exterior: Vec<usize>,
    omega_cells: Vec<CellMass>,
    /// Spectral cutoff Λ = lambda_factor / h.
    pub lambda_factor: f64,
    /// Admissible share of the energy in the last spectral panel.
    pub tail_tol: f64,
    spectral: OnceLock<SpectralBasis>,
}

impl RadialBackend {
    pub fn new(mesh: Mesh) -> Result<Self> {
        if mesh.config.kind != MeshKind::Radial {
            return Err(Error::Geometry("radial backend needs a radial mesh".into()));
        }
        let h = mesh.config.h;
        if h > 0.5 {
            return Err(Error::Geometry(format!("cell size {h} too coarse for the radial backend")));
        }
        let n_cells = mesh.cells.len();
        if n_cells < 4 {
            return Err(Error::Geometry("radial mesh needs at least four cells".into()));
        }
        let funcs: Vec<SplineFn> = (0..=n_cells - 2).map(|c| SplineFn::new(c, h, n_cells)).collect();
        let r_omega = mesh.config.omega_radius;
        let tol = 1e-9 * h;
        let (mut interior, mut exterior) = (Vec::new(), Vec::new());
        for (i, f) in funcs.iter().enumerate() {
            if f.support(h).1 <= r_omega + tol {
                interior.push(i);
            } else {
                exterior.push(i);
            }
        }
        if interior.is_empty() {
            return Err(Error::Geometry("Ω carries no basis function at this h".into()));
        }
        let mut backend = Self {
            mesh,
            h,
            n_cells,
            funcs,
            interior,
            exterior,
            omega_cells: Vec::new(),
            lambda_factor: 48.0,
            tail_tol: 1e-9,
            spectral: OnceLock::new(),
        };
        for w in [Window::W1, Window::W2] {
            if backend.window_dofs(w).is_empty() {
                return Err(Error::Geometry(format!("{w:?} carries no basis function at h = {h}")));
            }
        }
        backend.omega_cells = backend.build_omega_cells();
        Ok(backend)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    fn dofs_on_cell(&self, m: usize) -> Vec<(usize, [f64; 4])> {
        let lo = m.saturating_sub(2);
        let hi = (m + 2).min(self.funcs.len() - 1);
        (lo..=hi)
            .filter_map(|i| self.funcs[i].pieces.iter().find(|p| p.0 == m).map(|p| (i, p.1)))
            .collect()
    }

    fn build_omega_cells(&self) -> Vec<CellMass> {
        let rule: GaussRule<f64> = GaussRule::new(8);
        self.mesh
            .cells_with(super::Region::Omega)
            .map(|m| {
                let a = m as f64 * self.h;
                let local = self.dofs_on_cell(m);
                let k = local.len();
                let mut mass = DMatrix::zeros(k, k);
                let mut moments = DVector::zeros(k);
                let mut volume = 0.0;
                for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                    let xi = 0.5 * self.h * (x + 1.0);
                    let wt = 0.5 * self.h * w * FOUR_PI * (a + xi).sinh().powi(2);
                    volume += wt;
                    let vals: Vec<f64> = local.iter().map(|(_, c)| horner(c, xi)).collect();
                    for p in 0..k {
                        moments[p] += wt * vals[p];
                        for q in 0..k {
                            mass[(p, q)] += wt * vals[p] * vals[q];
                        }
                    }
                }
                CellMass {
                    cell: m,
                    dofs: local.iter().map(|(i, _)| *i).collect(),
                    mass,
                    moments,
                    volume,
                    centroid: polar_to_point(&PolarCoord::axial(a + 0.5 * self.h, 3)),
                }
            })
            .collect()
    }

    /// Dofs whose support lies in the window.
    pub fn window_dofs(&self, w: Window) -> Vec<usize> {
        let [a, b] = self.window(w);
        let tol = 1e-9 * self.h;
        self.funcs
            .iter()
            .enumerate()
            .filter(|(_, f)| {
                let (lo, hi) = f.support(self.h);
                lo >= a - tol && hi <= b + tol
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn window(&self, w: Window) -> [f64; 2] {
        match w {
            Window::W1 => self.mesh.config.w1,
            Window::W2 => self.mesh.config.w2,
        }
    }

    /// Full coefficients → per-cell cubic pieces.
    pub fn cell_poly(&self, coeffs: &DVector<f64>) -> CellPoly {
        let mut cells = vec![[0.0; 4]; self.n_cells];
        for (i, f) in self.funcs.iter().enumerate() {
            let ci = coeffs[i];
            if ci == 0.0 {
                continue;
            }
            for (m, c) in &f.pieces {
                for k in 0..4 {
                    cells[*m][k] += ci * c[k];
                }
            }
        }
        CellPoly::new(self.h, cells)
    }

    /// u(r) for full coefficients.
    pub fn eval_radius(&self, coeffs: &DVector<f64>, r: f64) -> f64 {
        if r < 0.0 || r >= self.n_cells as f64 * self.h {
            return 0.0;
        }
        let m = ((r / self.h).floor() as usize).min(self.n_cells - 1);
        let xi = r - m as f64 * self.h;
        self.dofs_on_cell(m).iter().map(|(i, c)| coeffs[*i] * horner(c, xi)).sum()
    }

    /// ∫ g φ_i dV for the listed dofs (16-point Gauss per cell).
    pub fn load_vector(&self, dofs: &[usize], g: impl Fn(f64) -> f64 + Sync) -> DVector<f64> {
        let rule: GaussRule<f64> = GaussRule::new(16);
        let vals: Vec<f64> = dofs
            .par_iter()
            .map(|&i| {
                self.funcs[i]
                    .pieces
                    .iter()
                    .map(|(m, c)| {
                        let a = *m as f64 * self.h;
                        rule.integrate(0.0, self.h, |xi| {
                            let r = a + xi;
                            horner(c, xi) * g(r) * FOUR_PI * r.sinh().powi(2)
                        })
                    })
                    .sum()
            })
            .collect();
        DVector::from_vec(vals)
    }

    /// Mass matrix on the listed dofs.
    pub fn mass_matrix(&self, dofs: &[usize]) -> DMatrix<f64> {
        let rule: GaussRule<f64> = GaussRule::new(8);
        let n = dofs.len();
        let mut m = DMatrix::zeros(n, n);
        for (p, &i) in dofs.iter().enumerate() {
            for (q, &j) in dofs.iter().enumerate().skip(p) {
                let mut v = 0.0;
                for (mi, ci) in &self.funcs[i].pieces {
                    if let Some((_, cj)) = self.funcs[j].pieces.iter().find(|x| x.0 == *mi) {
                        let a = *mi as f64 * self.h;
                        v += rule.integrate(0.0, self.h, |xi| {
                            horner(ci, xi) * horner(cj, xi) * FOUR_PI * (a + xi).sinh().powi(2)
                        });
                    }
                }
                m[(p, q)] = v;
                m[(q, p)] = v;
            }
        }
        m
    }

    /// L² projection of g onto the span of all dofs.
    pub fn project(&self, g: impl Fn(f64) -> f64 + Sync) -> Result<DVector<f64>> {
        let all: Vec<usize> = (0..self.funcs.len()).collect();
        let m = self.mass_matrix(&all);
        let b = self.load_vector(&all, g);
        m.cholesky()
            .map(|c| c.solve(&b))
            .ok_or_else(|| Error::Assembly("mass matrix not positive definite".into()))
    }

    /// Re-expresses exterior data of another radial backend on this one by L²
    /// projection onto the window dofs. Exact when the other mesh is coarser and
    /// nested in this one.
    pub fn transfer_exterior(&self, from: &RadialBackend, window: Window, f: &DVector<f64>) -> Result<DVector<f64>> {
        let mut full = DVector::zeros(from.funcs.len());
        for (k, &e) in from.exterior.iter().enumerate() {
            full[e] = f[k];
        }
        let dofs = self.window_dofs(window);
        let chol = self
            .mass_matrix(&dofs)
            .cholesky()
            .ok_or_else(|| Error::Assembly("window mass matrix not positive definite".into()))?;
        let c = chol.solve(&self.load_vector(&dofs, |r| from.eval_radius(&full, r)));
        let mut out = DVector::zeros(self.exterior.len());
        for (d, v) in dofs.iter().zip(c.iter()) {
            let p = self.exterior.iter().position(|e| e == d).expect("window dofs are exterior");
            out[p] = *v;
        }
        Ok(out)
    }

    /// ‖u − g‖_{L²(B_a)} for full coefficients.
    pub fn l2_error_within(&self, coeffs: &DVector<f64>, g: impl Fn(f64) -> f64, a: f64) -> f64 {
        let rule: GaussRule<f64> = GaussRule::new(16);
        let poly = self.cell_poly(coeffs);
        let n = ((a / self.h).round() as usize).min(self.n_cells);
        (0..n)
            .map(|m| {
                let r0 = m as f64 * self.h;
                rule.integrate(r0, r0 + self.h, |r| (poly.eval(r) - g(r)).powi(2) * FOUR_PI * r.sinh().powi(2))
            })
            .sum::<f64>()
            .sqrt()
    }

    fn spectral_basis(&self) -> &SpectralBasis {
        self.spectral.get_or_init(|| self.build_spectral())
    }

    fn build_spectral(&self) -> SpectralBasis {
        let r_max = self.n_cells as f64 * self.h;
        let width = (3.0 / r_max).min(1.0);
        let lambda_max = self.lambda_factor / self.h;
        let n_panels = (lambda_max / width).ceil() as usize;
        let rule: GaussRule<f64> = GaussRule::new(16);
        let panels = Panels::from_breaks(
            crate::quadrature::uniform_breaks(0.0, n_panels as f64 * width, n_panels),
            &rule,
        );
        let lambda = panels.nodes.clone();
        let measure: Vec<f64> = lambda
            .iter()
            .zip(&panels.weights)
            .map(|(l, w)| w * l * l / (2.0 * std::f64::consts::PI.powi(2)))
            .collect();
        let nd = self.funcs.len();
        let h = self.h;
        let n_cells = self.n_cells;
        let cols: Vec<Vec<f64>> = lambda
            .par_iter()
            .map(|&l| {
                let cp = Complex64::new(1.0, l);
                let cm = Complex64::new(-1.0, l);
                let ip = exp_moments(cp, h);
                let im = exp_moments(cm, h);
                // D[m][j] = ½(e^{c₊a} I_j(c₊) − e^{c₋a} I_j(c₋))
                let d: Vec<[Complex64; 4]> = (0..n_cells)
                    .map(|m| {
                        let a = m as f64 * h;
                        let ep = (cp * a).exp();
                        let em = (cm * a).exp();
                        let mut out = [Complex64::new(0.0, 0.0); 4];
                        for j in 0..4 {
                            out[j] = 0.5 * (ep * ip[j] - em * im[j]);
                        }
                        out
                    })
                    .collect();
                self.funcs
                    .iter()
                    .map(|f| {
                        let mut acc = 0.0;
                        for (m, c) in &f.pieces {
                            for j in 0..4 {
                                acc += c[j] * d[*m][j].im;
                            }
                        }
                        FOUR_PI * acc / l
                    })
                    .collect()
            })
            .collect();
        let mut transforms = DMatrix::zeros(nd, lambda.len());
        for (k, col) in cols.iter().enumerate() {
            for i in 0..nd {
                transforms[(i, k)] = col[i];
            }
        }
        SpectralBasis {
            lambda,
            measure,
            transforms,
            panel_len: rule.order(),
        }
    }

    /// Spectral Gram matrix ∫ m(τ) φ̂_i φ̂_j dμ with a truncation check.
    pub fn spectral_gram(&self, m: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
        let sb = self.spectral_basis();
        let w: Vec<f64> = sb
            .lambda
            .iter()
            .zip(&sb.measure)
            .map(|(l, mu)| mu * m(l * l + 1.0))
            .collect();
        let nl = w.len();
        let mut scaled = sb.transforms.clone();
        for (k, wk) in w.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*wk);
        }
        // tail check on the diagonal
        for i in 0..self.funcs.len() {
            let row = scaled.row(i);
            let tr = sb.transforms.row(i);
            let total: f64 = row.iter().zip(tr.iter()).map(|(a, b)| a * b).sum();
            let tail: f64 = row.iter().zip(tr.iter()).skip(nl - sb.panel_len).map(|(a, b)| a * b).sum();
            if total > 0.0 && tail.abs() > self.tail_tol * total {
                return Err(Error::Truncation(format!(
                    "basis function {i}: last spectral panel carries {:.3e} of its energy",
                    tail.abs() / total
                )));
            }
        }
        Ok(&scaled * sb.transforms.transpose())
    }

    /// Helgason transforms of the basis functions at the internal λ nodes.
    pub fn transform_nodes(&self) -> (&[f64], &[f64], &DMatrix<f64>) {
        let sb = self.spectral_basis();
        (&sb.lambda, &sb.measure, &sb.transforms)
    }

    /// Samples a full coefficient vector on a spectral-calculus radial grid.
    pub fn to_radial_function(&self, coeffs: &DVector<f64>, grid: std::sync::Arc<crate::spectral::RadialGrid>) -> Result<RadialFunction> {
        let poly = self.cell_poly(coeffs);
        RadialFunction::from_fn(grid, |r| poly.eval(r))
    }

    /// (P u)(r) at a radius outside the support of u, from the kernel form
    /// (P u)(x) = −Σ b_k κ_k ∫ u(y) K_k(d(x,y)) dV(y). Requires all s_k ∈ (0,1).
    pub fn kernel_apply_outside(&self, u: &CellPoly, spec: &PolyharmonicSpec, r: f64) -> Result<f64> {
        let ru = u.support_radius();
        if r <= ru {
            return Err(Error::Support(format!("evaluation radius {r} inside the support radius {ru}")));
        }
        let terms: Vec<(f64, f64, f64)> = spec
            .terms()
            .iter()
            .map(|t| {
                if t.s.m != 0 {
                    return Err(Error::Spec("kernel form needs orders in (0,1)".into()));
                }
                Ok((t.b, t.s.s, kernel_scale(Dim::Three, t.s.s)?))
            })
            .collect::<Result<_>>()?;
        let mut breaks = vec![r - ru, r + ru];
        let n_nodes = (ru / self.h).round() as usize;
        for k in 0..=n_nodes {
            let rm = k as f64 * self.h;
            breaks.push(r - rm);
            breaks.push(r + rm);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let p = Panels::from_breaks(breaks, &GaussRule::new(8));
        let mut acc = 0.0;
        for (rho, w) in p.nodes.iter().zip(&p.weights) {
            let diff = u.sinh_integral(r + rho) - u.sinh_integral((r - rho).abs());
            let mut kern = 0.0;
            for (b, s, kappa) in &terms {
                kern += b * kappa * kernel_k(*rho, Dim::Three, *s)?;
            }
            acc += w * kern * rho.sinh() * diff;
        }
        Ok(-2.0 * std::f64::consts::PI / r.sinh() * acc)
    }

    /// DN entries by pairing P u_f with the test functions on W₂ through the kernel form.
    pub fn dn_kernel_route(
        &self,
        spec: &PolyharmonicSpec,
        solutions: &[DVector<f64>],
        tests: &[DVector<f64>],
        exterior: &[usize],
    ) -> Result<DMatrix<f64>> {
        let [a, b] = self.mesh.config.w2;
        let n = ((b - a) / self.h).round() as usize;
        let rule: GaussRule<f64> = GaussRule::new(8);
        let mut nodes = Vec::new();
        for k in 0..n {
            let r0 = a + k as f64 * self.h;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let r = r0 + 0.5 * self.h * (x + 1.0);
                nodes.push((r, 0.5 * self.h * w * FOUR_PI * r.sinh().powi(2)));
            }
        }
        let test_vals: Vec<Vec<f64>> = tests
            .iter()
            .map(|g| {
                let mut full = DVector::zeros(self.funcs.len());
                for (k, &i) in exterior.iter().enumerate() {
                    full[i] = g[k];
                }
                nodes.iter().map(|(r, _)| self.eval_radius(&full, *r)).collect()
            })
            .collect();
        let cols: Vec<Vec<f64>> = solutions
            .par_iter()
            .map(|u| {
                let poly = self.cell_poly(u);
                let pu: Vec<f64> = nodes
                    .iter()
                    .map(|(r, _)| self.kernel_apply_outside(&poly, spec, *r))
                    .collect::<Result<_>>()?;
                Ok(test_vals
                    .iter()
                    .map(|g| g.iter().zip(&pu).zip(&nodes).map(|((gv, pv), (_, w))| gv * pv * w).sum())
                    .collect())
            })
            .collect::<Result<_>>()?;
        let mut out = DMatrix::zeros(tests.len(), solutions.len());
        for (i, col) in cols.iter().enumerate() {
            for (j, v) in col.iter().enumerate() {
                out[(j, i)] = *v;
            }
        }
        Ok(out)
    }

    /// (κ/2)∬ (u(x)−u(y))² K_s(d(x,y)) dV dV for a single order s ∈ (0,1),
    /// evaluated in physical space.
    pub fn kernel_quadratic_form(&self, u: &CellPoly, s: f64) -> Result<f64> {
        let kappa = kernel_scale(Dim::Three, s)?;
        let ru = u.support_radius();
        let h = self.h;
        let g8 = GaussRule::new(8);
        let g16 = GaussRule::new(16);
        let n_cells = (ru / h).round() as usize;
        let k_sinh2 = |rho: f64| -> f64 { kernel_k(rho, Dim::Three, s).unwrap() * rho.sinh().powi(2) };

        let inner = |r: f64| -> Result<f64> {
            let ur = u.eval(r);
            // mean over the sphere of radius ρ about x of (u(x) − u(y))²
            let e = |rho: f64| -> f64 {
                let lo = (r - rho).abs();
                let hi = r + rho;
                let top = hi.min(ru);
                let mut v = 0.0;
                if top > lo {
                    let mut br = vec![lo];
                    let mut k = (lo / h).floor() as usize + 1;
                    while (k as f64) * h < top {
                        br.push(k as f64 * h);
                        k += 1;
                    }
                    br.push(top);
                    for w in br.windows(2) {
                        v += g8.integrate(w[0], w[1], |rp| (ur - u.eval(rp)).powi(2) * rp.sinh());
                    }
                }
                let start = lo.max(ru);
                if hi > start {
                    v += ur * ur * (hi.cosh() - start.cosh());
                }
                v / (2.0 * r.sinh() * rho.sinh())
            };
            let top = r + ru;
            let mut br = graded_breaks(0.0, h.min(top), 1, 30, 0.5);
            let mut k = 2usize;
            while (k as f64) * h * 0.5 < top {
                br.push(k as f64 * h * 0.5);
                k += 1;
            }
            for c in [ru - r, top] {
                if c > 0.0 {
                    br.push(c);
                }
            }
            br.retain(|x| *x <= top);
            br.sort_by(f64::total_cmp);
            br.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
            let p = Panels::from_breaks(br, &g16);
            let near = p.integrate(|rho| if rho == 0.0 { 0.0 } else { k_sinh2(rho) * e(rho) });
            Ok(FOUR_PI * (near + ur * ur * kernel_tail(top, Dim::Three, s)?))
        };
        let t_out = |r: f64| -> Result<f64> {
            let lo = ru - r;
            let hi = ru + r;
            let p = Panels::from_breaks(crate::quadrature::two_sided_breaks(lo, hi, 4, 20, 0.5), &g16);
            let mid = p.integrate(|rho| {
                let frac = ((r + rho).cosh() - ru.cosh()) / (2.0 * r.sinh() * rho.sinh());
                k_sinh2(rho) * frac.clamp(0.0, 1.0)
            });
            Ok(FOUR_PI * (mid + kernel_tail(hi, Dim::Three, s)?))
        };
        let mut total = 0.0;
        for m in 0..n_cells {
            let a = m as f64 * h;
            for (x, w) in g8.nodes.iter().zip(&g8.weights) {
                let r = a + 0.5 * h * (x + 1.0);
                let dv = 0.5 * h * w * FOUR_PI * r.sinh().powi(2);
                let ur = u.eval(r);
                total += dv * (inner(r)? + ur * ur * t_out(r)?);
            }
        }
        Ok(0.5 * kappa * total)
    }
}

impl Discretization for RadialBackend {
    fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    fn n_dofs(&self) -> usize {
        self.funcs.len()
    }

    fn interior(&self) -> &[usize] {
        &self.interior
    }

    fn exterior(&self) -> &[usize] {
        &self.exterior
    }

    fn energy_matrix(&self, spec: &PolyharmonicSpec) -> Result<DMatrix<f64>> {
        self.spectral_gram(|tau| spec.symbol(tau))
    }

    fn omega_cells(&self) -> &[CellMass] {
        &self.omega_cells
    }

    fn window_modes(&self, window: Window, k: usize) -> Result<Vec<DVector<f64>>> {
        let dofs = self.window_dofs(window);
        let [a, b] = self.window(window);
        let chol = self
            .mass_matrix(&dofs)
            .cholesky()
            .ok_or_else(|| Error::Assembly("window mass matrix not positive definite".into()))?;
        let pos: Vec<usize> = dofs
            .iter()
            .map(|d| self.exterior.iter().position(|e| e == d).expect("window dofs are exterior"))
            .collect();
        Ok((1..=k)
            .map(|mode| {
                let rhs = self.load_vector(&dofs, |r| super::radial_mode(mode, a, b, r));
                let c = chol.solve(&rhs);
                let mut f = DVector::zeros(self.exterior.len());
                for (p, v) in pos.iter().zip(c.iter()) {
                    f[*p] = *v;
                }
                f
            })
            .collect())
    }

    fn eval(&self, coeffs: &DVector<f64>, x: &HyperPoint<f64>) -> f64 {
        self.eval_radius(coeffs, point_to_polar(x).r)
    }

    fn kernel_dn(
        &self,
        spec: &PolyharmonicSpec,
        solutions: &[DVector<f64>],
        tests: &[DVector<f64>],
    ) -> Result<DMatrix<f64>> {
        self.dn_kernel_route(spec, solutions, tests, &self.exterior)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{build_mesh, MeshConfig};

    fn backend(h: f64) -> RadialBackend {
        let mut cfg = MeshConfig::radial_default();
        cfg.h = h;
        RadialBackend::new(build_mesh(&cfg).unwrap()).unwrap()
    }

    #[test]
    fn splines_form_partition_of_unity() {
        let b = backend(0.05);
        let ones = DVector::from_element(b.n_dofs(), 1.0);
        for r in [0.01, 0.3, 0.77, 1.5, 1.85] {
            assert!((b.eval_radius(&ones, r) - 1.0).abs() < 1e-13, "r = {r}");
        }
    }

    #[test]
    fn sinh_antiderivative_matches_quadrature() {
        let b = backend(0.05);
        let c = DVector::from_fn(b.n_dofs(), |i, _| ((i as f64) * 0.37).sin());
        let poly = b.cell_poly(&c);
        let rule: GaussRule<f64> = GaussRule::new(16);
        for t in [0.013, 0.5, 1.234, 1.9] {
            let n = (t / 0.05f64).ceil() as usize;
            let mut q = 0.0;
            for k in 0..n {
                let a = k as f64 * 0.05;
                let e = (a + 0.05).min(t);
                q += rule.integrate(a, e, |r| poly.eval(r) * r.sinh());
            }
            assert!((poly.sinh_integral(t) - q).abs() < 1e-13, "t = {t}");
        }
    }

    #[test]
    fn spectral_mass_equals_physical_mass() {
        let b = backend(0.05);
        let g = b.spectral_gram(|_| 1.0).unwrap();
        let all: Vec<usize> = (0..b.n_dofs()).collect();
        let m = b.mass_matrix(&all);
        let rel = (&g - &m).norm() / m.norm();
        assert!(rel < 1e-10, "{rel}");
    }
}
