//! Kernel finite elements on a geodesic disk in H²: continuous piecewise-linear
//! elements in normal coordinates, with the nonlocal form
//!
//! B(u,v) = (κ/2)∬_{M×M} (u(x)−u(y))(v(x)−v(y)) K(d(x,y)) + κ∫_M u v Ψ,
//!
//! where M is the meshed polygon and Ψ(x) = ∫_{H²∖M} K(d(x,y)) dV(y) is the
//! exact far-field weight of the zero extension.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mesh::{chart_to_point, point_to_chart, Mesh, MeshKind};
use super::touching::{grading_exponent, tri_area, TouchingRule, TriRule, P2};
use super::{CellMass, Discretization, Window};
use crate::error::{Error, Result};
use crate::geometry::{Dim, HyperPoint};
use crate::operator::{kernel_k, kernel_scale, kernel_tail, PolyharmonicSpec};
use crate::quadrature::{two_sided_breaks, GaussRule, Panels};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Number of partial stiffness matrices summed at the end of assembly.
const ASSEMBLY_PARTS: usize = 32;

/// Quadrature orders of the pair assembly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FemQuadrature {
    /// Gauss points per angular sector for touching pairs.
    pub touching_theta: usize,
    /// Gauss points per radial piece for touching pairs.
    pub touching_rho: usize,
    /// Collapsed-Gauss order for pairs closer than `near_factor·h_max`.
    pub near_order: usize,
    pub near_factor: f64,
}

impl Default for FemQuadrature {
    fn default() -> Self {
        Self {
            touching_theta: 6,
            touching_rho: 8,
            near_order: 5,
            near_factor: 2.5,
        }
    }
}

/// K_{2,s} tabulated against ln m², where m² = 4 sinh²(ρ/2) is the squared
/// Minkowski chord, with cubic interpolation of log K.
#[derive(Debug)]
pub struct KernelTable {
    s: f64,
    v0: f64,
    dv: f64,
    log_k: Vec<f64>,
}

fn chord2(rho: f64) -> f64 {
    let t = 2.0 * (0.5 * rho).sinh();
    t * t
}

impl KernelTable {
    const RHO_MIN: f64 = 1e-7;
    const RHO_MAX: f64 = 16.0;
    const N: usize = 3000;

    pub fn new(s: f64) -> Result<Self> {
        let v0 = chord2(Self::RHO_MIN).ln();
        let dv = (chord2(Self::RHO_MAX).ln() - v0) / (Self::N - 1) as f64;
        let log_k = (0..Self::N)
            .into_par_iter()
            .map(|i| {
                let m = (0.5 * (v0 + i as f64 * dv)).exp();
                let rho = 2.0 * (0.5 * m).asinh();
                Ok(kernel_k(rho, Dim::Two, s)?.ln())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { s, v0, dv, log_k })
    }

    pub fn eval(&self, rho: f64) -> f64 {
        if rho > Self::RHO_MAX {
            return kernel_k(rho, Dim::Two, self.s).unwrap_or(0.0);
        }
        self.eval_chord2(chord2(rho))
    }

    /// K as a function of the squared chord m².
    pub fn eval_chord2(&self, m2: f64) -> f64 {
        let v = m2.ln();
        let x = (v - self.v0) / self.dv;
        if x < 0.0 {
            // K ~ ρ^{−2−2s} ~ (m²)^{−1−s} near the diagonal
            return self.log_k[0].exp() * ((v - self.v0) * (-1.0 - self.s)).exp();
        }
        if x > (Self::N - 1) as f64 {
            let rho = 2.0 * (0.5 * m2.sqrt()).asinh();
            return kernel_k(rho, Dim::Two, self.s).unwrap_or(0.0);
        }
        cubic_lagrange(&self.log_k, x).exp()
    }
}

fn lift(z: P2) -> [f64; 3] {
    let r = z[0].hypot(z[1]);
    let sc = if r < 1e-8 { 1.0 + r * r / 6.0 } else { r.sinh() / r };
    [r.cosh(), sc * z[0], sc * z[1]]
}

/// Area element of the chart, sinh|z|/|z|.
fn jacobian(z: P2) -> f64 {
    let r = z[0].hypot(z[1]);
    if r < 1e-8 {
        1.0 + r * r / 6.0
    } else {
        r.sinh() / r
    }
}

/// Squared Minkowski chord −[x−y, x−y] = 4 sinh²(d/2) of lifted points.
fn lifted_chord2(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    let d0 = x[0] - y[0];
    let d1 = x[1] - y[1];
    let d2 = x[2] - y[2];
    (d1 * d1 + d2 * d2 - d0 * d0).max(0.0)
}

/// Geodesic distance between lifted points, stable for nearby points.
fn lifted_distance(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    2.0 * (0.5 * lifted_chord2(x, y).sqrt()).asinh()
}

/// Ψ for the complement of a geodesic disk, tabulated in u = ln(R − r).
#[derive(Debug)]
struct PsiTable {
    radius: f64,
    u0: f64,
    du: f64,
    log_psi: Vec<f64>,
}

impl PsiTable {
    const N: usize = 240;
    const GAP: f64 = 1e-6;

    fn new(table: &KernelTable, radius: f64) -> Result<Self> {
        let u0 = (Self::GAP * radius).ln();
        let du = (radius.ln() - u0) / (Self::N - 1) as f64;
        let log_psi = (0..Self::N)
            .into_par_iter()
            .map(|i| {
                let r = (radius - (u0 + i as f64 * du).exp()).max(0.0);
                Ok(psi_disk(table, radius, r)?.ln())
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { radius, u0, du, log_psi })
    }

    fn eval(&self, table: &KernelTable, r: f64) -> Result<f64> {
        let gap = self.radius - r;
        if gap < Self::GAP * self.radius {
            return psi_disk(table, self.radius, r);
        }
        let x = ((gap.ln() - self.u0) / self.du).min((Self::N - 1) as f64);
        Ok(cubic_lagrange(&self.log_psi, x).exp())
    }
}

/// Cubic Lagrange interpolation of uniformly spaced samples at fractional index x.
fn cubic_lagrange(y: &[f64], x: f64) -> f64 {
    let n = y.len();
    let i = (x.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
    let t = x - i as f64;
    let (a, b, c, d) = (t, t - 1.0, t - 2.0, t - 3.0);
    let y = &y[i..i + 4];
    -y[0] * b * c * d / 6.0 + y[1] * a * c * d / 2.0 - y[2] * a * b * d / 2.0 + y[3] * a * b * c / 6.0
}

/// Ψ(r) = ∫_{d(e₀,y) > R} K(d(x,y)) dV(y) for |x| = r < R.
fn psi_disk(table: &KernelTable, big_r: f64, r: f64) -> Result<f64> {
    let s = table.s;
    if r < 1e-9 {
        return Ok(TAU * kernel_tail(big_r, Dim::Two, s)?);
    }
    let (lo, hi) = (big_r - r, big_r + r);
    let p = Panels::from_breaks(two_sided_breaks(lo, hi, 4, 30, 0.5), &GaussRule::new(16));
    let (chr, shr, chbr) = (r.cosh(), r.sinh(), big_r.cosh());
    let near = p.integrate(|rho| {
        let c = ((chr * rho.cosh() - chbr) / (shr * rho.sinh())).clamp(-1.0, 1.0);
        let frac = 1.0 - c.acos() / std::f64::consts::PI;
        table.eval(rho) * rho.sinh() * frac
    });
    Ok(TAU * (near + kernel_tail(hi, Dim::Two, s)?))
}

/// Quadrature points of one cell.
#[derive(Debug, Clone)]
struct CellPoints {
    chart: Vec<P2>,
    lifted: Vec<[f64; 3]>,
    /// rule weight × chart area × area-element factor
    weight: Vec<f64>,
    bary: Vec<[f64; 3]>,
}

impl CellPoints {
    fn new(t: &[P2; 3], rule: &TriRule) -> Self {
        let area = tri_area(t);
        let chart: Vec<P2> = (0..rule.len()).map(|k| rule.point(t, k)).collect();
        Self {
            lifted: chart.iter().map(|z| lift(*z)).collect(),
            weight: chart.iter().zip(&rule.weights).map(|(z, w)| w * area * jacobian(*z)).collect(),
            bary: rule.bary.clone(),
            chart,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct BoundaryEdge {
    theta0: f64,
    delta: f64,
    mid: P2,
    length: f64,
}

/// Piecewise-linear kernel finite elements on a disk mesh in H².
pub struct FemBackend {
    mesh: Mesh,
    chart: Vec<P2>,
    tri: Vec<[P2; 3]>,
    /// Inverse of the barycentric system of each cell.
    inv: Vec<Matrix3<f64>>,
    dof_of_vertex: Vec<Option<usize>>,
    vertex_of_dof: Vec<usize>,
    interior: Vec<usize>,
    exterior: Vec<usize>,
    omega_cells: Vec<CellMass>,
    far_pts: Vec<CellPoints>,
    near_pts: Vec<CellPoints>,
    centroids: Vec<[f64; 3]>,
    boundary: Vec<BoundaryEdge>,
    pub quadrature: FemQuadrature,
    tables: Mutex<HashMap<u64, Arc<KernelTable>>>,
}

impl FemBackend {
    pub fn new(mesh: Mesh) -> Result<Self> {
        Self::with_quadrature(mesh, FemQuadrature::default())
    }

    pub fn with_quadrature(mesh: Mesh, quadrature: FemQuadrature) -> Result<Self> {
        if mesh.config.kind != MeshKind::Disk {
            return Err(Error::Geometry("FEM backend needs a disk mesh".into()));
        }
        let chart = mesh.chart_coords();
        let radius = mesh.config.radius;
        let h = mesh.config.h;
        let tol = 1e-9 * h;
        let r_of = |v: usize| chart[v][0].hypot(chart[v][1]);
        let mut dof_of_vertex = vec![None; chart.len()];
        let mut vertex_of_dof = Vec::new();
        let (mut interior, mut exterior) = (Vec::new(), Vec::new());
        for v in 0..chart.len() {
            let r = r_of(v);
            if r < radius - tol {
                let d = vertex_of_dof.len();
                dof_of_vertex[v] = Some(d);
                vertex_of_dof.push(v);
                if r < mesh.config.omega_radius - tol {
                    interior.push(d);
                } else {
                    exterior.push(d);
                }
            }
        }
        if interior.is_empty() {
            return Err(Error::Geometry("Ω carries no interior vertex at this h".into()));
        }
        let tri: Vec<[P2; 3]> = mesh
            .cells
            .iter()
            .map(|c| [chart[c[0]], chart[c[1]], chart[c[2]]])
            .collect();
        let inv = tri
            .iter()
            .map(|t| {
                let m = Matrix3::new(t[0][0], t[1][0], t[2][0], t[0][1], t[1][1], t[2][1], 1.0, 1.0, 1.0);
                m.try_inverse().ok_or_else(|| Error::Geometry("degenerate triangle".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let far_rule = TriRule::degree5();
        let near_rule = TriRule::collapsed(quadrature.near_order);
        let far_pts = tri.iter().map(|t| CellPoints::new(t, &far_rule)).collect();
        let near_pts = tri.iter().map(|t| CellPoints::new(t, &near_rule)).collect();
        let centroids = tri
            .iter()
            .map(|t| lift([(t[0][0] + t[1][0] + t[2][0]) / 3.0, (t[0][1] + t[1][1] + t[2][1]) / 3.0]))
            .collect();
        let mut boundary = Vec::new();
        for c in &mesh.cells {
            for e in 0..3 {
                let (a, b) = (c[e], c[(e + 1) % 3]);
                if (r_of(a) - radius).abs() < tol && (r_of(b) - radius).abs() < tol {
                    let ta = chart[a][1].atan2(chart[a][0]);
                    let tb = chart[b][1].atan2(chart[b][0]);
                    let mut delta = (tb - ta).rem_euclid(TAU);
                    let theta0 = if delta > std::f64::consts::PI {
                        delta = TAU - delta;
                        tb
                    } else {
                        ta
                    };
                    let mid = [0.5 * (chart[a][0] + chart[b][0]), 0.5 * (chart[a][1] + chart[b][1])];
                    let length = (chart[a][0] - chart[b][0]).hypot(chart[a][1] - chart[b][1]);
                    boundary.push(BoundaryEdge {
                        theta0,
                        delta,
                        mid,
                        length,
                    });
                }
            }
        }
        let mut backend = Self {
            mesh,
            chart,
            tri,
            inv,
            dof_of_vertex,
            vertex_of_dof,
            interior,
            exterior,
            omega_cells: Vec::new(),
            far_pts,
            near_pts,
            centroids,
            boundary,
            quadrature,
            tables: Mutex::new(HashMap::new()),
        };
        for w in [Window::W1, Window::W2] {
            if backend.window_dofs(w).is_empty() {
                return Err(Error::Geometry(format!(
                    "{w:?} carries no vertex whose support fits inside it at h = {h}"
                )));
            }
        }
        backend.omega_cells = backend.build_omega_cells();
        Ok(backend)
    }

    pub fn n_cells(&self) -> usize {
        self.tri.len()
    }

    pub fn vertex_of_dof(&self, d: usize) -> usize {
        self.vertex_of_dof[d]
    }

    fn cell_dofs(&self, c: usize) -> [Option<usize>; 3] {
        let v = &self.mesh.cells[c];
        [self.dof_of_vertex[v[0]], self.dof_of_vertex[v[1]], self.dof_of_vertex[v[2]]]
    }

    fn bary_of(&self, c: usize, z: P2) -> [f64; 3] {
        let b = self.inv[c] * nalgebra::Vector3::new(z[0], z[1], 1.0);
        [b[0], b[1], b[2]]
    }

    fn build_omega_cells(&self) -> Vec<CellMass> {
        let rule = TriRule::collapsed(4);
        self.mesh
            .cells_with(super::Region::Omega)
            .map(|c| {
                let pts = CellPoints::new(&self.tri[c], &rule);
                let local: Vec<(usize, usize)> = self
                    .cell_dofs(c)
                    .iter()
                    .enumerate()
                    .filter_map(|(k, d)| d.map(|d| (k, d)))
                    .collect();
                let n = local.len();
                let mut mass = DMatrix::zeros(n, n);
                let mut moments = DVector::zeros(n);
                let mut volume = 0.0;
                for (w, b) in pts.weight.iter().zip(&pts.bary) {
                    volume += w;
                    for (p, (kp, _)) in local.iter().enumerate() {
                        moments[p] += w * b[*kp];
                        for (q, (kq, _)) in local.iter().enumerate() {
                            mass[(p, q)] += w * b[*kp] * b[*kq];
                        }
                    }
                }
                let t = &self.tri[c];
                CellMass {
                    cell: c,
                    dofs: local.iter().map(|(_, d)| *d).collect(),
                    mass,
                    moments,
                    volume,
                    centroid: chart_to_point([(t[0][0] + t[1][0] + t[2][0]) / 3.0, (t[0][1] + t[1][1] + t[2][1]) / 3.0]),
                }
            })
            .collect()
    }

    fn window(&self, w: Window) -> [f64; 2] {
        match w {
            Window::W1 => self.mesh.config.w1,
            Window::W2 => self.mesh.config.w2,
        }
    }

    /// Dofs whose hat function is supported inside the window annulus.
    pub fn window_dofs(&self, w: Window) -> Vec<usize> {
        let [a, b] = self.window(w);
        let tol = 1e-9 * self.mesh.config.h;
        let mut ok = vec![true; self.vertex_of_dof.len()];
        let mut seen = vec![false; self.vertex_of_dof.len()];
        for c in &self.mesh.cells {
            let rs: Vec<f64> = c.iter().map(|&v| self.chart[v][0].hypot(self.chart[v][1])).collect();
            let inside = rs.iter().all(|r| *r >= a - tol && *r <= b + tol);
            for &v in c {
                if let Some(d) = self.dof_of_vertex[v] {
                    seen[d] = true;
                    ok[d] &= inside;
                }
            }
        }
        (0..ok.len()).filter(|&d| ok[d] && seen[d]).collect()
    }

    /// ∫ g φ_d dV for the listed dofs.
    pub fn load_vector(&self, dofs: &[usize], g: impl Fn(P2) -> f64 + Sync) -> DVector<f64> {
        let rule = TriRule::collapsed(5);
        let mut pos = vec![usize::MAX; self.vertex_of_dof.len()];
        for (k, &d) in dofs.iter().enumerate() {
            pos[d] = k;
        }
        let mut out = DVector::zeros(dofs.len());
        for c in 0..self.tri.len() {
            let cd = self.cell_dofs(c);
            if !cd.iter().any(|d| d.is_some_and(|d| pos[d] != usize::MAX)) {
                continue;
            }
            let pts = CellPoints::new(&self.tri[c], &rule);
            for k in 0..pts.weight.len() {
                let gv = g(pts.chart[k]) * pts.weight[k];
                for (j, d) in cd.iter().enumerate() {
                    if let Some(d) = d {
                        if pos[*d] != usize::MAX {
                            out[pos[*d]] += gv * pts.bary[k][j];
                        }
                    }
                }
            }
        }
        out
    }

    /// Mass matrix on the listed dofs.
    pub fn mass_matrix(&self, dofs: &[usize]) -> DMatrix<f64> {
        let rule = TriRule::collapsed(4);
        let mut pos = vec![usize::MAX; self.vertex_of_dof.len()];
        for (k, &d) in dofs.iter().enumerate() {
            pos[d] = k;
        }
        let mut m = DMatrix::zeros(dofs.len(), dofs.len());
        for c in 0..self.tri.len() {
            let cd = self.cell_dofs(c);
            let loc: Vec<(usize, usize)> = cd
                .iter()
                .enumerate()
                .filter_map(|(j, d)| d.filter(|d| pos[*d] != usize::MAX).map(|d| (j, pos[d])))
                .collect();
            if loc.is_empty() {
                continue;
            }
            let pts = CellPoints::new(&self.tri[c], &rule);
            for k in 0..pts.weight.len() {
                for (ja, pa) in &loc {
                    for (jb, pb) in &loc {
                        m[(*pa, *pb)] += pts.weight[k] * pts.bary[k][*ja] * pts.bary[k][*jb];
                    }
                }
            }
        }
        m
    }

    /// Nodal interpolant of a chart function.
    pub fn interpolate(&self, g: impl Fn(P2) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.vertex_of_dof.len(), self.vertex_of_dof.iter().map(|&v| g(self.chart[v])))
    }

    fn table(&self, s: f64) -> Result<Arc<KernelTable>> {
        let key = s.to_bits();
        if let Some(t) = self.tables.lock().expect("kernel cache").get(&key) {
            return Ok(t.clone());
        }
        let t = Arc::new(KernelTable::new(s)?);
        self.tables.lock().expect("kernel cache").insert(key, t.clone());
        Ok(t)
    }

    fn check_orders(spec: &PolyharmonicSpec) -> Result<()> {
        for t in spec.terms() {
            if !(t.s.s > 0.0 && t.s.s < 1.0 && t.s.m == 0) {
                return Err(Error::Spec(format!(
                    "the disk FEM backend supports orders in (0,1) only, got {}",
                    t.s.alpha
                )));
            }
        }
        Ok(())
    }

    /// ∫ K(d(x,y)) over the thin regions between the boundary polygon and the circle.
    fn psi_sliver(&self, table: &KernelTable, x: P2, xl: &[f64; 3]) -> f64 {
        let big_r = self.mesh.config.radius;
        let g8: GaussRule<f64> = GaussRule::new(8);
        let g2: GaussRule<f64> = GaussRule::new(2);
        let mut acc = 0.0;
        for e in &self.boundary {
            let dist = (x[0] - e.mid[0]).hypot(x[1] - e.mid[1]);
            let half = 0.5 * e.delta;
            let chord = |th: f64| big_r * half.cos() / (th - e.theta0 - half).cos();
            let cell = |th: f64, gr: &GaussRule<f64>| {
                let rc = chord(th);
                gr.integrate(rc, big_r, |r| {
                    let y = lift([r * th.cos(), r * th.sin()]);
                    table.eval_chord2(lifted_chord2(xl, &y)) * r.sinh()
                })
            };
            if dist > 6.0 * e.length {
                acc += e.delta * cell(e.theta0 + half, &GaussRule::new(1));
            } else {
                acc += g8.integrate(e.theta0, e.theta0 + e.delta, |th| cell(th, &g2));
            }
        }
        acc
    }

    /// Energy matrix of the single order s (κ_s included), on all dofs.
    pub fn stiffness(&self, s: f64) -> Result<DMatrix<f64>> {
        let table = self.table(s)?;
        let kappa = kernel_scale(Dim::Two, s)?;
        let n = self.vertex_of_dof.len();
        let n_cells = self.tri.len();
        let touching = TouchingRule::new(self.quadrature.touching_theta, self.quadrature.touching_rho);
        let p = grading_exponent(s);
        let near_dist = self.quadrature.near_factor * self.mesh.h_max;
        let cells = &self.mesh.cells;

        // A fixed interleaved partition, summed in order, keeps the result
        // independent of the thread count and of work stealing.
        let n_parts = n_cells.clamp(1, ASSEMBLY_PARTS);
        let parts: Vec<DMatrix<f64>> = (0..n_parts)
            .into_par_iter()
            .map(|part| {
                (part..n_cells).step_by(n_parts).fold(DMatrix::<f64>::zeros(n, n), |mut acc, ci| {
                    let di = self.cell_dofs(ci);
                    for cj in ci..n_cells {
                        let dj = self.cell_dofs(cj);
                        if di.iter().chain(&dj).all(|d| d.is_none()) {
                            continue;
                        }
                        // union of dofs with their slot in each triangle
                        let mut loc: Vec<(usize, Option<usize>, Option<usize>)> = Vec::with_capacity(6);
                        for (k, d) in di.iter().enumerate() {
                            if let Some(d) = d {
                                let slot_j = cells[cj].iter().position(|v| *v == cells[ci][k]);
                                loc.push((*d, Some(k), slot_j));
                            }
                        }
                        for (k, d) in dj.iter().enumerate() {
                            if let Some(d) = d {
                                if !cells[ci].contains(&cells[cj][k]) {
                                    loc.push((*d, None, Some(k)));
                                }
                            }
                        }
                        let shared = cells[ci].iter().filter(|v| cells[cj].contains(v)).count();
                        let factor = if ci == cj { 0.5 * kappa } else { kappa };
                        let m = loc.len();
                        let mut local = [[0.0f64; 6]; 6];
                        let mut add = |bx: [f64; 3], by: [f64; 3], w: f64| {
                            let mut d = [0.0f64; 6];
                            for (l, (_, sx, sy)) in loc.iter().enumerate() {
                                d[l] = sx.map_or(0.0, |k| bx[k]) - sy.map_or(0.0, |k| by[k]);
                            }
                            for l in 0..m {
                                let wl = w * d[l];
                                for q in l..m {
                                    local[l][q] += wl * d[q];
                                }
                            }
                        };
                        if shared > 0 {
                            touching.for_each(&self.tri[ci], &self.tri[cj], p, |x, y, w| {
                                let (xl, yl) = (lift(x), lift(y));
                                let kv = table.eval_chord2(lifted_chord2(&xl, &yl));
                                let wt = w * kv * jacobian(x) * jacobian(y);
                                add(self.bary_of(ci, x), self.bary_of(cj, y), wt);
                            });
                        } else {
                            let near = lifted_distance(&self.centroids[ci], &self.centroids[cj]) < near_dist;
                            let (pi, pj) = if near {
                                (&self.near_pts[ci], &self.near_pts[cj])
                            } else {
                                (&self.far_pts[ci], &self.far_pts[cj])
                            };
                            for kx in 0..pi.weight.len() {
                                for ky in 0..pj.weight.len() {
                                    let kv = table.eval_chord2(lifted_chord2(&pi.lifted[kx], &pj.lifted[ky]));
                                    add(pi.bary[kx], pj.bary[ky], pi.weight[kx] * pj.weight[ky] * kv);
                                }
                            }
                        }
                        for l in 0..m {
                            for q in l..m {
                                let v = factor * local[l][q];
                                let (gl, gq) = (loc[l].0, loc[q].0);
                                acc[(gl, gq)] += v;
                                if gl != gq || l != q {
                                    acc[(gq, gl)] += v;
                                }
                            }
                        }
                    }
                    acc
                })
            })
            .collect();
        let mut a = DMatrix::zeros(n, n);
        for part in &parts {
            a += part;
        }
        a += self.far_field(&table, kappa)?;
        Ok(a)
    }

    fn far_field(&self, table: &KernelTable, kappa: f64) -> Result<DMatrix<f64>> {
        let n = self.vertex_of_dof.len();
        let rule = TriRule::collapsed(6);
        let psi = PsiTable::new(table, self.mesh.config.radius)?;
        let parts: Vec<(usize, [Option<usize>; 3], Vec<[f64; 3]>, Vec<f64>)> = (0..self.tri.len())
            .into_par_iter()
            .filter(|c| self.cell_dofs(*c).iter().any(|d| d.is_some()))
            .map(|c| {
                let pts = CellPoints::new(&self.tri[c], &rule);
                let w = (0..pts.weight.len())
                    .map(|k| {
                        let z = pts.chart[k];
                        let psi = psi.eval(table, z[0].hypot(z[1]))? + self.psi_sliver(table, z, &pts.lifted[k]);
                        Ok(pts.weight[k] * psi)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok((c, self.cell_dofs(c), pts.bary, w))
            })
            .collect::<Result<_>>()?;
        let mut m = DMatrix::zeros(n, n);
        for (_, dofs, bary, w) in parts {
            for (b, wk) in bary.iter().zip(&w) {
                for (ja, da) in dofs.iter().enumerate() {
                    let Some(da) = da else { continue };
                    for (jb, db) in dofs.iter().enumerate() {
                        let Some(db) = db else { continue };
                        m[(*da, *db)] += kappa * wk * b[ja] * b[jb];
                    }
                }
            }
        }
        Ok(m)
    }

    /// u at the far-rule or near-rule points of a cell.
    fn values_at(&self, u: &DVector<f64>, c: usize, pts: &CellPoints) -> Vec<f64> {
        let d = self.cell_dofs(c);
        pts.bary
            .iter()
            .map(|b| (0..3).map(|j| d[j].map_or(0.0, |d| u[d] * b[j])).sum())
            .collect()
    }
}

impl Discretization for FemBackend {
    fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    fn n_dofs(&self) -> usize {
        self.vertex_of_dof.len()
    }

    fn interior(&self) -> &[usize] {
        &self.interior
    }

    fn exterior(&self) -> &[usize] {
        &self.exterior
    }

    fn energy_matrix(&self, spec: &PolyharmonicSpec) -> Result<DMatrix<f64>> {
        Self::check_orders(spec)?;
        let n = self.n_dofs();
        let mut a = DMatrix::zeros(n, n);
        for t in spec.terms() {
            a += self.stiffness(t.s.s)? * t.b;
        }
        Ok(a)
    }

    fn omega_cells(&self) -> &[CellMass] {
        &self.omega_cells
    }

    /// Modes sin(π(r−a)/(b−a))·{1, cos θ, sin θ, cos 2θ, …}.
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
        Ok((0..k)
            .map(|j| {
                let m = j.div_ceil(2) as f64;
                let rhs = self.load_vector(&dofs, |z| {
                    let r = z[0].hypot(z[1]);
                    let th = z[1].atan2(z[0]);
                    let ang = if j == 0 {
                        1.0
                    } else if j % 2 == 1 {
                        (m * th).cos()
                    } else {
                        (m * th).sin()
                    };
                    super::radial_mode(1, a, b, r) * ang
                });
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
        let z = point_to_chart(x);
        for c in 0..self.tri.len() {
            let b = self.bary_of(c, z);
            if b.iter().all(|v| *v >= -1e-12) {
                let d = self.cell_dofs(c);
                return (0..3).map(|j| d[j].map_or(0.0, |d| coeffs[d] * b[j])).sum();
            }
        }
        0.0
    }

    /// ∫_{W₂}(P u) g dV = −Σ b_k κ_k ∬ u(y) g(x) K_k(d(x,y)), valid because the
    /// supports of u and g are disjoint. Uses the near rule for every x.
    fn kernel_dn(&self, spec: &PolyharmonicSpec, solutions: &[DVector<f64>], tests: &[DVector<f64>]) -> Result<DMatrix<f64>> {
        Self::check_orders(spec)?;
        let to_full = |g: &DVector<f64>| {
            let mut f = DVector::zeros(self.n_dofs());
            for (k, &i) in self.exterior.iter().enumerate() {
                f[i] = g[k];
            }
            f
        };
        let tests_full: Vec<DVector<f64>> = tests.iter().map(to_full).collect();
        let supp = |u: &DVector<f64>| -> Vec<usize> {
            (0..self.tri.len())
                .filter(|&c| self.cell_dofs(c).iter().any(|d| d.is_some_and(|d| u[d] != 0.0)))
                .collect()
        };
        let mut u_cells: Vec<usize> = solutions.iter().flat_map(supp).collect();
        u_cells.sort_unstable();
        u_cells.dedup();
        let mut g_cells: Vec<usize> = tests_full.iter().flat_map(supp).collect();
        g_cells.sort_unstable();
        g_cells.dedup();
        if u_cells.iter().any(|c| g_cells.binary_search(c).is_ok()) {
            return Err(Error::Support("solution and test supports overlap".into()));
        }
        let tables = spec
            .terms()
            .iter()
            .map(|t| Ok((t.b * kernel_scale(Dim::Two, t.s.s)?, self.table(t.s.s)?)))
            .collect::<Result<Vec<_>>>()?;
        let near_dist = self.quadrature.near_factor * self.mesh.h_max;
        // u at the points of every source cell, per solution
        let u_far: Vec<Vec<Vec<f64>>> = u_cells
            .iter()
            .map(|&c| solutions.iter().map(|u| self.values_at(u, c, &self.far_pts[c])).collect())
            .collect();
        let u_near: Vec<Vec<Vec<f64>>> = u_cells
            .iter()
            .map(|&c| solutions.iter().map(|u| self.values_at(u, c, &self.near_pts[c])).collect())
            .collect();
        let ns = solutions.len();
        let rows: Vec<DMatrix<f64>> = g_cells
            .par_iter()
            .map(|&cg| {
                let px = &self.near_pts[cg];
                let gvals: Vec<Vec<f64>> = tests_full.iter().map(|g| self.values_at(g, cg, px)).collect();
                let mut block = DMatrix::zeros(tests.len(), ns);
                for kx in 0..px.weight.len() {
                    let mut pu = vec![0.0; ns];
                    for (iu, &cu) in u_cells.iter().enumerate() {
                        let near = lifted_distance(&self.centroids[cg], &self.centroids[cu]) < near_dist;
                        let (py, uv) = if near {
                            (&self.near_pts[cu], &u_near[iu])
                        } else {
                            (&self.far_pts[cu], &u_far[iu])
                        };
                        for ky in 0..py.weight.len() {
                            let m2 = lifted_chord2(&px.lifted[kx], &py.lifted[ky]);
                            let kv: f64 = tables.iter().map(|(c, t)| c * t.eval_chord2(m2)).sum::<f64>() * py.weight[ky];
                            for (s, p) in pu.iter_mut().enumerate() {
                                *p -= kv * uv[s][ky];
                            }
                        }
                    }
                    for (j, g) in gvals.iter().enumerate() {
                        for s in 0..ns {
                            block[(j, s)] += px.weight[kx] * g[kx] * pu[s];
                        }
                    }
                }
                block
            })
            .collect();
        Ok(rows.into_iter().fold(DMatrix::zeros(tests.len(), ns), |a, b| a + b))
    }
}
