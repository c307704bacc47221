//! Computational meshes: a radial interval mesh for the H³ reduction and a ring
//! triangulation of a geodesic disk in H².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_to_polar, polar_to_point, HyperPoint, PolarCoord};

/// Region tag of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Region {
    Omega,
    Exterior,
    W1,
    W2,
    Far,
}

/// Which discretization a mesh feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshKind {
    /// Intervals in r for radial functions on H³.
    Radial,
    /// Triangles of a geodesic disk in H².
    Disk,
}

/// Concentric region layout: Ω = B_{omega_radius}, W₁ and W₂ annuli, ball B_R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub kind: MeshKind,
    pub radius: f64,
    pub h: f64,
    pub omega_radius: f64,
    pub w1: [f64; 2],
    pub w2: [f64; 2],
}

impl MeshConfig {
    pub fn radial_default() -> Self {
        Self {
            kind: MeshKind::Radial,
            radius: 2.0,
            h: 0.025,
            omega_radius: 1.0,
            w1: [1.2, 1.5],
            w2: [1.7, 2.0],
        }
    }

    /// Wide adjacent windows for inverse experiments: more independent data per window.
    pub fn recovery_default() -> Self {
        Self {
            kind: MeshKind::Radial,
            radius: 2.9,
            h: 0.025,
            omega_radius: 1.0,
            w1: [1.1, 2.0],
            w2: [2.0, 2.9],
        }
    }

    pub fn disk_default() -> Self {
        Self {
            kind: MeshKind::Disk,
            radius: 2.0,
            h: 0.25,
            omega_radius: 0.5,
            w1: [0.75, 1.25],
            w2: [1.5, 2.0],
        }
    }

    /// Same layout with half the cell size.
    pub fn refined(&self) -> Self {
        Self {
            h: self.h / 2.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |c: bool, msg: &str| if c { Ok(()) } else { Err(Error::Geometry(msg.into())) };
        ok(self.h > 0.0 && self.h.is_finite(), "cell size must be positive")?;
        ok(self.omega_radius > 0.0, "Ω must have positive radius")?;
        ok(self.w1[1] > self.w1[0], "W1 is empty")?;
        ok(self.w2[1] > self.w2[0], "W2 is empty")?;
        ok(self.w1[0] >= self.omega_radius && self.w2[0] >= self.omega_radius, "W1 and W2 must lie outside Ω")?;
        ok(self.w1[1] <= self.w2[0] || self.w2[1] <= self.w1[0], "W1 and W2 overlap")?;
        ok(self.w1[1].max(self.w2[1]) <= self.radius + 1e-12, "regions must lie inside B_R")?;
        Ok(())
    }

    /// Outer radius of the measurement annuli.
    pub fn outer_region_radius(&self) -> f64 {
        self.w1[1].max(self.w2[1])
    }

    pub fn region_of_annulus(&self, a: f64, b: f64) -> Region {
        let tol = 1e-9 * self.h;
        let inside = |w: [f64; 2]| a >= w[0] - tol && b <= w[1] + tol;
        if b <= self.omega_radius + tol {
            Region::Omega
        } else if inside(self.w1) {
            Region::W1
        } else if inside(self.w2) {
            Region::W2
        } else if a >= self.outer_region_radius() - tol {
            Region::Far
        } else {
            Region::Exterior
        }
    }
}

/// A tagged mesh. Radial cells are index pairs; disk cells are triangles.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub config: MeshConfig,
    pub vertices: Vec<HyperPoint<f64>>,
    pub cells: Vec<Vec<usize>>,
    pub tags: Vec<Region>,
    pub h_min: f64,
    pub h_max: f64,
    /// Smallest interior angle in the chart (disk meshes only).
    pub min_angle: Option<f64>,
}

fn ratio_is_integer(x: f64, h: f64) -> bool {
    let q = x / h;
    (q - q.round()).abs() < 1e-9 * q.abs().max(1.0)
}

/// Builds the mesh described by `cfg`.
pub fn build_mesh(cfg: &MeshConfig) -> Result<Mesh> {
    cfg.validate()?;
    for (name, v) in [
        ("radius", cfg.radius),
        ("omega_radius", cfg.omega_radius),
        ("w1", cfg.w1[0]),
        ("w1", cfg.w1[1]),
        ("w2", cfg.w2[0]),
        ("w2", cfg.w2[1]),
    ] {
        if !ratio_is_integer(v, cfg.h) {
            return Err(Error::Geometry(format!(
                "{name} boundary {v} is not a multiple of h = {}",
                cfg.h
            )));
        }
    }
    match cfg.kind {
        MeshKind::Radial => Ok(radial_mesh(cfg)),
        MeshKind::Disk => Ok(disk_mesh(cfg)),
    }
}

fn radial_mesh(cfg: &MeshConfig) -> Mesh {
    let n_cells = (cfg.radius / cfg.h).round() as usize;
    let vertices = (0..=n_cells)
        .map(|k| polar_to_point(&PolarCoord::axial(k as f64 * cfg.h, 3)))
        .collect();
    let cells: Vec<Vec<usize>> = (0..n_cells).map(|k| vec![k, k + 1]).collect();
    let tags = (0..n_cells)
        .map(|k| cfg.region_of_annulus(k as f64 * cfg.h, (k + 1) as f64 * cfg.h))
        .collect();
    Mesh {
        config: cfg.clone(),
        vertices,
        cells,
        tags,
        h_min: cfg.h,
        h_max: cfg.h,
        min_angle: None,
    }
}

/// Ring triangulation in geodesic normal coordinates z = r(cos θ, sin θ).
fn disk_mesh(cfg: &MeshConfig) -> Mesh {
    let n_rings = (cfg.radius / cfg.h).round() as usize;
    let mut chart: Vec<[f64; 2]> = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for k in 1..=n_rings {
        let r = k as f64 * cfg.h;
        // about one metric cell size along the geodesic circle of length 2π sinh r
        let m = ((2.0 * std::f64::consts::PI * r.sinh() / cfg.h).round() as usize).max(6);
        ring_start.push(chart.len());
        ring_len.push(m);
        let offset = if k % 2 == 1 { 0.5 } else { 0.0 };
        for j in 0..m {
            let th = 2.0 * std::f64::consts::PI * (j as f64 + offset) / m as f64;
            chart.push([r * th.cos(), r * th.sin()]);
        }
    }
    let angle = |p: [f64; 2]| {
        let a = p[1].atan2(p[0]);
        if a < 0.0 {
            a + 2.0 * std::f64::consts::PI
        } else {
            a
        }
    };
    let mut cells: Vec<Vec<usize>> = Vec::new();
    let mut tags = Vec::new();
    // central fan
    for j in 0..ring_len[1] {
        let a = ring_start[1] + j;
        let b = ring_start[1] + (j + 1) % ring_len[1];
        cells.push(vec![0, a, b]);
        tags.push(cfg.region_of_annulus(0.0, cfg.h));
    }
    for k in 1..n_rings {
        let (s0, m0) = (ring_start[k], ring_len[k]);
        let (s1, m1) = (ring_start[k + 1], ring_len[k + 1]);
        // sort both rings by angle, then zip
        let order = |s: usize, m: usize| {
            let mut idx: Vec<usize> = (s..s + m).collect();
            idx.sort_by(|a, b| angle(chart[*a]).total_cmp(&angle(chart[*b])));
            idx
        };
        let inner = order(s0, m0);
        let outer = order(s1, m1);
        let tag = cfg.region_of_annulus(k as f64 * cfg.h, (k + 1) as f64 * cfg.h);
        let tau = 2.0 * std::f64::consts::PI;
        let ang_in = |i: usize| angle(chart[inner[i % m0]]) + if i >= m0 { tau } else { 0.0 };
        let ang_out = |j: usize| angle(chart[outer[j % m1]]) + if j >= m1 { tau } else { 0.0 };
        let (mut i, mut j) = (0usize, 0usize);
        while i < m0 || j < m1 {
            if j >= m1 || (i < m0 && ang_in(i + 1) <= ang_out(j + 1)) {
                cells.push(vec![inner[i % m0], inner[(i + 1) % m0], outer[j % m1]]);
                i += 1;
            } else {
                cells.push(vec![inner[i % m0], outer[(j + 1) % m1], outer[j % m1]]);
                j += 1;
            }
            tags.push(tag);
        }
    }
    // orient counter-clockwise in the chart
    for c in cells.iter_mut() {
        let (p, q, r) = (chart[c[0]], chart[c[1]], chart[c[2]]);
        let det = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        if det < 0.0 {
            c.swap(1, 2);
        }
    }
    let vertices: Vec<HyperPoint<f64>> = chart.iter().map(|z| chart_to_point(*z)).collect();
    let (mut h_min, mut h_max, mut min_angle) = (f64::INFINITY, 0.0f64, f64::INFINITY);
    for c in &cells {
        for e in 0..3 {
            let d = crate::geometry::distance(&vertices[c[e]], &vertices[c[(e + 1) % 3]]);
            h_min = h_min.min(d);
            h_max = h_max.max(d);
            let (p, q, r) = (chart[c[e]], chart[c[(e + 1) % 3]], chart[c[(e + 2) % 3]]);
            let u = [q[0] - p[0], q[1] - p[1]];
            let v = [r[0] - p[0], r[1] - p[1]];
            let cosang = (u[0] * v[0] + u[1] * v[1]) / ((u[0].hypot(u[1])) * (v[0].hypot(v[1])));
            min_angle = min_angle.min(cosang.clamp(-1.0, 1.0).acos());
        }
    }
    Mesh {
        config: cfg.clone(),
        vertices,
        cells,
        tags,
        h_min,
        h_max,
        min_angle: Some(min_angle),
    }
}

/// Normal-coordinate chart point z ↦ (cosh|z|, sinh|z| z/|z|).
pub fn chart_to_point(z: [f64; 2]) -> HyperPoint<f64> {
    let r = z[0].hypot(z[1]);
    if r == 0.0 {
        return HyperPoint::origin(2);
    }
    let omega = vec![z[0] / r, z[1] / r];
    polar_to_point(&PolarCoord::new(r, omega).expect("unit direction"))
}

/// Inverse of [`chart_to_point`].
pub fn point_to_chart(x: &HyperPoint<f64>) -> [f64; 2] {
    let p = point_to_polar(x);
    [p.r * p.omega()[0], p.r * p.omega()[1]]
}

impl Mesh {
    pub fn chart_coords(&self) -> Vec<[f64; 2]> {
        self.vertices.iter().map(point_to_chart).collect()
    }

    pub fn cells_with(&self, region: Region) -> impl Iterator<Item = usize> + '_ {
        self.tags
            .iter()
            .enumerate()
            .filter(move |(_, t)| **t == region)
            .map(|(i, _)| i)
    }
}
