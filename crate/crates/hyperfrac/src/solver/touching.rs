//! Planar quadrature for pairs of triangles that share a vertex, an edge or
//! coincide, with integrands singular like |x − y|^{-2-2s} on the diagonal.
//!
//! Writes y = x + ρe_θ. For fixed z = ρe_θ the x-domain T ∩ (T' − z) is a
//! convex polygon whose shape changes only at finitely many ρ per direction,
//! so ∬ F = ∫_θ ∫_ρ ρ ∫_{T∩(T'−ρe)} F(x, x+ρe) dx dρ dθ is a sum of smooth
//! pieces once ρ is substituted as ρ = t^p with p = 1/(1−s).

use crate::quadrature::GaussRule;

pub(crate) type P2 = [f64; 2];

fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Signed chart area of a triangle.
pub(crate) fn tri_area(t: &[P2; 3]) -> f64 {
    0.5 * cross(sub(t[1], t[0]), sub(t[2], t[0]))
}

/// Symmetric rule on the reference triangle: barycentric nodes, weights summing to 1.
#[derive(Debug, Clone)]
pub(crate) struct TriRule {
    pub bary: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriRule {
    /// Seven-point rule exact for degree 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let mut bary = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![9.0 / 40.0];
        for (a, w) in [(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            bary.extend([[b, a, a], [a, b, a], [a, a, b]]);
            weights.extend([w; 3]);
        }
        Self { bary, weights }
    }

    /// Collapsed n×n Gauss product rule.
    pub fn collapsed(n: usize) -> Self {
        let g: GaussRule<f64> = GaussRule::new(n);
        let mut bary = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (xu, wu) in g.nodes.iter().zip(&g.weights) {
            let u = 0.5 * (xu + 1.0);
            for (xv, wv) in g.nodes.iter().zip(&g.weights) {
                let v = 0.5 * (xv + 1.0);
                let (xi, eta) = (u, v * (1.0 - u));
                bary.push([1.0 - xi - eta, xi, eta]);
                // reference area 1/2 normalized to 1
                weights.push(0.25 * wu * wv * (1.0 - u) * 2.0);
            }
        }
        Self { bary, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn point(&self, t: &[P2; 3], k: usize) -> P2 {
        let b = self.bary[k];
        [
            b[0] * t[0][0] + b[1] * t[1][0] + b[2] * t[2][0],
            b[0] * t[0][1] + b[1] * t[1][1] + b[2] * t[2][1],
        ]
    }
}

/// Half-planes n·x ≥ c of a counter-clockwise triangle.
fn half_planes(t: &[P2; 3]) -> [(P2, f64); 3] {
    let mut out = [([0.0; 2], 0.0); 3];
    for k in 0..3 {
        let a = t[k];
        let b = t[(k + 1) % 3];
        let d = sub(b, a);
        let n = [-d[1], d[0]];
        out[k] = (n, dot(n, a));
    }
    out
}

fn clip(poly: &[P2], n: P2, c: f64, out: &mut Vec<P2>) {
    out.clear();
    let m = poly.len();
    for i in 0..m {
        let p = poly[i];
        let q = poly[(i + 1) % m];
        let fp = dot(n, p) - c;
        let fq = dot(n, q) - c;
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
}

fn on_segment(p: P2, a: P2, b: P2) -> bool {
    let d = sub(b, a);
    let t = dot(sub(p, a), d) / dot(d, d);
    (-1e-9..=1.0 + 1e-9).contains(&t)
}

fn polygon_area(poly: &[P2]) -> f64 {
    let m = poly.len();
    (0..m).map(|i| cross(poly[i], poly[(i + 1) % m])).sum::<f64>() * 0.5
}

/// Grading exponent p for ρ = t^p. An integer p with p(2−2s) integral keeps
/// ρ^{1−2s} dρ and the polynomial shape factors polynomial in t.
pub(crate) fn grading_exponent(s: f64) -> f64 {
    for p in 1..=8 {
        let e = p as f64 * (2.0 - 2.0 * s);
        if e >= 1.0 - 1e-12 && (e - e.round()).abs() < 1e-12 {
            return p as f64;
        }
    }
    1.0 / (1.0 - s)
}

/// Quadrature orders for touching pairs.
#[derive(Debug, Clone)]
pub(crate) struct TouchingRule {
    theta: GaussRule<f64>,
    rho: GaussRule<f64>,
    inner: TriRule,
}

impl TouchingRule {
    pub fn new(theta_order: usize, rho_order: usize) -> Self {
        Self {
            theta: GaussRule::new(theta_order),
            rho: GaussRule::new(rho_order),
            inner: TriRule::degree5(),
        }
    }

    /// Calls `f(x, y, w)` with nodes of a rule for ∬_{T×T'} F(x,y) dy dx.
    /// Both triangles must be counter-clockwise and share at least one vertex.
    /// `p` is the grading exponent of the substitution ρ = t^p.
    pub fn for_each<F: FnMut(P2, P2, f64)>(&self, t: &[P2; 3], tp: &[P2; 3], p: f64, mut f: F) {
        let ht = half_planes(t);
        let htp = half_planes(tp);
        // directions of the vertices of T' − T
        let mut angles: Vec<f64> = Vec::with_capacity(9);
        let scale = (tri_area(t).abs() + tri_area(tp).abs()).sqrt();
        for q in tp {
            for a in t {
                let d = sub(*q, *a);
                if dot(d, d).sqrt() > 1e-12 * scale {
                    angles.push(d[1].atan2(d[0]));
                }
            }
        }
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let first = angles[0];
        angles.push(first + 2.0 * std::f64::consts::PI);
        let mut breaks: Vec<f64> = Vec::with_capacity(20);
        let mut poly: Vec<P2> = Vec::with_capacity(8);
        let mut tmp: Vec<P2> = Vec::with_capacity(8);
        for w in angles.windows(2) {
            let (a0, a1) = (w[0], w[1]);
            if a1 - a0 < 1e-14 {
                continue;
            }
            let half = 0.5 * (a1 - a0);
            for (xt, wt) in self.theta.nodes.iter().zip(&self.theta.weights) {
                let th = a0 + half * (xt + 1.0);
                let e = [th.cos(), th.sin()];
                let w_theta = half * wt;
                breaks.clear();
                breaks.push(0.0);
                // ρ where a vertex of one triangle crosses an edge segment of the other
                for q in tp {
                    for k in 0..3 {
                        let (n, c) = ht[k];
                        let ne = dot(n, e);
                        if ne.abs() > 1e-300 {
                            let r = (dot(n, *q) - c) / ne;
                            if r > 1e-10 * scale && on_segment([q[0] - r * e[0], q[1] - r * e[1]], t[k], t[(k + 1) % 3]) {
                                breaks.push(r);
                            }
                        }
                    }
                }
                for a in t {
                    for k in 0..3 {
                        let (n, c) = htp[k];
                        let ne = dot(n, e);
                        if ne.abs() > 1e-300 {
                            let r = (c - dot(n, *a)) / ne;
                            if r > 1e-10 * scale && on_segment([a[0] + r * e[0], a[1] + r * e[1]], tp[k], tp[(k + 1) % 3]) {
                                breaks.push(r);
                            }
                        }
                    }
                }
                breaks.sort_by(f64::total_cmp);
                breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs().max(1e-300));
                for bw in breaks.windows(2) {
                    let (r0, r1) = (bw[0], bw[1]);
                    // skip pieces where the x-domain is empty
                    let mid = 0.5 * (r0 + r1);
                    self.x_domain(t, &htp, e, mid, &mut poly, &mut tmp);
                    if poly.len() < 3 || polygon_area(&poly) <= 1e-14 * scale * scale {
                        continue;
                    }
                    let (t0, t1) = (r0.powf(1.0 / p), r1.powf(1.0 / p));
                    let hr = 0.5 * (t1 - t0);
                    for (xr, wr) in self.rho.nodes.iter().zip(&self.rho.weights) {
                        let tt = t0 + hr * (xr + 1.0);
                        let rho = tt.powf(p);
                        let jac = hr * wr * p * tt.powf(p - 1.0);
                        self.x_domain(t, &htp, e, rho, &mut poly, &mut tmp);
                        if poly.len() < 3 {
                            continue;
                        }
                        let z = [rho * e[0], rho * e[1]];
                        let base = w_theta * jac * rho;
                        for k in 1..poly.len() - 1 {
                            let tri = [poly[0], poly[k], poly[k + 1]];
                            let area = tri_area(&tri);
                            if area <= 0.0 {
                                continue;
                            }
                            for (j, wq) in self.inner.weights.iter().enumerate() {
                                let x = self.inner.point(&tri, j);
                                f(x, [x[0] + z[0], x[1] + z[1]], base * area * wq);
                            }
                        }
                    }
                }
            }
        }
    }

    /// T ∩ (T' − ρe).
    fn x_domain(&self, t: &[P2; 3], htp: &[(P2, f64); 3], e: P2, rho: f64, poly: &mut Vec<P2>, tmp: &mut Vec<P2>) {
        poly.clear();
        poly.extend_from_slice(t);
        for (n, c) in htp {
            clip(poly, *n, c - rho * dot(*n, e), tmp);
            std::mem::swap(poly, tmp);
            if poly.len() < 3 {
                return;
            }
        }
    }
}
