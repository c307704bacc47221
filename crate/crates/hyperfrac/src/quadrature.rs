//! Gauss–Legendre rules, composite panels with geometric grading, and
//! barycentric interpolation on panel nodes.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    /// Builds an `order`-point rule by Newton iteration on P_order.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss rule needs at least one node");
        let n = order;
        let nf = T::from_usize_lossy(n);
        let one = T::one();
        let two = T::c(2.0);
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        for i in 0..n.div_ceil(2) {
            let mut x = (T::PI() * (T::from_usize_lossy(i) + T::c(0.75)) / (nf + T::c(0.5))).cos();
            let mut dp = one;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= T::epsilon() * T::c(4.0) {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d.is_finite() { d } else { dp };
            let w = two / ((one - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = T::zero();
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrates `f` over [a, b].
    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let half = (b - a) * T::c(0.5);
        let mid = (b + a) * T::c(0.5);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += *w * f(mid + half * *x);
        }
        acc * half
    }
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    if n == 0 {
        return (p0, T::zero());
    }
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let p2 = ((T::c(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize_lossy(n);
    let d = nf * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

/// Composite rule: a fixed Gauss rule on each panel between consecutive breaks.
#[derive(Debug, Clone)]
pub struct Panels<T> {
    pub breaks: Vec<T>,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub order: usize,
}

impl<T: Real> Panels<T> {
    pub fn from_breaks(breaks: Vec<T>, rule: &GaussRule<T>) -> Self {
        let order = rule.order();
        let mut nodes = Vec::with_capacity(order * breaks.len().saturating_sub(1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = (b - a) * T::c(0.5);
            let mid = (a + b) * T::c(0.5);
            for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
                nodes.push(mid + half * *x);
                weights.push(*wt * half);
            }
        }
        Self {
            breaks,
            nodes,
            weights,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_panels(&self) -> usize {
        self.breaks.len().saturating_sub(1)
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += *w * f(*x);
        }
        acc
    }

    /// Index of the panel containing `x` (clamped to the first/last panel).
    pub fn panel_of(&self, x: T) -> usize {
        let np = self.n_panels();
        let idx = self.breaks.partition_point(|b| *b <= x);
        idx.saturating_sub(1).min(np - 1)
    }
}

/// `n` equal panels on [a, b].
pub fn uniform_breaks<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    let n = n.max(1);
    let h = (b - a) / T::from_usize_lossy(n);
    let mut v: Vec<T> = (0..n).map(|i| a + h * T::from_usize_lossy(i)).collect();
    v.push(b);
    v
}

/// Uniform panels on [a, b] whose first panel is split geometrically toward `a`
/// (`levels` extra breaks at a + h·ratio^k).
pub fn graded_breaks<T: Real>(a: T, b: T, n_uniform: usize, levels: usize, ratio: T) -> Vec<T> {
    let uni = uniform_breaks(a, b, n_uniform);
    let h = uni[1] - a;
    let mut out = vec![a];
    for k in (1..=levels).rev() {
        out.push(a + h * ratio.powi(k as i32));
    }
    out.extend_from_slice(&uni[1..]);
    out
}

/// Breaks on [a, b] graded geometrically toward both ends.
pub fn two_sided_breaks<T: Real>(a: T, b: T, n_uniform: usize, levels: usize, ratio: T) -> Vec<T> {
    let uni = uniform_breaks(a, b, n_uniform.max(2));
    let h = uni[1] - a;
    let mut out = vec![a];
    for k in (1..=levels).rev() {
        out.push(a + h * ratio.powi(k as i32));
    }
    out.extend_from_slice(&uni[1..uni.len() - 1]);
    for k in 1..=levels {
        out.push(b - h * ratio.powi(k as i32));
    }
    out.push(b);
    out
}

/// Quadrature configuration for radial integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Gauss nodes per panel.
    pub order: usize,
    /// Uniform panels across the interval.
    pub panels: usize,
    /// Geometric refinement levels toward the left end.
    pub grading_levels: usize,
    /// Ratio between successive graded breaks.
    pub grading_ratio: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            order: 16,
            panels: 64,
            grading_levels: 8,
            grading_ratio: 0.25,
        }
    }
}

impl QuadratureConfig {
    pub fn refined(&self) -> Self {
        Self {
            panels: self.panels * 2,
            grading_levels: self.grading_levels + 2,
            ..*self
        }
    }

    pub fn panels_on<T: Real>(&self, a: T, b: T) -> Panels<T> {
        let rule = GaussRule::new(self.order);
        Panels::from_breaks(
            graded_breaks(a, b, self.panels, self.grading_levels, T::c(self.grading_ratio)),
            &rule,
        )
    }
}

/// Value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: T,
}

/// Barycentric Lagrange interpolation on the nodes of a reference rule.
#[derive(Debug, Clone)]
pub struct Barycentric<T> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> Barycentric<T> {
    pub fn new(nodes: &[T]) -> Self {
        let weights = nodes
            .iter()
            .enumerate()
            .map(|(j, xj)| {
                let mut p = T::one();
                for (k, xk) in nodes.iter().enumerate() {
                    if k != j {
                        p *= *xj - *xk;
                    }
                }
                T::one() / p
            })
            .collect();
        Self {
            nodes: nodes.to_vec(),
            weights,
        }
    }

    /// Interpolates samples `values` (aligned with `nodes`) at reference point `x`.
    pub fn eval(&self, values: &[T], x: T) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for ((xj, wj), fj) in self.nodes.iter().zip(&self.weights).zip(values) {
            let d = x - *xj;
            if d == T::zero() {
                return *fj;
            }
            let c = *wj / d;
            num += c * *fj;
            den += c;
        }
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        let rule = GaussRule::<f64>::new(16);
        for k in 0..32 {
            let v = rule.integrate(0.0, 1.0, |x| x.powi(k));
            assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "degree {k}");
        }
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_order_has_center_node() {
        let rule = GaussRule::<f64>::new(5);
        assert_eq!(rule.nodes[2], 0.0);
        assert!((rule.weights[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn f32_rule_is_usable() {
        let rule = GaussRule::<f32>::new(8);
        let v = rule.integrate(0.0, 1.0, |x| x * x);
        assert!((v - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn graded_panels_resolve_endpoint_singularity() {
        let p = Panels::from_breaks(graded_breaks(0.0, 1.0, 4, 60, 0.3), &GaussRule::new(16));
        let v = p.integrate(|x: f64| x.powf(-0.5));
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn barycentric_reproduces_polynomials() {
        let rule = GaussRule::<f64>::new(16);
        let b = Barycentric::new(&rule.nodes);
        let vals: Vec<f64> = rule.nodes.iter().map(|x| x.powi(7) - 2.0 * x).collect();
        for x in [-1.0, -0.3, 0.11, 1.0] {
            let exact = f64::powi(x, 7) - 2.0 * x;
            assert!((b.eval(&vals, x) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn panel_lookup() {
        let p = Panels::from_breaks(uniform_breaks(0.0, 4.0, 4), &GaussRule::new(4));
        assert_eq!(p.panel_of(0.0), 0);
        assert_eq!(p.panel_of(1.5), 1);
        assert_eq!(p.panel_of(4.0), 3);
        assert_eq!(p.panel_of(9.0), 3);
    }
}
