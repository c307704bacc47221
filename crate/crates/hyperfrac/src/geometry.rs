//! Hyperboloid model of H^n: points, the Lorentzian form, geodesic distance,
//! polar coordinates and radial volume integrals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{Estimate, QuadratureConfig};
use crate::scalar::Real;

/// Dimension of the hyperbolic space. Only n = 2 and n = 3 carry the explicit
/// formulas used downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn new(n: usize) -> Result<Self> {
        match n {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            other => Err(Error::Dimension(other)),
        }
    }

    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// ρ = (n−1)/2, the shift in the spectrum τ = λ² + ρ².
    pub fn rho(self) -> f64 {
        (self.n() as f64 - 1.0) / 2.0
    }

    /// |S^{n−1}|.
    pub fn sphere_area(self) -> f64 {
        match self {
            Dim::Two => 2.0 * std::f64::consts::PI,
            Dim::Three => 4.0 * std::f64::consts::PI,
        }
    }
}

impl TryFrom<usize> for Dim {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Dim::new(n)
    }
}

impl From<Dim> for usize {
    fn from(d: Dim) -> usize {
        d.n()
    }
}

/// Point on the upper sheet {[x,x] = 1, x₀ > 0}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPoint<T> {
    coords: Vec<T>,
}

fn hyperboloid_tol<T: Real>(x0: T) -> T {
    T::tol_floor() * T::one().max(x0 * x0)
}

impl<T: Real> HyperPoint<T> {
    /// Validates the hyperboloid constraint, relative to the size of x₀².
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::Geometry(format!(
                "a point of H^n needs at least 3 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("hyperboloid coordinates".into()));
        }
        let p = Self { coords };
        let q = p.minkowski_norm_sq();
        if p.coords[0] < T::one() || (q - T::one()).abs() > hyperboloid_tol(p.coords[0]) {
            return Err(Error::Geometry(format!(
                "point off the hyperboloid: [x,x] = {q}, x0 = {}",
                p.coords[0]
            )));
        }
        Ok(p)
    }

    /// The base point e₀ = (1, 0, …, 0) of H^n.
    pub fn origin(n: usize) -> Self {
        let mut coords = vec![T::zero(); n + 1];
        coords[0] = T::one();
        Self { coords }
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    /// Dimension n of the hyperbolic space containing the point.
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    fn minkowski_norm_sq(&self) -> T {
        lorentz_form(&self.coords, &self.coords)
    }
}

fn lorentz_form<T: Real>(x: &[T], y: &[T]) -> T {
    let mut s = x[0] * y[0];
    for (a, b) in x[1..].iter().zip(&y[1..]) {
        s -= *a * *b;
    }
    s
}

/// [x, y] = x₀y₀ − Σ xᵢyᵢ.
pub fn lorentz_inner<T: Real>(x: &HyperPoint<T>, y: &HyperPoint<T>) -> T {
    lorentz_form(&x.coords, &y.coords)
}

/// Geodesic distance arccosh([x,y]), evaluated through the chordal form
/// 2·asinh(½·sqrt(−[x−y, x−y])), which stays accurate for nearby points.
pub fn distance<T: Real>(x: &HyperPoint<T>, y: &HyperPoint<T>) -> T {
    let d0 = x.coords[0] - y.coords[0];
    let mut s = -d0 * d0;
    for (a, b) in x.coords[1..].iter().zip(&y.coords[1..]) {
        let d = *a - *b;
        s += d * d;
    }
    let s = s.max(T::zero());
    T::c(2.0) * (T::c(0.5) * s.sqrt()).asinh()
}

/// Geodesic polar coordinates (r, ω) about e₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarCoord<T> {
    pub r: T,
    omega: Vec<T>,
}

impl<T: Real> PolarCoord<T> {
    pub fn new(r: T, omega: Vec<T>) -> Result<Self> {
        if !(r >= T::zero()) || !r.is_finite() {
            return Err(Error::Domain(format!("polar radius must be finite and >= 0, got {r}")));
        }
        if omega.len() < 2 {
            return Err(Error::Geometry("direction needs at least 2 components".into()));
        }
        let norm = omega.iter().fold(T::zero(), |acc, w| acc + *w * *w).sqrt();
        if (norm - T::one()).abs() > T::tol_floor() {
            return Err(Error::Geometry(format!("direction not a unit vector: |ω| = {norm}")));
        }
        Ok(Self { r, omega })
    }

    /// Direction along the first axis.
    pub fn axial(r: T, n: usize) -> Self {
        let mut omega = vec![T::zero(); n];
        omega[0] = T::one();
        Self { r, omega }
    }

    pub fn omega(&self) -> &[T] {
        &self.omega
    }
}

/// (r, ω) ↦ (cosh r, sinh r · ω).
pub fn polar_to_point<T: Real>(p: &PolarCoord<T>) -> HyperPoint<T> {
    let (c, s) = (p.r.cosh(), p.r.sinh());
    let mut coords = Vec::with_capacity(p.omega.len() + 1);
    coords.push(c);
    coords.extend(p.omega.iter().map(|w| s * *w));
    HyperPoint { coords }
}

/// Inverse of [`polar_to_point`]; e₀ maps to r = 0 with ω the first basis vector.
pub fn point_to_polar<T: Real>(x: &HyperPoint<T>) -> PolarCoord<T> {
    let spatial = &x.coords[1..];
    let norm = spatial.iter().fold(T::zero(), |acc, v| acc + *v * *v).sqrt();
    if norm == T::zero() {
        return PolarCoord::axial(T::zero(), spatial.len());
    }
    let r = norm.asinh();
    PolarCoord {
        r,
        omega: spatial.iter().map(|v| *v / norm).collect(),
    }
}

/// Volume density sinh^{n−1} r in geodesic polar coordinates.
pub fn volume_weight<T: Real>(r: T, n: usize) -> T {
    if r > T::c(30.0) {
        ln_volume_weight(r, n).exp()
    } else {
        r.sinh().powi(n as i32 - 1)
    }
}

/// ln sinh^{n−1} r, finite for all r > 0.
pub fn ln_volume_weight<T: Real>(r: T, n: usize) -> T {
    let k = T::from_usize_lossy(n - 1);
    if r > T::c(30.0) {
        k * (r - T::LN_2() + (-(T::c(-2.0) * r).exp()).ln_1p())
    } else {
        k * r.sinh().ln()
    }
}

/// ∫₀^{r_max} f(r) sinh^{n−1} r dr with a refinement-based error estimate.
pub fn radial_quadrature<T: Real, F: Fn(T) -> T>(
    f: F,
    r_max: T,
    n: usize,
    rule: &QuadratureConfig,
) -> Result<Estimate<T>> {
    if !(r_max > T::zero()) {
        return Err(Error::Domain(format!("r_max must be positive, got {r_max}")));
    }
    let eval = |cfg: &QuadratureConfig| -> Result<T> {
        let panels = cfg.panels_on(T::zero(), r_max);
        let mut acc = T::zero();
        for (x, w) in panels.nodes.iter().zip(&panels.weights) {
            let v = f(*x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("integrand at r = {x}")));
            }
            acc += *w * v * volume_weight(*x, n);
        }
        Ok(acc)
    };
    let coarse = eval(rule)?;
    let fine = eval(&rule.refined())?;
    Ok(Estimate {
        value: fine,
        error: (fine - coarse).abs(),
    })
}

/// Applies the Lorentz boost that carries e₀ to `x` to the point `y`, so that
/// d(x, result) = d(e₀, y).
pub fn boost_from_origin<T: Real>(x: &HyperPoint<T>, y: &HyperPoint<T>) -> HyperPoint<T> {
    // Lorentz boost B with B e₀ = x, applied to y.
    let x0 = x.coords[0];
    let xs = &x.coords[1..];
    let y0 = y.coords[0];
    let ys = &y.coords[1..];
    let dot = xs.iter().zip(ys).fold(T::zero(), |a, (p, q)| a + *p * *q);
    let mut out = Vec::with_capacity(x.coords.len());
    out.push(x0 * y0 + dot);
    let k = dot / (T::one() + x0) + y0;
    for (xi, yi) in xs.iter().zip(ys) {
        out.push(*yi + *xi * k);
    }
    HyperPoint { coords: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureConfig;

    #[test]
    fn base_point_inner_product() {
        let e = HyperPoint::<f64>::origin(3);
        assert_eq!(lorentz_inner(&e, &e), 1.0);
        assert_eq!(distance(&e, &e), 0.0);
    }

    #[test]
    fn polar_parametrization() {
        let p = polar_to_point(&PolarCoord::new(1.0, vec![1.0, 0.0]).unwrap());
        assert!((p.coords()[0] - 1.0f64.cosh()).abs() < 1e-15);
        assert!((p.coords()[1] - 1.0f64.sinh()).abs() < 1e-15);
        assert_eq!(p.coords()[2], 0.0);
        let e = HyperPoint::origin(2);
        assert!((lorentz_inner(&e, &p) - 1.0f64.cosh()).abs() < 1e-15);
        assert!((distance(&e, &p) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn boost_preserves_distances() {
        let x = polar_to_point(&PolarCoord::new(0.7, vec![0.6, 0.8]).unwrap());
        let y = polar_to_point(&PolarCoord::axial(2.0, 2));
        let z = boost_from_origin(&x, &y);
        assert!(HyperPoint::new(z.coords().to_vec()).is_ok());
        assert!((distance::<f64>(&x, &z) - 2.0).abs() < 1e-12);
        let ip = lorentz_inner(&x, &z);
        assert!((ip - 2.0f64.cosh()).abs() < 1e-12);
    }

    #[test]
    fn origin_has_canonical_direction() {
        let p = point_to_polar(&HyperPoint::<f64>::origin(3));
        assert_eq!(p.r, 0.0);
        assert_eq!(p.omega(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn constraint_holds_far_out() {
        for r in [0.0, 1.0, 10.0, 30.0] {
            let p = polar_to_point(&PolarCoord::new(r, vec![0.0, 0.6, 0.8]).unwrap());
            assert!(HyperPoint::new(p.coords().to_vec()).is_ok(), "r = {r}");
        }
    }

    #[test]
    fn rejects_off_sheet_points() {
        assert!(HyperPoint::new(vec![2.0, 0.0, 0.0]).is_err());
        assert!(HyperPoint::new(vec![-1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn volume_weight_values() {
        assert_eq!(volume_weight(0.0, 2), 0.0);
        assert!((volume_weight(1.0f64, 3) - 1.3810978455418157).abs() < 1e-14);
        let big = volume_weight(40.0f64, 3);
        assert!((big / 40.0f64.sinh().powi(2) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn radial_quadrature_hits_antiderivative() {
        let est = radial_quadrature(|_| 1.0, 2.0, 2, &QuadratureConfig::default()).unwrap();
        assert!((est.value - (2.0f64.cosh() - 1.0)).abs() < 1e-10);
        let z = radial_quadrature(|_| 0.0, 2.0, 2, &QuadratureConfig::default()).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn radial_quadrature_reports_nonfinite() {
        let r = radial_quadrature(|r: f64| 1.0 / (r - 1.0), 2.0, 2, &QuadratureConfig::default());
        assert!(r.is_ok() || matches!(r, Err(Error::NonFinite(_))));
        let bad = radial_quadrature(|_| f64::NAN, 2.0, 2, &QuadratureConfig::default());
        assert!(matches!(bad, Err(Error::NonFinite(_))));
    }

    #[test]
    fn dim_rejects_other_values() {
        assert!(Dim::new(4).is_err());
        assert_eq!(Dim::new(2).unwrap().n(), 2);
    }
}
