//! Gamma, modified Bessel K_ν, the Harish-Chandra Plancherel density and the
//! constants of the singular-integral kernel.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Dim;
use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Taylor coefficients of 1/Γ(z) = Σ_{k≥1} c_k z^k.
const RGAMMA: [f64; 30] = [
    1.0,
    0.577_215_664_901_532_860_61,
    -0.655_878_071_520_253_881_08,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_748,
    -0.009_621_971_527_876_973_562_1,
    0.007_218_943_246_663_099_542_4,
    -0.001_165_167_591_859_065_112_1,
    -0.000_215_241_674_114_950_972_82,
    0.000_128_050_282_388_116_186_15,
    -0.000_020_134_854_780_788_238_656,
    -1.250_493_482_142_670_657_3e-6,
    1.133_027_231_981_695_882_4e-6,
    -2.056_338_416_977_607_103_5e-7,
    6.116_095_104_481_415_817_9e-9,
    5.002_007_644_469_222_930_1e-9,
    -1.181_274_570_487_020_144_6e-9,
    1.043_426_711_691_100_510_5e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708_2e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783_2e-14,
    -5.348_122_539_423_017_982_4e-15,
    1.226_778_628_238_260_790_2e-15,
    -1.181_259_301_697_458_769_5e-16,
    1.186_692_254_751_600_332_6e-18,
    1.412_380_655_318_031_781_6e-18,
    -2.298_745_684_435_370_206_6e-19,
    1.714_406_321_927_337_433_4e-20,
];

fn is_nonpositive_integer<T: Real>(x: T) -> bool {
    x <= T::zero() && x == x.round()
}

fn lanczos_sum<T: Real>(z: T) -> T {
    let mut a = T::c(LANCZOS[0]);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += T::c(*c) / (z + T::from_usize_lossy(i));
    }
    a
}

/// Γ(x) for real x away from the poles.
pub fn gamma<T: Real>(x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("gamma argument {x}")));
    }
    if is_nonpositive_integer(x) {
        return Err(Error::Pole(x.to_f64().unwrap_or(f64::NAN)));
    }
    if x < T::c(0.5) {
        let s = (T::PI() * x).sin();
        return Ok(T::PI() / (s * gamma(T::one() - x)?));
    }
    if x == x.round() && x <= T::c(30.0) {
        let mut f = T::one();
        let mut k = T::c(2.0);
        while k < x {
            f *= k;
            k += T::one();
        }
        return Ok(f);
    }
    let z = x - T::one();
    let t = z + T::c(LANCZOS_G + 0.5);
    let sqrt_2pi = (T::c(2.0) * T::PI()).sqrt();
    // Split the power to delay overflow.
    let p = t.powf((z + T::c(0.5)) * T::c(0.5));
    Ok(sqrt_2pi * p * (p * (-t).exp()) * lanczos_sum(z))
}

/// ln|Γ(x)|.
pub fn ln_gamma<T: Real>(x: T) -> Result<T> {
    if is_nonpositive_integer(x) {
        return Err(Error::Pole(x.to_f64().unwrap_or(f64::NAN)));
    }
    if x < T::c(0.5) {
        let s = (T::PI() * x).sin().abs();
        return Ok(T::PI().ln() - s.ln() - ln_gamma(T::one() - x)?);
    }
    let z = x - T::one();
    let t = z + T::c(LANCZOS_G + 0.5);
    Ok(T::c(0.5) * (T::c(2.0) * T::PI()).ln() + (z + T::c(0.5)) * t.ln() - t
        + lanczos_sum(z).ln())
}

/// ln Γ(z) for complex z (principal branch up to multiples of 2πi).
pub fn ln_gamma_complex<T: Real>(z: Complex<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    if z.re < T::c(0.5) {
        let pi = Complex::new(T::PI(), T::zero());
        return pi.ln() - (pi * z).sin().ln() - ln_gamma_complex(one - z);
    }
    let zm = z - one;
    let mut a = Complex::new(T::c(LANCZOS[0]), T::zero());
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += Complex::new(T::c(*c), T::zero()) / (zm + T::from_usize_lossy(i));
    }
    let t = zm + T::c(LANCZOS_G + 0.5);
    Complex::new(T::c(0.5) * (T::c(2.0) * T::PI()).ln(), T::zero())
        + (zm + T::c(0.5)) * t.ln()
        - t
        + a.ln()
}

/// |Γ(a + iλ)|².
pub fn gamma_abs_sq<T: Real>(a: T, lambda: T) -> T {
    (T::c(2.0) * ln_gamma_complex(Complex::new(a, lambda)).re).exp()
}

/// Γ(m+1+α)/Γ(1+α) = (1+α)(2+α)…(m+α).
pub fn rising_ratio<T: Real>(m: usize, alpha: T) -> T {
    (1..=m).fold(T::one(), |acc, k| acc * (T::from_usize_lossy(k) + alpha))
}

/// Temme's auxiliary values for |μ| ≤ 1/2: (Γ₁, Γ₂, 1/Γ(1+μ), 1/Γ(1−μ)).
fn temme_gammas<T: Real>(mu: T) -> (T, T, T, T) {
    let mut gam1 = T::zero();
    let mut gam2 = T::zero();
    let mut mu_pow = T::one();
    // Coefficient index k (1-based) multiplies μ^{k−1} in 1/Γ(1+μ).
    for (i, c) in RGAMMA.iter().enumerate() {
        let k = i + 1;
        let c = T::c(*c);
        if k % 2 == 1 {
            gam2 += c * mu_pow;
        } else {
            gam1 -= c * mu_pow / if mu == T::zero() { T::one() } else { mu };
        }
        mu_pow *= mu;
    }
    if mu == T::zero() {
        gam1 = -T::c(RGAMMA[1]);
    }
    let odd = gam1 * mu;
    (gam1, gam2, gam2 - odd, gam2 + odd)
}

/// Returns (e^x K_ν(x), e^x K_{ν+1}(x)).
fn bessel_k_pair_scaled<T: Real>(nu: T, x: T) -> (T, T) {
    let eps = T::epsilon();
    let nl = (nu + T::c(0.5)).floor();
    let xmu = nu - nl;
    let xmu2 = xmu * xmu;
    let xi = T::one() / x;
    let xi2 = T::c(2.0) * xi;
    let (mut rkmu, mut rk1);
    if x < T::c(2.0) {
        let x2 = T::c(0.5) * x;
        let pimu = T::PI() * xmu;
        let fact = if pimu.abs() < eps { T::one() } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < eps { T::one() } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = T::c(0.5) * ee / gampl;
        let mut q = T::c(0.5) / (ee * gammi);
        let mut c = T::one();
        let dd = x2 * x2;
        let mut sum1 = p;
        let mut i = T::one();
        loop {
            ff = (i * ff + p + q) / (i * i - xmu2);
            c *= dd / i;
            p /= i - xmu;
            q /= i + xmu;
            let del = c * ff;
            sum += del;
            let del1 = c * (p - i * ff);
            sum1 += del1;
            if del.abs() < sum.abs() * eps || i > T::c(500.0) {
                break;
            }
            i += T::one();
        }
        let ex = x.exp();
        rkmu = sum * ex;
        rk1 = sum1 * xi2 * ex;
    } else {
        let mut b = T::c(2.0) * (T::one() + x);
        let mut d = T::one() / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = T::zero();
        let mut q2 = T::one();
        let a1 = T::c(0.25) - xmu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = T::one() + q * delh;
        let mut i = T::c(2.0);
        loop {
            a -= T::c(2.0) * (i - T::one());
            c = -a * c / i;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += T::c(2.0);
            d = T::one() / (b + a * d);
            delh = (b * d - T::one()) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < eps || i > T::c(2000.0) {
                break;
            }
            i += T::one();
        }
        h = a1 * h;
        rkmu = (T::PI() / (T::c(2.0) * x)).sqrt() / s;
        rk1 = rkmu * (xmu + x + T::c(0.5) - h) * xi;
    }
    let n = nl.to_usize().unwrap_or(0);
    for k in 1..=n {
        let t = (xmu + T::from_usize_lossy(k)) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = t;
    }
    (rkmu, rk1)
}

fn check_bessel_args<T: Real>(nu: T, x: T) -> Result<()> {
    if !(x > T::zero()) {
        return Err(Error::Domain(format!("bessel_k requires x > 0, got {x}")));
    }
    if !(nu >= T::zero()) || !nu.is_finite() || !x.is_finite() {
        return Err(Error::Domain(format!("bessel_k requires finite nu >= 0, got {nu}")));
    }
    Ok(())
}

/// Modified Bessel function of the second kind K_ν(x).
pub fn bessel_k<T: Real>(nu: T, x: T) -> Result<T> {
    check_bessel_args(nu, x)?;
    let (k, _) = bessel_k_pair_scaled(nu, x);
    Ok(k * (-x).exp())
}

/// e^x K_ν(x), free of underflow for large x.
pub fn bessel_k_scaled<T: Real>(nu: T, x: T) -> Result<T> {
    check_bessel_args(nu, x)?;
    Ok(bessel_k_pair_scaled(nu, x).0)
}

/// (e^x K_ν(x), e^x K_{ν+1}(x)).
pub fn bessel_k_pair<T: Real>(nu: T, x: T) -> Result<(T, T)> {
    check_bessel_args(nu, x)?;
    Ok(bessel_k_pair_scaled(nu, x))
}

/// Harish-Chandra Plancherel density 1/(2(2π)^n)·|Γ(iλ+ρ)|²/|Γ(iλ)|², ρ = (n−1)/2.
pub fn plancherel_density<T: Real>(lambda: T, dim: Dim) -> T {
    let two_pi = T::c(2.0) * T::PI();
    let l = lambda.abs();
    match dim {
        Dim::Three => l * l / (T::c(2.0) * two_pi.powi(3)),
        Dim::Two => l * (T::PI() * l).tanh() / (T::c(2.0) * two_pi.powi(2)),
    }
}

/// Same density evaluated through the complex Lanczos modulus, for any n ≥ 2.
pub fn plancherel_density_lanczos<T: Real>(lambda: T, n: usize) -> T {
    let l = lambda.abs();
    if l == T::zero() {
        return T::zero();
    }
    let rho = T::from_usize_lossy(n - 1) * T::c(0.5);
    let two_pi = T::c(2.0) * T::PI();
    let ratio = (T::c(2.0)
        * (ln_gamma_complex(Complex::new(rho, l)).re - ln_gamma_complex(Complex::new(T::zero(), l)).re))
        .exp();
    ratio / (T::c(2.0) * two_pi.powi(n as i32))
}

/// Constants of the singular-integral kernel K_{n,s}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConstants {
    /// 8√2 Γ(n+s) / (3 Γ(n/2) Γ(−s)), negative for s ∈ (0,1).
    pub c_ns: f64,
    /// 1 / (2^{n−2+2s} Γ((n−1)/2) Γ((1+2s)/2)).
    pub c1: f64,
    pub n: usize,
    pub s: f64,
}

pub fn kernel_constants(dim: Dim, s: f64) -> Result<KernelConstants> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain(format!("kernel order s must lie in (0,1), got {s}")));
    }
    let n = dim.n();
    let nf = n as f64;
    let c_ns = 8.0 * 2f64.sqrt() * gamma(nf + s)? / (3.0 * gamma(nf / 2.0)? * gamma(-s)?);
    let c1 = 1.0 / (2f64.powf(nf - 2.0 + 2.0 * s) * gamma((nf - 1.0) / 2.0)? * gamma((1.0 + 2.0 * s) / 2.0)?);
    Ok(KernelConstants { c_ns, c1, n, s })
}
