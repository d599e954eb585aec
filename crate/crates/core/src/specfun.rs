//! Scalar special functions behind the Matérn family.
//!
//! `K_nu` follows the Temme/Steed scheme: the fractional order
//! `mu = nu - round(nu)` is evaluated with Temme's series for `x <= 2` and
//! Steed's continued fraction (CF2) above that, then lifted to `nu` by the
//! stable forward recurrence `K_{m+1} = K_{m-1} + 2m/x K_m`. Integer orders
//! need no special treatment.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::quad::{self, QuadOptions};
use crate::{Error, Result};

/// Smoothness and inverse-range of a Matérn correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternParams {
    nu: f64,
    a: f64,
}

impl MaternParams {
    pub fn new(nu: f64, a: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::domain("MaternParams", format!("smoothness nu = {nu} must be > 0")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain("MaternParams", format!("scale a = {a} must be > 0")));
        }
        Ok(Self { nu, a })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn a(&self) -> f64 {
        self.a
    }
}

/// `Gamma(x)` for `x > 0`.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("gamma_fn", format!("x = {x} must be finite and > 0")));
    }
    Ok(statrs::function::gamma::gamma(x))
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

// Taylor coefficients of 1/Gamma(z) around 0: 1/Gamma(z) = sum_k RGAMMA[k-1] z^k.
const RGAMMA: [f64; 28] = [
    1.0,
    0.577_215_664_901_532_860_606_5,
    -0.655_878_071_520_253_881_077,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_501_7,
    -0.042_197_734_555_544_336_748_21,
    -0.009_621_971_527_876_973_562_115,
    0.007_218_943_246_663_099_542_395,
    -0.001_165_167_591_859_065_112_114,
    -0.000_215_241_674_114_950_972_815_7,
    0.000_128_050_282_388_116_186_153_2,
    -0.000_020_134_854_780_788_238_655_69,
    -0.000_001_250_493_482_142_670_657_345,
    0.000_001_133_027_231_981_695_882_374,
    -2.056_338_416_977_607_103_45e-7,
    6.116_095_104_481_415_817_862e-9,
    5.002_007_644_469_222_930_056e-9,
    -1.181_274_570_487_020_144_588e-9,
    1.043_426_711_691_100_510_492e-10,
    7.782_263_439_905_071_254_05e-12,
    -3.696_805_618_642_205_708_188e-12,
    5.100_370_287_454_475_979_015e-13,
    -2.058_326_053_566_506_783_222e-14,
    -5.348_122_539_423_017_982_37e-15,
    1.226_778_628_238_260_790_159e-15,
    -1.181_259_301_697_458_769_514e-16,
    1.186_692_254_751_600_332_58e-18,
    1.412_380_655_318_031_781_556e-18,
];

/// Temme's auxiliary gamma quantities for `|mu| <= 1/2`:
/// `(gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu))` with
/// `gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)` and
/// `gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2`.
fn temme_gamma(mu: f64) -> (f64, f64, f64, f64) {
    let m2 = mu * mu;
    // gam1 = -sum over even k of c_k mu^{k-2}; gam2 = sum over odd k of c_k mu^{k-1}.
    let mut gam1 = 0.0;
    let mut gam2 = 0.0;
    let mut p = 1.0;
    for pair in RGAMMA.chunks(2) {
        gam2 += pair[0] * p;
        if let Some(&c) = pair.get(1) {
            gam1 -= c * p;
        }
        p *= m2;
    }
    let gampl = gam2 - mu * gam1;
    let gammi = gam2 + mu * gam1;
    (gam1, gam2, gampl, gammi)
}

const MAX_ITER: usize = 10_000;

/// `(e^x K_mu(x), e^x K_{mu+1}(x))` for `|mu| <= 1/2`.
fn k_mu_pair_scaled(mu: f64, x: f64) -> Result<(f64, f64)> {
    if x <= 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < f64::EPSILON { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < f64::EPSILON { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gamma(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let mu2 = mu * mu;
        let mut converged = false;
        for i in 1..=MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * f64::EPSILON {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::numeric("bessel_k", format!("Temme series did not converge (mu={mu}, x={x})")));
        }
        let ex = x.exp();
        Ok((sum * ex, sum1 * 2.0 / x * ex))
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu * mu;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut converged = false;
        for i in 2..=MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < f64::EPSILON {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::numeric("bessel_k", format!("CF2 did not converge (mu={mu}, x={x})")));
        }
        let h = a1 * h;
        let kmu = (PI / (2.0 * x)).sqrt() / s;
        let k1 = kmu * (mu + x + 0.5 - h) / x;
        Ok((kmu, k1))
    }
}

/// `e^x K_nu(x)` for `nu >= 0`, `x > 0`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("bessel_k", format!("x = {x} must be finite and > 0")));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::domain("bessel_k", format!("order nu = {nu} must be finite and >= 0")));
    }
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut k, mut k1) = k_mu_pair_scaled(mu, x)?;
    let xi2 = 2.0 / x;
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * xi2 * k1 + k;
        k = k1;
        k1 = next;
    }
    Ok(k)
}

/// Modified Bessel function of the second kind `K_nu(x)`.
pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    Ok(bessel_k_scaled(nu, x)? * (-x).exp())
}

/// Matérn correlation `M(h | nu, a) = 2^{1-nu} / Gamma(nu) (a|h|)^nu K_nu(a|h|)`.
///
/// Exactly 1 at `h = 0`.
pub fn matern(h: f64, p: &MaternParams) -> f64 {
    let x = p.a * h.abs();
    if x == 0.0 {
        return 1.0;
    }
    let ks = bessel_k_scaled(p.nu, x).expect("validated parameters and x > 0");
    let log_m = (1.0 - p.nu) * std::f64::consts::LN_2 - ln_gamma(p.nu) + p.nu * x.ln() - x + ks.ln();
    log_m.exp().min(1.0)
}

fn cosine_normalization(nu: f64) -> f64 {
    2.0 * (ln_gamma(nu + 0.5) - ln_gamma(nu)).exp() / PI.sqrt()
}

const AMPLITUDE_CUTOFF: f64 = 1e-14;
const MAX_HALF_PERIODS: usize = 4000;

/// `M(h | nu, a)` from the cosine-integral representation
/// `2 Gamma(nu + 1/2) / (sqrt(pi) Gamma(nu)) * int_0^inf cos(a h r) / (1 + r^2)^{nu + 1/2} dr`.
///
/// For `h > 0` the integral is split at the zeros of the cosine; the
/// resulting alternating series is summed until the amplitude falls below
/// `1e-14` or Wynn's epsilon extrapolation has settled.
pub fn matern_cosine_integral(h: f64, p: &MaternParams) -> Result<f64> {
    let norm = cosine_normalization(p.nu);
    let expo = p.nu + 0.5;
    let omega = p.a * h.abs();
    let opts = QuadOptions { abs_tol: 1e-16, rel_tol: 1e-12, max_intervals: 4000 };
    if omega == 0.0 {
        // r = tan(theta), then theta -> pi/2 - phi: int_0^{pi/2} sin(phi)^{2 nu - 1} dphi.
        let r = quad::integrate(|phi: f64| phi.sin().powf(2.0 * p.nu - 1.0), 0.0, FRAC_PI_2, opts)?;
        return Ok(norm * r.value);
    }
    let integrand = |r: f64| (omega * r).cos() * (1.0 + r * r).powf(-expo);
    let zero = |j: usize| (j as f64 + 0.5) * PI / omega;
    let mut partial = Vec::with_capacity(64);
    let mut total = 0.0;
    let mut lo = 0.0;
    let mut last_extrapolated = f64::NAN;
    let mut stable = 0;
    for j in 0..MAX_HALF_PERIODS {
        let hi = zero(j);
        total += quad::integrate(integrand, lo, hi, opts)?.value;
        partial.push(total);
        lo = hi;
        if (1.0 + hi * hi).powf(-expo) < AMPLITUDE_CUTOFF {
            return Ok(norm * total);
        }
        if partial.len() >= 8 {
            // Extrapolate over a sliding window to keep the epsilon table small.
            let start = partial.len().saturating_sub(40);
            let (est, _) = quad::wynn_epsilon(&partial[start..]);
            if (est - last_extrapolated).abs() <= 1e-14 * est.abs().max(1e-3) {
                stable += 1;
                if stable >= 3 {
                    return Ok(norm * est);
                }
            } else {
                stable = 0;
            }
            last_extrapolated = est;
        }
    }
    Err(Error::numeric(
        "matern_cosine_integral",
        format!(
            "alternating tail did not settle after {MAX_HALF_PERIODS} half-periods (nu={}, a={}, h={h}); last partial sum {total:e}, last extrapolation {last_extrapolated:e}",
            p.nu, p.a
        ),
    ))
}

/// `M''(0 | nu, a)` from twice differentiating the cosine representation:
/// `-a^2 * 2 Gamma(nu + 1/2) / (sqrt(pi) Gamma(nu)) * int_0^inf r^2 / (1 + r^2)^{nu + 1/2} dr`.
///
/// Requires `nu > 1`; the second derivative does not exist otherwise.
pub fn matern_d2_at_zero(p: &MaternParams) -> Result<f64> {
    if !(p.nu > 1.0) {
        return Err(Error::domain(
            "matern_d2_at_zero",
            format!("nu = {} <= 1: M''(0) does not exist", p.nu),
        ));
    }
    // r = tan(theta), theta = pi/2 - phi: int_0^{pi/2} cos(phi)^2 sin(phi)^{2 nu - 3} dphi.
    let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 4000 };
    let pw = 2.0 * p.nu - 3.0;
    let r = quad::integrate(|phi: f64| phi.cos().powi(2) * phi.sin().powf(pw), 0.0, FRAC_PI_2, opts)?;
    Ok(-p.a * p.a * cosine_normalization(p.nu) * r.value)
}
