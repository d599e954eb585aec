//! The bivariate Matérn cross-covariance model.
//!
//! `C_11(h) = s1^2 M(h | nu1, a1)`, `C_22(h) = s2^2 M(h | nu2, a2)` and
//! `C_12(h) = C_21(h) = rho s1 s2 M(h | nu12, a12)` on `R^N`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::optimize;
use crate::specfun::{self, ln_gamma, MaternParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateMaternModel {
    pub nu1: f64,
    pub nu2: f64,
    pub nu12: f64,
    pub a1: f64,
    pub a2: f64,
    pub a12: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub dim_n: usize,
}

impl BivariateMaternModel {
    /// Unit variances and unit scales.
    pub fn standardized(nu1: f64, nu2: f64, nu12: f64, rho: f64, dim_n: usize) -> Result<Self> {
        Self { nu1, nu2, nu12, a1: 1.0, a2: 1.0, a12: 1.0, sigma1: 1.0, sigma2: 1.0, rho, dim_n }.validated()
    }

    /// Checks that every parameter is in its basic domain (positivity,
    /// finite `rho`, `N >= 1`). Validity of the covariance is a separate
    /// question, see [`validity_bound`].
    pub fn validated(self) -> Result<Self> {
        let positive = [
            ("nu1", self.nu1),
            ("nu2", self.nu2),
            ("nu12", self.nu12),
            ("a1", self.a1),
            ("a2", self.a2),
            ("a12", self.a12),
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain("BivariateMaternModel", format!("{name} = {v} must be finite and > 0")));
            }
        }
        if !self.rho.is_finite() || self.rho.abs() > 1.0 {
            return Err(Error::domain("BivariateMaternModel", format!("rho = {} must lie in [-1, 1]", self.rho)));
        }
        if self.dim_n == 0 {
            return Err(Error::domain("BivariateMaternModel", "dimension N must be >= 1"));
        }
        Ok(self)
    }

    pub fn marginal1(&self) -> MaternParams {
        MaternParams::new(self.nu1, self.a1).expect("validated model")
    }

    pub fn marginal2(&self) -> MaternParams {
        MaternParams::new(self.nu2, self.a2).expect("validated model")
    }

    pub fn cross(&self) -> MaternParams {
        MaternParams::new(self.nu12, self.a12).expect("validated model")
    }

    /// Violations of the standardized theorem-evaluation configuration.
    pub fn standardized_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.sigma1 != 1.0 || self.sigma2 != 1.0 {
            v.push(format!("sigma1 = sigma2 = 1 required (got {}, {})", self.sigma1, self.sigma2));
        }
        if self.a1 != 1.0 || self.a2 != 1.0 || self.a12 != 1.0 {
            v.push(format!("a1 = a2 = a12 = 1 required (got {}, {}, {})", self.a1, self.a2, self.a12));
        }
        for (name, nu) in [("nu1", self.nu1), ("nu2", self.nu2)] {
            if !(nu > 0.0 && nu < 1.0) {
                v.push(format!("{name} in (0, 1) required (got {nu})"));
            }
        }
        if !(self.nu12 > 1.0) {
            v.push(format!("nu12 > 1 required (got {})", self.nu12));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            v.push(format!("rho in (0, 1) required (got {})", self.rho));
        }
        v
    }

    pub fn cov11(&self, h: f64) -> f64 {
        self.sigma1 * self.sigma1 * specfun::matern(h, &self.marginal1())
    }

    pub fn cov22(&self, h: f64) -> f64 {
        self.sigma2 * self.sigma2 * specfun::matern(h, &self.marginal2())
    }

    pub fn cov12(&self, h: f64) -> f64 {
        self.rho * self.sigma1 * self.sigma2 * specfun::matern(h, &self.cross())
    }
}

/// Inputs of the tail asymptotics: Hölder exponents, expansion constants,
/// maximal cross-correlation and its curvature at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalExpansion {
    pub alpha1: f64,
    pub alpha2: f64,
    pub c1: f64,
    pub c2: f64,
    pub rho: f64,
    /// `r''(0)`, strictly negative.
    pub r2_zero: f64,
    pub dim_n: usize,
}

impl LocalExpansion {
    pub fn new(alpha1: f64, alpha2: f64, c1: f64, c2: f64, rho: f64, r2_zero: f64, dim_n: usize) -> Result<Self> {
        let e = Self { alpha1, alpha2, c1, c2, rho, r2_zero, dim_n };
        e.check()?;
        Ok(e)
    }

    pub fn check(&self) -> Result<()> {
        let fail = |s: String| Err(Error::domain("LocalExpansion", s));
        for (name, a) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(a > 0.0 && a < 2.0) {
                return fail(format!("{name} = {a} must lie in (0, 2)"));
            }
        }
        for (name, c) in [("c1", self.c1), ("c2", self.c2)] {
            if !(c > 0.0 && c.is_finite()) {
                return fail(format!("{name} = {c} must be > 0"));
            }
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail(format!("rho = {} must lie in (0, 1)", self.rho));
        }
        if !(self.r2_zero < 0.0 && self.r2_zero.is_finite()) {
            return fail(format!("r''(0) = {} must be < 0", self.r2_zero));
        }
        if self.dim_n == 0 {
            return fail("N must be >= 1".into());
        }
        Ok(())
    }
}

/// `c = Gamma(1 - nu) / (2^{2 nu} Gamma(1 + nu))`, the coefficient of
/// `|h|^{2 nu}` in `1 - M(h | nu, 1)` for `nu in (0, 1)`.
pub fn expansion_constant(nu: f64) -> Result<f64> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::domain("expansion_constant", format!("nu = {nu} must lie in (0, 1)")));
    }
    Ok((ln_gamma(1.0 - nu) - 2.0 * nu * std::f64::consts::LN_2 - ln_gamma(1.0 + nu)).exp())
}

/// `2 nu12 - nu1 - nu2` within this of zero counts as zero.
const EXPONENT_TOL: f64 = 1e-12;

/// Right-hand side of the bivariate Matérn validity condition: the model is
/// a valid covariance iff `rho^2` does not exceed this value.
///
/// The infimum over `t >= 0` is taken on `t = tan(theta pi / 2)`,
/// `theta in [0, 1]`, with a 1024-point scan followed by golden-section
/// refinement; `theta = 1` contributes the limit at infinity.
pub fn validity_bound(nu1: f64, nu2: f64, nu12: f64, a1: f64, a2: f64, a12: f64, dim_n: usize) -> Result<f64> {
    for (name, v) in [("nu1", nu1), ("nu2", nu2), ("nu12", nu12), ("a1", a1), ("a2", a2), ("a12", a12)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain("validity_bound", format!("{name} = {v} must be > 0")));
        }
    }
    if dim_n == 0 {
        return Err(Error::domain("validity_bound", "N must be >= 1"));
    }
    let half_n = dim_n as f64 / 2.0;
    let e12 = 2.0 * nu12 + dim_n as f64;
    let e1 = nu1 + half_n;
    let e2 = nu2 + half_n;
    let log_infimand = |t: f64| {
        let t2 = t * t;
        e12 * (a12 * a12 + t2).ln() - e1 * (a1 * a1 + t2).ln() - e2 * (a2 * a2 + t2).ln()
    };
    // Behaviour as t -> infinity: log g ~ 2 (2 nu12 - nu1 - nu2) ln t.
    let tail_exponent = 2.0 * nu12 - nu1 - nu2;
    let log_limit = if tail_exponent < -EXPONENT_TOL {
        f64::NEG_INFINITY
    } else if tail_exponent > EXPONENT_TOL {
        f64::INFINITY
    } else {
        0.0
    };
    let objective = |theta: f64| {
        if theta >= 1.0 {
            log_limit
        } else {
            log_infimand((theta * FRAC_PI_2).tan())
        }
    };
    let log_inf = if log_limit == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        let m = optimize::scan_then_golden(objective, 0.0, 1.0, 1024, 1e-13)?;
        if !m.value.is_finite() {
            return Err(Error::numeric("validity_bound", format!("infimum search ended at non-finite value {}", m.value)));
        }
        m.value.min(log_limit)
    };
    if log_inf == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let log_gamma_part = ln_gamma(nu1 + half_n) + ln_gamma(nu2 + half_n) - ln_gamma(nu1) - ln_gamma(nu2)
        + 2.0 * ln_gamma(nu12)
        - 2.0 * ln_gamma(nu12 + half_n);
    let log_scale = 2.0 * nu1 * a1.ln() + 2.0 * nu2 * a2.ln() - 4.0 * nu12 * a12.ln();
    Ok((log_gamma_part + log_scale + log_inf).exp())
}

/// Closed-form validity bound for `a1 = a2 = a12`. Zero when
/// `2 nu12 < nu1 + nu2`, where no positive `rho` is admissible.
pub fn validity_bound_equal_scale(nu1: f64, nu2: f64, nu12: f64, dim_n: usize) -> Result<f64> {
    for (name, v) in [("nu1", nu1), ("nu2", nu2), ("nu12", nu12)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain("validity_bound_equal_scale", format!("{name} = {v} must be > 0")));
        }
    }
    if dim_n == 0 {
        return Err(Error::domain("validity_bound_equal_scale", "N must be >= 1"));
    }
    if 2.0 * nu12 - nu1 - nu2 < -EXPONENT_TOL {
        return Ok(0.0);
    }
    let h = dim_n as f64 / 2.0;
    Ok((ln_gamma(nu1 + h) + ln_gamma(nu2 + h) - ln_gamma(nu1) - ln_gamma(nu2) + 2.0 * ln_gamma(nu12)
        - 2.0 * ln_gamma(nu12 + h))
    .exp())
}

/// Asymptotic inputs of a standardized model: `alpha_i = 2 nu_i`,
/// `c_i` from [`expansion_constant`], `r''(0) = rho M''(0 | nu12, 1)`.
pub fn local_expansion(m: &BivariateMaternModel) -> Result<LocalExpansion> {
    let violations = m.standardized_violations();
    if !violations.is_empty() {
        return Err(Error::Unsupported(format!(
            "local expansion needs the standardized model: {}",
            violations.join("; ")
        )));
    }
    let d2 = specfun::matern_d2_at_zero(&m.cross())?;
    LocalExpansion::new(
        2.0 * m.nu1,
        2.0 * m.nu2,
        expansion_constant(m.nu1)?,
        expansion_constant(m.nu2)?,
        m.rho,
        m.rho * d2,
        m.dim_n,
    )
}

/// Cross-correlation `r(h) = rho M(h | nu12, a12)`.
pub fn cross_corr(m: &BivariateMaternModel, h: f64) -> f64 {
    m.rho * specfun::matern(h, &m.cross())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssumptionItem {
    /// (i) `r_ii = 1 - c_i |h|^{alpha_i} + o(.)` with `alpha_i in (0, 2)`.
    Expansion,
    /// (ii) `|r_ii(h)| < 1` for `h > 0`.
    MarginalBelowOne,
    /// (iii) isotropic cross-correlation.
    Isotropy,
    /// (iv) cross-correlation maximal only at 0 with `r''(0) < 0`.
    CrossCurvature,
    /// `rho^2` within the validity bound.
    Validity,
}

impl fmt::Display for AssumptionItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AssumptionItem::Expansion => "(i) local expansion",
            AssumptionItem::MarginalBelowOne => "(ii) marginal correlation below one",
            AssumptionItem::Isotropy => "(iii) isotropic cross-correlation",
            AssumptionItem::CrossCurvature => "(iv) cross-correlation curvature",
            AssumptionItem::Validity => "validity",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub item: AssumptionItem,
    pub passed: bool,
    pub witness: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    /// `None` when the bound could not be computed.
    pub validity_bound: Option<f64>,
    pub rho_squared: f64,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, item: AssumptionItem) -> &AssumptionCheck {
        self.checks.iter().find(|c| c.item == item).expect("every item is reported")
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..n).map(move |i| (l + (h - l) * i as f64 / (n - 1) as f64).exp())
}

const SAMPLE_POINTS: usize = 400;

/// Machine check of the four standing assumptions plus model validity.
/// Failures are reported, never raised.
pub fn check_assumptions(m: &BivariateMaternModel) -> AssumptionReport {
    let mut checks = Vec::with_capacity(5);

    // (i)
    let bad: Vec<String> = [("nu1", m.nu1), ("nu2", m.nu2)]
        .iter()
        .filter(|(_, nu)| !(*nu > 0.0 && *nu < 1.0))
        .map(|(n, nu)| format!("{n} = {nu} outside (0, 1)"))
        .collect();
    checks.push(AssumptionCheck {
        item: AssumptionItem::Expansion,
        passed: bad.is_empty(),
        witness: 2.0 * m.nu1.max(m.nu2),
        detail: if bad.is_empty() {
            format!("alpha1 = {}, alpha2 = {} in (0, 2)", 2.0 * m.nu1, 2.0 * m.nu2)
        } else {
            bad.join("; ")
        },
    });

    // (ii) sampled on a log grid; Matérn correlations are strictly decreasing.
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for p in [m.marginal1(), m.marginal2()] {
        let mut prev = 1.0;
        for h in log_grid(1e-4, 1e2, SAMPLE_POINTS) {
            let v = specfun::matern(h, &p);
            worst = worst.max(v.abs());
            if !(v.abs() < 1.0 && v < prev) && v != 0.0 {
                ok = false;
            }
            prev = v;
        }
    }
    checks.push(AssumptionCheck {
        item: AssumptionItem::MarginalBelowOne,
        passed: ok,
        witness: worst,
        detail: format!("max |r_ii(h)| = {worst:.6} over sampled h in [1e-4, 1e2]"),
    });

    // (iii)
    checks.push(AssumptionCheck {
        item: AssumptionItem::Isotropy,
        passed: true,
        witness: 0.0,
        detail: "true by construction: r(s, t) = rho M(|t - s| | nu12, a12)".into(),
    });

    // (iv)
    let mut reasons = Vec::new();
    let mut witness = f64::NAN;
    if !(m.rho > 0.0 && m.rho < 1.0) {
        reasons.push(format!("rho = {} outside (0, 1)", m.rho));
    }
    if !(m.nu12 > 1.0) {
        reasons.push("ν₁₂ ≤ 1: r''(0) does not exist".to_string());
    } else {
        match specfun::matern_d2_at_zero(&m.cross()) {
            Ok(d2) => {
                witness = m.rho * d2;
                if !(witness < 0.0) {
                    reasons.push(format!("r''(0) = {witness} is not negative"));
                }
            }
            Err(e) => reasons.push(format!("r''(0) evaluation failed: {e}")),
        }
    }
    let mut prev = m.rho.abs();
    for h in log_grid(1e-4, 1e2, SAMPLE_POINTS) {
        let r = cross_corr(m, h).abs();
        if r >= m.rho.abs() && m.rho != 0.0 || r > prev {
            reasons.push(format!("|r({h:.3e})| = {r} is not below rho"));
            break;
        }
        prev = r;
    }
    checks.push(AssumptionCheck {
        item: AssumptionItem::CrossCurvature,
        passed: reasons.is_empty(),
        witness,
        detail: if reasons.is_empty() {
            format!("r''(0) = {witness:.6} < 0 and |r(h)| < rho on sampled h > 0")
        } else {
            reasons.join("; ")
        },
    });

    // validity
    let bound = validity_bound(m.nu1, m.nu2, m.nu12, m.a1, m.a2, m.a12, m.dim_n);
    let rho2 = m.rho * m.rho;
    let (passed, witness, detail, bound) = match bound {
        Ok(b) => (
            rho2 <= b,
            b,
            format!("rho^2 = {rho2:.6} {} bound {b:.6}", if rho2 <= b { "<=" } else { ">" }),
            Some(b),
        ),
        Err(e) => (false, f64::NAN, format!("bound evaluation failed: {e}"), None),
    };
    checks.push(AssumptionCheck { item: AssumptionItem::Validity, passed, witness, detail });

    AssumptionReport { checks, validity_bound: bound, rho_squared: rho2 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn equal_parameters_give_unit_bound() {
        for (nu, a, n) in [(0.5, 1.0, 1), (1.3, 2.5, 2), (2.0, 0.7, 3)] {
            assert!(rel(validity_bound(nu, nu, nu, a, a, a, n).unwrap(), 1.0) < 1e-12);
            assert!(rel(validity_bound_equal_scale(nu, nu, nu, n).unwrap(), 1.0) < 1e-14);
        }
    }

    #[test]
    fn exponential_marginals_with_three_halves_cross() {
        // Gamma(1)^2 / Gamma(1/2)^2 * Gamma(3/2)^2 / Gamma(2)^2 = (1/pi)(pi/4)
        assert!(rel(validity_bound(0.5, 0.5, 1.5, 1.0, 1.0, 1.0, 1).unwrap(), 0.25) < 1e-12);
        assert!(rel(validity_bound_equal_scale(0.5, 0.5, 1.5, 1).unwrap(), 0.25) < 1e-14);
    }

    #[test]
    fn unequal_scale_matches_brute_force() {
        // Oracle: dense grid on t in [0, 1e3] with 1e6 points.
        let (nu1, nu2, nu12, a1, a2, a12, n) = (0.5, 0.5, 1.5, 1.0, 1.0, 2.0, 1usize);
        let hn = n as f64 / 2.0;
        let g = |t: f64| {
            let t2 = t * t;
            (a12 * a12 + t2).powf(2.0 * nu12 + n as f64) / ((a1 * a1 + t2).powf(nu1 + hn) * (a2 * a2 + t2).powf(nu2 + hn))
        };
        let mut inf = f64::INFINITY;
        for i in 0..=1_000_000 {
            inf = inf.min(g(1e3 * i as f64 / 1e6));
        }
        let factor = 0.25 * a1.powf(2.0 * nu1) * a2.powf(2.0 * nu2) / a12.powf(4.0 * nu12);
        let brute = factor * inf;
        let got = validity_bound(nu1, nu2, nu12, a1, a2, a12, n).unwrap();
        assert!(rel(got, brute) < 1e-6, "{got} vs {brute}");
        // Interior minimum at t^2 = 2: 6^4 / 3^2 = 144.
        assert!(rel(got, 0.25 * 144.0 / 64.0) < 1e-12);
    }

    #[test]
    fn equal_scale_agrees_with_general() {
        let nus = [0.3, 0.5, 0.8, 1.5, 2.2];
        let mut count = 0;
        for &nu1 in &nus {
            for &nu2 in &nus {
                for &nu12 in &nus {
                    for n in [1usize, 2] {
                        let g = validity_bound(nu1, nu2, nu12, 1.0, 1.0, 1.0, n).unwrap();
                        let c = validity_bound_equal_scale(nu1, nu2, nu12, n).unwrap();
                        assert!((g - c).abs() <= 1e-9 * c.max(1e-300), "{nu1} {nu2} {nu12} {n}: {g} vs {c}");
                        count += 1;
                    }
                }
            }
        }
        assert!(count >= 20);
    }

    #[test]
    fn expansion_for_exponential_marginal() {
        let m = BivariateMaternModel::standardized(0.5, 0.25, 2.0, 0.5, 1).unwrap();
        let e = local_expansion(&m).unwrap();
        assert_eq!(e.alpha1, 1.0);
        assert_eq!(e.alpha2, 0.5);
        assert!((e.c1 - 1.0).abs() < 1e-14);
        // Gamma(0.75) / (sqrt(2) Gamma(1.25)), 40-digit reference.
        assert!(rel(e.c2, 0.955_977_594_972_249_9) < 1e-12);
        assert!((e.r2_zero + 0.25).abs() < 1e-10);
        assert_eq!(e.rho, 0.5);
    }

    #[test]
    fn expansion_rejects_non_standardized() {
        let mut m = BivariateMaternModel::standardized(0.5, 0.5, 2.0, 0.5, 1).unwrap();
        m.a12 = 2.0;
        let err = local_expansion(&m).unwrap_err();
        assert!(matches!(&err, Error::Unsupported(s) if s.contains("a12")), "{err}");
        let m = BivariateMaternModel::standardized(1.2, 0.5, 2.0, 0.5, 1).unwrap();
        assert!(matches!(local_expansion(&m), Err(Error::Unsupported(s)) if s.contains("nu1")));
    }

    #[test]
    fn cross_corr_values() {
        let m = BivariateMaternModel::standardized(0.5, 0.5, 1.5, 0.5, 1).unwrap();
        assert_eq!(cross_corr(&m, 0.0), 0.5);
        assert!((cross_corr(&m, 1.0) - (-1.0f64).exp()).abs() < 1e-14);
        let mut prev = 0.5;
        for i in 1..=1000 {
            let r = cross_corr(&m, i as f64 * 0.01);
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn report_standardized_passes() {
        let m = BivariateMaternModel::standardized(0.5, 0.5, 1.5, 0.4, 1).unwrap();
        let r = check_assumptions(&m);
        assert!(r.all_passed(), "{r:#?}");
        assert!(rel(r.validity_bound.unwrap(), 0.25) < 1e-12);
    }

    #[test]
    fn report_flags_rough_cross_correlation() {
        let m = BivariateMaternModel::standardized(0.5, 0.5, 0.8, 0.3, 1).unwrap();
        let r = check_assumptions(&m);
        let item = r.get(AssumptionItem::CrossCurvature);
        assert!(!item.passed);
        assert!(item.detail.contains("ν₁₂ ≤ 1"));
    }

    #[test]
    fn report_flags_invalid_rho() {
        let m = BivariateMaternModel::standardized(0.5, 0.5, 1.5, 0.6, 1).unwrap();
        let r = check_assumptions(&m);
        let v = r.get(AssumptionItem::Validity);
        assert!(!v.passed);
        assert!((r.rho_squared - 0.36).abs() < 1e-15);
        assert!(rel(v.witness, 0.25) < 1e-12);
        assert!(r.get(AssumptionItem::CrossCurvature).passed);
    }

    #[test]
    fn curvature_negative_above_one() {
        for nu12 in [1.1, 1.5, 2.0, 3.7] {
            let m = BivariateMaternModel::standardized(0.4, 0.6, nu12, 0.3, 2).unwrap();
            assert!(local_expansion(&m).unwrap().r2_zero < 0.0);
        }
    }
}
