//! Closed-form tail asymptotics for the joint excursion probability and the
//! Riemann sum `h(u)` whose growth fixes their polynomial part.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::domain::{DomainPair, Rect};
use crate::model::{self, BivariateMaternModel, LocalExpansion};
use crate::stats::CompensatedSum;
use crate::{Error, Result};

/// `value = constant * u^u_power * exp(exp_rate * u^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticResult {
    pub u: f64,
    pub value: f64,
    pub log_value: f64,
    /// Always `-1 / (1 + rho)`.
    pub exp_rate: f64,
    /// Power of `u`, including the `u^-2` inside `Psi`.
    pub u_power: f64,
    /// Full `u`-free prefactor, including the constant part of `Psi`.
    pub constant: f64,
    /// Prefactor multiplying `u^pre_psi_u_power * Psi(u, rho)`.
    pub pre_psi_constant: f64,
    pub pre_psi_u_power: f64,
}

impl AsymptoticResult {
    fn from_pre_psi(pre_constant: f64, pre_power: f64, rho: f64, u: f64) -> Self {
        let psi_constant = (1.0 + rho).powi(2) / (2.0 * PI * (1.0 - rho * rho).sqrt());
        let constant = pre_constant * psi_constant;
        let u_power = pre_power - 2.0;
        let exp_rate = -1.0 / (1.0 + rho);
        let log_value = constant.ln() + u_power * u.ln() + exp_rate * u * u;
        let value = constant * u.powf(u_power) * (exp_rate * u * u).exp();
        Self { u, value, log_value, exp_rate, u_power, constant, pre_psi_constant: pre_constant, pre_psi_u_power: pre_power }
    }

    /// `constant * u^u_power * exp(exp_rate * u^2)` recomputed from the parts.
    pub fn reconstruct(&self) -> f64 {
        self.constant * self.u.powf(self.u_power) * (self.exp_rate * self.u * self.u).exp()
    }
}

/// `Psi(u, rho) = (1 + rho)^2 / (2 pi u^2 sqrt(1 - rho^2)) exp(-u^2 / (1 + rho))`.
pub fn psi(u: f64, rho: f64) -> f64 {
    (1.0 + rho).powi(2) / (2.0 * PI * u * u * (1.0 - rho * rho).sqrt()) * (-u * u / (1.0 + rho)).exp()
}

pub fn ln_psi(u: f64, rho: f64) -> f64 {
    2.0 * (1.0 + rho).ln() - (2.0 * PI).ln() - 2.0 * u.ln() - 0.5 * (1.0 - rho * rho).ln() - u * u / (1.0 + rho)
}

fn check_inputs(e: &LocalExpansion, mes: f64, h1: f64, h2: f64, u: f64) -> Result<()> {
    e.check()?;
    for (name, v) in [("mes", mes), ("H1", h1), ("H2", h2), ("u", u)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::domain("asymptotics", format!("{name} = {v} must be finite and > 0")));
        }
    }
    Ok(())
}

/// Overlapping domains, `mes_N(A1 ∩ A2) > 0`.
pub fn theorem1_value(e: &LocalExpansion, mes_n: f64, h1: f64, h2: f64, u: f64) -> Result<AsymptoticResult> {
    check_inputs(e, mes_n, h1, h2, u)?;
    let n = e.dim_n as f64;
    let s = 2.0 / e.alpha1 + 2.0 / e.alpha2;
    let pre = (2.0 * PI).powf(n / 2.0)
        * (-e.r2_zero).powf(-n / 2.0)
        * e.c1.powf(n / e.alpha1)
        * e.c2.powf(n / e.alpha2)
        * mes_n
        * h1
        * h2
        * (1.0 + e.rho).powf(-n * (s - 1.0));
    Ok(AsymptoticResult::from_pre_psi(pre, n * (s - 1.0), e.rho, u))
}

/// Domains sharing the first `M` coordinates and touching in the rest.
/// For `M = 0` pass `mes_m = 1`.
pub fn theorem2_value(e: &LocalExpansion, split_m: usize, mes_m: f64, h1: f64, h2: f64, u: f64) -> Result<AsymptoticResult> {
    check_inputs(e, mes_m, h1, h2, u)?;
    if split_m >= e.dim_n {
        return Err(Error::domain("theorem2_value", format!("M = {split_m} must lie in [0, N - 1] with N = {}", e.dim_n)));
    }
    let n = e.dim_n as f64;
    let m = split_m as f64;
    let s = 2.0 / e.alpha1 + 2.0 / e.alpha2;
    let pre = (2.0 * PI).powf(m / 2.0)
        * (-e.r2_zero).powf(-(2.0 * n - m) / 2.0)
        * e.c1.powf(n / e.alpha1)
        * e.c2.powf(n / e.alpha2)
        * h1
        * h2
        * mes_m
        * (1.0 + e.rho).powf(2.0 * n - m - n * s);
    Ok(AsymptoticResult::from_pre_psi(pre, m + n * (s - 2.0), e.rho, u))
}

/// Pickands constant to use for exponent `alpha`: the supplied value, or
/// exactly 1 for `alpha = 1` in one dimension.
pub fn resolve_pickands(alpha: f64, dim_n: usize, supplied: Option<f64>) -> Result<f64> {
    match supplied {
        Some(h) if h > 0.0 && h.is_finite() => Ok(h),
        Some(h) => Err(Error::domain("pickands constant", format!("H = {h} must be > 0"))),
        None if alpha == 1.0 && dim_n == 1 => Ok(1.0),
        None => Err(Error::Unsupported(format!(
            "no closed form for H_{alpha} with N = {dim_n}; supply or estimate it"
        ))),
    }
}

/// Overlap-case asymptotics for the standardized model on `[0, 1]^N`.
pub fn matern_theorem1(m: &BivariateMaternModel, u: f64, h1: Option<f64>, h2: Option<f64>) -> Result<AsymptoticResult> {
    let e = model::local_expansion(m)?;
    let h1 = resolve_pickands(e.alpha1, e.dim_n, h1)?;
    let h2 = resolve_pickands(e.alpha2, e.dim_n, h2)?;
    theorem1_value(&e, 1.0, h1, h2, u)
}

/// Shared-boundary asymptotics for `[0, 1]^N` and `[0, 1]^{N-1} x [1, 2]`.
pub fn matern_theorem2(m: &BivariateMaternModel, u: f64, h1: Option<f64>, h2: Option<f64>) -> Result<AsymptoticResult> {
    let e = model::local_expansion(m)?;
    let h1 = resolve_pickands(e.alpha1, e.dim_n, h1)?;
    let h2 = resolve_pickands(e.alpha2, e.dim_n, h2)?;
    theorem2_value(&e, e.dim_n - 1, 1.0, h1, h2, u)
}

/// Lower bound on `C` in `delta(u) = C sqrt(log u) / u` that makes pairs at
/// distance beyond `delta(u)` negligible.
pub fn c_delta_lower_bound(e: &LocalExpansion) -> f64 {
    let n = e.dim_n as f64;
    let amin = e.alpha1.min(e.alpha2);
    let inner = n * (2.0 / amin + 1.0 - 2.0 / e.alpha1 - 2.0 / e.alpha2) + 1.0;
    (3.0 * (1.0 + e.rho).powi(2) / (-e.r2_zero) * inner.max(0.0)).sqrt()
}

/// Default `C`: 1.5 times [`c_delta_lower_bound`], floored so that the
/// Gaussian kernel at distance `delta(u)` is at most `u^-4`.
pub fn default_c_delta(e: &LocalExpansion) -> f64 {
    let a = -e.r2_zero / (2.0 * (1.0 + e.rho).powi(2));
    (1.5 * c_delta_lower_bound(e)).max((4.0 / a).sqrt())
}

/// Which cell pairs enter `h(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellSet {
    /// Pairs whose product cell meets `{|t - s| <= delta}`.
    Touching,
    /// Pairs whose product cell lies inside it.
    Inside,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannCheck {
    pub u: f64,
    pub h_sum: f64,
    pub limit_value: f64,
    pub ratio: f64,
    pub pairs: u64,
    pub delta: f64,
    pub d1: f64,
    pub d2: f64,
    pub c_delta: f64,
}

/// Cap on enumerated cell pairs.
pub const MAX_PAIRS: f64 = 1e8;

/// Limit of `h(u)`: overlap form when `split_m = N`, split form otherwise.
pub fn riemann_limit(e: &LocalExpansion, d: &DomainPair, t_scale: f64, u: f64) -> Result<f64> {
    let n = d.dim_n as f64;
    let s = 2.0 / e.alpha1 + 2.0 / e.alpha2;
    let nr = -e.r2_zero;
    if d.overlaps() {
        let mes = d.mes_n();
        if mes <= 0.0 {
            return Err(Error::domain("riemann_limit", "mes_N(A1 ∩ A2) = 0; use a split M < N"));
        }
        Ok((2.0 * PI).powf(n / 2.0) * nr.powf(-n / 2.0) * (1.0 + e.rho).powf(n) * t_scale.powf(-2.0 * n) * mes * u.powf(n * (s - 1.0)))
    } else {
        let m = d.split_m as f64;
        Ok((2.0 * PI).powf(m / 2.0)
            * nr.powf(m / 2.0 - n)
            * (1.0 + e.rho).powf(2.0 * n - m)
            * t_scale.powf(-2.0 * n)
            * d.mes_m()
            * u.powf(m + n * (s - 2.0)))
    }
}

struct CellGrid<'a> {
    d: f64,
    rects: &'a [Rect],
    cells: Vec<[i64; 2]>,
}

impl<'a> CellGrid<'a> {
    fn new(rects: &'a [Rect], n: usize, d: f64) -> Result<Self> {
        let tol = 1e-9 * d;
        let mut cells = Vec::new();
        for r in rects {
            if r.volume() <= 0.0 {
                return Err(Error::Unsupported("Riemann sums need rectangles with positive volume".into()));
            }
            let ranges: Vec<(i64, i64)> = (0..n)
                .map(|j| (((r.lo()[j] + tol) / d).floor() as i64, ((r.hi()[j] - tol) / d).ceil() as i64 - 1))
                .collect();
            let (a1, b1) = if n == 2 { ranges[1] } else { (0, 0) };
            for k0 in ranges[0].0..=ranges[0].1 {
                for k1 in a1..=b1 {
                    cells.push([k0, k1]);
                }
            }
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(Self { d, rects, cells })
    }

    fn cell(&self, k: [i64; 2], n: usize) -> ([f64; 2], [f64; 2]) {
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for j in 0..n {
            lo[j] = k[j] as f64 * self.d;
            hi[j] = (k[j] + 1) as f64 * self.d;
        }
        (lo, hi)
    }

    /// Pieces `cell ∩ rect` with positive extent.
    fn pieces(&self, k: [i64; 2], n: usize) -> Vec<([f64; 2], [f64; 2])> {
        let (lo, hi) = self.cell(k, n);
        let tol = 1e-9 * self.d;
        let mut out = Vec::new();
        'rects: for r in self.rects {
            let mut pl = [0.0; 2];
            let mut ph = [0.0; 2];
            for j in 0..n {
                pl[j] = lo[j].max(r.lo()[j]);
                ph[j] = hi[j].min(r.hi()[j]);
                if ph[j] - pl[j] <= tol {
                    continue 'rects;
                }
            }
            out.push((pl, ph));
        }
        out
    }

    fn inside(&self, k: [i64; 2], n: usize) -> bool {
        let (lo, hi) = self.cell(k, n);
        let tol = 1e-9 * self.d;
        self.rects
            .iter()
            .any(|r| (0..n).all(|j| lo[j] >= r.lo()[j] - tol && hi[j] <= r.hi()[j] + tol))
    }
}

fn min_dist2(a: &([f64; 2], [f64; 2]), b: &([f64; 2], [f64; 2]), n: usize) -> f64 {
    (0..n)
        .map(|j| {
            let g = (b.0[j] - a.1[j]).max(a.0[j] - b.1[j]).max(0.0);
            g * g
        })
        .sum()
}

fn max_dist2(a: &([f64; 2], [f64; 2]), b: &([f64; 2], [f64; 2]), n: usize) -> f64 {
    (0..n)
        .map(|j| {
            let g = (b.1[j] - a.0[j]).abs().max((a.1[j] - b.0[j]).abs());
            g * g
        })
        .sum()
}

/// Direct evaluation of
/// `h(u) = sum exp(-u^2 (1 / (1 + r(|tau|)) - 1 / (1 + rho)))` over the
/// selected cell pairs, `tau = l d2 - k d1`, `d_i = T u^{-2 / alpha_i}`,
/// compared with its large-`u` limit.
pub fn riemann_sum_check<R>(
    e: &LocalExpansion,
    d: &DomainPair,
    cross_r: R,
    t_scale: f64,
    c_delta: f64,
    u: f64,
    set: CellSet,
) -> Result<RiemannCheck>
where
    R: Fn(f64) -> f64 + Sync,
{
    e.check()?;
    let n = d.dim_n;
    if !(1..=2).contains(&n) || e.dim_n != n {
        return Err(Error::Unsupported(format!("Riemann sums need N in {{1, 2}} matching the expansion (got {n}, {})", e.dim_n)));
    }
    if !(u > 1.0 && t_scale > 0.0 && c_delta > 0.0) {
        return Err(Error::domain("riemann_sum_check", format!("need u > 1, T > 0, C > 0 (got {u}, {t_scale}, {c_delta})")));
    }
    let delta = c_delta * u.ln().sqrt() / u;
    let d1 = t_scale * u.powf(-2.0 / e.alpha1);
    let d2 = t_scale * u.powf(-2.0 / e.alpha2);
    if d1 >= delta || d2 >= delta {
        return Err(Error::domain(
            "riemann_sum_check",
            format!("cells ({d1:.3e}, {d2:.3e}) not smaller than delta(u) = {delta:.3e}; increase u or decrease T"),
        ));
    }
    let g1 = CellGrid::new(d.a1.rects(), n, d1)?;
    let g2 = CellGrid::new(d.a2.rects(), n, d2)?;
    let per_k = (0..n).map(|_| 2.0 * delta / d2 + 3.0).product::<f64>().min(g2.cells.len() as f64);
    let estimate = g1.cells.len() as f64 * per_k;
    if estimate > MAX_PAIRS {
        return Err(Error::Resource(format!(
            "about {estimate:.2e} cell pairs exceed the {MAX_PAIRS:.0e} cap; use a smaller u or a larger T"
        )));
    }
    let limit_value = riemann_limit(e, d, t_scale, u)?;
    let delta2 = delta * delta * (1.0 + 1e-12);
    let rho = e.rho;
    let u2 = u * u;
    let inv_rho = 1.0 / (1.0 + rho);
    // g2 cells sorted lexicographically; locate the candidate window per k.
    let parts: Vec<(f64, u64)> = g1
        .cells
        .par_iter()
        .map(|&k| {
            let mut sum = CompensatedSum::new();
            let mut count = 0u64;
            let (klo, khi) = g1.cell(k, n);
            let pieces1 = if set == CellSet::Touching { g1.pieces(k, n) } else { Vec::new() };
            let k_inside = set == CellSet::Inside && g1.inside(k, n);
            if set == CellSet::Inside && !k_inside {
                return (0.0, 0);
            }
            let lmin0 = ((klo[0] - delta) / d2).floor() as i64 - 1;
            let lmax0 = ((khi[0] + delta) / d2).ceil() as i64 + 1;
            let start = g2.cells.partition_point(|c| c[0] < lmin0);
            for &l in &g2.cells[start..] {
                if l[0] > lmax0 {
                    break;
                }
                if n == 2 {
                    let lo1 = ((klo[1] - delta) / d2).floor() as i64 - 1;
                    let hi1 = ((khi[1] + delta) / d2).ceil() as i64 + 1;
                    if l[1] < lo1 || l[1] > hi1 {
                        continue;
                    }
                }
                let member = match set {
                    CellSet::Touching => {
                        let pieces2 = g2.pieces(l, n);
                        pieces1.iter().any(|a| pieces2.iter().any(|b| min_dist2(a, b, n) <= delta2))
                    }
                    CellSet::Inside => g2.inside(l, n) && max_dist2(&(klo, khi), &g2.cell(l, n), n) <= delta2,
                };
                if !member {
                    continue;
                }
                let tau = ((0..n).map(|j| {
                    let t = l[j] as f64 * d2 - k[j] as f64 * d1;
                    t * t
                }))
                .sum::<f64>()
                .sqrt();
                let r = cross_r(tau);
                // 1/(1+r) - 1/(1+rho) = (rho - r) / ((1+r)(1+rho))
                let gap = (rho - r) / (1.0 + r) * inv_rho;
                sum.add((-u2 * gap).exp());
                count += 1;
            }
            (sum.value(), count)
        })
        .collect();
    let h_sum = parts.iter().map(|p| p.0).collect::<CompensatedSum>().value();
    let pairs = parts.iter().map(|p| p.1).sum();
    Ok(RiemannCheck { u, h_sum, limit_value, ratio: h_sum / limit_value, pairs, delta, d1, d2, c_delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{matern, MaternParams};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn unit_expansion(r2: f64) -> LocalExpansion {
        LocalExpansion::new(1.0, 1.0, 1.0, 1.0, 0.5, r2, 1).unwrap()
    }

    #[test]
    fn psi_values() {
        assert!(rel(psi(1.0, 0.0), (-1.0f64).exp() / (2.0 * PI)) < 1e-15);
        // 2.25 / (8 pi sqrt(0.75)) exp(-8/3), 30-digit reference.
        assert!(rel(psi(2.0, 0.5), 7.182_793_952_392_713e-3) < 1e-13);
        for (u, rho) in [(0.5, 0.1), (3.0, 0.5), (7.0, 0.9)] {
            let back = psi(u, rho) * 2.0 * PI * u * u * (1.0 - rho * rho).sqrt() / (1.0 + rho).powi(2);
            assert!(rel(back, (-u * u / (1.0 + rho)).exp()) < 1e-14);
            assert!((ln_psi(u, rho) - psi(u, rho).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn theorem1_hand_example() {
        let e = unit_expansion(-0.25);
        let r = theorem1_value(&e, 1.0, 1.0, 1.0, 3.0).unwrap();
        let pre = (2.0 * PI).sqrt() * 2.0 * 1.5f64.powi(-3);
        assert!(rel(r.pre_psi_constant, pre) < 1e-14);
        assert!(rel(pre, 1.485_409_347_929_481_8) < 1e-14);
        assert_eq!(r.pre_psi_u_power, 3.0);
        assert_eq!(r.u_power, 1.0);
        assert!(rel(r.value, pre * 27.0 * psi(3.0, 0.5)) < 1e-13);
        assert!(rel(r.reconstruct(), r.value) < 1e-12);
        assert_eq!(r.exp_rate, -1.0 / 1.5);
        let double = theorem1_value(&e, 2.0, 1.0, 1.0, 3.0).unwrap();
        assert_eq!(double.value, 2.0 * r.value);
    }

    #[test]
    fn theorem2_m0_constant() {
        let e = LocalExpansion::new(1.0, 1.0, 1.3, 0.7, 0.5, -0.25, 1).unwrap();
        let r = theorem2_value(&e, 0, 1.0, 1.1, 0.9, 4.0).unwrap();
        assert_eq!(r.pre_psi_u_power, 2.0);
        let want = 4.0 * 1.3 * 0.7 * 1.1 * 0.9 * 1.5f64.powi(-2);
        assert!(rel(r.pre_psi_constant, want) < 1e-14);
        assert!(theorem2_value(&e, 1, 1.0, 1.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn theorem_ratio_carries_u_power() {
        let e = LocalExpansion::new(0.6, 1.4, 0.9, 1.2, 0.3, -0.7, 2).unwrap();
        let ratio = |u: f64| theorem2_value(&e, 1, 1.0, 1.0, 1.0, u).unwrap().value / theorem1_value(&e, 1.0, 1.0, 1.0, u).unwrap().value;
        for u in [2.0, 5.0, 11.0] {
            assert!(rel(ratio(u) / ratio(1.0), u.powi(-1)) < 1e-12);
        }
    }

    #[test]
    fn matern_compositions() {
        let m = BivariateMaternModel::standardized(0.5, 0.5, 2.0, 0.5, 1).unwrap();
        let t1 = matern_theorem1(&m, 3.0, None, None).unwrap();
        let e = model::local_expansion(&m).unwrap();
        assert_eq!(t1, theorem1_value(&e, 1.0, 1.0, 1.0, 3.0).unwrap());
        assert_eq!(t1.pre_psi_u_power, 1.0 / 0.5 + 1.0 / 0.5 - 1.0);
        assert!(rel(-e.r2_zero, 0.5 / (2.0 * (2.0 - 1.0))) < 1e-10);
        let t2 = matern_theorem2(&m, 3.0, None, None).unwrap();
        assert_eq!(t2.pre_psi_u_power, 1.0 / 0.5 + 1.0 / 0.5 - 2.0);
        // Ratio: u^-1 (-r'')^-1/2 (2 pi)^-1/2 (1 + rho).
        let want = (2.0 * PI).powf(-0.5) * (-e.r2_zero).powf(-0.5) * 1.5 / 3.0;
        assert!(rel(t2.value / t1.value, want) < 1e-12);
        let rough = BivariateMaternModel::standardized(0.3, 0.5, 2.0, 0.5, 1).unwrap();
        assert!(matches!(matern_theorem1(&rough, 3.0, None, None), Err(Error::Unsupported(_))));
        assert!(matern_theorem1(&rough, 3.0, Some(0.8), None).is_ok());
    }

    #[test]
    fn default_c_is_positive_for_standard_case() {
        let e = unit_expansion(-0.5);
        assert_eq!(c_delta_lower_bound(&e), 0.0);
        assert!(rel(default_c_delta(&e), 6.0) < 1e-14);
        let rough = LocalExpansion::new(0.5, 1.5, 1.0, 1.0, 0.5, -0.5, 1).unwrap();
        // N (2/0.5 + 1 - 4 - 4/3) + 1 = 2/3 - 1/3 ... = 2/3
        let lb = (3.0 * 2.25 / 0.5 * (2.0 / 3.0f64)).sqrt();
        assert!(rel(c_delta_lower_bound(&rough), lb) < 1e-14);
    }

    #[test]
    fn riemann_sum_near_limit() {
        let e = unit_expansion(-0.5);
        let p = MaternParams::new(1.5, 1.0).unwrap();
        let r = |h: f64| 0.5 * matern(h, &p);
        let d = DomainPair::unit_overlap(1).unwrap();
        let c = default_c_delta(&e);
        let a = riemann_sum_check(&e, &d, r, 1.0, c, 20.0, CellSet::Touching).unwrap();
        let b = riemann_sum_check(&e, &d, r, 1.0, c, 20.0, CellSet::Inside).unwrap();
        assert!(a.pairs > b.pairs);
        assert!(a.h_sum > b.h_sum);
        assert!((a.ratio - 1.0).abs() < 0.15, "{a:?}");
        let far = riemann_sum_check(&e, &d, r, 1.0, c, 1e4, CellSet::Touching);
        assert!(matches!(far, Err(Error::Resource(_))));
    }

    #[test]
    fn riemann_n2_runs() {
        let e = LocalExpansion::new(1.0, 1.0, 1.0, 1.0, 0.5, -0.5, 2).unwrap();
        let p = MaternParams::new(1.5, 1.0).unwrap();
        let d = DomainPair::unit_overlap(2).unwrap();
        let a = riemann_sum_check(&e, &d, |h| 0.5 * matern(h, &p), 1.0, 3.0, 6.0, CellSet::Touching).unwrap();
        assert!(a.h_sum > 0.0 && a.ratio > 0.3 && a.ratio < 3.0, "{a:?}");
    }
}
