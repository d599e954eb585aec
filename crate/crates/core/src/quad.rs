//! Adaptive Gauss–Kronrod quadrature and Wynn's epsilon extrapolation.
//!
//! The integrator bisects the interval with the largest error estimate
//! until the total estimate meets `max(abs_tol, rel_tol * |I|)`. Nodes never
//! touch the endpoints, so integrable endpoint singularities are fine.

use std::collections::BinaryHeap;

use crate::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the even-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_k = kronrod.abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        fv1[j] = f(center - dx);
        fv2[j] = f(center + dx);
        let pair = fv1[j] + fv2[j];
        kronrod += WGK[j] * pair;
        abs_k += WGK[j] * (fv1[j].abs() + fv2[j].abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let resasc = resasc * half.abs();
    let abs_k = abs_k * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * abs_k;
    if abs_k > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(floor);
    }
    (value, err)
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate", format!("non-finite bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0, intervals: 0 });
    }
    let (v0, e0) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v0, err: e0 });
    let mut total = v0;
    let mut total_err = e0;
    let mut evals = 15;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::numeric(
                "integrate",
                format!(
                    "no convergence on [{a}, {b}] after {} intervals: estimate {total:e}, error {total_err:e}, tolerance {tol:e}",
                    heap.len()
                ),
            ));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::numeric(
                "integrate",
                format!("interval [{:e}, {:e}] underflowed; error {total_err:e}", worst.a, worst.b),
            ));
        }
        let (vl, el) = gk15(&f, worst.a, mid);
        let (vr, er) = gk15(&f, mid, worst.b);
        evals += 30;
        total += vl + vr - worst.value;
        total_err += el + er - worst.err;
        heap.push(Segment { a: worst.a, b: mid, value: vl, err: el });
        heap.push(Segment { a: mid, b: worst.b, value: vr, err: er });
    }
    // Re-sum to shed the drift of the running updates.
    let mut segs: Vec<Segment> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = segs.iter().map(|s| s.value).sum();
    let abs_error = segs.iter().map(|s| s.err).sum();
    Ok(QuadResult { value, abs_error, evaluations: evals, intervals: segs.len() })
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums. Returns
/// the extrapolated limit and the difference between the two most recent
/// even-column estimates, which serves as an error indicator.
pub fn wynn_epsilon(partial_sums: &[f64]) -> (f64, f64) {
    let n = partial_sums.len();
    let last = *partial_sums.last().unwrap_or(&f64::NAN);
    if n < 3 {
        return (last, f64::INFINITY);
    }
    let mut best = last;
    let mut best_err = (partial_sums[n - 1] - partial_sums[n - 2]).abs();
    // `lower` is column k - 1 of the table, `cur` is column k.
    let mut lower = vec![0.0; n + 1];
    let mut cur = partial_sums.to_vec();
    let mut k = 0;
    while cur.len() > 1 {
        let mut next = Vec::with_capacity(cur.len() - 1);
        for i in 0..cur.len() - 1 {
            let diff = cur[i + 1] - cur[i];
            if diff == 0.0 || !diff.is_finite() {
                return (best, best_err);
            }
            next.push(lower[i + 1] + 1.0 / diff);
        }
        k += 1;
        if k % 2 == 0 && next.len() >= 2 {
            let est = next[next.len() - 1];
            let err = (est - next[next.len() - 2]).abs();
            if est.is_finite() && err < best_err {
                best = est;
                best_err = err;
            }
        }
        lower = cur;
        cur = next;
    }
    (best, best_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - 8.0).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // int_0^1 x^{-1/2} dx = 2
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn reports_non_convergence() {
        let opts = QuadOptions { max_intervals: 3, ..QuadOptions::default() };
        let err = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, opts).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }));
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // ln 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let sums: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        let (v, _) = wynn_epsilon(&sums);
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12, "{v}");
    }
}
