//! Bounded one-dimensional minimization.

use crate::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_8; // (sqrt(5) - 1) / 2

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub iterations: usize,
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `x_tol`. Assumes `f` is unimodal
/// on the bracket; callers that cannot guarantee this should seed the
/// bracket with [`scan_then_golden`].
pub fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, x_tol: f64, max_iter: usize) -> Result<Minimum> {
    if !(lo <= hi) {
        return Err(Error::domain("golden_section", format!("empty bracket [{lo}, {hi}]")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for it in 0..max_iter {
        if (b - a).abs() <= x_tol {
            let (x, value) = best_of([(a, f(a)), (c, fc), (d, fd), (b, f(b))]);
            return Ok(Minimum { x, value, iterations: it });
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    Err(Error::numeric(
        "golden_section",
        format!("bracket [{a:e}, {b:e}] still wider than {x_tol:e} after {max_iter} iterations"),
    ))
}

fn best_of(pts: [(f64, f64); 4]) -> (f64, f64) {
    pts.into_iter()
        .filter(|(_, v)| !v.is_nan())
        .fold((f64::NAN, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc })
}

/// Scans `f` on `points` equally spaced nodes of `[lo, hi]`, then refines the
/// best node with golden-section search over its two neighbouring cells.
pub fn scan_then_golden<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize, x_tol: f64) -> Result<Minimum> {
    if points < 3 {
        return Err(Error::domain("scan_then_golden", "need at least 3 scan points"));
    }
    let step = (hi - lo) / (points - 1) as f64;
    let node = |i: usize| if i == points - 1 { hi } else { lo + step * i as f64 };
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..points {
        let v = f(node(i));
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    if !best_v.is_finite() && best_v != f64::NEG_INFINITY {
        return Err(Error::numeric("scan_then_golden", "objective is not finite anywhere on the scan"));
    }
    let a = node(best_i.saturating_sub(1));
    let b = node((best_i + 1).min(points - 1));
    let refined = golden_section(&f, a, b, x_tol, 500)?;
    if refined.value <= best_v {
        Ok(refined)
    } else {
        Ok(Minimum { x: node(best_i), value: best_v, iterations: refined.iterations })
    }
}
