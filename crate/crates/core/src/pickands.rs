//! Monte Carlo estimates of the Pickands functionals on a grid.
//!
//! With `Y(t) = chi(t) - t^alpha` on `{0, eta, 2 eta, ...}`:
//!
//! * `H(T) = E exp(max_{t in T} Y(t))`,
//! * `H(S, T) = E exp(min(max_S Y, max_T Y))`,
//! * `H_alpha ~ H([0, T]) / T` for large `T`.
//!
//! Paths for different horizons share their prefixes bit for bit (the
//! Cholesky factor of a leading block is the leading block of the factor),
//! so estimates at several `T` use common random numbers.

use crate::fields::{map_chunks, FbmSampler};
use crate::stats::mean_and_std_error;
use crate::{Error, Result};

/// Largest exponent accepted before `exp` is considered an overflow risk.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PickandsKind {
    SingleSet,
    Joint,
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PickandsEstimate {
    pub value: f64,
    pub std_error: f64,
    pub alpha: f64,
    pub horizon_t: f64,
    pub eta: f64,
    pub replicates: u64,
    pub kind: PickandsKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointEstimate {
    pub estimate: PickandsEstimate,
    /// Largest `|e^X + e^Y - e^max(X,Y) - e^min(X,Y)| / e^max(X,Y)` over all
    /// replicates.
    pub max_identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantEstimate {
    /// `H([0, T]) / T` at the largest horizon.
    pub estimate: PickandsEstimate,
    /// `(T, H([0, T]) / T, std_error)` for every horizon.
    pub sequence: Vec<(f64, f64, f64)>,
    /// Set when the sequence increases by more than two combined standard
    /// errors between consecutive horizons.
    pub non_monotone: bool,
    pub warnings: Vec<String>,
}

fn grid_index(x: f64, eta: f64, what: &str) -> Result<usize> {
    let k = x / eta;
    let r = k.round();
    if x < 0.0 || (k - r).abs() > 1e-9 * r.max(1.0) {
        return Err(Error::domain("pickands", format!("{what} = {x} is not a nonnegative multiple of eta = {eta}")));
    }
    Ok(r as usize)
}

fn check_alpha_eta(alpha: f64, eta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::domain("pickands", format!("alpha = {alpha} must lie in (0, 2)")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::domain("pickands", format!("eta = {eta} must be > 0")));
    }
    Ok(())
}

fn drift(alpha: f64, eta: f64, len: usize) -> Vec<f64> {
    (0..len).map(|k| (k as f64 * eta).powf(alpha)).collect()
}

fn overflow(x: f64, replicate: u64) -> Error {
    Error::Overflow(format!("replicate {replicate}: sup exponent {x:.1} exceeds {MAX_EXPONENT}"))
}

/// `H([0, T])` for each `T` in `horizons`, from one set of paths on
/// `[0, max T]`.
pub fn estimate_h_sets(alpha: f64, horizons: &[f64], eta: f64, reps: u64, seed: u64) -> Result<Vec<PickandsEstimate>> {
    check_alpha_eta(alpha, eta)?;
    if reps < 2 {
        return Err(Error::domain("pickands", "at least 2 replicates required"));
    }
    let mut ends = Vec::with_capacity(horizons.len());
    for &t in horizons {
        if t > 0.0 && eta > t / 8.0 {
            return Err(Error::domain("pickands", format!("eta = {eta} exceeds T / 8 for T = {t}")));
        }
        ends.push(grid_index(t, eta, "T")?);
    }
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    let mut values: Vec<Vec<f64>> = vec![Vec::with_capacity(reps as usize); horizons.len()];
    if t_max > 0.0 {
        let sampler = FbmSampler::new(alpha, t_max, eta)?;
        let d = drift(alpha, eta, sampler.len());
        let mut order: Vec<usize> = (0..ends.len()).collect();
        order.sort_by_key(|&i| ends[i]);
        let chunks = map_chunks(reps, |range| -> Result<Vec<Vec<f64>>> {
            let mut z = vec![0.0; sampler.len() - 1];
            let mut path = vec![0.0; sampler.len()];
            let mut out = vec![Vec::with_capacity((range.end - range.start) as usize); ends.len()];
            for r in range {
                sampler.fill(seed, r, &mut z, &mut path);
                let mut running = f64::NEG_INFINITY;
                let mut k = 0;
                for &i in &order {
                    while k <= ends[i] {
                        running = running.max(path[k] - d[k]);
                        k += 1;
                    }
                    if running > MAX_EXPONENT {
                        return Err(overflow(running, r));
                    }
                    out[i].push(running.exp());
                }
            }
            Ok(out)
        });
        for c in chunks {
            for (i, v) in c?.into_iter().enumerate() {
                values[i].extend(v);
            }
        }
    }
    Ok(horizons
        .iter()
        .zip(values)
        .map(|(&t, v)| {
            let (value, std_error) = if t == 0.0 { (1.0, 0.0) } else { mean_and_std_error(&v) };
            PickandsEstimate { value, std_error, alpha, horizon_t: t, eta, replicates: reps, kind: PickandsKind::SingleSet }
        })
        .collect())
}

/// `H([0, T]) = E exp(sup_{[0,T]} (chi(t) - t^alpha))`. `T = 0` gives exactly 1.
pub fn estimate_h_set(alpha: f64, horizon_t: f64, eta: f64, reps: u64, seed: u64) -> Result<PickandsEstimate> {
    Ok(estimate_h_sets(alpha, &[horizon_t], eta, reps, seed)?.remove(0))
}

/// `H(S, T) = E exp(min(X, Y))` with `X`, `Y` the suprema of
/// `chi(t) - t^alpha` over `S` and `T`, both read off one shared path.
pub fn estimate_h_joint(
    alpha: f64,
    s_set: (f64, f64),
    t_set: (f64, f64),
    eta: f64,
    reps: u64,
    seed: u64,
) -> Result<JointEstimate> {
    check_alpha_eta(alpha, eta)?;
    if reps < 2 {
        return Err(Error::domain("pickands", "at least 2 replicates required"));
    }
    let (s0, s1) = (grid_index(s_set.0, eta, "S start")?, grid_index(s_set.1, eta, "S end")?);
    let (t0, t1) = (grid_index(t_set.0, eta, "T start")?, grid_index(t_set.1, eta, "T end")?);
    if s1 < s0 || t1 < t0 {
        return Err(Error::domain("pickands", "interval end precedes its start"));
    }
    let horizon = s_set.1.max(t_set.1);
    if horizon > 0.0 && eta > horizon / 8.0 {
        return Err(Error::domain("pickands", format!("eta = {eta} exceeds T / 8 for T = {horizon}")));
    }
    let sampler = if horizon > 0.0 { Some(FbmSampler::new(alpha, horizon, eta)?) } else { None };
    let len = sampler.as_ref().map_or(1, FbmSampler::len);
    let d = drift(alpha, eta, len);
    let chunks = map_chunks(reps, |range| -> Result<(Vec<f64>, f64)> {
        let mut z = vec![0.0; len - 1];
        let mut path = vec![0.0; len];
        let mut out = Vec::with_capacity((range.end - range.start) as usize);
        let mut worst: f64 = 0.0;
        for r in range {
            if let Some(s) = &sampler {
                s.fill(seed, r, &mut z, &mut path);
            }
            let sup = |a: usize, b: usize| (a..=b).map(|k| path[k] - d[k]).fold(f64::NEG_INFINITY, f64::max);
            let (x, y) = (sup(s0, s1), sup(t0, t1));
            let hi = x.max(y);
            if hi > MAX_EXPONENT {
                return Err(overflow(hi, r));
            }
            let (ex, ey, emax, emin) = (x.exp(), y.exp(), hi.exp(), x.min(y).exp());
            worst = worst.max(((ex + ey - emax) - emin).abs() / emax);
            out.push(emin);
        }
        Ok((out, worst))
    });
    let mut values = Vec::with_capacity(reps as usize);
    let mut worst: f64 = 0.0;
    for c in chunks {
        let (v, w) = c?;
        values.extend(v);
        worst = worst.max(w);
    }
    let (value, std_error) = mean_and_std_error(&values);
    Ok(JointEstimate {
        estimate: PickandsEstimate {
            value,
            std_error,
            alpha,
            horizon_t: horizon,
            eta,
            replicates: reps,
            kind: PickandsKind::Joint,
        },
        max_identity_residual: worst,
    })
}

/// `H([0, T]) / T` along increasing horizons; the last one is reported as
/// the constant estimate.
pub fn estimate_h_constant(alpha: f64, t_list: &[f64], eta: f64, reps: u64, seed: u64) -> Result<ConstantEstimate> {
    if t_list.len() < 3 {
        return Err(Error::domain("estimate_h_constant", "at least 3 horizons required"));
    }
    if t_list.windows(2).any(|w| !(w[0] < w[1])) || t_list[0] <= 0.0 {
        return Err(Error::domain("estimate_h_constant", "horizons must be positive and strictly increasing"));
    }
    constant_from_sets(&estimate_h_sets(alpha, t_list, eta, reps, seed)?)
}

/// Builds the `H([0, T]) / T` sequence from single-set estimates sharing
/// `alpha`, `eta` and the replicate count, in increasing `T`.
pub fn constant_from_sets(sets: &[PickandsEstimate]) -> Result<ConstantEstimate> {
    if sets.len() < 3 {
        return Err(Error::domain("constant_from_sets", "at least 3 horizons required"));
    }
    if sets.windows(2).any(|w| !(w[0].horizon_t < w[1].horizon_t)) || sets[0].horizon_t <= 0.0 {
        return Err(Error::domain("constant_from_sets", "horizons must be positive and strictly increasing"));
    }
    let (alpha, eta, reps) = (sets[0].alpha, sets[0].eta, sets[0].replicates);
    let sequence: Vec<(f64, f64, f64)> = sets.iter().map(|e| (e.horizon_t, e.value / e.horizon_t, e.std_error / e.horizon_t)).collect();
    let mut warnings = Vec::new();
    for w in sequence.windows(2) {
        let tol = 2.0 * (w[0].2 * w[0].2 + w[1].2 * w[1].2).sqrt();
        if w[1].1 > w[0].1 + tol {
            warnings.push(format!(
                "H([0,T])/T increases from {:.5} at T = {} to {:.5} at T = {} beyond 2 standard errors",
                w[0].1, w[0].0, w[1].1, w[1].0
            ));
        }
    }
    let &(t, v, se) = sequence.last().unwrap();
    Ok(ConstantEstimate {
        estimate: PickandsEstimate {
            value: v,
            std_error: se,
            alpha,
            horizon_t: t,
            eta,
            replicates: reps,
            kind: PickandsKind::Constant,
        },
        sequence,
        non_monotone: !warnings.is_empty(),
        warnings,
    })
}
