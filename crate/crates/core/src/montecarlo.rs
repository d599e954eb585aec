//! Plain Monte Carlo for `P(max_{A1} X1 > u, max_{A2} X2 > u)` on grids and
//! the decay-rate fit used to compare it with the asymptotics.

use crate::fields::{map_chunks, FieldSampler, GridSpec};
use crate::model::BivariateMaternModel;
use crate::stats::{ols, wilson_interval, Z_95};
use crate::{Error, Result};

/// Points with fewer hits are left out of [`rate_fit`].
pub const MIN_FIT_HITS: u64 = 30;
/// Recommended minimum number of replicates.
pub const MIN_REPLICATES: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExcursionEstimate {
    pub u: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub replicates: u64,
    pub seed: u64,
    pub nodes1: usize,
    pub nodes2: usize,
    pub warnings: Vec<String>,
}

/// Per-replicate grid maxima of both fields, in replicate order.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMaxima {
    pub max1: Vec<f64>,
    pub max2: Vec<f64>,
    pub seed: u64,
    pub nodes1: usize,
    pub nodes2: usize,
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Simulates `reps` replicates and keeps only the two maxima of each.
pub fn simulate_maxima(m: &BivariateMaternModel, g: &GridSpec, reps: u64, seed: u64) -> Result<GridMaxima> {
    if reps == 0 {
        return Err(Error::domain("simulate_maxima", "reps must be positive"));
    }
    if g.n1() == 0 || g.n2() == 0 {
        return Err(Error::domain("simulate_maxima", "both grids need at least one node"));
    }
    let sampler = FieldSampler::new(m, g)?;
    let n1 = sampler.n1();
    let dim = sampler.gaussian().dim();
    let chunks = map_chunks(reps, |range| {
        let mut z = vec![0.0; dim];
        let mut x = vec![0.0; dim];
        let mut out = Vec::with_capacity((range.end - range.start) as usize);
        for r in range {
            sampler.gaussian().fill(seed, r, &mut z, &mut x);
            out.push((max_of(&x[..n1]), max_of(&x[n1..])));
        }
        out
    });
    let mut max1 = Vec::with_capacity(reps as usize);
    let mut max2 = Vec::with_capacity(reps as usize);
    for (a, b) in chunks.into_iter().flatten() {
        max1.push(a);
        max2.push(b);
    }
    Ok(GridMaxima { max1, max2, seed, nodes1: g.n1(), nodes2: g.n2() })
}

impl GridMaxima {
    pub fn replicates(&self) -> u64 {
        self.max1.len() as u64
    }

    /// Replicates with both maxima above `u`.
    pub fn joint_hits(&self, u: f64) -> u64 {
        self.max1.iter().zip(&self.max2).filter(|(a, b)| **a > u && **b > u).count() as u64
    }

    /// Replicates with each single maximum above `u`.
    pub fn marginal_hits(&self, u: f64) -> (u64, u64) {
        (
            self.max1.iter().filter(|a| **a > u).count() as u64,
            self.max2.iter().filter(|b| **b > u).count() as u64,
        )
    }

    pub fn estimate(&self, u: f64) -> ExcursionEstimate {
        let n = self.replicates();
        let hits = self.joint_hits(u);
        let (ci_low, ci_high) = wilson_interval(hits, n, Z_95);
        let mut warnings = Vec::new();
        if n < MIN_REPLICATES {
            warnings.push(format!("only {n} replicates (recommended >= {MIN_REPLICATES})"));
        }
        if hits == 0 {
            warnings.push(format!("no joint exceedance of u = {u} in {n} replicates; event too rare for plain Monte Carlo"));
        }
        ExcursionEstimate {
            u,
            p_hat: hits as f64 / n as f64,
            ci_low,
            ci_high,
            hits,
            replicates: n,
            seed: self.seed,
            nodes1: self.nodes1,
            nodes2: self.nodes2,
            warnings,
        }
    }
}

/// Joint exceedance estimate with a Wilson 95% interval.
pub fn mc_excursion(m: &BivariateMaternModel, g: &GridSpec, u: f64, reps: u64, seed: u64) -> Result<ExcursionEstimate> {
    Ok(simulate_maxima(m, g, reps, seed)?.estimate(u))
}

/// Estimates for several thresholds from one set of samples. Estimates at
/// different `u` are therefore dependent.
pub fn mc_excursion_multi(m: &BivariateMaternModel, g: &GridSpec, us: &[f64], reps: u64, seed: u64) -> Result<Vec<ExcursionEstimate>> {
    let maxima = simulate_maxima(m, g, reps, seed)?;
    Ok(us.iter().map(|&u| maxima.estimate(u)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// Slope of `log p_hat` against `u^2`.
    pub slope: f64,
    pub slope_ci: (f64, f64),
    pub slope_std_error: f64,
    pub intercept: f64,
    /// Thresholds that entered the fit.
    pub used: Vec<f64>,
    /// `(u, p_hat / theory(u))` for the used thresholds, when a theory curve
    /// was supplied.
    pub ratios: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Least-squares fit of `log p_hat = intercept + slope u^2`.
///
/// The slope interval uses the delta-method variance
/// `Var(log p_hat) ~ 1/hits - 1/n` per point and treats points as
/// independent, which understates it when thresholds share samples.
pub fn rate_fit(points: &[ExcursionEstimate], theory: Option<&dyn Fn(f64) -> f64>) -> Result<RateFit> {
    let mut warnings = Vec::new();
    let mut kept: Vec<&ExcursionEstimate> = Vec::new();
    for p in points {
        if p.hits < MIN_FIT_HITS {
            warnings.push(format!("u = {}: {} hits < {MIN_FIT_HITS}, point dropped", p.u, p.hits));
        } else {
            kept.push(p);
        }
    }
    if kept.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} of {} thresholds have >= {MIN_FIT_HITS} hits; at least 4 are needed ({})",
            kept.len(),
            points.len(),
            warnings.join("; ")
        )));
    }
    let x: Vec<f64> = kept.iter().map(|p| p.u * p.u).collect();
    let y: Vec<f64> = kept.iter().map(|p| p.p_hat.ln()).collect();
    let fit = ols(&x, &y).ok_or_else(|| Error::InsufficientData("thresholds must not all coincide".into()))?;
    let var: f64 = kept
        .iter()
        .zip(&x)
        .map(|(p, xi)| {
            let v = 1.0 / p.hits as f64 - 1.0 / p.replicates as f64;
            (xi - fit.x_mean).powi(2) * v.max(0.0)
        })
        .sum::<f64>()
        / (fit.sxx * fit.sxx);
    let se = var.sqrt();
    let ratios = match theory {
        Some(f) => kept.iter().map(|p| (p.u, p.p_hat / f(p.u))).collect(),
        None => Vec::new(),
    };
    Ok(RateFit {
        slope: fit.slope,
        slope_ci: (fit.slope - Z_95 * se, fit.slope + Z_95 * se),
        slope_std_error: se,
        intercept: fit.intercept,
        used: kept.iter().map(|p| p.u).collect(),
        ratios,
        warnings,
    })
}
