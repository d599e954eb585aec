//! The JSON run configuration. One document describes a whole experiment;
//! command-line flags may override individual fields.

use std::path::Path;

use bivex::fields::{DomainPair, Rect, RectUnion};
use bivex::model::BivariateMaternModel;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub domain: DomainConfig,
    pub grid: GridConfig,
    pub estimation: EstimationConfig,
    pub thresholds: ThresholdConfig,
    pub matern: MaternEvalConfig,
    pub simulate: SimulateConfig,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DomainConfig {
    pub a1: Vec<RectConfig>,
    pub a2: Vec<RectConfig>,
    /// Number of leading coordinates the sets share. Inferred from the
    /// intersection when absent: `N` if it has positive volume, else `N - 1`.
    pub split_m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub points_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub s: (f64, f64),
    pub t: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimationConfig {
    pub reps: u64,
    pub seed: u64,
    pub eta: f64,
    pub t_list: Vec<f64>,
    /// Pickands exponent; defaults to `2 nu1`.
    pub alpha: Option<f64>,
    /// Joint Pickands sets `S`, `T`, estimated alongside the `T_list` runs.
    pub joint: Option<JointConfig>,
    /// Pickands constants for the two fields; required unless `alpha_i = 1`
    /// and `N = 1`.
    pub h1: Option<f64>,
    pub h2: Option<f64>,
    /// `C` in `delta(u) = C sqrt(log u) / u`; a safe default when absent.
    pub c_delta: Option<f64>,
    /// Cell scale `T` in `d_i = T u^{-2 / alpha_i}`.
    pub t_scale: f64,
    pub cell_set: CellSetConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellSetConfig {
    Touching,
    Inside,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdConfig {
    /// Thresholds for Monte Carlo and theorem evaluation.
    pub u: Vec<f64>,
    /// Thresholds for the Riemann-sum check.
    pub riemann_u: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaternEvalConfig {
    pub lags: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub count: u64,
    /// Binary sample dump, relative to the output directory.
    pub dump: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Relative tolerance on the fitted rate against `-1 / (1 + rho)`.
    pub rate_tolerance: f64,
    /// Allowed `|ratio - 1|` for every Riemann-sum ratio.
    pub riemann_band: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub format: Format,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { nu1: 0.5, nu2: 0.5, nu12: 1.25, a1: 1.0, a2: 1.0, a12: 1.0, sigma1: 1.0, sigma2: 1.0, rho: 0.5, dim_n: 1 }
    }
}

impl Default for DomainConfig {
    fn default() -> Self {
        let unit = || vec![RectConfig { lo: vec![0.0], hi: vec![1.0] }];
        Self { a1: unit(), a2: unit(), split_m: None }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { points_per_axis: 100 }
    }
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            reps: 200_000,
            seed: 1,
            eta: 1.0 / 64.0,
            t_list: vec![1.0, 2.0, 4.0, 8.0],
            alpha: None,
            joint: None,
            h1: None,
            h2: None,
            c_delta: None,
            t_scale: 1.0,
            cell_set: CellSetConfig::Touching,
        }
    }
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self { u: vec![2.0, 2.4, 2.8, 3.2], riemann_u: vec![20.0, 50.0, 80.0] }
    }
}

impl Default for MaternEvalConfig {
    fn default() -> Self {
        Self { lags: vec![0.0, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0] }
    }
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { count: 100, dump: None }
    }
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { rate_tolerance: 0.10, riemann_band: 0.10 }
    }
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, format: Format::Csv }
    }
}

/// Anything that makes a configuration unusable before a command runs.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must be finite and > 0")))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let c: Self = serde_json::from_str(text)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> Result<BivariateMaternModel, ConfigError> {
        let m = &self.model;
        BivariateMaternModel {
            nu1: m.nu1,
            nu2: m.nu2,
            nu12: m.nu12,
            a1: m.a1,
            a2: m.a2,
            a12: m.a12,
            sigma1: m.sigma1,
            sigma2: m.sigma2,
            rho: m.rho,
            dim_n: m.dim_n,
        }
        .validated()
        .map_err(|e| invalid(e.to_string()))
    }

    pub fn rect_unions(&self) -> Result<(RectUnion, RectUnion), ConfigError> {
        let build = |rs: &[RectConfig], which: &str| -> Result<RectUnion, ConfigError> {
            let rects = rs
                .iter()
                .map(|r| Rect::new(r.lo.clone(), r.hi.clone()))
                .collect::<bivex::Result<Vec<_>>>()
                .map_err(|e| invalid(format!("domain.{which}: {e}")))?;
            RectUnion::new(rects).map_err(|e| invalid(format!("domain.{which}: {e}")))
        };
        let a1 = build(&self.domain.a1, "a1")?;
        let a2 = build(&self.domain.a2, "a2")?;
        if a1.dim() != self.model.dim_n || a2.dim() != self.model.dim_n {
            return Err(invalid(format!(
                "domain dimensions ({}, {}) differ from model.dim_n = {}",
                a1.dim(),
                a2.dim(),
                self.model.dim_n
            )));
        }
        Ok((a1, a2))
    }

    /// The domain pair. Inconsistencies between `split_m` and the geometry
    /// surface here as core errors.
    pub fn domain_pair(&self) -> bivex::Result<DomainPair> {
        let (a1, a2) = self.rect_unions().map_err(|e| bivex::Error::Domain { op: "domain", reason: e.to_string() })?;
        let n = a1.dim();
        let m = match self.domain.split_m {
            Some(m) => m,
            None if a1.intersection_measure(&a2) > 0.0 => n,
            None => n.saturating_sub(1),
        };
        if m == n && a1.intersection_measure(&a2) <= 0.0 {
            return Err(bivex::Error::Domain {
                op: "domain",
                reason: format!("split_m = N = {n} needs an intersection of positive volume"),
            });
        }
        DomainPair::new(a1, a2, m)
    }

    pub fn alpha(&self) -> f64 {
        self.estimation.alpha.unwrap_or(2.0 * self.model.nu1)
    }

    /// Every numeric constraint that does not depend on the command.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model()?;
        self.rect_unions()?;
        let e = &self.estimation;
        if e.reps < 2 {
            return Err(invalid(format!("estimation.reps = {} must be >= 2", e.reps)));
        }
        positive("estimation.eta", e.eta)?;
        positive("estimation.t_scale", e.t_scale)?;
        positive("estimation.alpha", self.alpha())?;
        if self.alpha() >= 2.0 {
            return Err(invalid(format!("estimation.alpha = {} must be < 2", self.alpha())));
        }
        for (name, v) in [("estimation.h1", e.h1), ("estimation.h2", e.h2), ("estimation.c_delta", e.c_delta)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        for &t in &e.t_list {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(invalid(format!("estimation.t_list entry {t} must be finite and >= 0")));
            }
        }
        if e.t_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("estimation.t_list must be strictly increasing"));
        }
        if let Some(j) = &e.joint {
            for (name, (lo, hi)) in [("s", j.s), ("t", j.t)] {
                if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(invalid(format!("estimation.joint.{name} = [{lo}, {hi}] must satisfy 0 <= lo <= hi")));
                }
            }
        }
        if self.grid.points_per_axis < 2 {
            return Err(invalid(format!("grid.points_per_axis = {} must be >= 2", self.grid.points_per_axis)));
        }
        for (name, us) in [("thresholds.u", &self.thresholds.u), ("thresholds.riemann_u", &self.thresholds.riemann_u)] {
            for &u in us.iter() {
                positive(name, u)?;
            }
        }
        for &h in &self.matern.lags {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(invalid(format!("matern.lags entry {h} must be finite and >= 0")));
            }
        }
        positive("verify.rate_tolerance", self.verify.rate_tolerance)?;
        positive("verify.riemann_band", self.verify.riemann_band)?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output section so
    /// that moving results elsewhere does not change their identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"modle": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"model": {"nu": 1}}"#).is_err());
    }

    #[test]
    fn numeric_constraints_rechecked() {
        let mut c = RunConfig::default();
        c.model.nu1 = -1.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.estimation.t_list = vec![2.0, 1.0];
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.model.dim_n = 2;
        assert!(c.validate().is_err());
    }

    #[test]
    fn split_inferred_from_geometry() {
        let mut c = RunConfig::default();
        assert_eq!(c.domain_pair().unwrap().split_m, 1);
        c.domain.a2 = vec![RectConfig { lo: vec![1.0], hi: vec![2.0] }];
        assert_eq!(c.domain_pair().unwrap().split_m, 0);
        c.domain.split_m = Some(1);
        assert!(c.domain_pair().is_err());
    }

    #[test]
    fn hash_ignores_output_section() {
        let mut c = RunConfig::default();
        let h = c.hash();
        c.output.dir = Some("elsewhere".into());
        assert_eq!(c.hash(), h);
        c.estimation.seed = 9;
        assert_ne!(c.hash(), h);
    }
}
