//! Run configuration: strict JSON with every default spelled out here.
//!
//! | section       | key                 | default                     |
//! |---------------|---------------------|-----------------------------|
//! | (top)         | `family`            | required                    |
//! |               | `params`            | `{}` (family defaults)      |
//! |               | `seed`              | `0`                         |
//! |               | `output_dir`        | `$INDUCER_OUT` or `out`     |
//! | `hypotheses`  | `lambda`            | `0.35`                      |
//! |               | `Lambda`            | `0.5`                       |
//! |               | `kappa`             | `0.1`                       |
//! |               | `alpha`             | `0.01`                      |
//! |               | `delta`             | `e^-3`                      |
//! |               | `ell_hat`/`ell_lo`  | `3` / `0.25`                |
//! | `checks`      | `h1_samples`        | `2000`                      |
//! |               | `h1_horizon`        | `200`                       |
//! |               | `h2_horizon`        | `10000`                     |
//! |               | `h3_depth`          | `12`                        |
//! |               | `h3_eps`            | `0.05`                      |
//! | `partition`   | `r_max`             | `30`                        |
//! |               | `binding_k_max`     | `60`                        |
//! |               | `binding_samples`   | `64`                        |
//! | `returns`     | `delta_star`        | `e^-5`                      |
//! |               | `t_star`            | `14`                        |
//! |               | `sidedness`         | `two_sided`                 |
//! |               | `xi`                | `0.01`                      |
//! |               | `rule`              | `largest`                   |
//! |               | `region`            | `side_gaps`                 |
//! |               | `max_candidates`    | `1048576`                   |
//! | `inducing`    | `n_max`             | `200`                       |
//! |               | `w_min`             | `null` (1e-14 domain)       |
//! |               | `branch_cap`        | `1000000`                   |
//! |               | `depth_rule`        | `min`                       |
//! |               | `domain_mode`       | `delta_star`                |
//! |               | `order`             | `widest`                    |
//! |               | `lump_fraction`     | `1e-6`                      |
//! | `diagnostics` | `samples`           | `16`                        |
//! |               | `pair_samples`      | `16`                        |
//! |               | `stratify`          | `true`                      |
//! | `measure`     | `method`            | `ulam`                      |
//! |               | `n_iter`            | `10000000`                  |
//! |               | `burn_in`           | `1000`                      |
//! |               | `n_seeds`           | `1`                         |
//! |               | `bins`              | `200`                       |
//! |               | `cells`             | `512`                       |
//! |               | `follow_residual`   | `100000`                    |
//! | `experiment`  | `param`             | `a`                         |
//! |               | `a0`                | `1.97`                      |
//! |               | `offsets`           | `null` (dyadic, see below)  |
//! |               | `eps`               | `0.02`                      |
//! |               | `k_lo` / `k_hi`     | `0` / `7`                   |
//! |               | `radius`            | `0.01`                      |
//! |               | `n_points`          | `5`                         |
//! |               | `levels`            | `10`                        |
//! |               | `gap`               | `0.001`                     |
//! |               | `distance_grid`     | `4096`                      |
//! |               | `compare`           | `null` (same family, `a0 + gap`) |
//! |               | `tail`              | `false`                     |
//! |               | `cross_check`       | `true`                      |
//! | `uniqueness`  | `n_clouds`          | `5`                         |
//! |               | `n_iter`            | `10000000`                  |
//! |               | `orbits_per_cloud`  | `10`                        |
//! |               | `burn_in`           | `1000`                      |
//! |               | `bins`              | `200`                       |
//! |               | `threshold`         | `0.05`                      |
//! |               | `entry_samples`     | `10000`                     |
//! |               | `horizon`           | `200`                       |
//!
//! The uniqueness seed is the top-level `seed`, and its base interval uses
//! `returns.delta_star`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use inducer_core::inducing::{InducePipeline, InducingParams, ReturnFinderParams};
use inducer_core::map_model::families::make_builtin_family;
use inducer_core::map_model::{HypothesisSet, IntervalMap};
use inducer_core::measure::{BirkhoffJob, TowerParams};
use inducer_core::stability::{dyadic_offsets, FamilyAxis, UniquenessBudgets};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "INDUCER_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub hypotheses: HypothesisSet,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    #[serde(default)]
    pub returns: ReturnFinderParams,
    #[serde(default)]
    pub inducing: InducingParams,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub uniqueness: UniquenessConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChecksConfig {
    pub h1_samples: usize,
    pub h1_horizon: usize,
    pub h2_horizon: usize,
    pub h3_depth: usize,
    pub h3_eps: f64,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig { h1_samples: 2000, h1_horizon: 200, h2_horizon: 10_000, h3_depth: 12, h3_eps: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    pub r_max: u32,
    pub binding_k_max: u32,
    pub binding_samples: usize,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        let p = InducePipeline::default();
        PartitionConfig { r_max: p.r_max, binding_k_max: p.binding_k_max, binding_samples: p.binding_samples }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub samples: usize,
    pub pair_samples: usize,
    pub stratify: bool,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig { samples: 16, pair_samples: 16, stratify: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Birkhoff,
    Ulam,
    Tower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub method: MethodName,
    pub n_iter: u64,
    pub burn_in: u64,
    pub n_seeds: usize,
    pub bins: usize,
    pub cells: usize,
    pub follow_residual: u32,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            method: MethodName::Ulam,
            n_iter: 10_000_000,
            burn_in: 1000,
            n_seeds: 1,
            bins: 200,
            cells: 512,
            follow_residual: TowerParams::default().follow_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub param: String,
    pub a0: f64,
    pub offsets: Option<Vec<f64>>,
    pub eps: f64,
    pub k_lo: i32,
    pub k_hi: i32,
    pub radius: f64,
    pub n_points: usize,
    pub levels: u32,
    pub gap: f64,
    pub distance_grid: usize,
    pub compare: Option<CompareConfig>,
    pub tail: bool,
    pub cross_check: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            param: "a".into(),
            a0: 1.97,
            offsets: None,
            eps: 0.02,
            k_lo: 0,
            k_hi: 7,
            radius: 0.01,
            n_points: 5,
            levels: 10,
            gap: 1e-3,
            distance_grid: 4096,
            compare: None,
            tail: false,
            cross_check: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UniquenessConfig {
    pub n_clouds: usize,
    pub n_iter: u64,
    pub orbits_per_cloud: usize,
    pub burn_in: u64,
    pub bins: usize,
    pub threshold: f64,
    pub entry_samples: usize,
    pub horizon: u32,
}

impl Default for UniquenessConfig {
    fn default() -> Self {
        let u = UniquenessBudgets::default();
        UniquenessConfig {
            n_clouds: u.n_clouds,
            n_iter: u.n_iter,
            orbits_per_cloud: u.orbits_per_cloud,
            burn_in: u.burn_in,
            bins: u.bins,
            threshold: u.threshold,
            entry_samples: u.entry_samples,
            horizon: u.horizon,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error in `{field}`: {reason}")]
    Schema { field: String, reason: String },
    #[error(transparent)]
    Domain(#[from] inducer_core::Error),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(classify)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.hypotheses.validate()?;
        self.map()?;
        let schema = |field: &str, reason: &str| ConfigError::Schema { field: field.into(), reason: reason.into() };
        if !(self.returns.delta_star > 0.0) {
            return Err(schema("returns.delta_star", "must be positive"));
        }
        if self.measure.bins < 2 || self.measure.cells < 2 {
            return Err(schema("measure", "bins and cells must be at least 2"));
        }
        if self.experiment.n_points < 3 {
            return Err(schema("experiment.n_points", "must be at least 3"));
        }
        if self.uniqueness.n_clouds < 3 {
            return Err(schema("uniqueness.n_clouds", "must be at least 3"));
        }
        if let Some(c) = &self.experiment.compare {
            family_map(&c.family, &c.params)?;
        }
        Ok(())
    }

    pub fn map(&self) -> Result<IntervalMap, inducer_core::Error> {
        family_map(&self.family, &self.params)
    }

    pub fn pipeline(&self) -> InducePipeline {
        InducePipeline {
            hypotheses: self.hypotheses,
            r_max: self.partition.r_max,
            binding_k_max: self.partition.binding_k_max,
            binding_samples: self.partition.binding_samples,
            returns: self.returns,
            inducing: self.inducing,
        }
    }

    pub fn birkhoff_job(&self, map: &IntervalMap) -> BirkhoffJob {
        BirkhoffJob {
            start: map.domain(),
            n_iter: self.measure.n_iter,
            burn_in: self.measure.burn_in,
            n_seeds: self.measure.n_seeds,
            bins: self.measure.bins,
            seed: self.seed,
        }
    }

    pub fn axis(&self) -> FamilyAxis {
        FamilyAxis {
            family: self.family.clone(),
            param: self.experiment.param.clone(),
            fixed: self
                .params
                .iter()
                .filter(|(k, _)| **k != self.experiment.param)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    pub fn offsets(&self) -> Vec<f64> {
        match &self.experiment.offsets {
            Some(o) => o.clone(),
            None => dyadic_offsets(self.experiment.eps, self.experiment.k_lo, self.experiment.k_hi),
        }
    }

    pub fn uniqueness_budgets(&self) -> UniquenessBudgets {
        let u = &self.uniqueness;
        UniquenessBudgets {
            n_clouds: u.n_clouds,
            n_iter: u.n_iter,
            orbits_per_cloud: u.orbits_per_cloud,
            burn_in: u.burn_in,
            bins: u.bins,
            seed: self.seed,
            threshold: u.threshold,
            entry_samples: u.entry_samples,
            horizon: u.horizon,
            delta_star: self.returns.delta_star,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

pub fn family_map(family: &str, params: &BTreeMap<String, f64>) -> Result<IntervalMap, inducer_core::Error> {
    let p: Vec<(&str, f64)> = params.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    make_builtin_family(family, &p)
}

fn classify(e: serde_json::Error) -> ConfigError {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => {
            let message = e.to_string();
            // serde names the offending field in backticks
            let field = message.split('`').nth(1).unwrap_or("").to_string();
            ConfigError::Schema { field, reason: message }
        }
        _ => ConfigError::Parse { line: e.line(), column: e.column(), message: e.to_string() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::from_json(r#"{"family": "chebyshev"}"#).unwrap();
        assert_eq!(c.hypotheses, HypothesisSet::default());
        assert_eq!(c.inducing, InducingParams::default());
        assert_eq!(c.measure.cells, 512);
        assert_eq!(c.seed, 0);
    }

    #[test]
    fn alpha_equal_to_lambda_is_rejected() {
        let e = RunConfig::from_json(r#"{"family": "chebyshev", "hypotheses": {"alpha": 0.35, "lambda": 0.35}}"#)
            .unwrap_err();
        assert!(matches!(e, ConfigError::Domain(inducer_core::Error::AlphaConstraintViolated { .. })));
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = RunConfig::from_json(r#"{"family": "chebyshev", "fooo": 1}"#).unwrap_err();
        match e {
            ConfigError::Schema { field, .. } => assert_eq!(field, "fooo"),
            other => panic!("{other:?}"),
        }
        let e = RunConfig::from_json(r#"{"family": "chebyshev", "inducing": {"n_maxx": 3}}"#).unwrap_err();
        assert!(matches!(e, ConfigError::Schema { field, .. } if field == "n_maxx"));
    }

    #[test]
    fn syntax_errors_carry_a_position() {
        let e = RunConfig::from_json("{\n  \"family\": \"chebyshev\",\n}").unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn unknown_family_and_params() {
        assert!(matches!(
            RunConfig::from_json(r#"{"family": "tent"}"#),
            Err(ConfigError::Domain(inducer_core::Error::UnknownFamily(_)))
        ));
        assert!(RunConfig::from_json(r#"{"family": "lorenz_singular", "params": {"a": 1.97}}"#).is_ok());
    }
}
