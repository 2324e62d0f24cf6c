//! The JSON run configuration and how flags and the environment override it.

use crate::output::Format;
use crate::Failure;
use overlap_core::dists::DistSpec;
use overlap_core::sim::{ArrivalSpec, RunConfig, StopRule, Warmup};
use overlap_core::verify::Policy;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SEED_ENV: &str = "OVERLAP_LAB_SEED";
pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_N: usize = 100_000;

fn one() -> u64 {
    1
}

fn default_lags() -> Vec<u32> {
    vec![1, 2, 3, 4]
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv]
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a run needs. `simulate` uses the model fields, `verify` uses
/// `figure`, `n` and `thresholds`; both use `seed` and the output fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival: Option<ArrivalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<DistSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopRule>,
    #[serde(default)]
    pub warmup: Warmup,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub replications: u64,
    /// Lags `k` for `overlaps_k{K}.csv`.
    #[serde(default = "default_lags")]
    pub lags: Vec<u32>,
    /// Residual threshold; `residual_counts.csv` is written when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    /// Verification suite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    /// Sample size for verification suites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub thresholds: Policy,
}

impl Default for Config {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    /// Flag, then config file, then `OVERLAP_LAB_SEED`, then [`DEFAULT_SEED`].
    pub fn resolve_seed(&mut self, flag: Option<u64>) -> Result<u64, Failure> {
        let seed = match flag.or(self.seed) {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| Failure::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
                Err(_) => DEFAULT_SEED,
            },
        };
        self.seed = Some(seed);
        Ok(seed)
    }

    pub fn run_config(&self) -> Result<RunConfig, Failure> {
        let missing = |what: &str| Failure::Config(format!("simulation needs `{what}` (config file or flag)"));
        let cfg = RunConfig {
            arrival: self.arrival.clone().ok_or_else(|| missing("arrival"))?,
            service: self.service.clone().ok_or_else(|| missing("service"))?,
            stop: self.stop.ok_or_else(|| missing("stop"))?,
            warmup: self.warmup,
            seed: self.seed.ok_or_else(|| missing("seed"))?,
            replications: self.replications,
        };
        cfg.validate()?;
        if self.lags.contains(&0) {
            return Err(Failure::Config("lags must be at least 1".into()));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Failure::Config(format!("delta must be nonnegative and finite, got {d}")));
            }
        }
        Ok(cfg)
    }
}
