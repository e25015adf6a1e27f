use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use smoothlab::brwre::{self, BrwLaw};
use smoothlab::env_model::{self, MEAN_TOL};
use smoothlab::moments::MomentOptions;
use smoothlab::schema::{BrwLawDoc, LawDoc};
use smoothlab::smoothing::{DEFAULT_HIGH, DEFAULT_LOW, DEFAULT_POINTS};
use smoothlab::{derive_seed, labels, EnvSequence, EnvironmentLaw, ExpectationStrategy, UGrid};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub low: f64,
    pub high: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { low: DEFAULT_LOW, high: DEFAULT_HIGH, points: DEFAULT_POINTS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    brwre::THETA_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub c: f64,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    pub budget: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_batches() -> usize {
    MomentOptions::default().mc_batches
}

/// A single JSON document describing one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brw_law: Option<BrwLawDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub thetas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub strategy: ExpectationStrategy,
    /// Iterations, walk length, generations or oracle depth, per subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Explicit environment; sampled from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentSpec>,
    /// Quenched-mean tolerance for `validate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_points: Option<Vec<f64>>,
    /// CSV with columns `u, phi` compared by `oracle-check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_tolerance: Option<f64>,
}

pub const DEFAULT_ITERATIONS: usize = 200;
pub const DEFAULT_ORACLE_DEPTH: usize = 3;
pub const DEFAULT_GENERATIONS: usize = 10;
pub const DEFAULT_REPLICAS: usize = 1000;
pub const DEFAULT_ORACLE_TOL: f64 = 1e-4;

impl ExperimentConfig {
    /// Reads the config, resolving a relative fixture path against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
        if let (Some(f), Some(dir)) = (&cfg.fixture, path.parent()) {
            if f.is_relative() {
                cfg.fixture = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("no seed: set `seed` in the config or pass --seed".into()))
    }

    pub fn law(&self) -> Result<EnvironmentLaw, CliError> {
        let doc = self.law.as_ref().ok_or_else(|| CliError::Config("this subcommand needs `law`".into()))?;
        Ok(doc.to_law()?)
    }

    pub fn brw_law(&self) -> Result<BrwLaw, CliError> {
        let doc = self.brw_law.as_ref().ok_or_else(|| CliError::Config("this subcommand needs `brw_law`".into()))?;
        Ok(doc.to_law()?)
    }

    pub fn grid(&self) -> Result<Arc<UGrid>, CliError> {
        let g = &self.grid;
        Ok(Arc::new(UGrid::log_spaced(g.low, g.high, g.points)?))
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(MEAN_TOL)
    }

    pub fn moment_options(&self, seed: u64) -> MomentOptions {
        let d = MomentOptions::default();
        let (budget, batches) = self.moments.as_ref().map_or((d.mc_budget, d.mc_batches), |m| (m.budget, m.batches));
        MomentOptions { mc_budget: budget, mc_batches: batches, seed: derive_seed(seed, &labels!["moments"]) }
    }

    /// Explicit environment (checked against `ids`) or a sampled one.
    pub fn env_for_law(&self, law: &EnvironmentLaw, n: usize, seed: u64) -> Result<EnvSequence, CliError> {
        match &self.env {
            Some(ids) => {
                let seq = EnvSequence::from_ids(ids.iter().cloned());
                seq.resolve(law)?;
                check_length(&seq, n)?;
                Ok(seq)
            }
            None => Ok(env_model::sample_env(law, n, derive_seed(seed, &labels!["env"]))),
        }
    }

    pub fn env_for_brw(&self, law: &BrwLaw, n: usize, seed: u64) -> Result<EnvSequence, CliError> {
        match &self.env {
            Some(ids) => {
                let seq = EnvSequence::from_ids(ids.iter().cloned());
                for id in &seq.state_ids {
                    law.state(id)?;
                }
                check_length(&seq, n)?;
                Ok(seq)
            }
            None => Ok(brwre::sample_brw_env(law, n, derive_seed(seed, &labels!["env"]))),
        }
    }

    pub fn thetas(&self) -> Result<Vec<f64>, CliError> {
        let mut out = self.thetas.clone();
        if let Some(s) = &self.sweep {
            if !(s.step > 0.0 && s.stop >= s.start) {
                return Err(CliError::Config("sweep needs step > 0 and stop >= start".into()));
            }
            let n = ((s.stop - s.start) / s.step + 1e-9).floor() as usize;
            out.extend((0..=n).map(|i| brwre::sweep_point(s.start, s.step, i)));
        }
        if out.is_empty() {
            return Err(CliError::Config("no theta given: set `thetas` or `sweep`".into()));
        }
        Ok(out)
    }

    /// Checks that every id referenced by the config resolves.
    pub fn check_references(&self) -> Result<(), CliError> {
        let law = self.law.as_ref().map(|d| d.to_law()).transpose()?;
        let brw = self.brw_law.as_ref().map(|d| d.to_law()).transpose()?;
        if let Some(ids) = &self.env {
            for id in ids {
                let known = law.as_ref().is_some_and(|l| l.state(id).is_ok())
                    || brw.as_ref().is_some_and(|b| b.state(id).is_ok());
                if !known {
                    return Err(smoothlab::Error::UnknownState(id.clone()).into());
                }
            }
        }
        Ok(())
    }
}

fn check_length(seq: &EnvSequence, n: usize) -> Result<(), CliError> {
    if seq.len() < n {
        return Err(CliError::Config(format!("`env` has {} states, {n} needed", seq.len())));
    }
    Ok(())
}

/// Default `u` points for transform comparisons: 21 log-spaced in `[1e-3, 10]`.
pub fn default_u_points() -> Vec<f64> {
    smoothlab::oracle::log_points(1e-3, 10.0, 21)
}
