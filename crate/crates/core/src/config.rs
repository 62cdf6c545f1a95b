//! JSON run configuration. Every field has a default, so `{}` is a complete
//! configuration describing the reference setup.

use crate::heatsim::{MaterialSample, ThermalScenario};
use crate::pinn::TrainingConfig;
use crate::reliability::{make_target, PriorSpec, TargetSpec};
use crate::samplers::SmcConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{block}: {msg}")]
    Invalid { block: &'static str, msg: String },
}

fn invalid(block: &'static str, msg: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        block,
        msg: msg.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    /// °C
    pub t_critical: f64,
    pub reliabilities: Vec<f64>,
    /// °C
    pub sigma_target: f64,
    /// Likelihood width; `sigma_target` when absent.
    pub sigma_like: Option<f64>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            t_critical: 250.0,
            reliabilities: vec![0.95, 0.99, 0.99999],
            sigma_target: 5.0,
            sigma_like: None,
        }
    }
}

impl TargetConfig {
    pub fn targets(&self) -> Result<Vec<TargetSpec>, ConfigError> {
        self.reliabilities
            .iter()
            .map(|&r| make_target(self.t_critical, r, self.sigma_target).map_err(|e| invalid("target", e)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    Smc,
    /// Independent adaptive MH chains, burn-in included.
    Mcmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub method: SamplingMethod,
    pub n_particles: usize,
    pub ess_threshold_ratio: f64,
    pub mutation_steps: usize,
    pub mcmc_chains: usize,
    pub mcmc_steps: usize,
    pub mcmc_adapt_interval: Option<usize>,
    pub seed: u64,
    /// Rayon worker threads; all cores when absent.
    pub workers: Option<usize>,
    /// Number of samples re-checked with the FDM solver; all when absent.
    pub fdm_subsample: Option<usize>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            method: SamplingMethod::Smc,
            n_particles: 10_000,
            ess_threshold_ratio: 0.5,
            mutation_steps: 5,
            mcmc_chains: 3,
            mcmc_steps: 1000,
            mcmc_adapt_interval: Some(200),
            seed: 0,
            workers: None,
            fdm_subsample: None,
        }
    }
}

impl SamplerConfig {
    pub fn smc(&self) -> SmcConfig {
        SmcConfig {
            n_particles: self.n_particles,
            ess_threshold_ratio: self.ess_threshold_ratio,
            mutation_steps: self.mutation_steps,
            seed: self.seed,
            workers: self.workers,
            ..SmcConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Batch sizes `M` for the inference comparison.
    pub sizes: Vec<usize>,
    /// Timed repetitions after one discarded warmup.
    pub repetitions: usize,
    /// Worker counts for the SMC timing; `[1, 2, 4, all cores]` when absent.
    pub workers: Option<Vec<usize>>,
    pub smc_particles: usize,
    pub reliability: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1, 10, 100, 1000, 10_000],
            repetitions: 5,
            workers: None,
            smc_particles: 10_000,
            reliability: 0.95,
        }
    }
}

impl BenchmarkConfig {
    pub fn worker_counts(&self) -> Vec<usize> {
        let mut w = self.workers.clone().unwrap_or_else(|| {
            let max = std::thread::available_parallelism().map_or(1, |n| n.get());
            vec![1, 2, 4, max]
        });
        w.sort_unstable();
        w.dedup();
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ThermalScenario,
    /// Material used by `solve` and `validate`.
    pub material: MaterialSample,
    pub training: TrainingConfig,
    pub target: TargetConfig,
    pub prior: PriorSpec,
    pub sampler: SamplerConfig,
    pub benchmark: BenchmarkConfig,
    pub output_dir: PathBuf,
    /// Weights file; `<output_dir>/weights.txt` when absent.
    pub weights: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ThermalScenario::default(),
            material: MaterialSample::validation(),
            training: TrainingConfig::default(),
            target: TargetConfig::default(),
            prior: PriorSpec::default(),
            sampler: SamplerConfig::default(),
            benchmark: BenchmarkConfig::default(),
            output_dir: PathBuf::from("out"),
            weights: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn weights_path(&self) -> PathBuf {
        self.weights.clone().unwrap_or_else(|| self.output_dir.join("weights.txt"))
    }

    /// Checks every block; nothing touches the filesystem.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario.validate().map_err(|e| invalid("scenario", e))?;
        self.material.validate().map_err(|e| invalid("material", e))?;
        self.training.validate().map_err(|e| invalid("training", e))?;
        self.prior.validate().map_err(|e| invalid("prior", e))?;

        let t = &self.target;
        if !t.t_critical.is_finite() {
            return Err(invalid("target", "t_critical must be finite"));
        }
        if t.reliabilities.is_empty() {
            return Err(invalid("target", "reliabilities is empty"));
        }
        if let Some(s) = t.sigma_like {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid("target", format!("sigma_like {s} must be positive")));
            }
        }
        t.targets()?;

        let s = &self.sampler;
        s.smc().validate().map_err(|e| invalid("sampler", e))?;
        if s.mcmc_chains < 1 || s.mcmc_steps < 1 {
            return Err(invalid("sampler", "mcmc_chains and mcmc_steps must be positive"));
        }
        if s.fdm_subsample == Some(0) {
            return Err(invalid("sampler", "fdm_subsample must be positive"));
        }

        let b = &self.benchmark;
        if b.sizes.is_empty() || b.sizes.contains(&0) {
            return Err(invalid("benchmark", "sizes must be non-empty and positive"));
        }
        if b.repetitions < 1 || b.smc_particles < 2 {
            return Err(invalid("benchmark", "need repetitions ≥ 1 and smc_particles ≥ 2"));
        }
        if b.workers.as_ref().is_some_and(|w| w.is_empty() || w.contains(&0)) {
            return Err(invalid("benchmark", "worker counts must be non-empty and positive"));
        }
        make_target(t.t_critical, b.reliability, t.sigma_target).map_err(|e| invalid("benchmark", e))?;
        Ok(())
    }

    /// Command-line overrides: the seed applies to training and sampling.
    pub fn with_overrides(mut self, seed: Option<u64>, workers: Option<usize>, out: Option<PathBuf>) -> Self {
        if let Some(seed) = seed {
            self.training.seed = seed;
            self.sampler.seed = seed;
        }
        if let Some(w) = workers {
            self.sampler.workers = Some(w);
        }
        if let Some(out) = out {
            self.output_dir = out;
        }
        self
    }
}
