//! Bayesian formulation of the back-temperature design constraint.
//!
//! A reliability level `R = P(T_back ≤ T_critical)` fixes a Gaussian target
//! `N(μ_target, σ_target)` with `μ_target = T_critical − Φ⁻¹(R)·σ_target`. The
//! likelihood of a material sample is that Gaussian evaluated at its predicted
//! back temperature, so the posterior pushes `T_back` toward the target. The
//! evidence is never needed: samplers only use density ratios.

mod normal;

pub use normal::standard_normal_quantile;

use crate::heatsim::{explicit_back_temperature, HeatError, MaterialSample, ThermalScenario};
use crate::pinn::{ParamRange, PredictError, SurrogateModel};
use crate::samplers::SmcModel;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReliabilityError {
    #[error("reliability {0} must lie strictly between 0 and 1")]
    InvalidReliability(f64),
    #[error("sigma_target {0} must be positive")]
    InvalidSigma(f64),
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("empty sample batch")]
    EmptyBatch,
    #[error("sample {index}: {source}")]
    Solver { index: usize, source: HeatError },
}

/// Gaussian target distribution of the back temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub t_critical: f64,
    pub reliability: f64,
    pub sigma_target: f64,
    pub mu_target: f64,
}

pub fn make_target(t_critical: f64, reliability: f64, sigma_target: f64) -> Result<TargetSpec, ReliabilityError> {
    if !(reliability > 0.0 && reliability < 1.0) {
        return Err(ReliabilityError::InvalidReliability(reliability));
    }
    if !(sigma_target.is_finite() && sigma_target > 0.0) {
        return Err(ReliabilityError::InvalidSigma(sigma_target));
    }
    Ok(TargetSpec {
        t_critical,
        reliability,
        sigma_target,
        mu_target: t_critical - standard_normal_quantile(reliability) * sigma_target,
    })
}

/// Prior on a single positive parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamPrior {
    Uniform { min: f64, max: f64 },
    Normal { mean: f64, std: f64 },
}

impl ParamPrior {
    pub fn log_density(&self, v: f64) -> f64 {
        if !(v > 0.0) || !v.is_finite() {
            return f64::NEG_INFINITY;
        }
        match *self {
            ParamPrior::Uniform { min, max } => {
                if v >= min && v <= max {
                    -(max - min).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            ParamPrior::Normal { mean, std } => {
                let z = (v - mean) / std;
                -0.5 * z * z - (std * (2.0 * PI).sqrt()).ln()
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ParamPrior::Uniform { min, max } => rng.random_range(min..max),
            ParamPrior::Normal { mean, std } => Normal::new(mean, std).expect("validated prior").sample(rng),
        }
    }

    fn validate(&self, name: &str) -> Result<(), ReliabilityError> {
        let ok = match *self {
            ParamPrior::Uniform { min, max } => min.is_finite() && max.is_finite() && min >= 0.0 && min < max,
            ParamPrior::Normal { mean, std } => mean.is_finite() && std.is_finite() && std > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ReliabilityError::InvalidPrior(format!("{name}: {self:?}")))
        }
    }
}

/// Independent priors on `k` and `ρ·c_p`, with an optional hard cap on `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub k: ParamPrior,
    pub rho_cp: ParamPrior,
    pub k_max: Option<f64>,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self::uniform_over(&ParamRange::default(), Some(1.0))
    }
}

impl PriorSpec {
    pub fn uniform_over(range: &ParamRange, k_max: Option<f64>) -> Self {
        Self {
            k: ParamPrior::Uniform {
                min: range.k.0,
                max: range.k.1,
            },
            rho_cp: ParamPrior::Uniform {
                min: range.rho_cp.0,
                max: range.rho_cp.1,
            },
            k_max,
        }
    }

    pub fn validate(&self) -> Result<(), ReliabilityError> {
        self.k.validate("k")?;
        self.rho_cp.validate("rho_cp")?;
        if let Some(cap) = self.k_max {
            if !(cap > 0.0) {
                return Err(ReliabilityError::InvalidPrior(format!("k_max {cap} must be positive")));
            }
        }
        Ok(())
    }

    pub fn log_prior(&self, mat: &MaterialSample) -> f64 {
        if self.k_max.is_some_and(|cap| mat.k > cap) {
            return f64::NEG_INFINITY;
        }
        self.k.log_density(mat.k) + self.rho_cp.log_density(mat.rho_cp)
    }

    /// Rejection sampling onto the prior support.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> MaterialSample {
        loop {
            let m = MaterialSample::new(self.k.draw(rng), self.rho_cp.draw(rng));
            if self.log_prior(&m) > f64::NEG_INFINITY {
                return m;
            }
        }
    }
}

/// Anything that maps materials to back temperatures in °C.
pub trait BackTemperatureModel: Sync {
    fn back_temperatures(&self, mats: &[MaterialSample]) -> Vec<Result<f64, PredictError>>;
}

impl<T: BackTemperatureModel + ?Sized> BackTemperatureModel for &T {
    fn back_temperatures(&self, mats: &[MaterialSample]) -> Vec<Result<f64, PredictError>> {
        (**self).back_temperatures(mats)
    }
}

impl BackTemperatureModel for SurrogateModel {
    fn back_temperatures(&self, mats: &[MaterialSample]) -> Vec<Result<f64, PredictError>> {
        self.predict_back_temperature(mats)
    }
}

/// Explicit finite-difference back temperatures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdmPredictor {
    pub scenario: ThermalScenario,
}

impl BackTemperatureModel for FdmPredictor {
    fn back_temperatures(&self, mats: &[MaterialSample]) -> Vec<Result<f64, PredictError>> {
        mats.par_iter()
            .map(|m| {
                explicit_back_temperature(&self.scenario, m).map_err(|_| PredictError::InvalidMaterial {
                    k: m.k,
                    rho_cp: m.rho_cp,
                })
            })
            .collect()
    }
}

/// Prior, reliability target and back-temperature predictor.
#[derive(Debug, Clone)]
pub struct PosteriorModel<P> {
    pub target: TargetSpec,
    pub prior: PriorSpec,
    pub predictor: P,
    /// Likelihood width, °C.
    pub sigma_like: f64,
}

impl<P: BackTemperatureModel> PosteriorModel<P> {
    /// Likelihood width defaults to `sigma_target`.
    pub fn new(target: TargetSpec, prior: PriorSpec, predictor: P) -> Self {
        Self {
            sigma_like: target.sigma_target,
            target,
            prior,
            predictor,
        }
    }

    /// Gaussian log-density of a back temperature around `μ_target`.
    pub fn log_likelihood_of_temperature(&self, t_back: f64) -> f64 {
        let s = self.sigma_like;
        let r = self.target.mu_target - t_back;
        -r * r / (2.0 * s * s) - (s * (2.0 * PI).sqrt()).ln()
    }

    pub fn log_likelihood(&self, mat: &MaterialSample) -> Result<f64, PredictError> {
        self.log_likelihood_batch(std::slice::from_ref(mat)).remove(0)
    }

    /// One predictor call for the whole batch.
    pub fn log_likelihood_batch(&self, mats: &[MaterialSample]) -> Vec<Result<f64, PredictError>> {
        self.predictor
            .back_temperatures(mats)
            .into_iter()
            .map(|t| t.map(|t| self.log_likelihood_of_temperature(t)))
            .collect()
    }

    pub fn log_prior(&self, mat: &MaterialSample) -> f64 {
        self.prior.log_prior(mat)
    }

    /// Unnormalized log-posterior; `−∞` outside the prior support.
    pub fn log_posterior(&self, mat: &MaterialSample) -> Result<f64, PredictError> {
        let lp = self.log_prior(mat);
        if lp == f64::NEG_INFINITY {
            return Ok(lp);
        }
        Ok(lp + self.log_likelihood(mat)?)
    }
}

fn to_mat(theta: &[f64]) -> MaterialSample {
    MaterialSample::new(theta[0], theta[1])
}

/// Parameter vector `θ = [k, ρ·c_p]`.
impl<P: BackTemperatureModel> SmcModel for PosteriorModel<P> {
    fn dim(&self) -> usize {
        2
    }

    fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let m = self.prior.sample(rng);
        vec![m.k, m.rho_cp]
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        self.prior.log_prior(&to_mat(theta))
    }

    fn log_likelihood_batch(&self, thetas: &[Vec<f64>]) -> Vec<f64> {
        let mats: Vec<MaterialSample> = thetas.iter().map(|t| to_mat(t)).collect();
        PosteriorModel::log_likelihood_batch(self, &mats)
            .into_iter()
            .map(|r| r.unwrap_or(f64::NAN))
            .collect()
    }
}

/// Explicit-FDM back temperature of every sample, in parallel.
pub fn fdm_back_temperatures(
    samples: &[MaterialSample],
    scenario: &ThermalScenario,
) -> Result<Vec<f64>, ReliabilityError> {
    samples
        .par_iter()
        .enumerate()
        .map(|(index, m)| explicit_back_temperature(scenario, m).map_err(|source| ReliabilityError::Solver { index, source }))
        .collect()
}

/// Fraction of back temperatures at or below `t_critical`.
pub fn reliability_fraction(t_back: &[f64], t_critical: f64) -> f64 {
    t_back.iter().filter(|&&t| t <= t_critical).count() as f64 / t_back.len() as f64
}

/// Fraction of samples whose finite-difference back temperature does not
/// exceed `t_critical`. The surrogate plays no part in this check.
pub fn verify_reliability(
    samples: &[MaterialSample],
    t_critical: f64,
    scenario: &ThermalScenario,
) -> Result<f64, ReliabilityError> {
    if samples.is_empty() {
        return Err(ReliabilityError::EmptyBatch);
    }
    Ok(reliability_fraction(&fdm_back_temperatures(samples, scenario)?, t_critical))
}
