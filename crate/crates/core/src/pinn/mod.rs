//! Physics-informed surrogate for the slab back temperature.
//!
//! The network maps `(x', t', k̂, ĉ)` to the normalized temperature
//! `u ≈ T / T_norm`, where `k̂` and `ĉ` are the conductivity and thermal
//! density min-max scaled over the training range. In normalized coordinates
//! the governing residual is `u_t' − (α·t_final/L²)·u_x'x'` and the boundary
//! conditions are `u_x'(0) = 0` and `u_x'(1) = Q·L/(k·T_norm)`.

mod loss;
mod train;
mod weights;

pub use loss::{LossBatches, LossComponents, LossWeights};
pub use train::{train, Adam, LossRecord, TrainingConfig};
pub use weights::{load_weights, save_weights, WeightsError, WEIGHTS_VERSION};

use crate::autodiff::{AutodiffError, MlpNetwork};
use crate::heatsim::{HeatError, MaterialSample, ThermalScenario};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allowed extrapolation beyond the training range, as a fraction of its width.
pub const EXTRAPOLATION_MARGIN: f64 = 0.1;

/// Network input width: `x'`, `t'`, scaled `k`, scaled `ρ·c_p`.
pub const INPUT_WIDTH: usize = 4;

/// Points per parallel task in batched prediction.
const PREDICT_CHUNK: usize = 128;

#[derive(Debug, Error)]
pub enum PinnError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Heat(#[from] HeatError),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("batch length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("point {index} lies outside the normalized domain [0, 1]")]
    OutsideDomain { index: usize },
    #[error("training produced a non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
}

/// Per-item prediction failure.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum PredictError {
    #[error("material (k = {k}, rho_cp = {rho_cp}) lies beyond the extrapolation margin")]
    OutOfRange { k: f64, rho_cp: f64 },
    #[error("invalid material (k = {k}, rho_cp = {rho_cp})")]
    InvalidMaterial { k: f64, rho_cp: f64 },
}

/// Training bounds for conductivity and thermal density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRange {
    pub k: (f64, f64),
    pub rho_cp: (f64, f64),
}

impl Default for ParamRange {
    fn default() -> Self {
        Self {
            k: (0.1, 1.3),
            rho_cp: (0.8e6, 2.4e6),
        }
    }
}

impl ParamRange {
    pub fn validate(&self) -> Result<(), String> {
        for (name, (lo, hi)) in [("k", self.k), ("rho_cp", self.rho_cp)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                return Err(format!("{name} range ({lo}, {hi}) must satisfy 0 < min < max"));
            }
        }
        Ok(())
    }

    /// Min-max scaled `(k̂, ĉ)`.
    pub fn scale(&self, mat: &MaterialSample) -> [f64; 2] {
        [
            (mat.k - self.k.0) / (self.k.1 - self.k.0),
            (mat.rho_cp - self.rho_cp.0) / (self.rho_cp.1 - self.rho_cp.0),
        ]
    }

    pub fn contains(&self, mat: &MaterialSample) -> bool {
        self.within(mat, 0.0)
    }

    fn within(&self, mat: &MaterialSample, margin: f64) -> bool {
        let [ks, cs] = self.scale(mat);
        let inside = |v: f64| v >= -margin && v <= 1.0 + margin;
        inside(ks) && inside(cs)
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> MaterialSample {
        MaterialSample::new(
            rng.random_range(self.k.0..self.k.1),
            rng.random_range(self.rho_cp.0..self.rho_cp.1),
        )
    }
}

/// A trained (or freshly initialized) surrogate together with the constants
/// needed to interpret its inputs and output.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub net: MlpNetwork,
    pub scenario: ThermalScenario,
    pub param_range: ParamRange,
    pub training_loss_history: Vec<LossRecord>,
}

impl SurrogateModel {
    pub fn new(net: MlpNetwork, scenario: ThermalScenario, param_range: ParamRange) -> Result<Self, PinnError> {
        if net.input_width() != INPUT_WIDTH || net.output_width() != 1 {
            return Err(PinnError::InvalidConfig(format!(
                "surrogate network must be {INPUT_WIDTH} → … → 1, got {:?}",
                net.layer_sizes()
            )));
        }
        scenario.validate()?;
        param_range.validate().map_err(PinnError::InvalidConfig)?;
        Ok(Self {
            net,
            scenario,
            param_range,
            training_loss_history: Vec::new(),
        })
    }

    pub fn network_input(&self, x: f64, t: f64, mat: &MaterialSample) -> [f64; INPUT_WIDTH] {
        let [ks, cs] = self.param_range.scale(mat);
        [x, t, ks, cs]
    }

    /// Normalized initial temperature `T_init / T_norm`.
    pub fn initial_value(&self) -> f64 {
        self.scenario.t_init / self.scenario.t_norm
    }

    /// Temperature in °C at normalized `(x', t')`.
    pub fn temperature(&self, x: f64, t: f64, mat: &MaterialSample) -> Result<f64, PinnError> {
        let u = self.net.forward(&self.network_input(x, t, mat))?;
        Ok(u * self.scenario.t_norm)
    }

    /// Temperatures in °C on the tensor grid `ts × xs` (row-major by time).
    pub fn predict_field(&self, mat: &MaterialSample, xs: &[f64], ts: &[f64]) -> Result<Vec<f64>, PinnError> {
        let mut inputs = Vec::with_capacity(xs.len() * ts.len() * INPUT_WIDTH);
        for &t in ts {
            for &x in xs {
                inputs.extend_from_slice(&self.network_input(x, t, mat));
            }
        }
        let u = self.net.forward_batch(&inputs)?;
        Ok(u.into_iter().map(|v| v * self.scenario.t_norm).collect())
    }

    /// Back temperature `T(x' = 0, t' = 1)` in °C for every material.
    ///
    /// Items beyond the extrapolation margin fail individually; items outside
    /// the training range but inside the margin are predicted with a warning.
    pub fn predict_back_temperature(&self, mats: &[MaterialSample]) -> Vec<Result<f64, PredictError>> {
        let mut out: Vec<Result<f64, PredictError>> = Vec::with_capacity(mats.len());
        let mut inputs = Vec::with_capacity(mats.len() * INPUT_WIDTH);
        let mut slots = Vec::with_capacity(mats.len());
        for (i, mat) in mats.iter().enumerate() {
            let (k, rho_cp) = (mat.k, mat.rho_cp);
            if mat.validate().is_err() {
                out.push(Err(PredictError::InvalidMaterial { k, rho_cp }));
            } else if !self.param_range.within(mat, EXTRAPOLATION_MARGIN) {
                out.push(Err(PredictError::OutOfRange { k, rho_cp }));
            } else {
                if !self.param_range.contains(mat) {
                    log::warn!("material {i} (k = {k}, rho_cp = {rho_cp}) extrapolates the training range");
                }
                inputs.extend_from_slice(&self.network_input(0.0, 1.0, mat));
                slots.push(i);
                out.push(Ok(0.0));
            }
        }
        let u: Vec<f64> = if inputs.len() <= PREDICT_CHUNK * INPUT_WIDTH {
            self.net.forward_batch(&inputs).expect("surrogate input width checked at construction")
        } else {
            inputs
                .par_chunks(PREDICT_CHUNK * INPUT_WIDTH)
                .flat_map_iter(|c| self.net.forward_batch(c).expect("surrogate input width checked at construction"))
                .collect()
        };
        for (slot, u) in slots.into_iter().zip(u) {
            out[slot] = Ok(u * self.scenario.t_norm);
        }
        out
    }

    pub fn physics_loss(&self, mats: &[MaterialSample], points: &[(f64, f64)]) -> Result<f64, PinnError> {
        let batches = LossBatches::physics_only(mats, points)?;
        Ok(self.loss_components(&batches)?.physics)
    }

    pub fn initial_loss(&self, mats: &[MaterialSample], xs: &[f64]) -> Result<f64, PinnError> {
        let batches = LossBatches::initial_only(mats, xs)?;
        Ok(self.loss_components(&batches)?.initial)
    }

    pub fn boundary_loss(&self, mats: &[MaterialSample], ts: &[f64]) -> Result<f64, PinnError> {
        let batches = LossBatches::boundary_only(mats, ts)?;
        Ok(self.loss_components(&batches)?.boundary)
    }

    /// `α₁·L_physics + α₂·L_initial + α₃·L_boundary`.
    pub fn total_loss(&self, batches: &LossBatches, weights: &LossWeights) -> Result<f64, PinnError> {
        Ok(self.loss_components(batches)?.weighted(weights))
    }
}

/// Root-mean-square and maximum absolute difference between two equally
/// sized fields, plus the flat index of the maximum.
pub fn field_errors(a: &[f64], b: &[f64]) -> (f64, f64, usize) {
    assert_eq!(a.len(), b.len());
    let mut sq = 0.0;
    let mut max = 0.0;
    let mut arg = 0;
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let d = (x - y).abs();
        sq += d * d;
        if d > max {
            max = d;
            arg = i;
        }
    }
    ((sq / a.len() as f64).sqrt(), max, arg)
}
