//! Metropolis–Hastings chains and likelihood-tempered Sequential Monte Carlo.
//!
//! Both samplers work on plain `Vec<f64>` parameter vectors and log-space
//! densities.

mod mh;
mod smc;

pub use mh::{gelman_rubin, mh_run, run_chains, ChainState, GaussianProposal, MhConfig, MhRun};
pub use smc::{
    ess, next_phi, resample_and_mutate, reweight, smc_run, systematic_resample, MutationOutcome,
    Particle, ParticleEnsemble, SmcConfig, SmcModel, SmcRun, StageRecord,
};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("log-posterior is NaN at step {step}")]
    NanLogPosterior { step: usize },
    #[error("log-posterior is not finite at the initial point")]
    InvalidInit,
    #[error("proposal covariance is not symmetric positive definite")]
    InvalidCovariance,
    #[error("all weights are zero")]
    ZeroWeights,
    #[error("all particle weights underflowed at stage {stage}")]
    DegenerateStage { stage: usize },
    #[error("density evaluation failed for particle {particle} at stage {stage}")]
    ParticleFailure { particle: usize, stage: usize },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
}

/// Independent generator for `(seed, stage, index)`.
///
/// Particles draw from their own stream, so serial and parallel runs see the
/// same randomness per particle.
pub fn stream_rng(seed: u64, stage: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stage)));
    rng.set_stream(index);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Weighted sample covariance of `points`.
pub fn weighted_covariance(points: &[Vec<f64>], weights: &[f64]) -> DMatrix<f64> {
    let d = points.first().map_or(0, Vec::len);
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; d];
    for (p, w) in points.iter().zip(weights) {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += w * v / total;
        }
    }
    let mut cov = DMatrix::zeros(d, d);
    for (p, w) in points.iter().zip(weights) {
        for i in 0..d {
            for j in 0..=i {
                cov[(i, j)] += w / total * (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(j, i)] = cov[(i, j)];
        }
    }
    cov
}

/// `(2.38² / d) · cov`, the standard random-walk scaling.
pub fn scaled_proposal(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows().max(1) as f64;
    cov * (2.38 * 2.38 / d)
}
