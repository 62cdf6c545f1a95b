use super::{scaled_proposal, stream_rng, weighted_covariance, GaussianProposal, SamplerError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// Prior and likelihood of a tempered SMC target `π_φ ∝ L(θ)^φ · π(θ)`.
pub trait SmcModel: Sync {
    fn dim(&self) -> usize;

    /// A draw with finite `log_prior`.
    fn sample_prior(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    /// `−∞` outside the support.
    fn log_prior(&self, theta: &[f64]) -> f64;

    /// NaN marks an evaluation failure.
    fn log_likelihood_batch(&self, thetas: &[Vec<f64>]) -> Vec<f64>;

    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        self.log_likelihood_batch(&[theta.to_vec()])[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub theta: Vec<f64>,
    /// Normalized weight.
    pub weight: f64,
    pub log_like: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub particles: Vec<Particle>,
    /// Tempering exponent.
    pub phi: f64,
    pub ess: f64,
    pub stage: usize,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn log_likes(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_like).collect()
    }

    pub fn thetas(&self) -> Vec<Vec<f64>> {
        self.particles.iter().map(|p| p.theta.clone()).collect()
    }

    /// Weighted mean of each coordinate.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.particles.first().map_or(0, |p| p.theta.len());
        let mut m = vec![0.0; d];
        for p in &self.particles {
            for (mi, v) in m.iter_mut().zip(&p.theta) {
                *mi += p.weight * v;
            }
        }
        m
    }

    /// Weighted standard deviation of each coordinate.
    pub fn std(&self) -> Vec<f64> {
        let mean = self.mean();
        let mut var = vec![0.0; mean.len()];
        for p in &self.particles {
            for ((vi, v), m) in var.iter_mut().zip(&p.theta).zip(&mean) {
                *vi += p.weight * (v - m) * (v - m);
            }
        }
        var.into_iter().map(f64::sqrt).collect()
    }

    fn set_weights(&mut self, w: &[f64]) -> Result<(), SamplerError> {
        for (p, wi) in self.particles.iter_mut().zip(w) {
            p.weight = *wi;
        }
        self.ess = ess(w)?;
        Ok(())
    }
}

/// Effective sample size `1 / Σw²` of normalized weights.
pub fn ess(weights: &[f64]) -> Result<f64, SamplerError> {
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if sum_sq == 0.0 || !sum_sq.is_finite() {
        return Err(SamplerError::ZeroWeights);
    }
    Ok(1.0 / sum_sq)
}

/// `wᵢ ∝ wᵢ·exp(Δφ·ℓᵢ)`, normalized in log space.
pub fn reweight(weights: &[f64], log_likes: &[f64], delta_phi: f64) -> Result<Vec<f64>, SamplerError> {
    assert_eq!(weights.len(), log_likes.len());
    if !(delta_phi >= 0.0) {
        return Err(SamplerError::InvalidConfig(format!("delta_phi {delta_phi} must be ≥ 0")));
    }
    if delta_phi == 0.0 {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(SamplerError::ZeroWeights);
        }
        return Ok(weights.iter().map(|w| w / total).collect());
    }
    let log_w: Vec<f64> = weights
        .iter()
        .zip(log_likes)
        .map(|(&w, &l)| {
            if w <= 0.0 {
                f64::NEG_INFINITY
            } else {
                w.ln() + delta_phi * l
            }
        })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return Err(SamplerError::ZeroWeights);
    }
    let unnorm: Vec<f64> = log_w.iter().map(|lw| (lw - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|u| u / total).collect())
}

/// Largest `Δφ ∈ (0, 1 − φ]` whose reweighted ESS stays at or above
/// `ess_target`, by 30 bisection steps. Returns `1 − φ` when the full step
/// already satisfies the target, and the smallest bisection step when no
/// step does.
pub fn next_phi(weights: &[f64], log_likes: &[f64], phi: f64, ess_target: f64) -> f64 {
    let full = 1.0 - phi;
    let ess_at = |d: f64| reweight(weights, log_likes, d).and_then(|w| ess(&w)).unwrap_or(0.0);
    if ess_at(full) >= ess_target {
        return full;
    }
    let (mut lo, mut hi) = (0.0, full);
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if ess_at(mid) >= ess_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo > 0.0 {
        lo
    } else {
        full * 0.5f64.powi(30)
    }
}

/// Systematic resampling: ancestor indices for offset `u ∈ [0, 1)`.
///
/// Particle `i` receives either `⌊N·wᵢ⌋` or `⌈N·wᵢ⌉` copies.
pub fn systematic_resample(weights: &[f64], u: f64) -> Vec<usize> {
    let n = weights.len();
    let mut out = Vec::with_capacity(n);
    let scale = n as f64;
    let mut cum = 0.0;
    let mut i = 0;
    // positions and cumulative weights both in units of 1/N
    for j in 0..n {
        let pos = u + j as f64;
        while i < n - 1 && cum + scale * weights[i] <= pos {
            cum += scale * weights[i];
            i += 1;
        }
        out.push(i);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationOutcome {
    pub ensemble: ParticleEnsemble,
    /// `None` when no mutation steps were taken.
    pub acceptance_rate: Option<f64>,
}

fn tempered(log_prior: f64, phi: f64, log_like: f64) -> f64 {
    if phi == 0.0 {
        log_prior
    } else {
        log_prior + phi * log_like
    }
}

/// Systematic resampling to equal weights followed by `mutation_steps`
/// Metropolis–Hastings moves per particle targeting `π_φ`.
///
/// The proposal covariance is `(2.38²/d)` times the weighted ensemble
/// covariance before resampling, frozen for the whole stage. Particle `i`
/// draws from stream `(seed, stage, i)`.
pub fn resample_and_mutate<M: SmcModel + ?Sized>(
    ensemble: &ParticleEnsemble,
    model: &M,
    mutation_steps: usize,
    seed: u64,
) -> Result<MutationOutcome, SamplerError> {
    let n = ensemble.len();
    let stage = ensemble.stage;
    let phi = ensemble.phi;
    let weights = ensemble.weights();

    let mut stage_rng = stream_rng(seed, stage as u64, u64::MAX);
    let ancestors = systematic_resample(&weights, stage_rng.random());

    let proposal = if mutation_steps > 0 {
        Some(stage_proposal(ensemble)?)
    } else {
        None
    };

    let moved: Vec<Result<(Particle, usize), SamplerError>> = ancestors
        .par_iter()
        .enumerate()
        .map(|(i, &a)| {
            let src = &ensemble.particles[a];
            let mut theta = src.theta.clone();
            let mut log_like = src.log_like;
            let mut accepted = 0;
            if let Some(prop) = &proposal {
                let mut rng = stream_rng(seed, stage as u64, i as u64);
                let mut cur = tempered(model.log_prior(&theta), phi, log_like);
                for _ in 0..mutation_steps {
                    let cand = prop.propose(&theta, &mut rng);
                    let u: f64 = rng.random();
                    let lp = model.log_prior(&cand);
                    if lp.is_nan() {
                        return Err(SamplerError::ParticleFailure { particle: i, stage });
                    }
                    if lp == f64::NEG_INFINITY {
                        continue;
                    }
                    let ll = model.log_likelihood(&cand);
                    if ll.is_nan() {
                        return Err(SamplerError::ParticleFailure { particle: i, stage });
                    }
                    let post = tempered(lp, phi, ll);
                    if post > f64::NEG_INFINITY && post - cur >= u.ln() {
                        theta = cand;
                        log_like = ll;
                        cur = post;
                        accepted += 1;
                    }
                }
            }
            Ok((
                Particle {
                    theta,
                    weight: 1.0 / n as f64,
                    log_like,
                },
                accepted,
            ))
        })
        .collect();

    let mut particles = Vec::with_capacity(n);
    let mut accepted = 0;
    for r in moved {
        let (p, a) = r?;
        particles.push(p);
        accepted += a;
    }
    let acceptance_rate = (mutation_steps > 0).then(|| accepted as f64 / (n * mutation_steps) as f64);
    Ok(MutationOutcome {
        ensemble: ParticleEnsemble {
            particles,
            phi,
            ess: n as f64,
            stage,
        },
        acceptance_rate,
    })
}

fn stage_proposal(ensemble: &ParticleEnsemble) -> Result<GaussianProposal, SamplerError> {
    let mut cov = scaled_proposal(&weighted_covariance(&ensemble.thetas(), &ensemble.weights()));
    let d = cov.nrows();
    // relative jitter keeps a collapsed coordinate from breaking the factorization
    for i in 0..d {
        let v = cov[(i, i)];
        cov[(i, i)] = v + 1e-10 * v.abs().max(f64::MIN_POSITIVE);
    }
    GaussianProposal::new(cov.clone()).or_else(|_| {
        let diag: Vec<f64> = (0..d).map(|i| cov[(i, i)].max(f64::MIN_POSITIVE)).collect();
        GaussianProposal::diagonal(&diag)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmcConfig {
    pub n_particles: usize,
    /// Resampling threshold and tempering target, as a fraction of `N`.
    pub ess_threshold_ratio: f64,
    pub mutation_steps: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
    pub max_stages: usize,
}

impl Default for SmcConfig {
    fn default() -> Self {
        Self {
            n_particles: 10_000,
            ess_threshold_ratio: 0.5,
            mutation_steps: 5,
            seed: 0,
            workers: None,
            max_stages: 10_000,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n_particles < 2 {
            return Err(SamplerError::InvalidConfig("need at least 2 particles".into()));
        }
        if !(self.ess_threshold_ratio > 0.0 && self.ess_threshold_ratio <= 1.0) {
            return Err(SamplerError::InvalidConfig(format!(
                "ess_threshold_ratio {} must lie in (0, 1]",
                self.ess_threshold_ratio
            )));
        }
        if self.workers == Some(0) {
            return Err(SamplerError::InvalidConfig("workers must be positive".into()));
        }
        Ok(())
    }
}

/// One tempering stage as reported to the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub phi: f64,
    /// ESS after reweighting, before any resampling.
    pub ess: f64,
    pub resampled: bool,
    pub acceptance_rate: Option<f64>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct SmcRun {
    pub ensemble: ParticleEnsemble,
    pub stages: Vec<StageRecord>,
    pub wall_time_s: f64,
}

/// Tempered SMC from the prior (`φ = 0`) to the posterior (`φ = 1`).
///
/// Each stage picks `Δφ` with [`next_phi`] at `ess_threshold_ratio·N`,
/// reweights, and resamples/mutates once the ESS reaches the threshold. A
/// final resample-and-mutate at `φ = 1` runs only if the weights are still
/// unequal, so the returned particles carry equal weights.
pub fn smc_run<M: SmcModel + ?Sized>(model: &M, config: &SmcConfig) -> Result<SmcRun, SamplerError> {
    config.validate()?;
    match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| SamplerError::InvalidConfig(e.to_string()))?
            .install(|| smc_inner(model, config)),
        None => smc_inner(model, config),
    }
}

const LIKELIHOOD_CHUNK: usize = 1024;

fn smc_inner<M: SmcModel + ?Sized>(model: &M, config: &SmcConfig) -> Result<SmcRun, SamplerError> {
    let start = Instant::now();
    let n = config.n_particles;
    let threshold = config.ess_threshold_ratio * n as f64;

    let thetas: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| model.sample_prior(&mut stream_rng(config.seed, u64::MAX, i as u64)))
        .collect();
    let log_likes: Vec<f64> = thetas
        .par_chunks(LIKELIHOOD_CHUNK)
        .flat_map_iter(|c| model.log_likelihood_batch(c))
        .collect();
    if let Some(particle) = log_likes.iter().position(|l| l.is_nan()) {
        return Err(SamplerError::ParticleFailure { particle, stage: 0 });
    }
    let mut ens = ParticleEnsemble {
        particles: thetas
            .into_iter()
            .zip(log_likes)
            .map(|(theta, log_like)| Particle {
                theta,
                weight: 1.0 / n as f64,
                log_like,
            })
            .collect(),
        phi: 0.0,
        ess: n as f64,
        stage: 0,
    };
    let mut stages = vec![StageRecord {
        stage: 0,
        phi: 0.0,
        ess: n as f64,
        resampled: false,
        acceptance_rate: None,
        elapsed_s: start.elapsed().as_secs_f64(),
    }];

    while ens.phi < 1.0 {
        let stage = ens.stage + 1;
        if stage > config.max_stages {
            return Err(SamplerError::InvalidConfig(format!(
                "tempering did not reach φ = 1 within {} stages",
                config.max_stages
            )));
        }
        let weights = ens.weights();
        let log_likes = ens.log_likes();
        let step = next_phi(&weights, &log_likes, ens.phi, threshold);
        let new_phi = if ens.phi + step >= 1.0 - 1e-12 { 1.0 } else { ens.phi + step };
        let limited = new_phi < 1.0;
        let w = reweight(&weights, &log_likes, new_phi - ens.phi).map_err(|e| match e {
            SamplerError::ZeroWeights => SamplerError::DegenerateStage { stage },
            other => other,
        })?;
        ens.set_weights(&w)
            .map_err(|_| SamplerError::DegenerateStage { stage })?;
        ens.phi = new_phi;
        ens.stage = stage;
        let ess_after = ens.ess;

        // a bisection-limited step has driven the ESS onto the threshold
        let unequal_at_end = new_phi == 1.0 && ess_after < n as f64 * (1.0 - 1e-9);
        let resample = limited || ess_after < threshold || unequal_at_end;
        let mut acceptance_rate = None;
        if resample {
            let out = resample_and_mutate(&ens, model, config.mutation_steps, config.seed)?;
            ens = out.ensemble;
            acceptance_rate = out.acceptance_rate;
        }
        stages.push(StageRecord {
            stage,
            phi: new_phi,
            ess: ess_after,
            resampled: resample,
            acceptance_rate,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        log::debug!("stage {stage}: phi {new_phi:.6} ess {ess_after:.1}");
    }
    Ok(SmcRun {
        ensemble: ens,
        stages,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
