use super::{scaled_proposal, weighted_covariance, SamplerError};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Symmetric Gaussian random-walk proposal `θ* ~ N(θ, Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProposal {
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl GaussianProposal {
    pub fn new(cov: DMatrix<f64>) -> Result<Self, SamplerError> {
        if !cov.is_square() || cov.iter().any(|v| !v.is_finite()) {
            return Err(SamplerError::InvalidCovariance);
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(f64::MIN_POSITIVE) {
            return Err(SamplerError::InvalidCovariance);
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or(SamplerError::InvalidCovariance)?
            .l();
        Ok(Self { cov, chol })
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self, SamplerError> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(variances)))
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn propose<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| theta[i] + (0..=i).map(|j| self.chol[(i, j)] * z[j]).sum::<f64>())
            .collect()
    }
}

/// Current state of one Metropolis–Hastings chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub log_post: f64,
    pub proposal: GaussianProposal,
    pub accepted: usize,
    pub steps: usize,
}

impl ChainState {
    pub fn new(theta: Vec<f64>, log_post: f64, proposal: GaussianProposal) -> Result<Self, SamplerError> {
        if proposal.dim() != theta.len() {
            return Err(SamplerError::InvalidConfig(format!(
                "proposal dimension {} does not match parameter dimension {}",
                proposal.dim(),
                theta.len()
            )));
        }
        if !log_post.is_finite() {
            return Err(SamplerError::InvalidInit);
        }
        Ok(Self {
            theta,
            log_post,
            proposal,
            accepted: 0,
            steps: 0,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }

    /// One propose/accept step. Accepts when `log r ≥ ln u`, `u ~ U(0, 1)`.
    pub fn step<F, R>(&mut self, logpost: &F, rng: &mut R) -> Result<bool, SamplerError>
    where
        F: Fn(&[f64]) -> f64 + ?Sized,
        R: Rng + ?Sized,
    {
        let candidate = self.proposal.propose(&self.theta, rng);
        let lp = logpost(&candidate);
        let u: f64 = rng.random();
        self.steps += 1;
        if lp.is_nan() {
            return Err(SamplerError::NanLogPosterior { step: self.steps - 1 });
        }
        let accept = lp > f64::NEG_INFINITY && lp - self.log_post >= u.ln();
        if accept {
            self.theta = candidate;
            self.log_post = lp;
            self.accepted += 1;
        }
        Ok(accept)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MhConfig {
    pub n_steps: usize,
    /// Re-estimate the proposal from the chain history every this many steps.
    pub adapt_interval: Option<usize>,
    pub seed: u64,
}

impl Default for MhConfig {
    fn default() -> Self {
        Self {
            n_steps: 1000,
            adapt_interval: Some(200),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MhRun {
    /// State after every step, burn-in included.
    pub samples: Vec<Vec<f64>>,
    pub log_posts: Vec<f64>,
    pub acceptance_rate: f64,
    pub final_covariance: DMatrix<f64>,
}

/// Random-walk Metropolis–Hastings from `init`.
///
/// With adaptation enabled the proposal is replaced every `adapt_interval`
/// steps by `(2.38²/d)·Cov(history)` whenever that matrix is positive definite.
pub fn mh_run<F>(logpost: F, init: &[f64], cov0: DMatrix<f64>, config: &MhConfig) -> Result<MhRun, SamplerError>
where
    F: Fn(&[f64]) -> f64,
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut chain = ChainState::new(init.to_vec(), logpost(init), GaussianProposal::new(cov0)?)?;
    let mut samples = Vec::with_capacity(config.n_steps);
    let mut log_posts = Vec::with_capacity(config.n_steps);
    for step in 0..config.n_steps {
        chain.step(&logpost, &mut rng)?;
        samples.push(chain.theta.clone());
        log_posts.push(chain.log_post);
        if let Some(every) = config.adapt_interval {
            if every > 0 && (step + 1) % every == 0 {
                let w = vec![1.0; samples.len()];
                let cov = scaled_proposal(&weighted_covariance(&samples, &w));
                if let Ok(p) = GaussianProposal::new(cov) {
                    chain.proposal = p;
                }
            }
        }
    }
    Ok(MhRun {
        samples,
        log_posts,
        acceptance_rate: chain.acceptance_rate(),
        final_covariance: chain.proposal.covariance().clone(),
    })
}

/// Independent chains from several starting points; chain `i` uses `seed + i`.
pub fn run_chains<F>(
    logpost: F,
    inits: &[Vec<f64>],
    cov0: DMatrix<f64>,
    config: &MhConfig,
) -> Result<Vec<MhRun>, SamplerError>
where
    F: Fn(&[f64]) -> f64,
{
    inits
        .iter()
        .enumerate()
        .map(|(i, init)| {
            let cfg = MhConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..config.clone()
            };
            mh_run(&logpost, init, cov0.clone(), &cfg)
        })
        .collect()
}

/// Potential scale reduction factor `R̂` per coordinate.
pub fn gelman_rubin(chains: &[Vec<Vec<f64>>]) -> Vec<f64> {
    let m = chains.len();
    let n = chains.iter().map(Vec::len).min().unwrap_or(0);
    if m < 2 || n < 2 {
        return Vec::new();
    }
    let d = chains[0][0].len();
    (0..d)
        .map(|k| {
            let means: Vec<f64> = chains
                .iter()
                .map(|c| c[..n].iter().map(|s| s[k]).sum::<f64>() / n as f64)
                .collect();
            let vars: Vec<f64> = chains
                .iter()
                .zip(&means)
                .map(|(c, mu)| c[..n].iter().map(|s| (s[k] - mu).powi(2)).sum::<f64>() / (n - 1) as f64)
                .collect();
            let grand = means.iter().sum::<f64>() / m as f64;
            let b = n as f64 / (m - 1) as f64 * means.iter().map(|mu| (mu - grand).powi(2)).sum::<f64>();
            let w = vars.iter().sum::<f64>() / m as f64;
            let var_plus = (n - 1) as f64 / n as f64 * w + b / n as f64;
            (var_plus / w).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_spd_covariance() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(GaussianProposal::new(bad), Err(SamplerError::InvalidCovariance));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert_eq!(GaussianProposal::new(asym), Err(SamplerError::InvalidCovariance));
    }

    #[test]
    fn nan_logpost_aborts_with_step() {
        let cfg = MhConfig {
            n_steps: 10,
            adapt_interval: None,
            seed: 1,
        };
        let calls = std::cell::Cell::new(0);
        let err = mh_run(
            |_| {
                calls.set(calls.get() + 1);
                if calls.get() > 4 {
                    f64::NAN
                } else {
                    0.0
                }
            },
            &[0.0],
            DMatrix::identity(1, 1),
            &cfg,
        )
        .unwrap_err();
        assert_eq!(err, SamplerError::NanLogPosterior { step: 3 });
    }

    #[test]
    fn never_accepts_outside_support() {
        let cfg = MhConfig {
            n_steps: 500,
            adapt_interval: None,
            seed: 2,
        };
        let run = mh_run(
            |t| if t[0] < 0.0 { f64::NEG_INFINITY } else { 0.0 },
            &[0.5],
            DMatrix::identity(1, 1),
            &cfg,
        )
        .unwrap();
        assert!(run.samples.iter().all(|s| s[0] >= 0.0));
        assert!(run.acceptance_rate > 0.0 && run.acceptance_rate < 1.0);
    }

    #[test]
    fn gelman_rubin_near_one_for_identical_distributions() {
        let chains: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|c| (0..400).map(|i| vec![((i * 7 + c * 13) % 50) as f64]).collect())
            .collect();
        let r = gelman_rubin(&chains);
        assert!((r[0] - 1.0).abs() < 0.05, "{r:?}");
    }
}
