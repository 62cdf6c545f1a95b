use super::{LossBatches, LossWeights, ParamRange, PinnError, SurrogateModel, INPUT_WIDTH};
use crate::autodiff::{Activation, MlpNetwork};
use crate::heatsim::ThermalScenario;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Physics collocation points.
    pub n_grid: usize,
    /// Initial plus boundary points, split evenly between the two.
    pub n_ib: usize,
    pub loss_weights: LossWeights,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub param_range: ParamRange,
    pub hidden_layers: Vec<usize>,
    /// Redraw every training point at the start of each epoch.
    pub resample_each_epoch: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            n_grid: 100,
            n_ib: 100,
            loss_weights: LossWeights::default(),
            learning_rate: 0.006,
            epochs: 2000,
            seed: 0,
            param_range: ParamRange::default(),
            hidden_layers: vec![30, 30, 30],
            resample_each_epoch: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), PinnError> {
        let bad = |m: String| Err(PinnError::InvalidConfig(m));
        if self.n_grid < 1 || self.n_ib < 2 {
            return bad(format!("need n_grid ≥ 1 and n_ib ≥ 2, got {} and {}", self.n_grid, self.n_ib));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        let w = self.loss_weights;
        if [w.physics, w.initial, w.boundary].iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return bad("loss weights must be non-negative".into());
        }
        if self.hidden_layers.contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        self.param_range.validate().map_err(PinnError::InvalidConfig)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![INPUT_WIDTH];
        s.extend_from_slice(&self.hidden_layers);
        s.push(1);
        s
    }

    fn draw_batches<R: Rng + ?Sized>(&self, rng: &mut R) -> LossBatches {
        let range = &self.param_range;
        let n_init = self.n_ib / 2;
        let n_bound = self.n_ib - n_init;
        LossBatches {
            physics: (0..self.n_grid)
                .map(|_| (range.sample(rng), rng.random::<f64>(), rng.random::<f64>()))
                .collect(),
            initial: (0..n_init).map(|_| (range.sample(rng), rng.random::<f64>())).collect(),
            boundary: (0..n_bound).map(|_| (range.sample(rng), rng.random::<f64>())).collect(),
        }
    }
}

/// Loss values recorded before the update of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub total: f64,
    pub physics: f64,
    pub initial: f64,
    pub boundary: f64,
}

/// Bias-corrected Adam.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Trains a surrogate with full-batch Adam on the weighted physics, initial
/// and boundary losses. Materials are drawn uniformly over the training range.
pub fn train(config: &TrainingConfig, scenario: &ThermalScenario) -> Result<SurrogateModel, PinnError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let net = MlpNetwork::xavier(&config.layer_sizes(), Activation::Softplus, &mut rng)?;
    let mut model = SurrogateModel::new(net, *scenario, config.param_range)?;
    let mut batches = config.draw_batches(&mut rng);
    let mut adam = Adam::new(model.net.n_params(), config.learning_rate);
    let mut params = model.net.params();

    for epoch in 0..config.epochs {
        if config.resample_each_epoch && epoch > 0 {
            batches = config.draw_batches(&mut rng);
        }
        let (comps, grad) = model
            .loss_and_gradient(&batches, &config.loss_weights)
            .map_err(|e| match e {
                PinnError::Autodiff(_) => PinnError::Diverged { epoch },
                other => other,
            })?;
        let total = comps.weighted(&config.loss_weights);
        if !total.is_finite() {
            return Err(PinnError::Diverged { epoch });
        }
        model.training_loss_history.push(LossRecord {
            total,
            physics: comps.physics,
            initial: comps.initial,
            boundary: comps.boundary,
        });
        adam.step(&mut params, &grad.to_flat());
        model.net.set_params(&params)?;
        if epoch % 200 == 0 {
            log::debug!("epoch {epoch}: loss {total:.3e}");
        }
    }
    Ok(model)
}
