//! Exact derivatives for small fully connected networks.
//!
//! Input derivatives (`∂u/∂x`, `∂u/∂t`, `∂²u/∂x²`) are propagated forward as
//! four channels per unit. Parameter gradients of any loss built from those
//! quantities are obtained by reverse accumulation through the same
//! four-channel forward pass, which includes the mixed second-order terms.
//! Inputs are laid out as `(x, t, extra…)`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of the space input.
pub const X_INPUT: usize = 0;
/// Index of the time input.
pub const T_INPUT: usize = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("non-finite loss at batch index {index}")]
    NonFiniteLoss { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Softplus,
    Identity,
}

impl Activation {
    /// Value and first three derivatives at `a`.
    #[inline]
    fn eval(self, a: f64) -> [f64; 4] {
        match self {
            Activation::Identity => [a, 1.0, 0.0, 0.0],
            Activation::Softplus => {
                // one exponential serves both softplus and the logistic slope
                let e = (-a.abs()).exp();
                let s = a.max(0.0) + e.ln_1p();
                let p = if a >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
                let q = p * (1.0 - p);
                [s, p, q, q * (1.0 - 2.0 * p)]
            }
        }
    }

    #[inline]
    fn value(self, a: f64) -> f64 {
        match self {
            Activation::Identity => a,
            Activation::Softplus => softplus(a),
        }
    }
}

/// `ln(1 + eᵃ)`, linear above 30 and exponential below −30.
#[inline]
pub fn softplus(a: f64) -> f64 {
    if a > 30.0 {
        a
    } else if a < -30.0 {
        a.exp()
    } else {
        a.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Multilayer perceptron with a shared hidden activation and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    /// Per layer, row-major `out × in`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    hidden: Activation,
}

impl MlpNetwork {
    /// All-zero network.
    pub fn zeros(layer_sizes: &[usize], hidden: Activation) -> Result<Self, AutodiffError> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(AutodiffError::InvalidNetwork(format!(
                "layer sizes {layer_sizes:?} need at least two non-zero entries"
            )));
        }
        let weights = layer_sizes
            .windows(2)
            .map(|w| vec![0.0; w[0] * w[1]])
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden,
        })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn xavier<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        hidden: Activation,
        rng: &mut R,
    ) -> Result<Self, AutodiffError> {
        let mut net = Self::zeros(layer_sizes, hidden)?;
        for (l, w) in net.weights.iter_mut().enumerate() {
            let limit = (6.0 / (layer_sizes[l] + layer_sizes[l + 1]) as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-limit..limit);
            }
        }
        Ok(net)
    }

    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        hidden: Activation,
    ) -> Result<Self, AutodiffError> {
        let shape = Self::zeros(&layer_sizes, hidden)?;
        if weights.len() != shape.weights.len() || biases.len() != shape.biases.len() {
            return Err(AutodiffError::InvalidNetwork("layer count mismatch".into()));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.len() != shape.weights[l].len() || b.len() != shape.biases[l].len() {
                return Err(AutodiffError::InvalidNetwork(format!(
                    "layer {l} has incompatible dimensions"
                )));
            }
        }
        if weights.iter().chain(&biases).flatten().any(|v| !v.is_finite()) {
            return Err(AutodiffError::InvalidNetwork("non-finite parameter".into()));
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            hidden,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.weights[layer]
    }

    pub fn biases_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.biases[layer]
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Flattened parameters: per layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<(), AutodiffError> {
        if flat.len() != self.n_params() {
            return Err(AutodiffError::DimensionMismatch {
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            Activation::Identity
        } else {
            self.hidden
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<(), AutodiffError> {
        if input.len() != self.input_width() {
            return Err(AutodiffError::DimensionMismatch {
                expected: self.input_width(),
                got: input.len(),
            });
        }
        Ok(())
    }

    fn check_scalar_output(&self) -> Result<(), AutodiffError> {
        if self.output_width() != 1 {
            return Err(AutodiffError::DimensionMismatch {
                expected: 1,
                got: self.output_width(),
            });
        }
        Ok(())
    }

    /// Scalar network output for one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<f64, AutodiffError> {
        self.check_input(input)?;
        self.check_scalar_output()?;
        let mut h = input.to_vec();
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let act = self.activation(l);
            let w = &self.weights[l];
            h = (0..n_out)
                .map(|j| {
                    let row = &w[j * n_in..(j + 1) * n_in];
                    let a = self.biases[l][j] + row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
                    act.value(a)
                })
                .collect();
        }
        Ok(h[0])
    }

    /// Scalar outputs for a row-major `m × input_width` batch.
    ///
    /// Activations are kept unit-major so the inner loop runs over the batch.
    /// Every item goes through the same arithmetic regardless of batch size.
    pub fn forward_batch(&self, inputs: &[f64]) -> Result<Vec<f64>, AutodiffError> {
        self.check_scalar_output()?;
        let n_in0 = self.input_width();
        if inputs.len() % n_in0 != 0 {
            return Err(AutodiffError::DimensionMismatch {
                expected: n_in0,
                got: inputs.len() % n_in0,
            });
        }
        let m = inputs.len() / n_in0;
        // transpose to unit-major
        let mut h = vec![0.0; inputs.len()];
        for p in 0..m {
            for i in 0..n_in0 {
                h[i * m + p] = inputs[p * n_in0 + i];
            }
        }
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let act = self.activation(l);
            let w = &self.weights[l];
            let mut next = vec![0.0; n_out * m];
            for j in 0..n_out {
                let out = &mut next[j * m..(j + 1) * m];
                out.fill(self.biases[l][j]);
                for i in 0..n_in {
                    let wji = w[j * n_in + i];
                    for (o, x) in out.iter_mut().zip(&h[i * m..(i + 1) * m]) {
                        *o += wji * x;
                    }
                }
                if act != Activation::Identity {
                    out.iter_mut().for_each(|v| *v = act.value(*v));
                }
            }
            h = next;
        }
        Ok(h)
    }

    /// Value, `∂u/∂x`, `∂u/∂t` and `∂²u/∂x²` at `(x, t, extra…)`.
    pub fn input_derivatives(
        &self,
        x: f64,
        t: f64,
        extra: &[f64],
    ) -> Result<InputDerivatives, AutodiffError> {
        let mut input = Vec::with_capacity(2 + extra.len());
        input.push(x);
        input.push(t);
        input.extend_from_slice(extra);
        self.check_input(&input)?;
        self.check_scalar_output()?;
        Ok(self.batch_tape(&[input]).output(0))
    }

    /// Four-channel forward pass over a block of points.
    ///
    /// Every unit holds one row of `4m` values: the `m` values, then the `m`
    /// `∂x`, `∂t` and `∂xx` channels, so all inner loops run over the batch.
    fn batch_tape<I: AsRef<[f64]>>(&self, inputs: &[I]) -> BatchTape {
        let m = inputs.len();
        let w4 = 4 * m;
        let mut h = vec![0.0; self.input_width() * w4];
        for (p, input) in inputs.iter().enumerate() {
            for (i, &v) in input.as_ref().iter().enumerate() {
                h[i * w4 + p] = v;
            }
        }
        h[X_INPUT * w4 + m..X_INPUT * w4 + 2 * m].fill(1.0);
        h[T_INPUT * w4 + 2 * m..T_INPUT * w4 + 3 * m].fill(1.0);

        let mut layer_inputs = Vec::with_capacity(self.n_layers());
        let mut slopes = Vec::with_capacity(self.n_layers());
        let mut pre = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let w = &self.weights[l];
            let mut a = vec![0.0; n_out * w4];
            for (j, row) in a.chunks_exact_mut(w4).enumerate() {
                row[..m].fill(self.biases[l][j]);
                for (i, hi) in h.chunks_exact(w4).enumerate() {
                    axpy(w[j * n_in + i], hi, row);
                }
            }
            let act = self.activation(l);
            let mut next = vec![0.0; n_out * w4];
            let mut s = vec![0.0; n_out * 3 * m];
            for ((arow, nrow), srow) in a.chunks_exact(w4).zip(next.chunks_exact_mut(w4)).zip(s.chunks_exact_mut(3 * m)) {
                for p in 0..m {
                    let [s0, s1, s2, s3] = act.eval(arow[p]);
                    let (ax, at, axx) = (arow[m + p], arow[2 * m + p], arow[3 * m + p]);
                    nrow[p] = s0;
                    nrow[m + p] = s1 * ax;
                    nrow[2 * m + p] = s1 * at;
                    nrow[3 * m + p] = s2 * ax * ax + s1 * axx;
                    srow[p] = s1;
                    srow[m + p] = s2;
                    srow[2 * m + p] = s3;
                }
            }
            layer_inputs.push(std::mem::replace(&mut h, next));
            slopes.push(s);
            pre.push(a);
        }
        BatchTape {
            m,
            inputs: layer_inputs,
            slopes,
            pre,
            out: h,
        }
    }

    /// Adds the parameter gradient for per-point output seeds.
    fn batch_backprop(&self, tape: &BatchTape, seeds: &[DerivativeSeed], grad: &mut MlpGradient) {
        let m = tape.m;
        let w4 = 4 * m;
        let mut abar = vec![0.0; w4];
        for (p, s) in seeds.iter().enumerate() {
            abar[p] = s.u;
            abar[m + p] = s.du_dx;
            abar[2 * m + p] = s.du_dt;
            abar[3 * m + p] = s.d2u_dx2;
        }
        for l in (0..self.n_layers()).rev() {
            let n_in = self.layer_sizes[l];
            let h = &tape.inputs[l];
            for (j, arow) in abar.chunks_exact(w4).enumerate() {
                let gw = &mut grad.weights[l][j * n_in..(j + 1) * n_in];
                for (g, hi) in gw.iter_mut().zip(h.chunks_exact(w4)) {
                    *g += dot(arow, hi);
                }
                grad.biases[l][j] += arow[..m].iter().sum::<f64>();
            }
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let mut hbar = vec![0.0; n_in * w4];
            for (j, arow) in abar.chunks_exact(w4).enumerate() {
                for (i, hrow) in hbar.chunks_exact_mut(w4).enumerate() {
                    axpy(w[j * n_in + i], arow, hrow);
                }
            }
            let a = &tape.pre[l - 1];
            let s = &tape.slopes[l - 1];
            let mut prev = vec![0.0; n_in * w4];
            for (((prow, brow), arow), srow) in prev
                .chunks_exact_mut(w4)
                .zip(hbar.chunks_exact(w4))
                .zip(a.chunks_exact(w4))
                .zip(s.chunks_exact(3 * m))
            {
                for p in 0..m {
                    let (s1, s2, s3) = (srow[p], srow[m + p], srow[2 * m + p]);
                    let (ax, at, axx) = (arow[m + p], arow[2 * m + p], arow[3 * m + p]);
                    let (bv, bx, bt, bxx) = (brow[p], brow[m + p], brow[2 * m + p], brow[3 * m + p]);
                    prow[p] = bv * s1 + bx * s2 * ax + bt * s2 * at + bxx * (s3 * ax * ax + s2 * axx);
                    prow[m + p] = bx * s1 + bxx * 2.0 * s2 * ax;
                    prow[2 * m + p] = bt * s1;
                    prow[3 * m + p] = bxx * s1;
                }
            }
            abar = prev;
        }
    }
}

/// `y += a·x`.
#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with four fixed-order partial sums.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Network output and its input derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InputDerivatives {
    pub u: f64,
    pub du_dx: f64,
    pub du_dt: f64,
    pub d2u_dx2: f64,
}

impl InputDerivatives {
    fn is_finite(&self) -> bool {
        self.u.is_finite() && self.du_dx.is_finite() && self.du_dt.is_finite() && self.d2u_dx2.is_finite()
    }
}

/// Partial derivatives of a scalar loss with respect to one point's
/// [`InputDerivatives`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DerivativeSeed {
    pub u: f64,
    pub du_dx: f64,
    pub du_dt: f64,
    pub d2u_dx2: f64,
}

impl DerivativeSeed {
    fn is_finite(&self) -> bool {
        self.u.is_finite() && self.du_dx.is_finite() && self.du_dt.is_finite() && self.d2u_dx2.is_finite()
    }
}

/// Loss value and per-point seeds returned by a loss evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEvaluation {
    pub value: f64,
    pub seeds: Vec<DerivativeSeed>,
}

/// Gradient with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradient {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGradient {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Same ordering as [`MlpNetwork::params`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Points per tape block; keeps one block's matrices cache resident.
const GRADIENT_CHUNK: usize = 64;

struct BatchTape {
    m: usize,
    /// Layer inputs, `n_in` rows of `4m`.
    inputs: Vec<Vec<f64>>,
    /// `σ′, σ″, σ‴` per unit, `n_out` rows of `3m`.
    slopes: Vec<Vec<f64>>,
    /// Pre-activations, `n_out` rows of `4m`.
    pre: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl BatchTape {
    fn len(&self) -> usize {
        self.m
    }

    fn output(&self, p: usize) -> InputDerivatives {
        let m = self.m;
        InputDerivatives {
            u: self.out[p],
            du_dx: self.out[m + p],
            du_dt: self.out[2 * m + p],
            d2u_dx2: self.out[3 * m + p],
        }
    }
}

/// Evaluates `loss` on the input derivatives of every point in `inputs` and
/// returns the loss value with its exact gradient in the network parameters.
pub fn loss_gradient<I, F>(
    net: &MlpNetwork,
    inputs: &[I],
    loss: F,
) -> Result<(f64, MlpGradient), AutodiffError>
where
    I: AsRef<[f64]>,
    F: FnOnce(&[InputDerivatives]) -> LossEvaluation,
{
    net.check_scalar_output()?;
    for p in inputs {
        net.check_input(p.as_ref())?;
    }
    let tapes: Vec<BatchTape> = inputs.chunks(GRADIENT_CHUNK).map(|c| net.batch_tape(c)).collect();
    let derivs: Vec<InputDerivatives> = tapes
        .iter()
        .flat_map(|t| (0..t.len()).map(move |p| t.output(p)))
        .collect();
    let eval = loss(&derivs);
    if eval.seeds.len() != inputs.len() {
        return Err(AutodiffError::DimensionMismatch {
            expected: inputs.len(),
            got: eval.seeds.len(),
        });
    }
    if !eval.value.is_finite() {
        let index = derivs
            .iter()
            .zip(&eval.seeds)
            .position(|(d, s)| !d.is_finite() || !s.is_finite())
            .unwrap_or(0);
        return Err(AutodiffError::NonFiniteLoss { index });
    }
    if let Some(index) = eval.seeds.iter().position(|s| !s.is_finite()) {
        return Err(AutodiffError::NonFiniteLoss { index });
    }
    let mut grad = MlpGradient::zeros_like(net);
    for (tape, seeds) in tapes.iter().zip(eval.seeds.chunks(GRADIENT_CHUNK)) {
        net.batch_backprop(tape, seeds, &mut grad);
    }
    Ok((eval.value, grad))
}
