use super::{PinnError, SurrogateModel, INPUT_WIDTH};
use crate::autodiff::{loss_gradient, DerivativeSeed, InputDerivatives, LossEvaluation, MlpGradient};
use crate::heatsim::MaterialSample;
use serde::{Deserialize, Serialize};

/// Weights `(α₁, α₂, α₃)` of the physics, initial and boundary terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub physics: f64,
    pub initial: f64,
    pub boundary: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

impl LossWeights {
    pub fn uniform(w: f64) -> Self {
        Self {
            physics: w,
            initial: w,
            boundary: w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub physics: f64,
    pub initial: f64,
    pub boundary: f64,
}

impl LossComponents {
    pub fn weighted(&self, w: &LossWeights) -> f64 {
        w.physics * self.physics + w.initial * self.initial + w.boundary * self.boundary
    }
}

/// Training points for the three loss terms, each paired with the material
/// it is evaluated for. Coordinates are normalized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossBatches {
    /// `(material, x', t')` collocation points.
    pub physics: Vec<(MaterialSample, f64, f64)>,
    /// `(material, x')` points on `t' = 0`.
    pub initial: Vec<(MaterialSample, f64)>,
    /// `(material, t')`; each point checks both faces.
    pub boundary: Vec<(MaterialSample, f64)>,
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), PinnError> {
    if expected != got {
        return Err(PinnError::LengthMismatch { what, expected, got });
    }
    Ok(())
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl LossBatches {
    pub fn physics_only(mats: &[MaterialSample], points: &[(f64, f64)]) -> Result<Self, PinnError> {
        check_len("points", mats.len(), points.len())?;
        let b = Self {
            physics: mats.iter().zip(points).map(|(m, &(x, t))| (*m, x, t)).collect(),
            ..Default::default()
        };
        b.validate()?;
        Ok(b)
    }

    pub fn initial_only(mats: &[MaterialSample], xs: &[f64]) -> Result<Self, PinnError> {
        check_len("x_points", mats.len(), xs.len())?;
        let b = Self {
            initial: mats.iter().zip(xs).map(|(m, &x)| (*m, x)).collect(),
            ..Default::default()
        };
        b.validate()?;
        Ok(b)
    }

    pub fn boundary_only(mats: &[MaterialSample], ts: &[f64]) -> Result<Self, PinnError> {
        check_len("t_points", mats.len(), ts.len())?;
        let b = Self {
            boundary: mats.iter().zip(ts).map(|(m, &t)| (*m, t)).collect(),
            ..Default::default()
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), PinnError> {
        let coords = self
            .physics
            .iter()
            .map(|p| in_unit(p.1) && in_unit(p.2))
            .chain(self.initial.iter().map(|p| in_unit(p.1)))
            .chain(self.boundary.iter().map(|p| in_unit(p.1)));
        for (index, ok) in coords.enumerate() {
            if !ok {
                return Err(PinnError::OutsideDomain { index });
            }
        }
        let mats = self
            .physics
            .iter()
            .map(|p| p.0)
            .chain(self.initial.iter().map(|p| p.0))
            .chain(self.boundary.iter().map(|p| p.0));
        for m in mats {
            m.validate()?;
        }
        Ok(())
    }

    /// Network inputs: physics points, initial points, then each boundary
    /// point at `x' = 0` followed by `x' = 1`.
    fn inputs(&self, model: &SurrogateModel) -> Vec<[f64; INPUT_WIDTH]> {
        let mut v = Vec::with_capacity(self.physics.len() + self.initial.len() + 2 * self.boundary.len());
        v.extend(self.physics.iter().map(|(m, x, t)| model.network_input(*x, *t, m)));
        v.extend(self.initial.iter().map(|(m, x)| model.network_input(*x, 0.0, m)));
        for (m, t) in &self.boundary {
            v.push(model.network_input(0.0, *t, m));
            v.push(model.network_input(1.0, *t, m));
        }
        v
    }
}

fn mean_factor(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.0 / n as f64
    }
}

impl SurrogateModel {
    /// Loss components and the seeds of `Σ wᵢ·Lᵢ` given the input
    /// derivatives laid out as in [`LossBatches::inputs`].
    fn evaluate(
        &self,
        batches: &LossBatches,
        weights: &LossWeights,
        derivs: &[InputDerivatives],
    ) -> (LossComponents, Vec<DerivativeSeed>) {
        let sc = &self.scenario;
        let mut seeds = vec![DerivativeSeed::default(); derivs.len()];
        let mut comps = LossComponents::default();
        let mut off = 0;

        let inv = mean_factor(batches.physics.len());
        for (i, (m, _, _)) in batches.physics.iter().enumerate() {
            let d = &derivs[off + i];
            let diff = sc.fourier_group(m);
            let f = d.du_dt - diff * d.d2u_dx2;
            comps.physics += f * f * inv;
            let g = 2.0 * f * inv * weights.physics;
            seeds[off + i].du_dt = g;
            seeds[off + i].d2u_dx2 = -diff * g;
        }
        off += batches.physics.len();

        let inv = mean_factor(batches.initial.len());
        let u0 = self.initial_value();
        for i in 0..batches.initial.len() {
            let r = derivs[off + i].u - u0;
            comps.initial += r * r * inv;
            seeds[off + i].u = 2.0 * r * inv * weights.initial;
        }
        off += batches.initial.len();

        let inv = mean_factor(batches.boundary.len());
        for (i, (m, _)) in batches.boundary.iter().enumerate() {
            let (inner, outer) = (off + 2 * i, off + 2 * i + 1);
            let r0 = derivs[inner].du_dx;
            let r1 = derivs[outer].du_dx - sc.flux_gradient(m);
            comps.boundary += (r0 * r0 + r1 * r1) * inv;
            seeds[inner].du_dx = 2.0 * r0 * inv * weights.boundary;
            seeds[outer].du_dx = 2.0 * r1 * inv * weights.boundary;
        }
        (comps, seeds)
    }

    pub fn loss_components(&self, batches: &LossBatches) -> Result<LossComponents, PinnError> {
        batches.validate()?;
        let derivs = batches
            .inputs(self)
            .iter()
            .map(|p| self.net.input_derivatives(p[0], p[1], &p[2..]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.evaluate(batches, &LossWeights::default(), &derivs).0)
    }

    /// Weighted total loss, its components and the exact parameter gradient.
    pub fn loss_and_gradient(
        &self,
        batches: &LossBatches,
        weights: &LossWeights,
    ) -> Result<(LossComponents, MlpGradient), PinnError> {
        let inputs = batches.inputs(self);
        let mut comps = LossComponents::default();
        let (_, grad) = loss_gradient(&self.net, &inputs, |d| {
            let (c, seeds) = self.evaluate(batches, weights, d);
            comps = c;
            LossEvaluation {
                value: c.weighted(weights),
                seeds,
            }
        })?;
        Ok((comps, grad))
    }
}
