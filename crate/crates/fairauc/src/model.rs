//! Scoring models: parameterization, gradients, projection, and checkpoints.
//!
//! Two families are supported: a linear scorer `h(x) = w.x` and a
//! one-hidden-layer sigmoid network. Both keep their parameters in one flat
//! vector so the solvers can treat the primal weight block uniformly; the
//! network layout is `[hidden weights (H x p, unit-major), hidden biases (H),
//! output weights (H), output bias (1)]`.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::vecops;
use rand::Rng;

/// Model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Mlp2,
}

/// Structural description of a model: family plus dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub kind: ModelKind,
    pub input_dim: usize,
    /// Hidden width; 0 for linear models.
    pub hidden_dim: usize,
}

impl ModelShape {
    pub fn linear(input_dim: usize) -> Self {
        Self {
            kind: ModelKind::Linear,
            input_dim,
            hidden_dim: 0,
        }
    }

    pub fn mlp2(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            kind: ModelKind::Mlp2,
            input_dim,
            hidden_dim,
        }
    }

    /// Length of the flat weight vector for this shape.
    pub fn weight_len(&self) -> usize {
        match self.kind {
            ModelKind::Linear => self.input_dim,
            ModelKind::Mlp2 => self.hidden_dim * self.input_dim + 2 * self.hidden_dim + 1,
        }
    }
}

/// A concrete model: shape plus flat weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    shape: ModelShape,
    weights: Vec<f64>,
}

/// The feasible weight region: a Euclidean ball around the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamDomain {
    radius: f64,
}

impl ParamDomain {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidConfig {
                field: "radius".into(),
                message: format!("{radius} is not a positive real"),
            });
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

impl ModelParams {
    /// Wraps an existing flat weight vector, validating its length.
    pub fn from_weights(shape: ModelShape, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != shape.weight_len() {
            return Err(Error::LengthMismatch {
                expected: shape.weight_len(),
                got: weights.len(),
                context: "model weight vector",
            });
        }
        if !vecops::all_finite(&weights) {
            return Err(Error::InvalidConfig {
                field: "weights".into(),
                message: "weights must be finite".into(),
            });
        }
        Ok(Self { shape, weights })
    }

    /// The all-zero model (a constant scorer: every input scores 0).
    pub fn zeros(shape: ModelShape) -> Self {
        Self {
            shape,
            weights: vec![0.0; shape.weight_len()],
        }
    }

    /// Seeded initialization, uniform in [-0.5, 0.5] per weight.
    pub fn random<R: Rng>(shape: ModelShape, rng: &mut R) -> Self {
        let weights = (0..shape.weight_len())
            .map(|_| rng.random_range(-0.5..0.5))
            .collect();
        Self { shape, weights }
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// The score `h(features)`.
    pub fn score(&self, features: &[f64]) -> f64 {
        debug_assert_eq!(features.len(), self.shape.input_dim);
        match self.shape.kind {
            ModelKind::Linear => vecops::dot(&self.weights, features),
            ModelKind::Mlp2 => {
                let (p, h) = (self.shape.input_dim, self.shape.hidden_dim);
                let hidden_w = &self.weights[..h * p];
                let hidden_b = &self.weights[h * p..h * p + h];
                let out_w = &self.weights[h * p + h..h * p + 2 * h];
                let out_b = self.weights[h * p + 2 * h];
                let mut acc = out_b;
                for j in 0..h {
                    let pre = vecops::dot(&hidden_w[j * p..(j + 1) * p], features) + hidden_b[j];
                    acc += out_w[j] * sigmoid(pre);
                }
                acc
            }
        }
    }

    /// Gradient of the score with respect to the flat weight vector, laid out
    /// exactly like [`ModelParams::weights`].
    pub fn score_gradient(&self, features: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.weights.len()];
        self.accumulate_score_gradient(features, 1.0, &mut out);
        out
    }

    /// `out += scale * score_gradient(features)`. Shared by the batched
    /// solvers to avoid per-sample allocation.
    pub(crate) fn accumulate_score_gradient(&self, features: &[f64], scale: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.weights.len());
        match self.shape.kind {
            ModelKind::Linear => vecops::axpy(out, scale, features),
            ModelKind::Mlp2 => {
                let (p, h) = (self.shape.input_dim, self.shape.hidden_dim);
                let hidden_w = &self.weights[..h * p];
                let hidden_b = &self.weights[h * p..h * p + h];
                let out_w = &self.weights[h * p + h..h * p + 2 * h];
                for j in 0..h {
                    let pre = vecops::dot(&hidden_w[j * p..(j + 1) * p], features) + hidden_b[j];
                    let s = sigmoid(pre);
                    let slope = out_w[j] * s * (1.0 - s);
                    // hidden weights of unit j
                    vecops::axpy(&mut out[j * p..(j + 1) * p], scale * slope, features);
                    // hidden bias of unit j
                    out[h * p + j] += scale * slope;
                    // output weight of unit j
                    out[h * p + h + j] += scale * s;
                }
                // output bias
                out[h * p + 2 * h] += scale;
            }
        }
    }
}

/// Scales a flat weight vector into the domain ball if it lies outside.
/// Interior vectors are left bit-for-bit unchanged.
pub fn project_weights_in_place(weights: &mut [f64], dom: &ParamDomain) {
    let norm = vecops::norm2(weights);
    if norm > dom.radius() {
        vecops::scale(weights, dom.radius() / norm);
    }
}

/// Euclidean projection of a model onto the domain ball.
pub fn project_params(m: &ModelParams, dom: &ParamDomain) -> ModelParams {
    let mut out = m.clone();
    project_weights_in_place(out.weights_mut(), dom);
    out
}

/// A uniform bound on |score| over the domain and dataset.
///
/// Linear: `radius * max ||features||_2`. Network: `radius * (sqrt(H) + 1)`
/// — the output weights and bias each have norm at most `radius` because the
/// whole flat vector does, and every sigmoid activation lies in (0, 1).
pub fn score_bound(shape: &ModelShape, dom: &ParamDomain, d: &Dataset) -> f64 {
    match shape.kind {
        ModelKind::Linear => {
            let max_norm = d
                .points()
                .iter()
                .map(|p| vecops::norm2(&p.features))
                .fold(0.0f64, f64::max);
            dom.radius() * max_norm
        }
        ModelKind::Mlp2 => dom.radius() * ((shape.hidden_dim as f64).sqrt() + 1.0),
    }
}

/// Serializes a model as text: a `kind input_dim hidden_dim` header line,
/// then one weight per line in flat order. The decimal rendering is exact
/// (round-trips bit-for-bit through `load_checkpoint`).
pub fn save_checkpoint(m: &ModelParams) -> String {
    let kind = match m.shape().kind {
        ModelKind::Linear => "linear",
        ModelKind::Mlp2 => "mlp2",
    };
    let mut out = format!("{kind} {} {}\n", m.shape().input_dim, m.shape().hidden_dim);
    for w in m.weights() {
        out.push_str(&format!("{w:?}\n"));
    }
    out
}

/// Parses the text produced by [`save_checkpoint`].
pub fn load_checkpoint(text: &str) -> Result<ModelParams> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Checkpoint("empty checkpoint".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Checkpoint(format!(
            "header must have 3 fields (kind, input_dim, hidden_dim), found {}",
            fields.len()
        )));
    }
    let kind = match fields[0] {
        "linear" => ModelKind::Linear,
        "mlp2" => ModelKind::Mlp2,
        other => return Err(Error::Checkpoint(format!("unknown model kind {other:?}"))),
    };
    let input_dim: usize = fields[1]
        .parse()
        .map_err(|_| Error::Checkpoint(format!("bad input_dim {:?}", fields[1])))?;
    let hidden_dim: usize = fields[2]
        .parse()
        .map_err(|_| Error::Checkpoint(format!("bad hidden_dim {:?}", fields[2])))?;
    let shape = ModelShape {
        kind,
        input_dim,
        hidden_dim,
    };
    let mut weights = Vec::with_capacity(shape.weight_len());
    for line in lines {
        let w: f64 = line
            .trim()
            .parse()
            .map_err(|_| Error::Checkpoint(format!("bad weight line {line:?}")))?;
        weights.push(w);
    }
    if weights.len() != shape.weight_len() {
        return Err(Error::Checkpoint(format!(
            "expected {} weights, found {}",
            shape.weight_len(),
            weights.len()
        )));
    }
    ModelParams::from_weights(shape, weights)
}
