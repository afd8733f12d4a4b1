//! Fixed-architecture fully connected classifier.
//!
//! Hidden layers use ReLU, the output layer a softmax. Parameters live in a
//! single flat `f32` vector in canonical order: for each layer, the weight
//! matrix row-major with shape `(fan_out, fan_in)`, followed by its biases.
//! Gradients share that layout index-for-index.
//!
//! Probabilities and log-probabilities are returned in `f64`; the softmax is
//! evaluated from the `f32` logits with max-subtraction.

mod gemm;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};

pub use train::{sgd_train, sgd_train_logged, TrainConfig};

/// Layer widths from input to output.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Architecture {
    layer_sizes: Vec<usize>,
}

/// Offsets of one dense layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.weight_offset..self.bias_offset
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        self.bias_offset..self.bias_offset + self.fan_out
    }
}

impl Architecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "architecture needs at least 2 layers, got {}",
                layer_sizes.len()
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidConfig(
                "layer sizes must be positive".to_owned(),
            ));
        }
        Ok(Self { layer_sizes })
    }

    /// `input → 512 → 256 → 128 → classes`.
    pub fn default_mlp(input_dim: usize, classes: usize) -> Result<Self> {
        Self::new(vec![input_dim, 512, 256, 128, classes])
    }

    /// `input → hidden… → classes`.
    pub fn with_hidden(input_dim: usize, hidden: &[usize], classes: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input_dim);
        sizes.extend_from_slice(hidden);
        sizes.push(classes);
        Self::new(sizes)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn layers(&self) -> Vec<LayerShape> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let shape = LayerShape {
                    fan_in: w[0],
                    fan_out: w[1],
                    weight_offset: offset,
                    bias_offset: offset + w[0] * w[1],
                };
                offset += w[0] * w[1] + w[1];
                shape
            })
            .collect()
    }
}

/// One labeled input.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f32>,
    pub label: usize,
}

impl Sample {
    pub fn new(features: Vec<f32>, label: usize) -> Self {
        Self { features, label }
    }
}

/// Gradient aligned with [`Model::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    pub values: Vec<f32>,
}

impl GradientVector {
    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|&g| (g as f64) * (g as f64)).sum()
    }
}

/// Network weights and biases plus the architecture they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    params: Vec<f32>,
}

impl Model {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    /// Same `(arch, seed)` yields bit-identical parameters.
    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0f32; arch.param_count()];
        for layer in arch.layers() {
            let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt() as f32;
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            for w in &mut params[layer.weight_range()] {
                *w = dist.sample(&mut rng);
            }
        }
        Self {
            arch: arch.clone(),
            params,
        }
    }

    pub fn zeros(arch: &Architecture) -> Self {
        Self {
            arch: arch.clone(),
            params: vec![0.0; arch.param_count()],
        }
    }

    pub fn from_params(arch: Architecture, params: Vec<f32>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                expected: arch.param_count(),
                actual: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "parameter {i} is not finite"
            )));
        }
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f64>> {
        let logits = self.logits(x)?;
        Ok(softmax(&logits))
    }

    /// Log-probabilities for one input, computed directly as a log-softmax.
    pub fn log_probs(&self, x: &[f32]) -> Result<Vec<f64>> {
        let logits = self.logits(x)?;
        Ok(log_softmax(&logits))
    }

    pub fn logits(&self, x: &[f32]) -> Result<Vec<f32>> {
        self.check_input(x)?;
        let acts = self.forward_batch(x, 1);
        Ok(acts.into_iter().last().unwrap())
    }

    /// Class probabilities for many inputs, evaluated in batches.
    pub fn forward_all(&self, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
        const CHUNK: usize = 256;
        let n_out = self.arch.output_dim();
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(CHUNK) {
            let mut x = Vec::with_capacity(chunk.len() * self.arch.input_dim());
            for s in chunk {
                self.check_input(&s.features)?;
                x.extend_from_slice(&s.features);
            }
            let acts = self.forward_batch(&x, chunk.len());
            out.extend(acts.last().unwrap().chunks_exact(n_out).map(softmax));
        }
        Ok(out)
    }

    /// Index of the largest probability; ties go to the lowest class index.
    pub fn predict(&self, x: &[f32]) -> Result<usize> {
        let probs = self.forward(x)?;
        Ok(argmax(&probs))
    }

    /// `∂ log p(y|x) / ∂θ` for one sample.
    pub fn per_sample_grad(&self, sample: &Sample) -> Result<GradientVector> {
        let values = self.scaled_loss_gradient(&[sample], -1.0)?;
        Ok(GradientVector { values })
    }

    /// Gradient of the mean cross-entropy `-(1/|D|) Σ log p(y|x)` over `samples`.
    pub fn loss_gradient(&self, samples: &[Sample]) -> Result<GradientVector> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let refs: Vec<&Sample> = samples.iter().collect();
        let values = self.scaled_loss_gradient(&refs, 1.0 / samples.len() as f32)?;
        Ok(GradientVector { values })
    }

    /// `scale · Σ_b ∂(-log p(y_b|x_b))/∂θ`, evaluated as one batched pass.
    pub(crate) fn scaled_loss_gradient(&self, batch: &[&Sample], scale: f32) -> Result<Vec<f32>> {
        let n_in = self.arch.input_dim();
        let n_out = self.arch.output_dim();
        let mut x = Vec::with_capacity(batch.len() * n_in);
        for s in batch {
            self.check_sample(s)?;
            x.extend_from_slice(&s.features);
        }
        let acts = self.forward_batch(&x, batch.len());
        let logits = acts.last().unwrap();

        let mut dlogits = vec![0.0f32; batch.len() * n_out];
        for (b, s) in batch.iter().enumerate() {
            let row = &logits[b * n_out..(b + 1) * n_out];
            let d = cross_entropy_logit_grad(row, s.label);
            for (dst, v) in dlogits[b * n_out..(b + 1) * n_out].iter_mut().zip(d) {
                *dst = (v as f32) * scale;
            }
        }

        let mut grad = vec![0.0f32; self.params.len()];
        self.backward_batch(&acts, dlogits, batch.len(), &mut grad);
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "gradient entry {i} is not finite"
            )));
        }
        Ok(grad)
    }

    fn check_input(&self, x: &[f32]) -> Result<()> {
        if x.len() != self.arch.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_sample(&self, s: &Sample) -> Result<()> {
        self.check_input(&s.features)?;
        if s.label >= self.arch.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.output_dim(),
                actual: s.label,
            });
        }
        Ok(())
    }

    /// Returns the input followed by each layer's output; the last entry holds
    /// the logits, every other entry is post-ReLU.
    pub(crate) fn forward_batch(&self, x: &[f32], batch: usize) -> Vec<Vec<f32>> {
        let layers = self.arch.layers();
        let mut acts = Vec::with_capacity(layers.len() + 1);
        acts.push(x.to_vec());
        for (li, layer) in layers.iter().enumerate() {
            let input = acts.last().unwrap();
            let mut out = vec![0.0f32; batch * layer.fan_out];
            gemm::mul_transposed(
                input,
                &self.params[layer.weight_range()],
                &mut out,
                batch,
                layer.fan_in,
                layer.fan_out,
            );
            let bias = &self.params[layer.bias_range()];
            let hidden = li + 1 < layers.len();
            for row in out.chunks_exact_mut(layer.fan_out) {
                for (z, &b) in row.iter_mut().zip(bias) {
                    *z += b;
                    if hidden && *z < 0.0 {
                        *z = 0.0;
                    }
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Accumulates `Σ_b dlogits_b`-weighted parameter gradients into `grad`
    /// (overwritten).
    fn backward_batch(
        &self,
        acts: &[Vec<f32>],
        mut delta: Vec<f32>,
        batch: usize,
        grad: &mut [f32],
    ) {
        let layers = self.arch.layers();
        for (li, layer) in layers.iter().enumerate().rev() {
            let input = &acts[li];
            gemm::mul_lhs_transposed(
                &delta,
                input,
                &mut grad[layer.weight_range()],
                layer.fan_out,
                batch,
                layer.fan_in,
            );
            let db = &mut grad[layer.bias_range()];
            db.fill(0.0);
            for row in delta.chunks_exact(layer.fan_out) {
                for (acc, &d) in db.iter_mut().zip(row) {
                    *acc += d;
                }
            }
            if li == 0 {
                break;
            }
            let mut prev = vec![0.0f32; batch * layer.fan_in];
            gemm::mul(
                &delta,
                &self.params[layer.weight_range()],
                &mut prev,
                batch,
                layer.fan_out,
                layer.fan_in,
            );
            for (d, &a) in prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            delta = prev;
        }
    }
}

pub fn softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
    let exps: Vec<f64> = logits.iter().map(|&z| (z as f64 - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f32]) -> Vec<f64> {
    let max = logits.iter().fold(f32::NEG_INFINITY, |m, &v| m.max(v)) as f64;
    let lse = logits
        .iter()
        .map(|&z| (z as f64 - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    logits.iter().map(|&z| z as f64 - lse).collect()
}

/// `∂(-log softmax(z)_y)/∂z = p - e_y`. The label entry is formed as
/// `-Σ_{j≠y} p_j`, which keeps precision when `p_y` is close to 1.
fn cross_entropy_logit_grad(logits: &[f32], label: usize) -> Vec<f64> {
    let mut p = softmax(logits);
    let rest: f64 = p
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != label)
        .map(|(_, &v)| v)
        .sum();
    p[label] = -rest;
    p
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
