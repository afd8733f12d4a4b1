//! Scalar `f64` reference MLP used as an oracle.
//!
//! Parameters follow the flat layout layer by layer: the weight matrix of
//! shape `(fan_out, fan_in)` row-major, then the bias vector.

#![allow(dead_code)]

use unlearn::{Model, Sample};

pub fn layers(sizes: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut offset = 0;
    sizes
        .windows(2)
        .map(|w| {
            let l = (w[0], w[1], offset);
            offset += w[0] * w[1] + w[1];
            l
        })
        .collect()
}

pub fn logits(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let spec = layers(sizes);
    let mut a = x.to_vec();
    for (li, &(fan_in, fan_out, off)) in spec.iter().enumerate() {
        let mut z = vec![0.0; fan_out];
        for (o, zo) in z.iter_mut().enumerate() {
            let mut s = params[off + fan_in * fan_out + o];
            for i in 0..fan_in {
                s += params[off + o * fan_in + i] * a[i];
            }
            *zo = if li + 1 < spec.len() { s.max(0.0) } else { s };
        }
        a = z;
    }
    a
}

pub fn probabilities(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let z = logits(sizes, params, x);
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_prob(sizes: &[usize], params: &[f64], x: &[f64], y: usize) -> f64 {
    let z = logits(sizes, params, x);
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    z[y] - lse
}

/// Central-difference gradient of `log p(y|x)` with respect to every
/// parameter.
pub fn fd_grad_log_prob(sizes: &[usize], params: &[f64], x: &[f64], y: usize, h: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = log_prob(sizes, &p, x, y);
            p[i] = orig - h;
            let down = log_prob(sizes, &p, x, y);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn params_f64(model: &Model) -> Vec<f64> {
    model.params().iter().map(|&v| v as f64).collect()
}

pub fn features_f64(s: &Sample) -> Vec<f64> {
    s.features.iter().map(|&v| v as f64).collect()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Deterministic pseudo-random dataset with features in `[0, 1)`.
pub fn toy_data(n: usize, dim: usize, classes: usize, seed: u64) -> Vec<Sample> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let x = (0..dim).map(|_| rng.random::<f32>()).collect();
            Sample::new(x, i % classes)
        })
        .collect()
}

/// Smallest `|pre-activation|` over all hidden units. Finite differences
/// are only meaningful when this is well above the step size.
pub fn min_hidden_margin(sizes: &[usize], params: &[f64], x: &[f64]) -> f64 {
    let spec = layers(sizes);
    let mut a = x.to_vec();
    let mut margin = f64::INFINITY;
    for &(fan_in, fan_out, off) in &spec[..spec.len() - 1] {
        let mut z = vec![0.0; fan_out];
        for (o, zo) in z.iter_mut().enumerate() {
            let mut s = params[off + fan_in * fan_out + o];
            for i in 0..fan_in {
                s += params[off + o * fan_in + i] * a[i];
            }
            margin = margin.min(s.abs());
            *zo = s.max(0.0);
        }
        a = z;
    }
    margin
}
