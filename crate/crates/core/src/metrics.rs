//! Fisher-information diagonal, information score, efficacy and its
//! gradient-norm upper bound, and accuracy.
//!
//! The information score of a model on a dataset `D` is the trace of the
//! empirical FIM diagonal,
//!
//! ```text
//! ı(θ; D) = (1/|D|) Σ_i Σ_{(x,y)∈D} (∂ log p_θ(y|x) / ∂θ_i)²
//! ```
//!
//! and `efficacy = 1/ı` (infinite when `ı = 0`). By Cauchy–Schwarz,
//! `‖∇L(θ, D)‖² ≤ ı(θ; D)` for the mean cross-entropy `L`, so
//! `1/‖∇L‖²` bounds the efficacy from above while needing one batched
//! gradient instead of `|D|` per-sample ones.
//!
//! Per-sample gradients are `f32`; every reduction runs in `f64`, sample-major
//! and parameter-inner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, Model, Sample};

/// Empirical FIM diagonal, one non-negative entry per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FimDiagonal {
    pub values: Vec<f64>,
    pub dataset_size: usize,
}

impl FimDiagonal {
    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn fim_diagonal(model: &Model, data: &[Sample]) -> Result<FimDiagonal> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut acc = vec![0.0f64; model.param_count()];
    for s in data {
        let g = model.per_sample_grad(s)?;
        for (a, &v) in acc.iter_mut().zip(&g.values) {
            let v = v as f64;
            *a += v * v;
        }
    }
    let n = data.len() as f64;
    for a in &mut acc {
        *a /= n;
    }
    Ok(FimDiagonal {
        values: acc,
        dataset_size: data.len(),
    })
}

pub fn information_score(model: &Model, data: &[Sample]) -> Result<f64> {
    Ok(fim_diagonal(model, data)?.trace())
}

/// `1/ı`, or `+∞` when the score is exactly zero.
pub fn efficacy_from_information(information: f64) -> f64 {
    if information > 0.0 {
        1.0 / information
    } else {
        f64::INFINITY
    }
}

pub fn efficacy(model: &Model, data: &[Sample]) -> Result<f64> {
    Ok(efficacy_from_information(information_score(model, data)?))
}

/// `‖∇L(θ, D)‖²` from a single batched gradient pass.
pub fn loss_grad_norm_sq(model: &Model, data: &[Sample]) -> Result<f64> {
    const CHUNK: usize = 256;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scale = 1.0 / data.len() as f32;
    let mut acc = vec![0.0f64; model.param_count()];
    for chunk in data.chunks(CHUNK) {
        let refs: Vec<&Sample> = chunk.iter().collect();
        let g = model.scaled_loss_gradient(&refs, scale)?;
        for (a, &v) in acc.iter_mut().zip(&g) {
            *a += v as f64;
        }
    }
    Ok(acc.iter().map(|g| g * g).sum())
}

pub fn efficacy_upper_bound(model: &Model, data: &[Sample]) -> Result<f64> {
    let norm_sq = loss_grad_norm_sq(model, data)?;
    Ok(if norm_sq > 0.0 {
        1.0 / norm_sq
    } else {
        f64::INFINITY
    })
}

/// Fraction of samples whose arg-max class (lowest index on ties) is correct.
pub fn accuracy(model: &Model, data: &[Sample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let probs = model.forward_all(data)?;
    let correct = probs
        .iter()
        .zip(data)
        .filter(|(p, s)| argmax(p) == s.label)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Information-based scores of one model on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficacyReport {
    pub information: f64,
    #[serde(with = "extended_real")]
    pub efficacy: f64,
    #[serde(with = "extended_real")]
    pub upper_bound: f64,
    pub grad_norm_sq: f64,
}

impl EfficacyReport {
    pub fn compute(model: &Model, data: &[Sample]) -> Result<Self> {
        let information = information_score(model, data)?;
        let grad_norm_sq = loss_grad_norm_sq(model, data)?;
        Ok(Self::from_parts(information, grad_norm_sq))
    }

    pub fn from_parts(information: f64, grad_norm_sq: f64) -> Self {
        Self {
            information,
            efficacy: efficacy_from_information(information),
            upper_bound: efficacy_from_information(grad_norm_sq),
            grad_norm_sq,
        }
    }
}

/// Formats an extended real: finite values with full round-trip precision,
/// `+∞` as `inf`.
pub fn format_extended(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_owned()
    } else {
        format!("{v:e}")
    }
}

pub fn parse_extended(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" => Some(f64::INFINITY),
        other => other.parse().ok(),
    }
}

/// Serde adapter writing `+∞` as the string `"inf"`.
pub mod extended_real {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str("inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = f64;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    _ => Err(E::custom(format!("unexpected string {v:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}
