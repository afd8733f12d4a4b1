//! Black-box membership inference.
//!
//! The attacker only sees the target's output probabilities (through
//! [`BlackBox`]). Each queried point becomes a feature vector
//!
//! ```text
//! [ probabilities sorted descending (K) | cross-entropy loss (1) | one-hot label (K) ]
//! ```
//!
//! and a small classifier (one hidden ReLU layer of 64 units, two-way
//! softmax) learns to separate training members from held-out points. The
//! two-way softmax output equals a sigmoid of the logit gap, so the
//! membership probability is `softmax(z)[1]`.

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{sgd_train, Architecture, Model, Sample, TrainConfig};

pub const ATTACK_HIDDEN: usize = 64;
pub const ATTACK_EPOCHS: usize = 100;
pub const ATTACK_LEARNING_RATE: f32 = 0.1;
pub const ATTACK_BATCH: usize = 32;

/// Query-only access to a classifier.
pub trait BlackBox {
    fn class_count(&self) -> usize;
    fn predict_proba(&self, samples: &[Sample]) -> Result<Vec<Vec<f64>>>;
}

impl BlackBox for Model {
    fn class_count(&self) -> usize {
        self.arch().output_dim()
    }

    fn predict_proba(&self, samples: &[Sample]) -> Result<Vec<Vec<f64>>> {
        self.forward_all(samples)
    }
}

/// Attack features for a batch of labeled points.
pub fn attack_features<B: BlackBox + ?Sized>(
    target: &B,
    samples: &[Sample],
) -> Result<Vec<Vec<f64>>> {
    let k = target.class_count();
    let probs = target.predict_proba(samples)?;
    probs
        .into_iter()
        .zip(samples)
        .map(|(p, s)| {
            if p.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    actual: p.len(),
                });
            }
            if s.label >= k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    actual: s.label,
                });
            }
            let loss = -p[s.label].max(f64::MIN_POSITIVE).ln();
            let mut sorted = p;
            sorted.sort_by(|a, b| b.total_cmp(a));
            let mut f = Vec::with_capacity(2 * k + 1);
            f.extend(sorted);
            f.push(loss);
            f.extend((0..k).map(|c| if c == s.label { 1.0 } else { 0.0 }));
            Ok(f)
        })
        .collect()
}

/// Labeled attack features; `member[i]` is the ground truth for `features[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackSet {
    pub features: Vec<Vec<f64>>,
    pub member: Vec<bool>,
}

impl AttackSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Queries the target on members and non-members and balances the two
/// sides by subsampling the larger one.
pub fn build_attack_set<B: BlackBox + ?Sized>(
    target: &B,
    members: &LabeledDataset,
    non_members: &LabeledDataset,
    seed: u64,
) -> Result<AttackSet> {
    if members.is_empty() || non_members.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = members.len().min(non_members.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |ds: &LabeledDataset| -> Vec<Sample> {
        if ds.len() == n {
            return ds.samples.clone();
        }
        let mut idx = sample_indices(&mut rng, ds.len(), n).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| ds.samples[i].clone()).collect()
    };
    let m = pick(members);
    let nm = pick(non_members);
    let mut features = attack_features(target, &m)?;
    features.extend(attack_features(target, &nm)?);
    let member = std::iter::repeat_n(true, n)
        .chain(std::iter::repeat_n(false, n))
        .collect();
    Ok(AttackSet { features, member })
}

/// Trained membership classifier plus the min–max scaling fitted on its
/// training features.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackModel {
    net: Model,
    feature_min: Vec<f64>,
    feature_max: Vec<f64>,
    pub seed: u64,
    pub epochs: usize,
}

impl AttackModel {
    fn scale(&self, f: &[f64]) -> Vec<f32> {
        f.iter()
            .zip(self.feature_min.iter().zip(&self.feature_max))
            .map(|(&v, (&lo, &hi))| {
                if hi > lo {
                    (((v - lo) / (hi - lo)) as f32).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_min.len()
    }

    pub fn membership_probabilities(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        let samples: Vec<Sample> = features
            .iter()
            .map(|f| {
                if f.len() != self.feature_dim() {
                    return Err(Error::DimensionMismatch {
                        expected: self.feature_dim(),
                        actual: f.len(),
                    });
                }
                Ok(Sample::new(self.scale(f), 0))
            })
            .collect::<Result<_>>()?;
        Ok(self
            .net
            .forward_all(&samples)?
            .into_iter()
            .map(|p| p[1])
            .collect())
    }

    /// Fraction of points classified correctly at threshold 0.5.
    pub fn accuracy(&self, set: &AttackSet) -> Result<f64> {
        if set.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let probs = self.membership_probabilities(&set.features)?;
        let correct = probs
            .iter()
            .zip(&set.member)
            .filter(|(&p, &m)| (p > 0.5) == m)
            .count();
        Ok(correct as f64 / set.len() as f64)
    }
}

pub fn train_attack(set: &AttackSet, seed: u64) -> Result<AttackModel> {
    train_attack_with_epochs(set, seed, ATTACK_EPOCHS)
}

pub fn train_attack_with_epochs(set: &AttackSet, seed: u64, epochs: usize) -> Result<AttackModel> {
    if set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = set.features[0].len();
    let mut feature_min = vec![f64::INFINITY; dim];
    let mut feature_max = vec![f64::NEG_INFINITY; dim];
    for f in &set.features {
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: f.len(),
            });
        }
        for (i, &v) in f.iter().enumerate() {
            feature_min[i] = feature_min[i].min(v);
            feature_max[i] = feature_max[i].max(v);
        }
    }
    let arch = Architecture::new(vec![dim, ATTACK_HIDDEN, 2])?;
    let mut model = AttackModel {
        net: Model::zeros(&arch),
        feature_min,
        feature_max,
        seed,
        epochs,
    };
    let samples: Vec<Sample> = set
        .features
        .iter()
        .zip(&set.member)
        .map(|(f, &m)| Sample::new(model.scale(f), m as usize))
        .collect();
    let cfg = TrainConfig {
        epochs,
        learning_rate: ATTACK_LEARNING_RATE,
        batch_size: ATTACK_BATCH.min(samples.len()),
        seed,
        record_updates: false,
        shuffle: true,
    };
    let (net, _) = sgd_train(&Model::init(&arch, seed), &samples, &cfg)?;
    model.net = net;
    Ok(model)
}

/// Mean membership probability the attack assigns to `targets`.
pub fn mia_mean_probability<B: BlackBox + ?Sized>(
    attack: &AttackModel,
    target: &B,
    targets: &[Sample],
) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let probs = attack.membership_probabilities(&attack_features(target, targets)?)?;
    Ok(probs.iter().sum::<f64>() / probs.len() as f64)
}
