//! Datasets, subsetting, and remaining/forget splits.

mod cifar;
mod idx;
mod synthetic;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::Sample;

pub use cifar::{load_cifar10, parse_cifar10};
pub use idx::{load_mnist_idx, parse_idx_images, parse_idx_labels, parse_mnist};
pub use synthetic::{gaussian_blobs, BlobSpec};

pub const CLASS_COUNT: usize = 10;

/// Forget-set percentages evaluated by default.
pub const DEFAULT_PERCENTAGES: [f64; 6] = [0.01, 0.1, 0.25, 0.5, 0.8, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataSource {
    Mnist,
    Cifar10,
    Synthetic,
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataSource::Mnist => "mnist",
            DataSource::Cifar10 => "cifar10",
            DataSource::Synthetic => "synthetic",
        })
    }
}

impl FromStr for DataSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mnist" => Ok(DataSource::Mnist),
            "cifar10" | "cifar-10" => Ok(DataSource::Cifar10),
            "synthetic" => Ok(DataSource::Synthetic),
            other => Err(Error::InvalidConfig(format!("unknown dataset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
    pub source: DataSource,
    pub class_count: usize,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Sample>, source: DataSource, class_count: usize) -> Result<Self> {
        if let Some(first) = samples.first() {
            let dim = first.features.len();
            for (i, s) in samples.iter().enumerate() {
                if s.features.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: s.features.len(),
                    });
                }
                if s.label >= class_count {
                    return Err(Error::InvalidConfig(format!(
                        "sample {i} has label {} outside 0..{class_count}",
                        s.label
                    )));
                }
            }
        }
        Ok(Self {
            samples,
            source,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Samples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            source: self.source,
            class_count: self.class_count,
        }
    }
}

/// The `k` lowest-index samples of every class, original order preserved.
pub fn take_first_per_class(ds: &LabeledDataset, k: usize) -> Result<LabeledDataset> {
    let counts = ds.class_counts();
    if let Some((class, &found)) = counts.iter().enumerate().find(|(_, &c)| c < k) {
        return Err(Error::InsufficientSamples {
            class,
            needed: k,
            found,
        });
    }
    let mut taken = vec![0; ds.class_count];
    let samples = ds
        .samples
        .iter()
        .filter(|s| {
            let keep = taken[s.label] < k;
            taken[s.label] += 1;
            keep
        })
        .cloned()
        .collect();
    Ok(LabeledDataset {
        samples,
        source: ds.source,
        class_count: ds.class_count,
    })
}

/// Index partition of a parent dataset into remaining (`D_r`) and forget
/// (`D_f`) sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub remaining: Vec<usize>,
    pub forget: Vec<usize>,
    pub target_class: usize,
    pub percentage: f64,
}

/// Number of target-class points forgotten at percentage `p`:
/// `round_half_up(p · count)`, at least 1.
pub fn forget_count(p: f64, class_count: usize) -> usize {
    ((p * class_count as f64 + 0.5).floor() as usize).clamp(1, class_count.max(1))
}

/// Forgets the first `forget_count(p, n)` occurrences of `target_class`.
pub fn make_split(ds: &LabeledDataset, target_class: usize, p: f64) -> Result<DatasetSplit> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "percentage {p} outside (0, 1]"
        )));
    }
    let target: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.samples[i].label == target_class)
        .collect();
    if target.is_empty() {
        return Err(Error::EmptyTargetClass(target_class));
    }
    let k = forget_count(p, target.len());
    let forget = target[..k].to_vec();
    let mut is_forget = vec![false; ds.len()];
    for &i in &forget {
        is_forget[i] = true;
    }
    let remaining = (0..ds.len()).filter(|&i| !is_forget[i]).collect();
    Ok(DatasetSplit {
        remaining,
        forget,
        target_class,
        percentage: p,
    })
}
