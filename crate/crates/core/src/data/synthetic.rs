use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataSource, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::Sample;

/// Seeded Gaussian blobs clipped to [0, 1], one blob per class.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub dim: usize,
    pub classes: usize,
    pub per_class: usize,
    pub spread: f32,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            classes: 10,
            per_class: 100,
            spread: 0.15,
            seed: 0,
        }
    }
}

/// Samples are interleaved by class (`0, 1, …, classes-1, 0, 1, …`).
/// Centers depend only on `(dim, classes, seed)`, so two calls that differ
/// only in `per_class` or `sample_seed` draw from the same distribution.
pub fn gaussian_blobs(spec: &BlobSpec, sample_seed: u64) -> Result<LabeledDataset> {
    if spec.dim == 0 || spec.classes == 0 {
        return Err(Error::InvalidConfig(
            "blob dim and classes must be positive".into(),
        ));
    }
    let mut center_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers: Vec<Vec<f32>> = (0..spec.classes)
        .map(|_| (0..spec.dim).map(|_| center_rng.random::<f32>()).collect())
        .collect();
    let noise = Normal::new(0.0f32, spec.spread)
        .map_err(|e| Error::InvalidConfig(format!("blob spread: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed ^ spec.seed.rotate_left(17));
    let mut samples = Vec::with_capacity(spec.classes * spec.per_class);
    for _ in 0..spec.per_class {
        for (label, c) in centers.iter().enumerate() {
            let x = c
                .iter()
                .map(|&m| (m + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            samples.push(Sample::new(x, label));
        }
    }
    LabeledDataset::new(samples, DataSource::Synthetic, spec.classes)
}
