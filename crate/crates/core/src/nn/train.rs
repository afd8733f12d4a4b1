use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Model, Sample};
use crate::error::{Error, Result};
use crate::update_log::{UpdateLog, UpdateLogWriter};

/// Plain mini-batch SGD settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    /// Seeds the per-epoch shuffle stream.
    pub seed: u64,
    pub record_updates: bool,
    pub shuffle: bool,
}

impl TrainConfig {
    pub fn mnist(seed: u64) -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.1,
            batch_size: 32,
            seed,
            record_updates: true,
            shuffle: true,
        }
    }

    pub fn cifar10(seed: u64) -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.1,
            batch_size: 64,
            seed,
            record_updates: true,
            shuffle: true,
        }
    }

    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if dataset_len == 0 {
            return Err(Error::EmptyDataset);
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} is not a finite non-negative number",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.batch_size > dataset_len {
            return Err(Error::InvalidConfig(format!(
                "batch size {} must be in 1..={dataset_len}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

/// Trains a copy of `model`, keeping recorded deltas in memory.
pub fn sgd_train(model: &Model, data: &[Sample], cfg: &TrainConfig) -> Result<(Model, UpdateLog)> {
    let writer = cfg
        .record_updates
        .then(|| UpdateLogWriter::in_memory(model.arch()));
    run(model, data, cfg, writer)
}

/// Trains a copy of `model`, streaming deltas to `log_path`.
pub fn sgd_train_logged(
    model: &Model,
    data: &[Sample],
    cfg: &TrainConfig,
    log_path: &Path,
) -> Result<(Model, UpdateLog)> {
    let writer = if cfg.record_updates {
        Some(UpdateLogWriter::create(model.arch(), log_path)?)
    } else {
        None
    };
    run(model, data, cfg, writer)
}

fn run(
    model: &Model,
    data: &[Sample],
    cfg: &TrainConfig,
    mut writer: Option<UpdateLogWriter>,
) -> Result<(Model, UpdateLog)> {
    cfg.validate(data.len())?;
    for s in data {
        model.check_sample(s)?;
    }
    let mut model = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut delta = vec![0.0f32; model.param_count()];

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        // The tail batch is kept; its gradient is the mean over its own size.
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &data[i]).collect();
            let grad = model.scaled_loss_gradient(&batch, 1.0 / batch.len() as f32)?;
            for ((p, d), g) in model.params_mut().iter_mut().zip(&mut delta).zip(&grad) {
                let next = *p - cfg.learning_rate * g;
                // Record the step actually applied after rounding.
                *d = next - *p;
                *p = next;
            }
            if let Some(w) = writer.as_mut() {
                let indices: Vec<u32> = chunk.iter().map(|&i| i as u32).collect();
                w.append(epoch as u32, b as u32, &indices, &delta)?;
            }
        }
        if let Some(i) = model.params().iter().position(|p| !p.is_finite()) {
            return Err(Error::NumericalFailure(format!(
                "parameter {i} diverged in epoch {epoch}"
            )));
        }
    }

    let log = match writer {
        Some(w) => w.finish()?,
        None => UpdateLog::empty(model.arch()),
    };
    Ok((model, log))
}
