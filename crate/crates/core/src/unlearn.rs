//! Forgetting algorithms: retraining from scratch, Amnesiac Unlearning and
//! Fisher Forgetting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::metrics::{fim_diagonal, FimDiagonal};
use crate::nn::{sgd_train, Architecture, Model, Sample, TrainConfig};
use crate::update_log::UpdateLog;

/// Retrains from the original initialization on the remaining data only.
///
/// The shuffle stream restarts from `cfg.seed` but permutes the smaller
/// index set, so batches differ from the original run unless `D_f` is empty.
pub fn retrain(
    arch: &Architecture,
    init_seed: u64,
    remaining: &[Sample],
    cfg: &TrainConfig,
) -> Result<Model> {
    let cfg = TrainConfig {
        record_updates: false,
        ..cfg.clone()
    };
    let (model, _) = sgd_train(&Model::init(arch, init_seed), remaining, &cfg)?;
    Ok(model)
}

/// Reverts every recorded update whose batch touched a forgotten sample:
///
/// ```text
/// θ ← θ − Σ_e Σ_b 1[D_f ∩ D_{e,b} ≠ ∅] Δθ_{e,b}
/// ```
///
/// Reverted records are marked consumed so a later call never subtracts
/// them twice; forgetting `A` then `B` equals forgetting `A ∪ B`.
/// The subtraction accumulates in `f64` and rounds once.
pub fn amnesiac_forget(
    model: &Model,
    log: &UpdateLog,
    forget: &[usize],
) -> Result<(Model, UpdateLog)> {
    if log.arch() != model.arch() {
        return Err(Error::LogMismatch(format!(
            "log architecture {:?} vs model {:?}",
            log.arch().layer_sizes(),
            model.arch().layer_sizes()
        )));
    }
    let max_index = forget.iter().copied().max().map_or(0, |m| m + 1);
    let mut is_forget = vec![false; max_index];
    for &i in forget {
        is_forget[i] = true;
    }
    let hit = |r: &crate::update_log::UpdateRecord| {
        r.sample_indices
            .iter()
            .any(|&i| is_forget.get(i as usize).copied().unwrap_or(false))
    };
    let selected: Vec<usize> = log
        .records()
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.consumed && hit(r))
        .map(|(i, _)| i)
        .collect();

    let mut out_log = log.clone();
    if selected.is_empty() {
        return Ok((model.clone(), out_log));
    }
    let mut acc: Vec<f64> = model.params().iter().map(|&p| p as f64).collect();
    log.visit_deltas(&selected, |_, delta| {
        for (a, &d) in acc.iter_mut().zip(delta) {
            *a -= d as f64;
        }
        Ok(())
    })?;
    for &r in &selected {
        out_log.mark_consumed(r);
    }
    let params: Vec<f32> = acc.into_iter().map(|a| a as f32).collect();
    let updated = Model::from_params(model.arch().clone(), params)?;
    Ok((updated, out_log))
}

/// Fisher Forgetting hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherConfig {
    /// Noise scale `α`; `α = 0` returns the model unchanged.
    pub alpha: f64,
    /// FIM entries are clamped to at least this value before inversion.
    pub fim_clamp_min: f64,
    pub noise_seed: u64,
    /// Optional cap on every per-parameter noise standard deviation.
    pub noise_std_clamp_max: Option<f64>,
}

impl Default for FisherConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-6,
            fim_clamp_min: 1e-8,
            noise_seed: 0,
            noise_std_clamp_max: None,
        }
    }
}

impl FisherConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha {} must be >= 0",
                self.alpha
            )));
        }
        if !(self.fim_clamp_min > 0.0 && self.fim_clamp_min.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "fim_clamp_min {} must be > 0",
                self.fim_clamp_min
            )));
        }
        if let Some(c) = self.noise_std_clamp_max {
            if c.is_nan() || c <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "noise_std_clamp_max {c} must be > 0"
                )));
            }
        }
        Ok(())
    }

    /// Per-parameter noise standard deviations `α^{1/4} · max(F_i, c)^{-1/4}`.
    pub fn noise_stds(&self, fim: &FimDiagonal) -> Vec<f64> {
        let scale = self.alpha.powf(0.25);
        fim.values
            .iter()
            .map(|&f| {
                let s = scale * f.max(self.fim_clamp_min).powf(-0.25);
                match self.noise_std_clamp_max {
                    Some(c) => s.min(c),
                    None => s,
                }
            })
            .collect()
    }
}

/// `θ + α^{1/4} F^{-1/4} n`, `n ~ N(0, I)`, with `F` the FIM diagonal on the
/// remaining data.
pub fn fisher_forget(model: &Model, remaining: &[Sample], cfg: &FisherConfig) -> Result<Model> {
    cfg.validate()?;
    if remaining.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.alpha == 0.0 {
        return Ok(model.clone());
    }
    let fim = fim_diagonal(model, remaining)?;
    fisher_forget_with_fim(model, &fim, cfg)
}

/// Fisher Forgetting with a precomputed FIM diagonal.
pub fn fisher_forget_with_fim(
    model: &Model,
    fim: &FimDiagonal,
    cfg: &FisherConfig,
) -> Result<Model> {
    cfg.validate()?;
    if fim.values.len() != model.param_count() {
        return Err(Error::DimensionMismatch {
            expected: model.param_count(),
            actual: fim.values.len(),
        });
    }
    if cfg.alpha == 0.0 {
        return Ok(model.clone());
    }
    let stds = cfg.noise_stds(fim);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.noise_seed);
    let params: Vec<f32> = model
        .params()
        .iter()
        .zip(&stds)
        .map(|(&p, &s)| {
            let n: f64 = StandardNormal.sample(&mut rng);
            (p as f64 + s * n) as f32
        })
        .collect();
    if let Some(i) = params.iter().position(|p| !p.is_finite()) {
        return Err(Error::NumericalFailure(format!(
            "Fisher noise produced a non-finite parameter at {i}"
        )));
    }
    Model::from_params(model.arch().clone(), params)
}
