//! Experiment configuration in a plain `key = value` text format.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Unknown keys are rejected. Dataset-dependent defaults (target
//! class, epochs, batch size) are applied first, so the `dataset` key may
//! appear anywhere in the file.
//!
//! ```text
//! dataset = mnist
//! data_dir = data/mnist
//! seeds = 1,2,3,4,5
//! percentages = 0.01,0.1,0.25,0.5,0.8,1
//! algorithms = retrain,amnesiac,fisher
//! out = results/mnist
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::data::{DataSource, DEFAULT_PERCENTAGES};
use crate::error::{Error, Result};
use crate::nn::TrainConfig;
use crate::unlearn::FisherConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Initial,
    Pretrained,
    Retrain,
    Amnesiac,
    Fisher,
}

impl Algorithm {
    pub const FORGETTING: [Algorithm; 3] =
        [Algorithm::Retrain, Algorithm::Amnesiac, Algorithm::Fisher];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Initial => "initial",
            Algorithm::Pretrained => "pretrained",
            Algorithm::Retrain => "retrain",
            Algorithm::Amnesiac => "amnesiac",
            Algorithm::Fisher => "fisher",
        }
    }

    pub fn is_forgetting(self) -> bool {
        Self::FORGETTING.contains(&self)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "initial" => Ok(Algorithm::Initial),
            "pretrained" | "pre-trained" => Ok(Algorithm::Pretrained),
            "retrain" | "retraining" => Ok(Algorithm::Retrain),
            "amnesiac" => Ok(Algorithm::Amnesiac),
            "fisher" => Ok(Algorithm::Fisher),
            other => Err(Error::InvalidConfig(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DataSource,
    pub data_dir: Option<PathBuf>,
    pub target_class: usize,
    pub percentages: Vec<f64>,
    pub seeds: Vec<u64>,
    pub samples_per_class: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub alpha: f64,
    pub fim_clamp_min: f64,
    pub noise_std_clamp_max: Option<f64>,
    pub algorithms: Vec<Algorithm>,
    pub out: PathBuf,
    pub jobs: usize,
    pub attack_epochs: usize,
    /// Feature dimension of the synthetic blobs.
    pub synthetic_dim: usize,
    pub synthetic_spread: f32,
    /// Held-out synthetic samples per class.
    pub synthetic_test_per_class: usize,
    pub keep_logs: bool,
}

impl ExperimentConfig {
    pub fn defaults_for(dataset: DataSource) -> Self {
        let (target_class, train) = match dataset {
            DataSource::Cifar10 => (8, TrainConfig::cifar10(0)),
            DataSource::Mnist | DataSource::Synthetic => (3, TrainConfig::mnist(0)),
        };
        let fisher = FisherConfig::default();
        Self {
            dataset,
            data_dir: None,
            target_class,
            percentages: DEFAULT_PERCENTAGES.to_vec(),
            seeds: (1..=20).collect(),
            samples_per_class: 100,
            hidden: vec![512, 256, 128],
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            alpha: fisher.alpha,
            fim_clamp_min: fisher.fim_clamp_min,
            noise_std_clamp_max: DEFAULT_NOISE_STD_CLAMP_MAX,
            algorithms: Algorithm::FORGETTING.to_vec(),
            out: PathBuf::from("results"),
            jobs: 1,
            attack_epochs: crate::attack::ATTACK_EPOCHS,
            synthetic_dim: 64,
            synthetic_spread: 0.15,
            synthetic_test_per_class: 100,
            keep_logs: false,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            seed,
            record_updates: true,
            shuffle: true,
        }
    }

    pub fn fisher_config(&self, noise_seed: u64) -> FisherConfig {
        FisherConfig {
            alpha: self.alpha,
            fim_clamp_min: self.fim_clamp_min,
            noise_seed,
            noise_std_clamp_max: self.noise_std_clamp_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seeds must be distinct".into()));
        }
        if self.percentages.is_empty() {
            return Err(Error::InvalidConfig("percentages must not be empty".into()));
        }
        if let Some(p) = self.percentages.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidConfig(format!(
                "percentage {p} outside (0, 1]"
            )));
        }
        if self.algorithms.iter().any(|a| !a.is_forgetting()) {
            return Err(Error::InvalidConfig(
                "algorithms may only list retrain, amnesiac, fisher".into(),
            ));
        }
        if self.samples_per_class == 0 || self.jobs == 0 || self.attack_epochs == 0 {
            return Err(Error::InvalidConfig(
                "samples_per_class, jobs and attack_epochs must be positive".into(),
            ));
        }
        self.train_config(0)
            .validate(self.samples_per_class * crate::data::CLASS_COUNT)?;
        self.fisher_config(0).validate()
    }

    /// Parses a config file body.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_for(text, None)
    }

    /// Like [`parse`](Self::parse), but `dataset` replaces the file's
    /// `dataset` entry and supplies the defaults the other keys override.
    pub fn parse_for(text: &str, dataset: Option<DataSource>) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let from_file = pairs
            .iter()
            .find(|(k, _)| k == "dataset")
            .map(|(_, v)| v.parse())
            .transpose()?;
        let mut cfg = Self::defaults_for(dataset.or(from_file).unwrap_or(DataSource::Mnist));
        for (k, v) in pairs
            .iter()
            .filter(|(k, _)| dataset.is_none() || k != "dataset")
        {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_for(path, None)
    }

    pub fn load_for(path: &Path, dataset: Option<DataSource>) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse_for(&text, dataset)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "dataset" => self.dataset = value.parse()?,
            "data_dir" => {
                self.data_dir = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "target_class" => self.target_class = num(key, value)?,
            "percentages" => self.percentages = list(key, value)?,
            "seeds" => self.seeds = list(key, value)?,
            "samples_per_class" => self.samples_per_class = num(key, value)?,
            "hidden" => self.hidden = list(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "lr" | "learning_rate" => self.learning_rate = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "fim_clamp_min" => self.fim_clamp_min = num(key, value)?,
            "noise_std_clamp_max" => {
                self.noise_std_clamp_max = match value {
                    "" | "none" => None,
                    v => Some(num(key, v)?),
                }
            }
            "algorithms" => {
                self.algorithms = if value.is_empty() || value == "none" {
                    Vec::new()
                } else {
                    value.split(',').map(str::parse).collect::<Result<_>>()?
                }
            }
            "out" => self.out = PathBuf::from(value),
            "jobs" => self.jobs = num(key, value)?,
            "attack_epochs" => self.attack_epochs = num(key, value)?,
            "synthetic_dim" => self.synthetic_dim = num(key, value)?,
            "synthetic_spread" => self.synthetic_spread = num(key, value)?,
            "synthetic_test_per_class" => self.synthetic_test_per_class = num(key, value)?,
            "keep_logs" => self.keep_logs = num(key, value)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown config key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Canonical text form: every key, fixed order. Settings that do not
    /// influence results (`out`, `jobs`, `keep_logs`, `data_dir`) are left
    /// out so that moving or parallelising a run keeps its hash.
    pub fn canonical(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("dataset", self.dataset.to_string());
        kv("target_class", self.target_class.to_string());
        kv(
            "percentages",
            join(self.percentages.iter().map(f64::to_string).collect()),
        );
        kv(
            "seeds",
            join(self.seeds.iter().map(u64::to_string).collect()),
        );
        kv("samples_per_class", self.samples_per_class.to_string());
        kv(
            "hidden",
            join(self.hidden.iter().map(usize::to_string).collect()),
        );
        kv("epochs", self.epochs.to_string());
        kv("lr", self.learning_rate.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("alpha", self.alpha.to_string());
        kv("fim_clamp_min", self.fim_clamp_min.to_string());
        kv(
            "noise_std_clamp_max",
            self.noise_std_clamp_max
                .map_or_else(|| "none".to_owned(), |v| v.to_string()),
        );
        kv(
            "algorithms",
            join(self.algorithms.iter().map(|a| a.to_string()).collect()),
        );
        kv("attack_epochs", self.attack_epochs.to_string());
        if self.dataset == DataSource::Synthetic {
            kv("synthetic_dim", self.synthetic_dim.to_string());
            kv("synthetic_spread", self.synthetic_spread.to_string());
            kv(
                "synthetic_test_per_class",
                self.synthetic_test_per_class.to_string(),
            );
        }
        s
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Noise standard deviation cap used by the harness unless overridden.
pub const DEFAULT_NOISE_STD_CLAMP_MAX: Option<f64> = Some(0.03);

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
        pairs.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(pairs)
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {value:?}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num(key, s))
        .collect()
}
