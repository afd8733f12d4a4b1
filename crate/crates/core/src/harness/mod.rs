//! Experiment grid runner.
//!
//! For each seed the model is pretrained once with update recording. Then,
//! for every percentage `p`, rows are produced for the initial model, the
//! pretrained model and each configured forgetting algorithm. All metrics
//! are taken on that cell's forget set.
//!
//! Output directory layout:
//!
//! ```text
//! manifest.json   config hash, canonical config, code version, grid size
//! results.csv     one row per (seed, algorithm, p); deterministic
//! timings.csv     wall-clock seconds per phase; not deterministic
//! attacks.jsonl   {seed, algorithm, p, mia_mean_prob} per row
//! logs/           per-seed update logs while a seed is running
//! ```
//!
//! Rows are appended and flushed as soon as they are computed, so an
//! interrupted run loses at most the cells in flight. Running again with the
//! same config skips cells already present; a different config hash in the
//! same directory is refused. At the end the files are rewritten sorted by
//! `(seed, p, algorithm)`.

mod config;
pub mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{Algorithm, ExperimentConfig, DEFAULT_NOISE_STD_CLAMP_MAX};

use crate::attack::{
    build_attack_set, mia_mean_probability, train_attack_with_epochs, AttackModel,
};
use crate::data::{
    gaussian_blobs, load_cifar10, load_mnist_idx, make_split, take_first_per_class, BlobSpec,
    DataSource, LabeledDataset, CLASS_COUNT,
};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, information_score, loss_grad_norm_sq, EfficacyReport};
use crate::nn::{sgd_train_logged, Architecture, Model, Sample};
use crate::unlearn::{amnesiac_forget, fisher_forget, retrain};
use crate::update_log::UpdateLog;

pub const RESULTS_FILE: &str = "results.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const ATTACKS_FILE: &str = "attacks.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Environment variable consulted when no data directory is configured.
pub const DATA_DIR_ENV: &str = "UNLB_DATA_DIR";

impl Serialize for Algorithm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Algorithm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One experimental cell. Metrics are `NaN` when `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub p: f64,
    pub n_forget: usize,
    pub acc_dr: f64,
    pub acc_df: f64,
    pub acc_test: f64,
    pub information: f64,
    pub efficacy: f64,
    pub upper_bound: f64,
    pub grad_norm_sq: f64,
    pub mia_mean_prob: f64,
    pub noise_seed: Option<u64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub timings: PhaseTimings,
}

impl ResultRow {
    pub fn key(&self) -> CellKey {
        CellKey::new(self.seed, self.p, self.algorithm)
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn failed(
        dataset: DataSource,
        seed: u64,
        algorithm: Algorithm,
        p: f64,
        n_forget: usize,
        e: &Error,
    ) -> Self {
        Self {
            dataset: dataset.to_string(),
            seed,
            algorithm,
            p,
            n_forget,
            acc_dr: f64::NAN,
            acc_df: f64::NAN,
            acc_test: f64::NAN,
            information: f64::NAN,
            efficacy: f64::NAN,
            upper_bound: f64::NAN,
            grad_norm_sq: f64::NAN,
            mia_mean_prob: f64::NAN,
            noise_seed: None,
            error: Some(e.to_string().replace(['\n', '\r'], " ")),
            timings: PhaseTimings::default(),
        }
    }
}

/// Wall-clock seconds spent in each phase of one cell.
///
/// `train` is the pretraining time (pretrained rows only); `forget` is the
/// forgetting step, which for retraining is the whole retraining run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub train: f64,
    pub forget: f64,
    pub efficacy: f64,
    pub bound: f64,
    pub attack: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TimingRow {
    seed: u64,
    algorithm: Algorithm,
    p: f64,
    train_secs: f64,
    forget_secs: f64,
    efficacy_secs: f64,
    bound_secs: f64,
    attack_secs: f64,
}

impl TimingRow {
    fn of(row: &ResultRow) -> Self {
        let t = row.timings;
        Self {
            seed: row.seed,
            algorithm: row.algorithm,
            p: row.p,
            train_secs: t.train,
            forget_secs: t.forget,
            efficacy_secs: t.efficacy,
            bound_secs: t.bound,
            attack_secs: t.attack,
        }
    }

    fn timings(&self) -> PhaseTimings {
        PhaseTimings {
            train: self.train_secs,
            forget: self.forget_secs,
            efficacy: self.efficacy_secs,
            bound: self.bound_secs,
            attack: self.attack_secs,
        }
    }
}

#[derive(Debug, Serialize)]
struct AttackLine {
    seed: u64,
    algorithm: Algorithm,
    p: f64,
    mia_mean_prob: f64,
}

/// Sort and identity key of a cell; `p` compares with `f64::total_cmp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub seed: u64,
    pub p: f64,
    pub algorithm: Algorithm,
}

impl CellKey {
    pub fn new(seed: u64, p: f64, algorithm: Algorithm) -> Self {
        Self { seed, p, algorithm }
    }
}

impl Eq for CellKey {}

impl PartialOrd for CellKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.seed
            .cmp(&other.seed)
            .then(self.p.total_cmp(&other.p))
            .then(self.algorithm.cmp(&other.algorithm))
    }
}

/// Row counts of a grid: the forgetting cells plus initial and pretrained
/// baselines for every (seed, p).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridSize {
    pub forgetting_rows: usize,
    pub baseline_rows: usize,
}

impl GridSize {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        let cells = cfg.seeds.len() * cfg.percentages.len();
        Self {
            forgetting_rows: cells * cfg.algorithms.len(),
            baseline_rows: cells * 2,
        }
    }

    pub fn total(&self) -> usize {
        self.forgetting_rows + self.baseline_rows
    }
}

/// Training, test and attack non-member data for one experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// `D`: the first `samples_per_class` training points of every class.
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    /// Held-out points the attack learns as non-members.
    pub non_members: LabeledDataset,
}

/// Directory holding the dataset files: the configured one, else
/// `$UNLB_DATA_DIR`.
pub fn resolve_data_dir(cfg: &ExperimentConfig) -> Option<PathBuf> {
    cfg.data_dir
        .clone()
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
}

fn find_file(dir: &Path, names: &[&str]) -> Result<PathBuf> {
    for name in names {
        for candidate in [dir.join(name), dir.join(format!("{name}.gz"))] {
            if candidate.is_file() {
                return Ok(candidate);
            }
        }
    }
    Err(Error::MissingData(dir.join(names[0])))
}

fn cifar_dir(dir: &Path) -> PathBuf {
    let nested = dir.join("cifar-10-batches-bin");
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let (train_full, test) = match cfg.dataset {
        DataSource::Synthetic => {
            let spec = BlobSpec {
                dim: cfg.synthetic_dim,
                classes: CLASS_COUNT,
                per_class: cfg.samples_per_class,
                spread: cfg.synthetic_spread,
                seed: 0x5EED,
            };
            let train = gaussian_blobs(&spec, 1)?;
            let test = gaussian_blobs(
                &BlobSpec {
                    per_class: cfg.synthetic_test_per_class,
                    ..spec
                },
                2,
            )?;
            (train, test)
        }
        DataSource::Mnist => {
            let dir = resolve_data_dir(cfg).ok_or_else(|| {
                Error::MissingData(PathBuf::from(format!("--data-dir or ${DATA_DIR_ENV}")))
            })?;
            let f = |names: &[&str]| find_file(&dir, names);
            let train = load_mnist_idx(
                &f(&["train-images-idx3-ubyte", "train-images.idx3-ubyte"])?,
                &f(&["train-labels-idx1-ubyte", "train-labels.idx1-ubyte"])?,
            )?;
            let test = load_mnist_idx(
                &f(&["t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"])?,
                &f(&["t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"])?,
            )?;
            (train, test)
        }
        DataSource::Cifar10 => {
            let dir = resolve_data_dir(cfg).ok_or_else(|| {
                Error::MissingData(PathBuf::from(format!("--data-dir or ${DATA_DIR_ENV}")))
            })?;
            let dir = cifar_dir(&dir);
            let batches = (1..=5)
                .map(|i| find_file(&dir, &[&format!("data_batch_{i}.bin")]))
                .collect::<Result<Vec<_>>>()?;
            let train = load_cifar10(&batches)?;
            let test = load_cifar10(&[find_file(&dir, &["test_batch.bin"])?])?;
            (train, test)
        }
    };
    let train = take_first_per_class(&train_full, cfg.samples_per_class)?;
    if cfg.target_class >= train.class_count {
        return Err(Error::InvalidConfig(format!(
            "target class {} outside 0..{}",
            cfg.target_class, train.class_count
        )));
    }
    let per_class = test
        .class_counts()
        .into_iter()
        .min()
        .unwrap_or(0)
        .min(cfg.samples_per_class);
    let non_members = take_first_per_class(&test, per_class.max(1))?;
    Ok(PreparedData {
        train,
        test,
        non_members,
    })
}

pub fn architecture(cfg: &ExperimentConfig, data: &PreparedData) -> Result<Architecture> {
    Architecture::with_hidden(
        data.train.feature_dim(),
        &cfg.hidden,
        data.train.class_count,
    )
}

/// Seed for one randomized phase of a cell, derived from the run seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a combination of the three inputs.
    let mut z = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9))
        .wrapping_add(index.wrapping_mul(0x94D0_49BB_1331_11EB))
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_TRAIN: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_ATTACK: u64 = 3;

/// Shuffle seed of pretraining and retraining for run seed `seed`.
pub fn train_seed(seed: u64) -> u64 {
    derive_seed(seed, STREAM_TRAIN, 0)
}

/// Fisher noise seed for the `p_index`-th percentage.
pub fn noise_seed(seed: u64, p_index: usize) -> u64 {
    derive_seed(seed, STREAM_NOISE, p_index as u64)
}

/// Seeds for (subsampling the attack set, training the attack model).
pub fn attack_seeds(seed: u64) -> (u64, u64) {
    (
        derive_seed(seed, STREAM_ATTACK, 0),
        derive_seed(seed, STREAM_ATTACK, 1),
    )
}

/// The per-p pieces shared by all rows of one (seed, p).
struct Cell<'a> {
    p: f64,
    p_index: usize,
    forget_idx: Vec<usize>,
    d_r: Vec<Sample>,
    d_f: Vec<Sample>,
    test: &'a [Sample],
}

fn secs(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

fn evaluate(
    model: &Model,
    cell: &Cell,
    attack: &AttackModel,
    timings: &mut PhaseTimings,
) -> Result<[f64; 6]> {
    let acc_dr = accuracy(model, &cell.d_r)?;
    let acc_df = accuracy(model, &cell.d_f)?;
    let acc_test = accuracy(model, cell.test)?;
    let t = Instant::now();
    let information = information_score(model, &cell.d_f)?;
    timings.efficacy = secs(t);
    let t = Instant::now();
    let grad_norm_sq = loss_grad_norm_sq(model, &cell.d_f)?;
    timings.bound = secs(t);
    let t = Instant::now();
    let mia = mia_mean_probability(attack, model, &cell.d_f)?;
    timings.attack = secs(t);
    if ![information, grad_norm_sq, mia]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(Error::NumericalFailure("non-finite metric".into()));
    }
    Ok([acc_dr, acc_df, acc_test, information, grad_norm_sq, mia])
}

struct SeedJob<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a PreparedData,
    arch: &'a Architecture,
    seed: u64,
    done: &'a BTreeSet<CellKey>,
}

impl SeedJob<'_> {
    fn row(
        &self,
        cell: &Cell,
        algorithm: Algorithm,
        model: Result<(Model, PhaseTimings)>,
        attack: &AttackModel,
        noise_seed: Option<u64>,
    ) -> ResultRow {
        let ds = self.cfg.dataset;
        let outcome = model.and_then(|(m, mut t)| {
            let v = evaluate(&m, cell, attack, &mut t)?;
            Ok((v, t))
        });
        match outcome {
            Ok(([acc_dr, acc_df, acc_test, information, grad_norm_sq, mia], timings)) => {
                let report = EfficacyReport::from_parts(information, grad_norm_sq);
                ResultRow {
                    dataset: ds.to_string(),
                    seed: self.seed,
                    algorithm,
                    p: cell.p,
                    n_forget: cell.d_f.len(),
                    acc_dr,
                    acc_df,
                    acc_test,
                    information,
                    efficacy: report.efficacy,
                    upper_bound: report.upper_bound,
                    grad_norm_sq,
                    mia_mean_prob: mia,
                    noise_seed,
                    error: None,
                    timings,
                }
            }
            Err(e) => ResultRow::failed(ds, self.seed, algorithm, cell.p, cell.d_f.len(), &e),
        }
    }

    fn pending(&self, p: f64, algorithm: Algorithm) -> bool {
        !self.done.contains(&CellKey::new(self.seed, p, algorithm))
    }

    fn algorithms(&self) -> Vec<Algorithm> {
        [Algorithm::Initial, Algorithm::Pretrained]
            .into_iter()
            .chain(self.cfg.algorithms.iter().copied())
            .collect()
    }

    fn run(&self, log_path: &Path, emit: &dyn Fn(ResultRow)) {
        let algorithms = self.algorithms();
        let any_pending = self
            .cfg
            .percentages
            .iter()
            .any(|&p| algorithms.iter().any(|&a| self.pending(p, a)));
        if !any_pending {
            return;
        }
        if let Err(e) = self.run_inner(log_path, &algorithms, emit) {
            // Setup failed: mark every remaining cell of this seed.
            for &p in &self.cfg.percentages {
                for &a in &algorithms {
                    if self.pending(p, a) {
                        emit(ResultRow::failed(self.cfg.dataset, self.seed, a, p, 0, &e));
                    }
                }
            }
        }
        if !self.cfg.keep_logs {
            let _ = fs::remove_file(log_path);
        }
    }

    fn run_inner(
        &self,
        log_path: &Path,
        algorithms: &[Algorithm],
        emit: &dyn Fn(ResultRow),
    ) -> Result<()> {
        let cfg = self.cfg;
        let train_cfg = cfg.train_config(train_seed(self.seed));
        let initial = Model::init(self.arch, self.seed);
        let t = Instant::now();
        let (pretrained, log) =
            sgd_train_logged(&initial, &self.data.train.samples, &train_cfg, log_path)?;
        let train_secs = secs(t);

        let (set_seed, attack_seed) = attack_seeds(self.seed);
        let attack_set = build_attack_set(
            &pretrained,
            &self.data.train,
            &self.data.non_members,
            set_seed,
        )?;
        let attack = train_attack_with_epochs(&attack_set, attack_seed, cfg.attack_epochs)?;

        for (p_index, &p) in cfg.percentages.iter().enumerate() {
            if !algorithms.iter().any(|&a| self.pending(p, a)) {
                continue;
            }
            let split = make_split(&self.data.train, cfg.target_class, p)?;
            let cell = Cell {
                p,
                p_index,
                d_r: self.data.train.subset(&split.remaining).samples,
                d_f: self.data.train.subset(&split.forget).samples,
                forget_idx: split.forget,
                test: &self.data.test.samples,
            };
            for &a in algorithms {
                if !self.pending(p, a) {
                    continue;
                }
                let (model, noise_seed) =
                    self.apply(a, &cell, &initial, &pretrained, &log, train_secs);
                emit(self.row(&cell, a, model, &attack, noise_seed));
            }
        }
        Ok(())
    }

    fn apply(
        &self,
        algorithm: Algorithm,
        cell: &Cell,
        initial: &Model,
        pretrained: &Model,
        log: &UpdateLog,
        train_secs: f64,
    ) -> (Result<(Model, PhaseTimings)>, Option<u64>) {
        let t = Instant::now();
        let timed = |r: Result<Model>, train: f64| {
            r.map(|m| {
                (
                    m,
                    PhaseTimings {
                        train,
                        forget: secs(t),
                        ..Default::default()
                    },
                )
            })
        };
        match algorithm {
            Algorithm::Initial => (Ok((initial.clone(), PhaseTimings::default())), None),
            Algorithm::Pretrained => (
                Ok((
                    pretrained.clone(),
                    PhaseTimings {
                        train: train_secs,
                        ..Default::default()
                    },
                )),
                None,
            ),
            Algorithm::Retrain => {
                let cfg = self.cfg.train_config(train_seed(self.seed));
                (
                    timed(retrain(self.arch, self.seed, &cell.d_r, &cfg), 0.0),
                    None,
                )
            }
            Algorithm::Amnesiac => (
                timed(
                    amnesiac_forget(pretrained, log, &cell.forget_idx).map(|(m, _)| m),
                    0.0,
                ),
                None,
            ),
            Algorithm::Fisher => {
                let noise_seed = noise_seed(self.seed, cell.p_index);
                let fcfg = self.cfg.fisher_config(noise_seed);
                (
                    timed(fisher_forget(pretrained, &cell.d_r, &fcfg), 0.0),
                    Some(noise_seed),
                )
            }
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    code_version: String,
    config: String,
    forgetting_rows: usize,
    baseline_rows: usize,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let io = |e| Error::io(path.display().to_string(), e);
    let mut f = File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::CountMismatch(format!("{}: {e}", path.display()))
}

/// Reads a results file, dropping a trailing partial record left by an
/// interrupted write.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows(path)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let records: Vec<_> = reader.deserialize::<T>().collect();
    let n = records.len();
    let mut rows = Vec::with_capacity(n);
    for (i, r) in records.into_iter().enumerate() {
        match r {
            Ok(row) => rows.push(row),
            Err(_) if i + 1 == n => {}
            Err(e) => return Err(csv_error(path, e)),
        }
    }
    Ok(rows)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header_of_empty: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header_of_empty)
            .map_err(|e| csv_error(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(path.display().to_string(), e.into_error()))?;
    write_atomic(path, &bytes)
}

const RESULT_COLUMNS: [&str; 15] = [
    "dataset",
    "seed",
    "algorithm",
    "p",
    "n_forget",
    "acc_dr",
    "acc_df",
    "acc_test",
    "information",
    "efficacy",
    "upper_bound",
    "grad_norm_sq",
    "mia_mean_prob",
    "noise_seed",
    "error",
];
const TIMING_COLUMNS: [&str; 8] = [
    "seed",
    "algorithm",
    "p",
    "train_secs",
    "forget_secs",
    "efficacy_secs",
    "bound_secs",
    "attack_secs",
];

fn write_attacks(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        out.extend(
            serde_json::to_vec(&attack_line(r)).map_err(|e| Error::InvalidConfig(e.to_string()))?,
        );
        out.push(b'\n');
    }
    write_atomic(path, &out)
}

fn attack_line(r: &ResultRow) -> AttackLine {
    AttackLine {
        seed: r.seed,
        algorithm: r.algorithm,
        p: r.p,
        mia_mean_prob: r.mia_mean_prob,
    }
}

/// Loads rows and timings from an output directory, keeping the last entry
/// of each cell, sorted by cell key.
pub fn load_output(out: &Path) -> Result<Vec<ResultRow>> {
    let results = out.join(RESULTS_FILE);
    if !results.is_file() {
        return Ok(Vec::new());
    }
    let mut by_key: BTreeMap<CellKey, ResultRow> = BTreeMap::new();
    for row in read_rows::<ResultRow>(&results)? {
        by_key.insert(row.key(), row);
    }
    let timings = out.join(TIMINGS_FILE);
    if timings.is_file() {
        for t in read_rows::<TimingRow>(&timings)? {
            if let Some(row) = by_key.get_mut(&CellKey::new(t.seed, t.p, t.algorithm)) {
                row.timings = t.timings();
            }
        }
    }
    Ok(by_key.into_values().collect())
}

fn store_output(out: &Path, rows: &[ResultRow]) -> Result<()> {
    write_rows(&out.join(RESULTS_FILE), rows, &RESULT_COLUMNS)?;
    let timings: Vec<TimingRow> = rows.iter().map(TimingRow::of).collect();
    write_rows(&out.join(TIMINGS_FILE), &timings, &TIMING_COLUMNS)?;
    write_attacks(&out.join(ATTACKS_FILE), rows)
}

/// Appends rows to the three output files, flushing after each row.
struct RowWriter {
    results: csv::Writer<File>,
    timings: csv::Writer<File>,
    attacks: File,
}

impl RowWriter {
    fn open(out: &Path) -> Result<Self> {
        let open = |name: &str| {
            let path = out.join(name);
            OpenOptions::new()
                .append(true)
                .open(&path)
                .map_err(|e| Error::io(path.display().to_string(), e))
        };
        let csv_writer = |f| csv::WriterBuilder::new().has_headers(false).from_writer(f);
        Ok(Self {
            results: csv_writer(open(RESULTS_FILE)?),
            timings: csv_writer(open(TIMINGS_FILE)?),
            attacks: open(ATTACKS_FILE)?,
        })
    }

    fn push(&mut self, row: &ResultRow) -> Result<()> {
        let wrap = |e: csv::Error| Error::CountMismatch(e.to_string());
        self.results.serialize(row).map_err(wrap)?;
        self.results
            .flush()
            .map_err(|e| Error::io(RESULTS_FILE, e))?;
        self.timings.serialize(TimingRow::of(row)).map_err(wrap)?;
        self.timings
            .flush()
            .map_err(|e| Error::io(TIMINGS_FILE, e))?;
        let mut line = serde_json::to_vec(&attack_line(row))
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        line.push(b'\n');
        self.attacks
            .write_all(&line)
            .and_then(|_| self.attacks.flush())
            .map_err(|e| Error::io(ATTACKS_FILE, e))
    }
}

fn check_manifest(out: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let path = out.join(MANIFEST_FILE);
    let grid = GridSize::of(cfg);
    let manifest = Manifest {
        config_hash: cfg.hash(),
        code_version: env!("CARGO_PKG_VERSION").to_owned(),
        config: cfg.canonical(),
        forgetting_rows: grid.forgetting_rows,
        baseline_rows: grid.baseline_rows,
    };
    if path.is_file() {
        let text =
            fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let old: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        if old.config_hash != manifest.config_hash {
            return Err(Error::InvalidConfig(format!(
                "{} holds results of a different configuration (hash {})",
                out.display(),
                old.config_hash
            )));
        }
    }
    let json =
        serde_json::to_vec_pretty(&manifest).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    write_atomic(&path, &json)
}

/// Runs (or resumes) the grid and returns all rows of the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_with(cfg, |_| {})
}

/// As [`run_experiment`], calling `progress` for every freshly computed row.
pub fn run_experiment_with<F: FnMut(&ResultRow)>(
    cfg: &ExperimentConfig,
    mut progress: F,
) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let out = &cfg.out;
    fs::create_dir_all(out.join("logs")).map_err(|e| Error::io(out.display().to_string(), e))?;
    check_manifest(out, cfg)?;
    let existing = load_output(out)?;
    store_output(out, &existing)?;
    let done: BTreeSet<CellKey> = existing.iter().map(ResultRow::key).collect();

    let data = load_data(cfg)?;
    let arch = architecture(cfg, &data)?;
    let mut writer = RowWriter::open(out)?;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<ResultRow>();
    let mut write_error = None;

    std::thread::scope(|scope| {
        for _ in 0..cfg.jobs.min(cfg.seeds.len()) {
            let tx = tx.clone();
            let (next, data, arch, done) = (&next, &data, &arch, &done);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = cfg.seeds.get(i) else { break };
                let job = SeedJob {
                    cfg,
                    data,
                    arch,
                    seed,
                    done,
                };
                let log_path = cfg.out.join("logs").join(format!("seed-{seed}.ulog"));
                job.run(&log_path, &|row| {
                    let _ = tx.send(row);
                });
            });
        }
        drop(tx);
        for row in rx {
            if write_error.is_none() {
                write_error = writer.push(&row).err();
            }
            progress(&row);
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    if !cfg.keep_logs {
        // Fails harmlessly when logs from an earlier keep_logs run remain.
        let _ = fs::remove_dir(out.join("logs"));
    }
    let rows = load_output(out)?;
    store_output(out, &rows)?;
    Ok(rows)
}

/// Reads the `mia_mean_prob` entries of an attacks file.
pub fn read_attack_lines(path: &Path) -> Result<Vec<(u64, Algorithm, f64, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    #[derive(Deserialize)]
    struct Line {
        seed: u64,
        algorithm: Algorithm,
        p: f64,
        mia_mean_prob: Option<f64>,
    }
    BufReader::new(file)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l.map_err(|e| Error::io(path.display().to_string(), e))?;
            let v: Line = serde_json::from_str(&l)
                .map_err(|e| Error::CountMismatch(format!("{}: {e}", path.display())))?;
            Ok((
                v.seed,
                v.algorithm,
                v.p,
                v.mia_mean_prob.unwrap_or(f64::NAN),
            ))
        })
        .collect()
}
