use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use unlearn::attack::{build_attack_set, mia_mean_probability, train_attack_with_epochs};
use unlearn::data::{make_split, DataSource};
use unlearn::format::{load_checkpoint, save_checkpoint};
use unlearn::harness::{self, report, Algorithm, ExperimentConfig, PreparedData};
use unlearn::metrics::{accuracy, EfficacyReport};
use unlearn::nn::{sgd_train_logged, Model, Sample};
use unlearn::unlearn::{amnesiac_forget, fisher_forget, retrain};
use unlearn::{Error, Result, UpdateLog};

/// Machine-unlearning experiments: training with update logs, forgetting,
/// efficacy scoring and membership inference.
#[derive(Parser)]
#[command(name = "unlearn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on the per-class subset and record its update log.
    Train {
        #[command(flatten)]
        opts: Opts,
    },
    /// Apply one forgetting algorithm to a trained model.
    Forget {
        #[command(flatten)]
        opts: Opts,
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_parser = parse_algorithm)]
        algorithm: Algorithm,
    },
    /// Print information score, efficacy and upper bound on the forget set.
    Efficacy {
        #[command(flatten)]
        opts: Opts,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train a membership attack against a checkpoint and score the forget set.
    Attack {
        #[command(flatten)]
        opts: Opts,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run or resume the full experiment grid, then write the report.
    Experiment {
        #[command(flatten)]
        opts: Opts,
    },
    /// Rebuild tables and plot data from an experiment directory.
    Report {
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args)]
struct Opts {
    /// Key-value config file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<DataSource>,
    #[arg(long, env = "UNLB_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    target_class: Option<usize>,
    /// Comma-separated; single-model commands use the first entry.
    #[arg(long)]
    percentages: Option<String>,
    /// Comma-separated; single-model commands use the first entry.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f32>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    fim_clamp_min: Option<f64>,
    /// Comma-separated subset of retrain,amnesiac,fisher; empty for none.
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse_algorithm(s: &str) -> std::result::Result<Algorithm, String> {
    match s.parse::<Algorithm>() {
        Ok(a) if a.is_forgetting() => Ok(a),
        Ok(a) => Err(format!("{a} is not a forgetting algorithm")),
        Err(e) => Err(e.to_string()),
    }
}

impl Opts {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load_for(path, self.dataset)?,
            None => ExperimentConfig::defaults_for(self.dataset.unwrap_or(DataSource::Mnist)),
        };
        let mut set = |key: &str, value: Option<String>| -> Result<()> {
            match value {
                Some(v) => cfg.set(key, &v),
                None => Ok(()),
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        set("data_dir", path(&self.data_dir))?;
        set("target_class", self.target_class.map(|v| v.to_string()))?;
        set("percentages", self.percentages.clone())?;
        set("seeds", self.seeds.clone())?;
        set("epochs", self.epochs.map(|v| v.to_string()))?;
        set("lr", self.lr.map(|v| v.to_string()))?;
        set("batch_size", self.batch_size.map(|v| v.to_string()))?;
        set("alpha", self.alpha.map(|v| v.to_string()))?;
        set("fim_clamp_min", self.fim_clamp_min.map(|v| v.to_string()))?;
        set("algorithms", self.algorithms.clone())?;
        set("out", path(&self.out))?;
        set("jobs", self.jobs.map(|v| v.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

struct Single {
    cfg: ExperimentConfig,
    data: PreparedData,
    seed: u64,
    d_r: Vec<Sample>,
    d_f: Vec<Sample>,
    forget_idx: Vec<usize>,
}

fn single(opts: &Opts) -> Result<Single> {
    let cfg = opts.config()?;
    let data = harness::load_data(&cfg)?;
    let split = make_split(&data.train, cfg.target_class, cfg.percentages[0])?;
    Ok(Single {
        seed: cfg.seeds[0],
        d_r: data.train.subset(&split.remaining).samples,
        d_f: data.train.subset(&split.forget).samples,
        forget_idx: split.forget,
        cfg,
        data,
    })
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

fn accuracies(model: &Model, s: &Single) -> Result<serde_json::Value> {
    Ok(json!({
        "acc_dr": accuracy(model, &s.d_r)?,
        "acc_df": accuracy(model, &s.d_f)?,
        "acc_test": accuracy(model, &s.data.test.samples)?,
    }))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn train(opts: &Opts) -> Result<()> {
    let s = single(opts)?;
    let out = &s.cfg.out;
    create_dir(out)?;
    let arch = harness::architecture(&s.cfg, &s.data)?;
    let initial = Model::init(&arch, s.seed);
    let train_cfg = s.cfg.train_config(harness::train_seed(s.seed));
    let (model, log) = sgd_train_logged(
        &initial,
        &s.data.train.samples,
        &train_cfg,
        &out.join("updates.ulog"),
    )?;
    save_checkpoint(&out.join("initial.ckpt"), &initial)?;
    save_checkpoint(&out.join("model.ckpt"), &model)?;
    let mut summary = accuracies(&model, &s)?;
    summary["seed"] = json!(s.seed);
    summary["updates"] = json!(log.len());
    summary["out"] = json!(out.display().to_string());
    print_json(&summary);
    Ok(())
}

fn forget(opts: &Opts, model_dir: &Path, algorithm: Algorithm) -> Result<()> {
    let s = single(opts)?;
    let model = load_checkpoint(&model_dir.join("model.ckpt"))?;
    let mut noise_seed = None;
    let forgotten = match algorithm {
        Algorithm::Retrain => {
            let cfg = s.cfg.train_config(harness::train_seed(s.seed));
            retrain(model.arch(), s.seed, &s.d_r, &cfg)?
        }
        Algorithm::Amnesiac => {
            let log = UpdateLog::open(&model_dir.join("updates.ulog"))?;
            amnesiac_forget(&model, &log, &s.forget_idx)?.0
        }
        _ => {
            let seed = harness::noise_seed(s.seed, 0);
            noise_seed = Some(seed);
            fisher_forget(&model, &s.d_r, &s.cfg.fisher_config(seed))?
        }
    };
    create_dir(&s.cfg.out)?;
    let path = s.cfg.out.join(format!("{algorithm}.ckpt"));
    save_checkpoint(&path, &forgotten)?;
    let mut summary = accuracies(&forgotten, &s)?;
    summary["efficacy"] = serde_json::to_value(EfficacyReport::compute(&forgotten, &s.d_f)?)
        .map_err(|e| Error::NumericalFailure(e.to_string()))?;
    summary["noise_seed"] = json!(noise_seed);
    summary["checkpoint"] = json!(path.display().to_string());
    print_json(&summary);
    Ok(())
}

fn efficacy(opts: &Opts, checkpoint: &Path) -> Result<()> {
    let s = single(opts)?;
    let model = load_checkpoint(checkpoint)?;
    let report = EfficacyReport::compute(&model, &s.d_f)?;
    println!(
        "{}",
        serde_json::to_string(&report).map_err(|e| Error::NumericalFailure(e.to_string()))?
    );
    Ok(())
}

fn attack(opts: &Opts, checkpoint: &Path) -> Result<()> {
    let s = single(opts)?;
    let model = load_checkpoint(checkpoint)?;
    let (set_seed, attack_seed) = harness::attack_seeds(s.seed);
    let set = build_attack_set(&model, &s.data.train, &s.data.non_members, set_seed)?;
    let attack = train_attack_with_epochs(&set, attack_seed, s.cfg.attack_epochs)?;
    print_json(&json!({
        "seed": s.seed,
        "p": s.cfg.percentages[0],
        "attack_accuracy": attack.accuracy(&set)?,
        "mia_mean_prob": mia_mean_probability(&attack, &model, &s.d_f)?,
    }));
    Ok(())
}

fn experiment(opts: &Opts) -> Result<()> {
    let cfg = opts.config()?;
    let total = harness::GridSize::of(&cfg).total();
    let mut n = 0usize;
    let rows = harness::run_experiment_with(&cfg, |row| {
        n += 1;
        let status = row.error.as_deref().unwrap_or("ok");
        eprintln!(
            "[{n}] seed {} p {} {}: {status}",
            row.seed, row.p, row.algorithm
        );
    })?;
    eprintln!(
        "{} of {total} rows present in {}",
        rows.len(),
        cfg.out.display()
    );
    write_report(&rows, &cfg.out)
}

fn write_report(rows: &[harness::ResultRow], out: &Path) -> Result<()> {
    let summary = report::write_report(rows, &out.join("report"))?;
    print!("{}", summary.text());
    Ok(())
}

fn report_cmd(opts: &Opts) -> Result<()> {
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let rows = harness::load_output(&out)?;
    if rows.is_empty() {
        return Err(Error::MissingData(out.join(harness::RESULTS_FILE)));
    }
    write_report(&rows, &out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Train { opts } => train(opts),
        Command::Forget {
            opts,
            model,
            algorithm,
        } => forget(opts, model, *algorithm),
        Command::Efficacy { opts, checkpoint } => efficacy(opts, checkpoint),
        Command::Attack { opts, checkpoint } => attack(opts, checkpoint),
        Command::Experiment { opts } => experiment(opts),
        Command::Report { opts } => report_cmd(opts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
