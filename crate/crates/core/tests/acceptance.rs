//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 4 to 7 need the MNIST IDX files, looked up in `$UNLB_DATA_DIR`
//! and then `<workspace>/data/mnist`. The five-seed MNIST grid is cached
//! under Cargo's test scratch directory and resumed on later runs.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use unlearn::data::{parse_cifar10, parse_idx_images, parse_idx_labels, DataSource};
use unlearn::format::{decode_checkpoint, encode_checkpoint};
use unlearn::harness::{run_experiment_with, Algorithm, ExperimentConfig, ResultRow};
use unlearn::metrics::{information_score, loss_grad_norm_sq};
use unlearn::nn::{sgd_train, sgd_train_logged};
use unlearn::unlearn::amnesiac_forget;
use unlearn::{Architecture, Error, Model, Sample, TrainConfig, UpdateLog};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// Accumulates sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    passed: usize,
}

impl Checks {
    fn check(&mut self, ok: bool, what: String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(what);
        }
    }

    fn verdict(self) -> Verdict {
        let total = self.passed + self.failed.len();
        if self.failed.is_empty() {
            Verdict::new(true, format!("{total}/{total} checks"))
        } else {
            Verdict::new(
                false,
                format!(
                    "{}/{total} checks; failed: {}",
                    self.passed,
                    self.failed.join("; ")
                ),
            )
        }
    }
}

fn random_case(rng: &mut ChaCha8Rng) -> (Model, Vec<Sample>) {
    let classes = rng.random_range(2..=3);
    let mut sizes = vec![2];
    for _ in 0..rng.random_range(0..=2) {
        sizes.push(rng.random_range(1..=8));
    }
    sizes.push(classes);
    let arch = Architecture::new(sizes).unwrap();
    let scale = 10f32.powf(rng.random_range(-1.0..1.0));
    let params = Model::init(&arch, rng.random())
        .params()
        .iter()
        .map(|w| w * scale + rng.random_range(-0.1..0.1))
        .collect();
    let model = Model::from_params(arch, params).unwrap();
    let n = rng.random_range(1..=64);
    let data = (0..n)
        .map(|_| {
            let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            Sample::new(x, rng.random_range(0..classes))
        })
        .collect();
    (model, data)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0;
    let mut worst_single = 0.0f64;
    let mut singles = 0;
    let cases = 1500;
    for _ in 0..cases {
        let (model, mut data) = random_case(&mut rng);
        if rng.random_bool(0.2) {
            data.truncate(1);
        }
        let info = information_score(&model, &data).unwrap();
        let norm = loss_grad_norm_sq(&model, &data).unwrap();
        if norm > info + 1e-12 {
            violations += 1;
        }
        if data.len() == 1 {
            singles += 1;
            if info > 0.0 {
                worst_single = worst_single.max((norm - info).abs() / info);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Verdict::new(
        violations == 0 && worst_single < 1e-9 && secs < 60.0 && singles > 0,
        format!(
            "{cases} pairs, {violations} violations, {singles} single-sample cases with max rel gap {worst_single:.1e}, {secs:.1}s"
        ),
    )
}

fn criterion_2() -> Verdict {
    let mut worst = 0.0f64;
    let mut coords = 0;
    let mut at_kink = 0;
    for sizes in [vec![2, 4, 3], vec![3, 4, 2, 2], vec![4, 5, 2]] {
        let arch = Architecture::new(sizes.clone()).unwrap();
        assert!(arch.param_count() <= 50);
        for seed in 0..10 {
            let model = Model::init(&arch, seed);
            let params = params_f64(&model);
            for s in toy_data(3, sizes[0], *sizes.last().unwrap(), seed + 50) {
                if min_hidden_margin(&sizes, &params, &features_f64(&s)) < 1e-2 {
                    at_kink += 1;
                    continue;
                }
                let g = model.per_sample_grad(&s).unwrap();
                let fd = fd_grad_log_prob(&sizes, &params, &features_f64(&s), s.label, 1e-4);
                for (a, b) in g.values.iter().zip(&fd) {
                    worst = worst.max(rel_err(*a as f64, *b, 1e-3));
                    coords += 1;
                }
            }
        }
    }
    Verdict::new(
        worst < 1e-4 && coords > 1000,
        format!("{coords} coordinates, max relative error {worst:.2e}, {at_kink} samples skipped at a ReLU kink"),
    )
}

fn criterion_3() -> Verdict {
    let arch = Architecture::new(vec![4, 8, 3]).unwrap();
    let mut worst = 0.0f64;
    for split in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(split);
        let data = toy_data(48, 4, 3, split);
        let cfg = TrainConfig {
            epochs: 4,
            learning_rate: 0.1,
            batch_size: rng.random_range(1..=12),
            seed: split,
            record_updates: true,
            shuffle: true,
        };
        let (trained, log) = sgd_train(&Model::init(&arch, split), &data, &cfg).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for i in 0..data.len() {
            match rng.random_range(0..6) {
                0 => a.push(i),
                1 => b.push(i),
                _ => {}
            }
        }
        let union: Vec<usize> = a.iter().chain(&b).copied().collect();
        let (step, log_a) = amnesiac_forget(&trained, &log, &a).unwrap();
        let (iterative, _) = amnesiac_forget(&step, &log_a, &b).unwrap();
        let (batch, _) = amnesiac_forget(&trained, &log, &union).unwrap();
        let diff: f64 = batch
            .params()
            .iter()
            .zip(iterative.params())
            .map(|(x, y)| ((x - y) as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = batch
            .params()
            .iter()
            .map(|x| (*x as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / norm);
    }
    Verdict::new(
        worst < 1e-5,
        format!("50 splits, max relative distance {worst:.2e}"),
    )
}

fn criterion_8() -> Verdict {
    let mut c = Checks::default();
    let model = Model::init(&Architecture::default_mlp(784, 10).unwrap(), 8);
    let back = decode_checkpoint(&encode_checkpoint(&model)).unwrap();
    let bits = |m: &Model| m.params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    c.check(
        bits(&back) == bits(&model) && back.arch() == model.arch(),
        "checkpoint round trip".into(),
    );
    let mut bad = encode_checkpoint(&model);
    bad[1] ^= 0x20;
    c.check(
        matches!(decode_checkpoint(&bad), Err(Error::BadMagic { .. })),
        "checkpoint magic".into(),
    );
    let full = encode_checkpoint(&model);
    c.check(
        decode_checkpoint(&full[..full.len() - 3]).is_err(),
        "checkpoint truncation".into(),
    );

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.ulog");
    let arch = Architecture::new(vec![4, 8, 3]).unwrap();
    let cfg = TrainConfig {
        epochs: 2,
        learning_rate: 0.1,
        batch_size: 5,
        seed: 3,
        record_updates: true,
        shuffle: true,
    };
    let data = toy_data(20, 4, 3, 4);
    let (_, mem) = sgd_train(&Model::init(&arch, 2), &data, &cfg).unwrap();
    let (_, file) = sgd_train_logged(&Model::init(&arch, 2), &data, &cfg, &path).unwrap();
    let read = UpdateLog::read_all(&path).unwrap();
    let same = (0..mem.len()).all(|i| {
        let a: Vec<u32> = mem.delta(i).unwrap().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = read.delta(i).unwrap().iter().map(|v| v.to_bits()).collect();
        a == b && mem.records()[i].sample_indices == read.records()[i].sample_indices
    });
    c.check(
        same && file.len() == mem.len() && read.len() == mem.len(),
        "update log round trip".into(),
    );
    let copy = dir.path().join("copy.ulog");
    read.write_to(&copy).unwrap();
    c.check(
        std::fs::read(&path).unwrap() == std::fs::read(&copy).unwrap(),
        "update log rewrite".into(),
    );
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&copy, &bytes[..bytes.len() - 7]).unwrap();
    c.check(
        UpdateLog::open(&copy).is_err(),
        "update log truncation".into(),
    );

    let mut images = Vec::new();
    for v in [0x0803u32, 2, 28, 28] {
        images.extend(v.to_be_bytes());
    }
    images.extend(vec![17u8; 2 * 784]);
    let mut labels = Vec::new();
    for v in [0x0801u32, 2] {
        labels.extend(v.to_be_bytes());
    }
    labels.extend([3u8, 8]);
    c.check(
        parse_idx_images(&images).is_ok() && parse_idx_labels(&labels).is_ok(),
        "valid IDX".into(),
    );
    for byte in 0..4 {
        let mut bad = images.clone();
        bad[byte] ^= 0x04;
        c.check(
            matches!(parse_idx_images(&bad), Err(Error::BadMagic { .. })),
            format!("IDX image magic byte {byte}"),
        );
        let mut bad = labels.clone();
        bad[byte] ^= 0x04;
        c.check(
            matches!(parse_idx_labels(&bad), Err(Error::BadMagic { .. })),
            format!("IDX label magic byte {byte}"),
        );
    }
    for cut in [0, 3, 15, images.len() - 1] {
        c.check(
            parse_idx_images(&images[..cut]).is_err(),
            format!("IDX image truncated to {cut}"),
        );
    }
    for cut in [0, 5, labels.len() - 1] {
        c.check(
            parse_idx_labels(&labels[..cut]).is_err(),
            format!("IDX label truncated to {cut}"),
        );
    }
    let mut record = vec![6u8];
    record.extend(vec![90u8; 3072]);
    record.extend(record.clone());
    c.check(
        parse_cifar10(&record).map(|r| r.len()).ok() == Some(2),
        "valid CIFAR".into(),
    );
    for cut in [1, 3073 + 100, record.len() - 1] {
        c.check(
            parse_cifar10(&record[..cut]).is_err(),
            format!("CIFAR truncated to {cut}"),
        );
    }
    c.verdict()
}

fn best_of(reps: usize, mut f: impl FnMut()) -> Duration {
    (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

/// Time ratio bound/efficacy on the MNIST architecture for growing |D|.
fn criterion_7_cost() -> (bool, String) {
    let arch = Architecture::default_mlp(784, 10).unwrap();
    let model = Model::init(&arch, 1);
    let data = toy_data(1000, 784, 10, 5);
    let mut ratios = Vec::new();
    for n in [10, 100, 1000] {
        let d = &data[..n];
        let reps = if n == 1000 { 2 } else { 5 };
        let eff = best_of(reps, || {
            information_score(&model, d).unwrap();
        });
        let bound = best_of(reps, || {
            loss_grad_norm_sq(&model, d).unwrap();
        });
        ratios.push((n, bound.as_secs_f64() / eff.as_secs_f64()));
    }
    let decreasing = ratios.windows(2).all(|w| w[1].1 < w[0].1);
    let ok = decreasing && ratios[2].1 < 0.1;
    let text = ratios
        .iter()
        .map(|(n, r)| format!("|D|={n}: {r:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    (ok, format!("bound/efficacy time {text}"))
}

fn data_dir() -> PathBuf {
    std::env::var_os("UNLB_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn mnist_rows() -> Result<Vec<ResultRow>, String> {
    let mut cfg = ExperimentConfig::defaults_for(DataSource::Mnist);
    cfg.seeds = (1..=5).collect();
    cfg.data_dir = Some(data_dir());
    cfg.jobs = 1;
    cfg.out = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join(format!("acceptance-mnist-{}", &cfg.hash()[..12]));
    let start = Instant::now();
    let mut fresh = 0;
    let rows = run_experiment_with(&cfg, |r| {
        fresh += 1;
        if r.algorithm == Algorithm::Fisher && r.p == 1.0 {
            eprintln!(
                "  seed {} done ({:.0}s)",
                r.seed,
                start.elapsed().as_secs_f64()
            );
        }
    })
    .map_err(|e| match e {
        Error::MissingData(_) | Error::Io { .. } => {
            format!("MNIST experiment failed: {e} (set UNLB_DATA_DIR to the MNIST IDX directory)")
        }
        e => format!("MNIST experiment failed: {e}"),
    })?;
    eprintln!(
        "  MNIST grid: {} rows ({} computed now) in {}",
        rows.len(),
        fresh,
        cfg.out.display()
    );
    let failed: Vec<_> = rows.iter().filter(|r| !r.is_ok()).collect();
    if !failed.is_empty() {
        return Err(format!(
            "{} failed cells, first: {:?}",
            failed.len(),
            failed[0].error
        ));
    }
    Ok(rows)
}

/// Rows keyed by (algorithm, p as bits), each a list over seeds in seed order.
struct Grid<'a> {
    cells: BTreeMap<(Algorithm, u64), Vec<&'a ResultRow>>,
    ps: Vec<f64>,
}

impl<'a> Grid<'a> {
    fn new(rows: &'a [ResultRow]) -> Self {
        let mut cells: BTreeMap<(Algorithm, u64), Vec<&ResultRow>> = BTreeMap::new();
        for r in rows {
            cells
                .entry((r.algorithm, r.p.to_bits()))
                .or_default()
                .push(r);
        }
        for v in cells.values_mut() {
            v.sort_by_key(|r| r.seed);
        }
        let mut ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        Self { cells, ps }
    }

    fn get(&self, a: Algorithm, p: f64) -> &[&'a ResultRow] {
        self.cells
            .get(&(a, p.to_bits()))
            .map_or(&[], |v| v.as_slice())
    }

    fn mean(&self, a: Algorithm, p: f64, f: impl Fn(&ResultRow) -> f64) -> f64 {
        let v = self.get(a, p);
        v.iter().map(|r| f(r)).sum::<f64>() / v.len() as f64
    }
}

fn criterion_4(g: &Grid) -> Verdict {
    use Algorithm::*;
    let mut c = Checks::default();
    let mut near =
        |what: &str, a: Algorithm, p: f64, f: fn(&ResultRow) -> f64, want: f64, tol: f64| {
            let got = g.mean(a, p, f);
            c.check(
                (got - want).abs() <= tol,
                format!("{what} = {got:.3}, want {want} ± {tol}"),
            );
        };
    let dr: fn(&ResultRow) -> f64 = |r| r.acc_dr;
    let df: fn(&ResultRow) -> f64 = |r| r.acc_df;
    let test: fn(&ResultRow) -> f64 = |r| r.acc_test;
    for &p in &g.ps {
        near(
            &format!("pretrained D_r (p={p})"),
            Pretrained,
            p,
            dr,
            1.00,
            0.03,
        );
        near(
            &format!("pretrained D_f (p={p})"),
            Pretrained,
            p,
            df,
            1.00,
            0.03,
        );
        near(
            &format!("pretrained test (p={p})"),
            Pretrained,
            p,
            test,
            0.87,
            0.03,
        );
    }
    near("retrain p=1 D_f", Retrain, 1.0, df, 0.00, 0.05);
    near("retrain p=1 test", Retrain, 1.0, test, 0.80, 0.05);
    near("retrain p=0.8 D_f", Retrain, 0.8, df, 0.57, 0.1);
    near("amnesiac p=1 D_r", Amnesiac, 1.0, dr, 0.13, 0.06);
    near("amnesiac p=1 test", Amnesiac, 1.0, test, 0.11, 0.05);
    for &p in &g.ps {
        for (name, f) in [("D_r", dr), ("D_f", df), ("test", test)] {
            let base = g.mean(Pretrained, p, f);
            near(
                &format!("fisher {name} (p={p}) vs pretrained"),
                Fisher,
                p,
                f,
                base,
                0.05,
            );
        }
    }
    let summary = format!(
        "pretrained test {:.3}, retrain p=1 test {:.3}, retrain p=0.8 D_f {:.3}, amnesiac p=1 D_r {:.3}/test {:.3}",
        g.mean(Pretrained, 1.0, test),
        g.mean(Retrain, 1.0, test),
        g.mean(Retrain, 0.8, df),
        g.mean(Amnesiac, 1.0, dr),
        g.mean(Amnesiac, 1.0, test)
    );
    let v = c.verdict();
    Verdict::new(v.pass, format!("{summary}; {}", v.detail))
}

fn criterion_5(g: &Grid) -> Verdict {
    use Algorithm::*;
    let mut c = Checks::default();
    let log_eff = |r: &ResultRow| r.efficacy.log10();
    // (a) whole target class (p = 1): pretrained above initial for every seed.
    let init = g.get(Initial, 1.0);
    let pre = g.get(Pretrained, 1.0);
    let raised = init
        .iter()
        .zip(pre)
        .filter(|(i, p)| p.efficacy > i.efficacy)
        .count();
    c.check(
        raised == pre.len(),
        format!(
            "(a) training raised efficacy in {raised}/{} seeds",
            pre.len()
        ),
    );
    // (b) retraining and Fisher lower efficacy for p >= 0.1 in >= 80% of seeds.
    for alg in [Retrain, Fisher] {
        for &p in g.ps.iter().filter(|&&p| p >= 0.1) {
            let rows = g.get(alg, p);
            let lowered = rows
                .iter()
                .zip(g.get(Pretrained, p))
                .filter(|(r, b)| r.efficacy < b.efficacy)
                .count();
            c.check(
                lowered as f64 >= 0.8 * rows.len() as f64,
                format!("(b) {alg} p={p}: lowered in {lowered}/{}", rows.len()),
            );
        }
    }
    // (c) Amnesiac rises with p (beyond the single-point case) towards the
    // initial model's efficacy.
    let ps: Vec<f64> = g.ps.iter().copied().filter(|&p| p >= 0.1).collect();
    let amn: Vec<f64> = ps.iter().map(|&p| g.mean(Amnesiac, p, log_eff)).collect();
    c.check(
        amn.windows(2).all(|w| w[1] > w[0]),
        format!("(c) amnesiac mean log10 efficacy over p>=0.1 increasing: {amn:.2?}"),
    );
    let gap = |p: f64| (g.mean(Amnesiac, p, log_eff) - g.mean(Initial, p, log_eff)).abs();
    let (first, last) = (ps[0], *ps.last().unwrap());
    c.check(
        gap(last) < gap(first),
        format!(
            "(c) gap to initial shrinks: {:.2} -> {:.2} decades",
            gap(first),
            gap(last)
        ),
    );
    c.verdict()
}

fn criterion_6(g: &Grid) -> Verdict {
    use Algorithm::*;
    let mut c = Checks::default();
    let mia = |r: &ResultRow| r.mia_mean_prob;
    for alg in [Retrain, Amnesiac, Fisher] {
        for &p in &g.ps {
            let base = g.mean(Pretrained, p, mia);
            let got = g.mean(alg, p, mia);
            c.check(
                got <= base,
                format!("{alg} p={p}: {got:.4} > pretrained {base:.4}"),
            );
        }
    }
    let retrain: Vec<f64> = g.ps.iter().map(|&p| g.mean(Retrain, p, mia)).collect();
    c.check(
        retrain.windows(2).all(|w| w[1] <= w[0]),
        format!("retrain mean MIA not non-increasing in p: {retrain:.4?}"),
    );
    let v = c.verdict();
    Verdict::new(
        v.pass,
        format!("retrain mean MIA over p {retrain:.3?}; {}", v.detail),
    )
}

fn criterion_7(g: &Grid, cost: (bool, String)) -> Verdict {
    use Algorithm::*;
    let mut c = Checks::default();
    c.check(cost.0, cost.1.clone());
    let mut worst = 0.0f64;
    for alg in [Amnesiac, Fisher] {
        for &p in &g.ps {
            for (r, base) in g.get(alg, p).iter().zip(g.get(Retrain, p)) {
                let cost = r.timings.forget + r.timings.bound;
                let retrain = base.timings.forget;
                worst = worst.max(cost / retrain);
                c.check(
                    cost < retrain,
                    format!(
                        "{alg} p={p} seed {}: {cost:.2}s >= retrain {retrain:.2}s",
                        r.seed
                    ),
                );
            }
        }
    }
    let v = c.verdict();
    Verdict::new(
        v.pass,
        format!(
            "{}; worst (forget+bound)/retrain {worst:.2}; {}",
            cost.1, v.detail
        ),
    )
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (k, &i) in idx.iter().enumerate() {
            r[i] = k as f64;
        }
        r
    };
    let (ra, rb) = (rank(a), rank(b));
    let n = a.len() as f64;
    let m = (n - 1.0) / 2.0;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - m) * (y - m)).sum();
    let var: f64 = ra.iter().map(|x| (x - m).powi(2)).sum();
    cov / var
}

fn main() {
    let mut verdicts: Vec<(u32, &str, Verdict)> = vec![
        (
            1,
            "gradient-norm bound never exceeds information score",
            criterion_1(),
        ),
        (
            2,
            "per-sample gradients match finite differences",
            criterion_2(),
        ),
        (
            3,
            "iterative and batch Amnesiac forgetting agree",
            criterion_3(),
        ),
        (
            8,
            "file formats round-trip and loaders reject corruption",
            criterion_8(),
        ),
    ];
    let cost = criterion_7_cost();
    let mut notes = Vec::new();
    match mnist_rows() {
        Ok(rows) => {
            let g = Grid::new(&rows);
            verdicts.push((4, "MNIST accuracy table", criterion_4(&g)));
            verdicts.push((5, "efficacy orderings", criterion_5(&g)));
            verdicts.push((6, "membership inference orderings", criterion_6(&g)));
            verdicts.push((
                7,
                "cost of the bound and of forgetting",
                criterion_7(&g, cost),
            ));

            let scored: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.efficacy.is_finite() && r.upper_bound.is_finite())
                .collect();
            let e: Vec<f64> = scored.iter().map(|r| r.efficacy).collect();
            let b: Vec<f64> = scored.iter().map(|r| r.upper_bound).collect();
            notes.push(format!(
                "rank correlation efficacy vs bound over {} cells: {:.3}",
                e.len(),
                spearman(&e, &b)
            ));
            let single: Vec<f64> = g
                .get(Algorithm::Pretrained, 0.01)
                .iter()
                .map(|r| r.efficacy.log10())
                .collect();
            let (lo, hi) = single
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                    (l.min(v), h.max(v))
                });
            notes.push(format!(
                "pretrained single-point log10 efficacy across seeds: {lo:.1} .. {hi:.1}"
            ));
        }
        Err(e) => {
            for (id, name) in [
                (4, "MNIST accuracy table"),
                (5, "efficacy orderings"),
                (6, "membership inference orderings"),
            ] {
                verdicts.push((id, name, Verdict::new(false, e.clone())));
            }
            verdicts.push((
                7,
                "cost of the bound and of forgetting",
                Verdict::new(false, format!("{}; {e}", cost.1)),
            ));
        }
    }
    verdicts.sort_by_key(|v| v.0);
    println!();
    for (id, name, v) in &verdicts {
        println!(
            "{} criterion {id}: {name} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    for n in &notes {
        println!("note: {n}");
    }
    let failed = verdicts.iter().filter(|v| !v.2.pass).count();
    println!(
        "\nacceptance: {} passed, {failed} failed",
        verdicts.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
