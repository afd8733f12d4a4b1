//! Aggregate tables and plot data from result rows.
//!
//! Files written by [`write_report`]:
//!
//! ```text
//! accuracy_table.csv         mean/std of acc_dr, acc_df, acc_test per (algorithm, p)
//! accuracy_table.txt         the same as an aligned "mean ± std" table
//! efficacy_distribution.csv  log10 efficacy and log10 upper bound per row
//! efficacy_vs_mia.csv        log10 efficacy against log10 MIA probability per row
//! missing_cells.csv          grid cells that are absent or failed
//! ```
//!
//! Standard deviations are population deviations (divisor `n`). Failed rows
//! are excluded from every aggregate and listed as missing. An infinite
//! efficacy stays `inf` after the log transform.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{write_atomic, Algorithm, CellKey, ResultRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCell {
    pub algorithm: Algorithm,
    pub p: f64,
    pub acc_dr: MeanStd,
    pub acc_df: MeanStd,
    pub acc_test: MeanStd,
}

/// Sorted by algorithm, then `p`.
pub fn accuracy_table(rows: &[ResultRow]) -> Vec<AccuracyCell> {
    let mut groups: BTreeMap<(Algorithm, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        groups.entry((r.algorithm, p_key(r.p))).or_default().push(r);
    }
    groups
        .into_values()
        .filter_map(|g| {
            let stat =
                |f: fn(&ResultRow) -> f64| MeanStd::of(&g.iter().map(|r| f(r)).collect::<Vec<_>>());
            Some(AccuracyCell {
                algorithm: g[0].algorithm,
                p: g[0].p,
                acc_dr: stat(|r| r.acc_dr)?,
                acc_df: stat(|r| r.acc_df)?,
                acc_test: stat(|r| r.acc_test)?,
            })
        })
        .collect()
}

// Order-preserving integer image of a non-negative p.
fn p_key(p: f64) -> u64 {
    p.to_bits()
}

/// Mean/std cell of one `(algorithm, p)`, if present.
pub fn find_cell(table: &[AccuracyCell], algorithm: Algorithm, p: f64) -> Option<&AccuracyCell> {
    table.iter().find(|c| c.algorithm == algorithm && c.p == p)
}

pub fn format_table(table: &[AccuracyCell]) -> String {
    let ms = |m: &MeanStd| format!("{:.2} ± {:.2}", m.mean, m.std);
    let mut s = format!(
        "{:<11} {:>5}  {:<12}  {:<12}  {:<12}  {:>3}\n",
        "algorithm", "p", "D_r", "D_f", "test", "n"
    );
    for c in table {
        let _ = writeln!(
            s,
            "{:<11} {:>5}  {:<12}  {:<12}  {:<12}  {:>3}",
            c.algorithm.as_str(),
            c.p,
            ms(&c.acc_dr),
            ms(&c.acc_df),
            ms(&c.acc_test),
            c.acc_dr.n
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissingCell {
    pub seed: u64,
    pub algorithm: Algorithm,
    pub p: f64,
    pub reason: String,
}

/// Cells of the grid spanned by the rows' seeds, percentages and algorithms
/// (initial and pretrained always included) that are absent or failed.
pub fn missing_cells(rows: &[ResultRow]) -> Vec<MissingCell> {
    let seeds: BTreeSet<u64> = rows.iter().map(|r| r.seed).collect();
    let ps: BTreeSet<u64> = rows.iter().map(|r| p_key(r.p)).collect();
    let mut algorithms: BTreeSet<Algorithm> = rows.iter().map(|r| r.algorithm).collect();
    algorithms.extend([Algorithm::Initial, Algorithm::Pretrained]);
    let by_key: BTreeMap<CellKey, &ResultRow> = rows.iter().map(|r| (r.key(), r)).collect();
    let mut missing = Vec::new();
    for &seed in &seeds {
        for &p in &ps {
            let p = f64::from_bits(p);
            for &algorithm in &algorithms {
                let reason = match by_key.get(&CellKey::new(seed, p, algorithm)) {
                    None => "absent".to_owned(),
                    Some(r) => match &r.error {
                        Some(e) => e.clone(),
                        None => continue,
                    },
                };
                missing.push(MissingCell {
                    seed,
                    algorithm,
                    p,
                    reason,
                });
            }
        }
    }
    missing
}

#[derive(Debug, Clone)]
pub struct ReportSummary {
    pub files: Vec<PathBuf>,
    pub table: Vec<AccuracyCell>,
    pub missing: Vec<MissingCell>,
    pub forgetting_rows: usize,
    pub baseline_rows: usize,
}

impl ReportSummary {
    pub fn text(&self) -> String {
        let mut s = format_table(&self.table);
        let _ = writeln!(
            s,
            "\n{} forgetting rows + {} baseline rows (initial, pretrained)",
            self.forgetting_rows, self.baseline_rows
        );
        if !self.missing.is_empty() {
            let _ = writeln!(
                s,
                "{} missing or failed cells, see missing_cells.csv",
                self.missing.len()
            );
        }
        s
    }
}

#[derive(Serialize)]
struct AccuracyLine {
    algorithm: Algorithm,
    p: f64,
    n: usize,
    acc_dr_mean: f64,
    acc_dr_std: f64,
    acc_df_mean: f64,
    acc_df_std: f64,
    acc_test_mean: f64,
    acc_test_std: f64,
}

#[derive(Serialize)]
struct DistributionLine {
    algorithm: Algorithm,
    p: f64,
    seed: u64,
    log10_efficacy: f64,
    log10_upper_bound: f64,
}

#[derive(Serialize)]
struct ScatterLine {
    algorithm: Algorithm,
    p: f64,
    seed: u64,
    log10_efficacy: f64,
    log10_mia_mean_prob: f64,
}

fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>, header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::CountMismatch(e.to_string());
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("report", e.into_error()))
}

/// Writes all report files into `dir`.
pub fn write_report(rows: &[ResultRow], dir: &Path) -> Result<ReportSummary> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.key());
    let ok: Vec<&ResultRow> = sorted.iter().copied().filter(|r| r.is_ok()).collect();

    let table = accuracy_table(rows);
    let missing = missing_cells(rows);
    let mut files = Vec::new();
    let mut emit = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, &bytes)?;
        files.push(path);
        Ok(())
    };

    emit(
        "accuracy_table.csv",
        csv_bytes(
            table.iter().map(|c| AccuracyLine {
                algorithm: c.algorithm,
                p: c.p,
                n: c.acc_dr.n,
                acc_dr_mean: c.acc_dr.mean,
                acc_dr_std: c.acc_dr.std,
                acc_df_mean: c.acc_df.mean,
                acc_df_std: c.acc_df.std,
                acc_test_mean: c.acc_test.mean,
                acc_test_std: c.acc_test.std,
            }),
            &[
                "algorithm",
                "p",
                "n",
                "acc_dr_mean",
                "acc_dr_std",
                "acc_df_mean",
                "acc_df_std",
                "acc_test_mean",
                "acc_test_std",
            ],
        )?,
    )?;
    emit("accuracy_table.txt", format_table(&table).into_bytes())?;
    emit(
        "efficacy_distribution.csv",
        csv_bytes(
            ok.iter().map(|r| DistributionLine {
                algorithm: r.algorithm,
                p: r.p,
                seed: r.seed,
                log10_efficacy: r.efficacy.log10(),
                log10_upper_bound: r.upper_bound.log10(),
            }),
            &[
                "algorithm",
                "p",
                "seed",
                "log10_efficacy",
                "log10_upper_bound",
            ],
        )?,
    )?;
    emit(
        "efficacy_vs_mia.csv",
        csv_bytes(
            ok.iter().map(|r| ScatterLine {
                algorithm: r.algorithm,
                p: r.p,
                seed: r.seed,
                log10_efficacy: r.efficacy.log10(),
                log10_mia_mean_prob: r.mia_mean_prob.log10(),
            }),
            &[
                "algorithm",
                "p",
                "seed",
                "log10_efficacy",
                "log10_mia_mean_prob",
            ],
        )?,
    )?;
    emit(
        "missing_cells.csv",
        csv_bytes(missing.iter(), &["seed", "algorithm", "p", "reason"])?,
    )?;

    let forgetting_rows = rows.iter().filter(|r| r.algorithm.is_forgetting()).count();
    Ok(ReportSummary {
        files,
        table,
        missing,
        forgetting_rows,
        baseline_rows: rows.len() - forgetting_rows,
    })
}
