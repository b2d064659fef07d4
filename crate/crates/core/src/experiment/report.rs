use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::Method;
use super::run::{ExperimentResults, SweepPoint};
use crate::error::{Error, Result};

pub const SUMMARY_SCHEMA: &str = "# asbm-summary v1";
pub const LONG_SCHEMA: &str = "# asbm-long v1";
pub const TRIALS_SCHEMA: &str = "# asbm-trials v1";

/// Aggregate of one method at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: &'static str,
    pub sweep_axis: &'static str,
    pub sweep_value: f64,
    pub fixed_axis: &'static str,
    pub fixed_value: Option<f64>,
    pub accuracy_mean: f64,
    pub accuracy_se: f64,
    pub modularity_mean: f64,
    pub modularity_se: f64,
    pub truth_modularity_mean: f64,
    pub truth_modularity_se: f64,
    pub trials: usize,
    pub failures: usize,
    pub nonconverged: usize,
}

/// Mean and standard error (sample standard deviation over `sqrt(n)`).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn same_point(a: &SweepPoint, b: &SweepPoint) -> bool {
    a.z_out.map(f64::to_bits) == b.z_out.map(f64::to_bits) && a.sigma.to_bits() == b.sigma.to_bits()
}

/// Per-(method, point) aggregates, sorted by method, sweep value, then the
/// fixed coordinate. Failed trials are excluded from the means and counted.
pub fn summarize(results: &ExperimentResults) -> Vec<SummaryRow> {
    let fixed = results.fixed_axis();
    let mut rows = Vec::new();
    for &method in &results.methods {
        for point in &results.points {
            let recs: Vec<_> = results
                .records
                .iter()
                .filter(|r| r.method == method && same_point(&r.point, point))
                .collect();
            let ok: Vec<_> = recs.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let acc: Vec<f64> = ok.iter().map(|o| o.accuracy).collect();
            let q: Vec<f64> = ok.iter().map(|o| o.modularity).collect();
            let tq: Vec<f64> = recs.iter().map(|r| r.truth_modularity).collect();
            let (accuracy_mean, accuracy_se) = mean_se(&acc);
            let (modularity_mean, modularity_se) = mean_se(&q);
            let (truth_modularity_mean, truth_modularity_se) = mean_se(&tq);
            rows.push(SummaryRow {
                method: method.name(),
                sweep_axis: results.axis.name(),
                sweep_value: results.sweep_value(point),
                fixed_axis: fixed.map_or("none", |f| f.0),
                fixed_value: fixed.map(|f| (f.1)(point)),
                accuracy_mean,
                accuracy_se,
                modularity_mean,
                modularity_se,
                truth_modularity_mean,
                truth_modularity_se,
                trials: recs.len(),
                failures: recs.len() - ok.len(),
                nonconverged: ok.iter().filter(|o| !o.converged).count(),
            });
        }
    }
    let rank = |name: &str| Method::ALL.iter().position(|m| m.name() == name);
    rows.sort_by(|a, b| {
        rank(a.method)
            .cmp(&rank(b.method))
            .then(a.sweep_value.total_cmp(&b.sweep_value))
            .then(a.fixed_value.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.fixed_value.unwrap_or(f64::NEG_INFINITY)))
    });
    rows
}

#[derive(Debug, Clone)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub long: PathBuf,
    pub trials: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_csv<T: Serialize>(path: &Path, schema: &str, rows: &[T], header: &[&str]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{schema}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Serialize)]
struct LongRow<'a> {
    method: &'a str,
    x_axis: &'a str,
    x: f64,
    series_axis: &'a str,
    series: Option<f64>,
    metric: &'a str,
    mean: f64,
    se: f64,
    trials: usize,
}

#[derive(Serialize)]
struct TrialRow {
    method: &'static str,
    z_out: Option<f64>,
    sigma: f64,
    trial: usize,
    status: &'static str,
    accuracy: Option<f64>,
    modularity: Option<f64>,
    truth_modularity: f64,
    iterations: Option<usize>,
    converged: Option<bool>,
    error: String,
}

/// Writes `summary.csv`, the plot-ready `long.csv` and the raw `trials.csv`
/// into `out_dir`. Every file starts with a `# <schema> v<version>` line.
pub fn emit_report(results: &ExperimentResults, out_dir: &Path) -> Result<ReportFiles> {
    if results.records.is_empty() {
        return Err(Error::validation("no results to report"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = ReportFiles {
        summary: out_dir.join("summary.csv"),
        long: out_dir.join("long.csv"),
        trials: out_dir.join("trials.csv"),
    };

    let summary = summarize(results);
    write_csv(
        &files.summary,
        SUMMARY_SCHEMA,
        &summary,
        &[
            "method",
            "sweep_axis",
            "sweep_value",
            "fixed_axis",
            "fixed_value",
            "accuracy_mean",
            "accuracy_se",
            "modularity_mean",
            "modularity_se",
            "truth_modularity_mean",
            "truth_modularity_se",
            "trials",
            "failures",
            "nonconverged",
        ],
    )?;

    let mut long = Vec::new();
    for r in &summary {
        for (metric, mean, se) in [
            ("accuracy", r.accuracy_mean, r.accuracy_se),
            ("modularity", r.modularity_mean, r.modularity_se),
            ("truth_modularity", r.truth_modularity_mean, r.truth_modularity_se),
        ] {
            long.push(LongRow {
                method: r.method,
                x_axis: r.sweep_axis,
                x: r.sweep_value,
                series_axis: r.fixed_axis,
                series: r.fixed_value,
                metric,
                mean,
                se,
                trials: r.trials - r.failures,
            });
        }
    }
    write_csv(
        &files.long,
        LONG_SCHEMA,
        &long,
        &["method", "x_axis", "x", "series_axis", "series", "metric", "mean", "se", "trials"],
    )?;

    let trials: Vec<TrialRow> = results
        .records
        .iter()
        .map(|r| {
            let ok = r.outcome.as_ref().ok();
            TrialRow {
                method: r.method.name(),
                z_out: r.point.z_out,
                sigma: r.point.sigma,
                trial: r.trial,
                status: if ok.is_some() { "ok" } else { "failed" },
                accuracy: ok.map(|o| o.accuracy),
                modularity: ok.map(|o| o.modularity),
                truth_modularity: r.truth_modularity,
                iterations: ok.map(|o| o.iterations),
                converged: ok.map(|o| o.converged),
                error: r.outcome.as_ref().err().cloned().unwrap_or_default(),
            }
        })
        .collect();
    write_csv(
        &files.trials,
        TRIALS_SCHEMA,
        &trials,
        &[
            "method",
            "z_out",
            "sigma",
            "trial",
            "status",
            "accuracy",
            "modularity",
            "truth_modularity",
            "iterations",
            "converged",
            "error",
        ],
    )?;
    Ok(files)
}
