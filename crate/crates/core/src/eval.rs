//! Scoring and reporting.
//!
//! [`compare`] runs every predictor on every dataset, recording the
//! one-step-ahead MSE and the median wall time of three fit-and-predict
//! runs. All predictors on a dataset skip the same burn-in prefix (the
//! largest burn-in among the requested predictors) so their MSEs cover the
//! same samples.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::arma::{self, ArmaOrder};
use crate::error::{Error, Result};
use crate::kalman::{self, PredictionTrace};
use crate::preprocess::StationarySeries;

/// Runs per timing measurement; the median is reported.
pub const TIMING_REPETITIONS: usize = 3;

/// Noise variance used for both `Q` and `R` unless overridden.
pub const DEFAULT_KF_VARIANCE: f64 = 0.01;

/// Mean squared error over indices `>= skip`.
pub fn mse(predicted: &[f64], actual: &[f64], skip: usize) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} samples",
            predicted.len(),
            actual.len()
        )));
    }
    if skip >= actual.len() {
        return Err(Error::invalid(format!(
            "burn-in {skip} leaves nothing of {} samples",
            actual.len()
        )));
    }
    let sum: f64 = predicted[skip..]
        .iter()
        .zip(&actual[skip..])
        .map(|(p, a)| (p - a).powi(2))
        .sum();
    Ok(sum / (actual.len() - skip) as f64)
}

/// Median wall time, in seconds, of [`TIMING_REPETITIONS`] runs of `task`.
pub fn time_predictor<F: FnMut()>(mut task: F) -> f64 {
    let mut secs: Vec<f64> = (0..TIMING_REPETITIONS)
        .map(|_| {
            let start = Instant::now();
            task();
            start.elapsed().as_secs_f64()
        })
        .collect();
    secs.sort_by(f64::total_cmp);
    secs[secs.len() / 2]
}

/// A predictor configuration in a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictorSpec {
    Arma(ArmaOrder),
    /// Local-level Kalman filter with process variance `q` and measurement
    /// variance `r`.
    Kalman { q: f64, r: f64 },
}

impl PredictorSpec {
    pub const fn arma(p: usize, q: usize) -> Self {
        PredictorSpec::Arma(ArmaOrder { p, q })
    }

    pub const fn default_kalman() -> Self {
        PredictorSpec::Kalman {
            q: DEFAULT_KF_VARIANCE,
            r: DEFAULT_KF_VARIANCE,
        }
    }

    /// ARMA (2,0), (2,1), (2,2), (3,0), (3,1) and the default Kalman filter.
    pub fn reference_grid() -> Vec<Self> {
        vec![
            Self::arma(2, 0),
            Self::arma(2, 1),
            Self::arma(2, 2),
            Self::arma(3, 0),
            Self::arma(3, 1),
            Self::default_kalman(),
        ]
    }

    /// Leading predictions excluded from scoring. The Kalman filter starts
    /// from the first sample, so its first prediction is free.
    pub fn burn_in(&self) -> usize {
        match self {
            PredictorSpec::Arma(order) => order.burn_in(),
            PredictorSpec::Kalman { .. } => 1,
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorSpec::Arma(order) => order.fmt(f),
            PredictorSpec::Kalman { q, r }
                if *q == DEFAULT_KF_VARIANCE && *r == DEFAULT_KF_VARIANCE =>
            {
                f.write_str("KF")
            }
            PredictorSpec::Kalman { q, r } => write!(f, "KF ({q},{r})"),
        }
    }
}

impl FromStr for PredictorSpec {
    type Err = Error;

    /// `arma:p,q`, `kf` or `kf:q,r`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        match kind.to_ascii_lowercase().as_str() {
            "arma" => Ok(PredictorSpec::Arma(args.parse()?)),
            "kf" | "kalman" if args.trim().is_empty() => Ok(Self::default_kalman()),
            "kf" | "kalman" => {
                let bad = || Error::invalid(format!("expected `kf:q,r`, got {s:?}"));
                let (q, r) = args.split_once(',').ok_or_else(bad)?;
                Ok(PredictorSpec::Kalman {
                    q: q.trim().parse().map_err(|_| bad())?,
                    r: r.trim().parse().map_err(|_| bad())?,
                })
            }
            _ => Err(Error::invalid(format!("unknown predictor {s:?}"))),
        }
    }
}

/// Fits (where applicable) and runs rolling one-step prediction over `series`.
pub fn run_predictor(spec: &PredictorSpec, series: &[f64]) -> Result<Vec<f64>> {
    match *spec {
        PredictorSpec::Arma(order) => {
            let (model, _) = arma::fit(series, order.p, order.q)?;
            Ok(arma::predict_series(&model, series)?.predictions)
        }
        PredictorSpec::Kalman { q, r } => Ok(run_kalman(q, r, series)?.predictions),
    }
}

/// Local-level filter started from the first sample.
pub fn run_kalman(q: f64, r: f64, series: &[f64]) -> Result<PredictionTrace> {
    let (model, init) = kalman::default_local_level(q, r, series.first().copied())?;
    kalman::predict_series(&model, series, &init)
}

/// MSE and timing grids, datasets by predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub datasets: Vec<String>,
    pub predictors: Vec<String>,
    /// `None` marks a cell whose predictor failed.
    pub mse: Vec<Vec<Option<f64>>>,
    pub time_sec: Vec<Vec<Option<f64>>>,
    pub environment: String,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = (self.datasets.len(), self.predictors.len());
        for (name, grid) in [("mse", &self.mse), ("time_sec", &self.time_sec)] {
            if grid.len() != rows || grid.iter().any(|r| r.len() != cols) {
                return Err(Error::Dimension(format!("{name} grid must be {rows}x{cols}")));
            }
            if grid.iter().flatten().flatten().any(|v| !(*v >= 0.0)) {
                return Err(Error::invalid(format!("{name} grid has negative or NaN cells")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: EvalReport = serde_json::from_str(text)?;
        report.validate()?;
        Ok(report)
    }
}

/// A labelled preprocessed dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub label: String,
    pub series: StationarySeries,
}

impl Dataset {
    pub fn new(label: impl Into<String>, series: StationarySeries) -> Self {
        Self {
            label: label.into(),
            series,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    /// Run cells one at a time so timings do not compete for cores.
    pub timing_serial: bool,
    pub environment: String,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            timing_serial: true,
            environment: machine_description(),
        }
    }
}

/// OS, architecture and core count of the current machine.
pub fn machine_description() -> String {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{}-{}, {} logical cores",
        std::env::consts::OS,
        std::env::consts::ARCH,
        cores
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub dataset: String,
    pub predictor: String,
    pub message: String,
}

/// Everything [`compare`] produced.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: EvalReport,
    /// `predictions[d][p]`: rolling predictions of predictor `p` on dataset `d`.
    pub predictions: Vec<Vec<Option<Vec<f64>>>>,
    /// Scored samples start here on every dataset.
    pub burn_in: usize,
    pub failures: Vec<CellFailure>,
}

struct Cell {
    predictions: Vec<f64>,
    mse: f64,
    seconds: f64,
}

fn run_cell(spec: &PredictorSpec, series: &[f64], skip: usize) -> Result<Cell> {
    let predictions = run_predictor(spec, series)?;
    let mse = mse(&predictions, series, skip)?;
    let seconds = time_predictor(|| {
        // result already validated above
        let _ = std::hint::black_box(run_predictor(spec, std::hint::black_box(series)));
    });
    Ok(Cell {
        predictions,
        mse,
        seconds,
    })
}

/// Scores every predictor on every dataset.
///
/// A failing cell is recorded as missing and listed in
/// [`Comparison::failures`]; the remaining cells still run.
pub fn compare(
    datasets: &[Dataset],
    specs: &[PredictorSpec],
    options: &CompareOptions,
) -> Result<Comparison> {
    if datasets.is_empty() || specs.is_empty() {
        return Err(Error::invalid("comparison needs at least one dataset and one predictor"));
    }
    let skip = specs.iter().map(PredictorSpec::burn_in).max().unwrap_or(0);
    let jobs: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..specs.len()).map(move |p| (d, p)))
        .collect();
    let run = |&(d, p): &(usize, usize)| run_cell(&specs[p], datasets[d].series.values(), skip);

    let results: Vec<Result<Cell>> = if options.timing_serial {
        jobs.iter().map(run).collect()
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs.iter().map(|job| scope.spawn(move || run(job))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("comparison cell panicked"))
                .collect()
        })
    };

    let mut mse_grid = vec![vec![None; specs.len()]; datasets.len()];
    let mut time_grid = mse_grid.clone();
    let mut predictions = vec![vec![None; specs.len()]; datasets.len()];
    let mut failures = Vec::new();
    for (&(d, p), result) in jobs.iter().zip(results) {
        match result {
            Ok(cell) => {
                mse_grid[d][p] = Some(cell.mse);
                time_grid[d][p] = Some(cell.seconds);
                predictions[d][p] = Some(cell.predictions);
            }
            Err(e) => failures.push(CellFailure {
                dataset: datasets[d].label.clone(),
                predictor: specs[p].label(),
                message: e.to_string(),
            }),
        }
    }

    Ok(Comparison {
        report: EvalReport {
            datasets: datasets.iter().map(|d| d.label.clone()).collect(),
            predictors: specs.iter().map(PredictorSpec::label).collect(),
            mse: mse_grid,
            time_sec: time_grid,
            environment: options.environment.clone(),
        },
        predictions,
        burn_in: skip,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    /// Significant digits for markdown cells.
    pub digits: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { digits: 2 }
    }
}

/// Formats `v` with `digits` significant digits, keeping trailing zeros
/// (`0.1` → `0.10`). Values with more integer digits are rounded to integers.
pub fn format_significant(v: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let decimals = |x: f64| {
        let exp = x.abs().log10().floor() as i64;
        (digits as i64 - 1 - exp).max(0) as usize
    };
    let d = decimals(v);
    let text = format!("{v:.d$}");
    // rounding can carry into the next power of ten (0.0999 → 0.100)
    let rounded: f64 = text.parse().unwrap_or(v);
    if rounded != 0.0 && decimals(rounded) < d {
        let d = decimals(rounded);
        return format!("{v:.d$}");
    }
    text
}

fn cell_text(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format_significant(v, digits))
}

fn markdown_table(out: &mut String, report: &EvalReport, grid: &[Vec<Option<f64>>], digits: usize) {
    let _ = write!(out, "| S |");
    for p in &report.predictors {
        let _ = write!(out, " {p} |");
    }
    out.push('\n');
    out.push_str("|---|");
    out.push_str(&"---|".repeat(report.predictors.len()));
    out.push('\n');
    for (label, row) in report.datasets.iter().zip(grid) {
        let _ = write!(out, "| {label} |");
        for &v in row {
            let _ = write!(out, " {} |", cell_text(v, digits));
        }
        out.push('\n');
    }
}

fn csv_cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn csv_string(rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Renders with default [`RenderOptions`].
pub fn render_report(report: &EvalReport, format: ReportFormat) -> Result<String> {
    render_report_with(report, format, &RenderOptions::default())
}

/// Markdown lays the grids out as two tables (datasets as rows, predictors
/// as columns); CSV is long-form `dataset,predictor,mse,time_s`; JSON keeps
/// the key order `datasets, predictors, mse, time_sec, environment`.
pub fn render_report_with(
    report: &EvalReport,
    format: ReportFormat,
    options: &RenderOptions,
) -> Result<String> {
    report.validate()?;
    match format {
        ReportFormat::Markdown => {
            let mut out = String::new();
            out.push_str("### Mean squared error\n\n");
            markdown_table(&mut out, report, &report.mse, options.digits);
            out.push_str("\n### Computation time (s)\n\n");
            markdown_table(&mut out, report, &report.time_sec, options.digits);
            let _ = writeln!(out, "\nEnvironment: {}", report.environment);
            Ok(out)
        }
        ReportFormat::Csv => {
            let header = ["dataset", "predictor", "mse", "time_s"].map(String::from).to_vec();
            let rows = report.datasets.iter().enumerate().flat_map(|(d, ds)| {
                report.predictors.iter().enumerate().map(move |(p, pred)| {
                    vec![
                        ds.clone(),
                        pred.clone(),
                        csv_cell(report.mse[d][p]),
                        csv_cell(report.time_sec[d][p]),
                    ]
                })
            });
            csv_string(std::iter::once(header).chain(rows))
        }
        ReportFormat::Json => {
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            Ok(text)
        }
    }
}

/// The MSE grid alone as wide CSV (`dataset,<predictor>...`).
pub fn render_mse_csv(report: &EvalReport) -> Result<String> {
    report.validate()?;
    let header = std::iter::once("dataset".to_string()).chain(report.predictors.iter().cloned());
    let rows = report.datasets.iter().zip(&report.mse).map(|(label, row)| {
        std::iter::once(label.clone())
            .chain(row.iter().map(|&v| csv_cell(v)))
            .collect()
    });
    csv_string(std::iter::once(header.collect()).chain(rows))
}

/// `index,actual,<label>...` with one column per prediction sequence;
/// missing sequences are left blank.
pub fn render_predictions(actual: &[f64], columns: &[(String, Option<&[f64]>)]) -> Result<String> {
    for (label, values) in columns {
        if let Some(v) = values {
            if v.len() != actual.len() {
                return Err(Error::Dimension(format!(
                    "{label} has {} predictions for {} samples",
                    v.len(),
                    actual.len()
                )));
            }
        }
    }
    let header = ["index", "actual"]
        .into_iter()
        .map(String::from)
        .chain(columns.iter().map(|(l, _)| l.clone()))
        .collect();
    let rows = actual.iter().enumerate().map(|(i, a)| {
        [i.to_string(), a.to_string()]
            .into_iter()
            .chain(columns.iter().map(|(_, v)| csv_cell(v.map(|v| v[i]))))
            .collect()
    });
    csv_string(std::iter::once(header).chain(rows))
}

/// Plot data for superimposed ARMA and Kalman predictions:
/// `index,actual,arma_pred,kf_pred`.
pub fn render_fig1(actual: &[f64], arma_pred: &[f64], kf_pred: &[f64]) -> Result<String> {
    render_predictions(
        actual,
        &[
            ("arma_pred".to_string(), Some(arma_pred)),
            ("kf_pred".to_string(), Some(kf_pred)),
        ],
    )
}

/// `index,actual,predicted,gain` for a scalar Kalman run.
pub fn render_kf_predictions(actual: &[f64], trace: &PredictionTrace) -> Result<String> {
    if trace.len() != actual.len() {
        return Err(Error::Dimension("trace and series lengths differ".into()));
    }
    let gains = trace.scalar_gains();
    let header = ["index", "actual", "predicted", "gain"].map(String::from).to_vec();
    let rows = (0..actual.len()).map(|i| {
        vec![
            i.to_string(),
            actual[i].to_string(),
            trace.predictions[i].to_string(),
            gains[i].to_string(),
        ]
    });
    csv_string(std::iter::once(header).chain(rows))
}
