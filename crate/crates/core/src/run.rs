//! End-to-end runs driven by a TOML configuration.
//!
//! ```toml
//! seed = 42
//!
//! [data]
//! kind = "synth-seasonal"   # or "packet-trace", "series"
//! count = 5                 # synthetic datasets to generate
//! base_rates = [50, 35]     # optional per-dataset base rate, cycled
//! n = 5000
//! period = 60
//!
//! [preprocess]
//! window = 10
//! overlap = 0.5
//!
//! [predictors]
//! list = ["arma:2,1", "kf:0.01,0.01"]
//!
//! [eval]
//! format = "markdown"
//!
//! [output]
//! dir = "out"
//! emit_stages = true
//! ```
//!
//! Synthetic dataset `i` uses seed `derive_seed(seed, i)`, so the whole run
//! follows from the single top-level seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result, StageExt};
use crate::eval::{self, CompareOptions, Comparison, Dataset, PredictorSpec, RenderOptions, ReportFormat};
use crate::ingest::{self, ProtocolFilter};
use crate::preprocess::{self, PipelineStages, PreprocessConfig, ScaleMode, StationarySeries};
use crate::rng::derive_seed;
use crate::series::TimeSeries;
use crate::synth::{self, SeasonalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    SynthSeasonal,
    PacketTrace,
    Series,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    pub paths: Vec<PathBuf>,
    pub labels: Vec<String>,
    pub count: usize,
    pub base_rates: Vec<f64>,
    pub n: usize,
    pub period: usize,
    pub amplitude: f64,
    pub base_rate: f64,
    pub noise_std: f64,
    pub bin_width: f64,
    pub filter_protocols: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = SeasonalSpec::default();
        Self {
            kind: DataKind::SynthSeasonal,
            paths: Vec::new(),
            labels: Vec::new(),
            count: 1,
            base_rates: Vec::new(),
            n: s.n,
            period: s.period,
            amplitude: s.amplitude,
            base_rate: s.base_rate,
            noise_std: s.noise_std,
            bin_width: 1.0,
            filter_protocols: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub enabled: bool,
    pub window: usize,
    pub overlap: f64,
    pub log: bool,
    pub scale: ScaleMode,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        let c = PreprocessConfig::default();
        Self {
            enabled: true,
            window: c.window_len,
            overlap: c.overlap_fraction,
            log: c.log_enabled,
            scale: c.scale_mode,
        }
    }
}

impl PreprocessSection {
    pub fn to_config(&self) -> PreprocessConfig {
        PreprocessConfig {
            window_len: self.window,
            overlap_fraction: self.overlap,
            log_enabled: self.log,
            scale_mode: self.scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorSection {
    pub list: Vec<String>,
}

impl Default for PredictorSection {
    fn default() -> Self {
        Self {
            list: ["arma:2,0", "arma:2,1", "arma:2,2", "arma:3,0", "arma:3,1", "kf:0.01,0.01"]
                .map(String::from)
                .to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub format: String,
    pub timing_serial: bool,
    pub digits: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            format: "markdown".into(),
            timing_serial: true,
            digits: RenderOptions::default().digits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_stages: bool,
    pub fig1: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            emit_stages: false,
            fig1: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub preprocess: PreprocessSection,
    pub predictors: PredictorSection,
    pub eval: EvalSection,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Five seeded synthetic datasets `A`–`E` with different base rates,
    /// scored by ARMA (2,0), (2,1), (2,2), (3,0), (3,1) and the default
    /// Kalman filter.
    pub fn repro_paper(seed: u64, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            seed,
            data: DataConfig {
                count: 5,
                labels: ["A", "B", "C", "D", "E"].map(String::from).to_vec(),
                base_rates: vec![50.0, 35.0, 65.0, 45.0, 55.0],
                ..Default::default()
            },
            output: OutputConfig {
                dir: out_dir.into(),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.predictor_specs()?;
        self.report_format()?;
        self.preprocess
            .to_config()
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        match self.data.kind {
            DataKind::SynthSeasonal if self.data.count == 0 => {
                Err(Error::Config("data.count must be >= 1".into()))
            }
            DataKind::PacketTrace | DataKind::Series if self.data.paths.is_empty() => {
                Err(Error::Config("data.paths must name at least one file".into()))
            }
            _ if !self.data.labels.is_empty() && self.data.labels.len() != self.dataset_count() => {
                Err(Error::Config(format!(
                    "{} labels for {} datasets",
                    self.data.labels.len(),
                    self.dataset_count()
                )))
            }
            _ => Ok(()),
        }
    }

    fn dataset_count(&self) -> usize {
        match self.data.kind {
            DataKind::SynthSeasonal => self.data.count,
            _ => self.data.paths.len(),
        }
    }

    pub fn predictor_specs(&self) -> Result<Vec<PredictorSpec>> {
        if self.predictors.list.is_empty() {
            return Err(Error::Config("predictors.list is empty".into()));
        }
        self.predictors
            .list
            .iter()
            .map(|s| s.parse().map_err(|e: Error| Error::Config(e.to_string())))
            .collect()
    }

    pub fn report_format(&self) -> Result<ReportFormat> {
        self.eval
            .format
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))
    }

    fn label(&self, i: usize, path: Option<&Path>) -> String {
        if let Some(l) = self.data.labels.get(i) {
            return l.clone();
        }
        match path.and_then(Path::file_stem) {
            Some(stem) => stem.to_string_lossy().into_owned(),
            None => dataset_letter(i),
        }
    }

    /// The seasonal spec used for synthetic dataset `i`.
    pub fn seasonal_spec(&self, i: usize) -> SeasonalSpec {
        let d = &self.data;
        let base_rate = if d.base_rates.is_empty() {
            d.base_rate
        } else {
            d.base_rates[i % d.base_rates.len()]
        };
        SeasonalSpec {
            n: d.n,
            period: d.period,
            amplitude: d.amplitude,
            base_rate,
            noise_std: d.noise_std,
            seed: derive_seed(self.seed, i as u64),
        }
    }
}

fn dataset_letter(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("D{i}")
    }
}

/// Raw (pre-preprocessing) datasets named by the configuration.
pub fn load_datasets(config: &RunConfig) -> Result<Vec<(String, TimeSeries)>> {
    match config.data.kind {
        DataKind::SynthSeasonal => (0..config.data.count)
            .map(|i| Ok((config.label(i, None), synth::gen_seasonal_traffic(&config.seasonal_spec(i))?)))
            .collect(),
        DataKind::PacketTrace => {
            let filter = if config.data.filter_protocols {
                ProtocolFilter::TcpUdp
            } else {
                ProtocolFilter::All
            };
            config
                .data
                .paths
                .iter()
                .enumerate()
                .map(|(i, path)| {
                    let file = fs::File::open(path).map_err(|e| {
                        Error::invalid(format!("cannot open {}: {e}", path.display()))
                    })?;
                    let trace = ingest::load_packet_trace(file, filter)?;
                    Ok((config.label(i, Some(path)), ingest::bin_to_rate(&trace, config.data.bin_width)?))
                })
                .collect()
        }
        DataKind::Series => config
            .data
            .paths
            .iter()
            .enumerate()
            .map(|(i, path)| {
                let file = fs::File::open(path)
                    .map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))?;
                Ok((config.label(i, Some(path)), ingest::load_series_csv(file)?))
            })
            .collect(),
    }
}

/// Files written by [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: PathBuf,
    pub mse_csv: PathBuf,
    pub predictions: Vec<PathBuf>,
    pub fig1: Option<PathBuf>,
    pub stages: Vec<PathBuf>,
    pub comparison: Comparison,
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn emit_stages(dir: &Path, label: &str, raw: &TimeSeries, stages: &PipelineStages) -> Result<Vec<PathBuf>> {
    let dir = dir.join("stages");
    fs::create_dir_all(&dir)?;
    let label = file_safe(label);
    [
        ("raw", raw),
        ("log", &stages.logged),
        ("centered", &stages.centered),
        ("stationary", stages.stationary.series()),
    ]
    .into_iter()
    .map(|(name, series)| write(dir.join(format!("{label}_{name}.csv")), &series.to_csv_string()))
    .collect()
}

fn fig1_columns(specs: &[PredictorSpec]) -> Option<(usize, usize)> {
    let arma = specs
        .iter()
        .position(|s| *s == PredictorSpec::arma(2, 1))
        .or_else(|| specs.iter().position(|s| matches!(s, PredictorSpec::Arma(_))))?;
    let kf = specs.iter().position(|s| matches!(s, PredictorSpec::Kalman { .. }))?;
    Some((arma, kf))
}

/// Runs ingest, preprocessing, comparison and reporting, writing every
/// artifact under `config.output.dir`.
///
/// Errors name the failing stage.
pub fn run_pipeline(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let specs = config.predictor_specs()?;
    let format = config.report_format()?;
    let out = &config.output.dir;

    let raw = load_datasets(config).stage("ingest")?;

    fs::create_dir_all(out).stage("report")?;
    let mut stage_files = Vec::new();
    let mut datasets = Vec::with_capacity(raw.len());
    for (label, series) in &raw {
        let stationary = if config.preprocess.enabled {
            let stages = preprocess::pipeline_stages(series, &config.preprocess.to_config())
                .map_err(|e| Error::invalid(format!("dataset {label}: {e}")))
                .stage("preprocess")?;
            if config.output.emit_stages {
                stage_files.extend(emit_stages(out, label, series, &stages).stage("report")?);
            }
            stages.stationary
        } else {
            StationarySeries::unscaled(series.clone())
        };
        datasets.push(Dataset::new(label.clone(), stationary));
    }

    let comparison = eval::compare(
        &datasets,
        &specs,
        &CompareOptions {
            timing_serial: config.eval.timing_serial,
            ..Default::default()
        },
    )
    .stage("compare")?;

    let written = (|| -> Result<_> {
        let ext = match format {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        };
        let options = RenderOptions {
            digits: config.eval.digits,
        };
        let report = write(
            out.join(format!("report.{ext}")),
            &eval::render_report_with(&comparison.report, format, &options)?,
        )?;
        let mse_csv = write(out.join("mse.csv"), &eval::render_mse_csv(&comparison.report)?)?;

        let mut predictions = Vec::new();
        for (d, ds) in datasets.iter().enumerate() {
            let columns: Vec<(String, Option<&[f64]>)> = specs
                .iter()
                .zip(&comparison.predictions[d])
                .map(|(s, p)| (s.label(), p.as_deref()))
                .collect();
            let text = eval::render_predictions(ds.series.values(), &columns)?;
            predictions.push(write(out.join(format!("predictions_{}.csv", file_safe(&ds.label))), &text)?);
        }

        let mut fig1 = None;
        if config.output.fig1 {
            if let Some((a, k)) = fig1_columns(&specs) {
                if let (Some(arma), Some(kf)) = (&comparison.predictions[0][a], &comparison.predictions[0][k]) {
                    let text = eval::render_fig1(datasets[0].series.values(), arma, kf)?;
                    fig1 = Some(write(out.join("fig1.csv"), &text)?);
                }
            }
        }
        Ok((report, mse_csv, predictions, fig1))
    })()
    .stage("report")?;

    let (report, mse_csv, predictions, fig1) = written;
    Ok(RunArtifacts {
        report,
        mse_csv,
        predictions,
        fig1,
        stages: stage_files,
        comparison,
    })
}

/// The five-dataset, six-predictor synthetic experiment.
pub fn repro_paper(seed: u64, out_dir: impl Into<PathBuf>) -> Result<RunArtifacts> {
    run_pipeline(&RunConfig::repro_paper(seed, out_dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse_from_empty_document() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.predictor_specs().unwrap(), PredictorSpec::reference_grid());
    }

    #[test]
    fn config_errors() {
        for bad in [
            "seed = \"x\"",
            "unknown = 1",
            "[predictors]\nlist = [\"svm:1\"]",
            "[eval]\nformat = \"pdf\"",
            "[preprocess]\nwindow = 1",
            "[data]\nkind = \"series\"",
            "[data]\ncount = 2\nlabels = [\"only\"]",
        ] {
            assert!(matches!(RunConfig::from_toml(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn full_document() {
        let c = RunConfig::from_toml(
            r#"
            seed = 7
            [data]
            kind = "synth-seasonal"
            count = 2
            base_rates = [10, 20]
            n = 600
            [preprocess]
            scale = "none"
            [predictors]
            list = ["arma:2,1", "kf"]
            [output]
            dir = "somewhere"
            emit_stages = true
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.preprocess.scale, ScaleMode::None);
        assert_eq!(c.seasonal_spec(1).base_rate, 20.0);
        assert_eq!(c.seasonal_spec(1).seed, derive_seed(7, 1));
        assert_eq!(c.label(1, None), "B");
    }

    #[test]
    fn missing_file_fails_in_ingest() {
        let mut c = RunConfig::default();
        c.data.kind = DataKind::Series;
        c.data.paths = vec![PathBuf::from("/nonexistent/series.csv")];
        c.output.dir = std::env::temp_dir().join("trafficast-unused");
        let err = run_pipeline(&c).unwrap_err();
        assert_eq!(err.stage(), Some("ingest"));
    }

    #[test]
    fn labels_from_file_stems() {
        let mut c = RunConfig::default();
        c.data.kind = DataKind::Series;
        c.data.paths = vec![PathBuf::from("x/morning.csv")];
        assert_eq!(c.label(0, Some(&c.data.paths[0].clone())), "morning");
    }
}
