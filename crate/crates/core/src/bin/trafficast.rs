use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trafficast::arma;
use trafficast::eval::{self, CompareOptions, Dataset, PredictorSpec, RenderOptions, ReportFormat};
use trafficast::ingest::{self, ProtocolFilter};
use trafficast::preprocess::{self, PreprocessConfig, ScaleMode, StationarySeries};
use trafficast::run::{self, RunConfig};
use trafficast::synth::{self, SeasonalSpec};
use trafficast::{Error, Result, TimeSeries};

/// Packet-rate traffic forecasting: ARMA and Kalman one-step predictors.
#[derive(Parser)]
#[command(name = "trafficast", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bin a `time,protocol` packet log into a packet-rate series.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        bin_width: f64,
        /// Keep packets of every protocol, not only TCP and UDP.
        #[arg(long)]
        all_protocols: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Log transform, box-center and scale a rate series.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: PreprocessArgs,
        /// Also write the log and centered intermediates next to `--out`.
        #[arg(long)]
        emit_stages: bool,
    },
    /// Fit an ARMA(p,q) model and write it as JSON.
    FitArma {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        q: usize,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-step Kalman predictions (local-level model).
    PredictKf {
        #[arg(long, default_value_t = eval::DEFAULT_KF_VARIANCE)]
        q: f64,
        #[arg(long, default_value_t = eval::DEFAULT_KF_VARIANCE)]
        r: f64,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic data.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Score predictors on one or more series.
    Compare {
        /// Comma-separated series CSV files.
        #[arg(long, value_delimiter = ',', required = true)]
        datasets: Vec<PathBuf>,
        /// Predictors such as `arma:2,1` or `kf:0.01,0.01`.
        #[arg(long, num_args = 1.., default_values_t = default_predictors())]
        predictors: Vec<String>,
        #[arg(long, default_value = "markdown")]
        format: String,
        #[arg(long)]
        out: PathBuf,
        /// Treat inputs as raw rates and run the default preprocessing first.
        #[arg(long)]
        preprocess: bool,
        /// Write `index,actual,arma_pred,kf_pred` for the first dataset.
        #[arg(long)]
        fig1: Option<PathBuf>,
        /// Allow cells to run concurrently (timings then share cores).
        #[arg(long)]
        parallel: bool,
        #[arg(long, default_value_t = RenderOptions::default().digits)]
        digits: usize,
    },
    /// Five seeded synthetic datasets scored by the six reference predictors.
    ReproPaper {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "repro-out")]
        out_dir: PathBuf,
    },
    /// Run the full pipeline from a TOML configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        emit_stages: bool,
    },
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Sinusoidal packet rate with Gaussian noise.
    Seasonal {
        #[arg(long, default_value_t = SeasonalSpec::default().n)]
        n: usize,
        #[arg(long, default_value_t = SeasonalSpec::default().period)]
        period: usize,
        #[arg(long, default_value_t = SeasonalSpec::default().amplitude)]
        amplitude: f64,
        #[arg(long, default_value_t = SeasonalSpec::default().base_rate)]
        base_rate: f64,
        #[arg(long, default_value_t = SeasonalSpec::default().noise_std)]
        noise_std: f64,
        #[arg(long, default_value_t = SeasonalSpec::default().seed)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long, default_value_t = 10)]
    window: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    /// Apply ln(1+x) (default).
    #[arg(long, overrides_with = "no_log")]
    log: bool,
    #[arg(long)]
    no_log: bool,
    #[arg(long, default_value = "zscore")]
    scale: ScaleMode,
}

impl PreprocessArgs {
    fn config(&self) -> PreprocessConfig {
        PreprocessConfig {
            window_len: self.window,
            overlap_fraction: self.overlap,
            log_enabled: !self.no_log,
            scale_mode: self.scale,
        }
    }
}

fn default_predictors() -> Vec<String> {
    PredictorSpec::reference_grid()
        .iter()
        .map(|p| match p {
            PredictorSpec::Arma(o) => format!("arma:{},{}", o.p, o.q),
            PredictorSpec::Kalman { q, r } => format!("kf:{q},{r}"),
        })
        .collect()
}

fn staged<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(stage))
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    let file = File::open(path)
        .map_err(|e| Error::Invalid(format!("cannot open {}: {e}", path.display())))?;
    ingest::load_series_csv(BufReader::new(file))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)
        .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            input,
            bin_width,
            all_protocols,
            out,
        } => {
            let filter = if all_protocols {
                ProtocolFilter::All
            } else {
                ProtocolFilter::TcpUdp
            };
            let series = staged("ingest", (|| {
                let file = File::open(&input)
                    .map_err(|e| Error::Invalid(format!("cannot open {}: {e}", input.display())))?;
                let trace = ingest::load_packet_trace(BufReader::new(file), filter)?;
                ingest::bin_to_rate(&trace, bin_width)
            })())?;
            staged("output", write_file(&out, &series.to_csv_string()))
        }
        Command::Preprocess {
            input,
            out,
            opts,
            emit_stages,
        } => {
            let raw = staged("ingest", read_series(&input))?;
            let stages = preprocess::pipeline_stages(&raw, &opts.config()).map_err(|e| e.in_stage("preprocess"))?;
            staged("output", (|| {
                write_file(&out, &stages.stationary.series().to_csv_string())?;
                if emit_stages {
                    write_file(&sibling(&out, "log"), &stages.logged.to_csv_string())?;
                    write_file(&sibling(&out, "centered"), &stages.centered.to_csv_string())?;
                }
                Ok(())
            })())
        }
        Command::FitArma { p, q, input, out } => {
            let series = staged("ingest", read_series(&input))?;
            let (model, diag) = staged("fit-arma", arma::fit(series.values(), p, q))?;
            if !diag.stationary {
                eprintln!("warning: estimated AR part is not stationary");
            }
            let json = serde_json::to_string_pretty(&model).map_err(Error::from)?;
            staged("output", write_file(&out, &(json + "\n")))
        }
        Command::PredictKf { q, r, input, out } => {
            let series = staged("ingest", read_series(&input))?;
            let trace = staged("predict-kf", eval::run_kalman(q, r, series.values()))?;
            let text = staged("output", eval::render_kf_predictions(series.values(), &trace))?;
            staged("output", write_file(&out, &text))
        }
        Command::Synth(SynthCommand::Seasonal {
            n,
            period,
            amplitude,
            base_rate,
            noise_std,
            seed,
            out,
        }) => {
            let spec = SeasonalSpec {
                n,
                period,
                amplitude,
                base_rate,
                noise_std,
                seed,
            };
            let series = staged("synth", synth::gen_seasonal_traffic(&spec))?;
            staged("output", write_file(&out, &series.to_csv_string()))
        }
        Command::Compare {
            datasets,
            predictors,
            format,
            out,
            preprocess,
            fig1,
            parallel,
            digits,
        } => {
            let specs = predictors
                .iter()
                .map(|p| p.parse::<PredictorSpec>())
                .collect::<Result<Vec<_>>>()
                .map_err(|e| Error::Config(e.to_string()))?;
            let format: ReportFormat = format.parse().map_err(|e: Error| Error::Config(e.to_string()))?;

            let mut inputs = Vec::new();
            for path in &datasets {
                let raw = staged("ingest", read_series(path))?;
                let series = if preprocess {
                    staged("preprocess", preprocess::pipeline(&raw, &PreprocessConfig::default()))?
                } else {
                    StationarySeries::unscaled(raw)
                };
                let label = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                inputs.push(Dataset::new(label, series));
            }
            let options = CompareOptions {
                timing_serial: !parallel,
                ..Default::default()
            };
            let comparison = staged("compare", eval::compare(&inputs, &specs, &options))?;
            for f in &comparison.failures {
                eprintln!("warning: {} on {}: {}", f.predictor, f.dataset, f.message);
            }
            let text = staged("report", eval::render_report_with(&comparison.report, format, &RenderOptions { digits }))?;
            staged("output", write_file(&out, &text))?;

            if let Some(path) = fig1 {
                let arma = specs.iter().position(|s| *s == PredictorSpec::arma(2, 1))
                    .or_else(|| specs.iter().position(|s| matches!(s, PredictorSpec::Arma(_))));
                let kf = specs.iter().position(|s| matches!(s, PredictorSpec::Kalman { .. }));
                let (Some(a), Some(k)) = (arma, kf) else {
                    return Err(Error::Config("--fig1 needs an ARMA and a KF predictor".into()));
                };
                let row = &comparison.predictions[0];
                let (Some(ap), Some(kp)) = (&row[a], &row[k]) else {
                    return Err(Error::Invalid("fig1 predictors failed on the first dataset".into()).in_stage("report"));
                };
                let text = staged("report", eval::render_fig1(inputs[0].series.values(), ap, kp))?;
                staged("output", write_file(&path, &text))?;
            }
            Ok(())
        }
        Command::ReproPaper { seed, out_dir } => {
            let artifacts = run::repro_paper(seed, &out_dir)?;
            println!("{}", artifacts.report.display());
            Ok(())
        }
        Command::Run {
            config,
            seed,
            out_dir,
            emit_stages,
        } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            if let Some(dir) = out_dir {
                config.output.dir = dir;
            }
            config.output.emit_stages |= emit_stages;
            let artifacts = run::run_pipeline(&config)?;
            println!("{}", artifacts.report.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
