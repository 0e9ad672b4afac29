//! Score the five ARMA orders and the Kalman filter on two preprocessed
//! synthetic datasets and print the report in every format.

use trafficast::eval::{self, CompareOptions, Dataset, PredictorSpec, ReportFormat};
use trafficast::preprocess::{self, PreprocessConfig};
use trafficast::synth::{self, SeasonalSpec};

pub fn run() -> trafficast::Result<()> {
    let mut datasets = Vec::new();
    for (label, seed) in [("A", 1), ("B", 2)] {
        let raw = synth::gen_seasonal_traffic(&SeasonalSpec {
            n: 2000,
            seed,
            ..Default::default()
        })?;
        datasets.push(Dataset::new(label, preprocess::pipeline(&raw, &PreprocessConfig::default())?));
    }

    let comparison = eval::compare(&datasets, &PredictorSpec::reference_grid(), &CompareOptions::default())?;
    println!("scored from index {}", comparison.burn_in);
    print!("{}", eval::render_report(&comparison.report, ReportFormat::Markdown)?);
    print!("{}", eval::render_report(&comparison.report, ReportFormat::Csv)?);
    print!("{}", eval::render_mse_csv(&comparison.report)?);

    let fig1 = eval::render_fig1(
        datasets[0].series.values(),
        comparison.predictions[0][1].as_deref().unwrap_or_default(),
        comparison.predictions[0][5].as_deref().unwrap_or_default(),
    )?;
    println!("fig1 head:");
    for line in fig1.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> trafficast::Result<()> {
    run()
}
