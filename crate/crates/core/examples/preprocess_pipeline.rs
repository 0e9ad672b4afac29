//! Turn a raw packet-rate series into the stationary series the predictors
//! consume, printing summary statistics after every stage.

use trafficast::preprocess::{self, PreprocessConfig};
use trafficast::synth::{self, SeasonalSpec};

fn summary(name: &str, values: &[f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    println!("{name:>10}: n={:<5} mean={mean:>9.4} std={std:.4}", values.len());
}

pub fn run() -> trafficast::Result<()> {
    let raw = synth::gen_seasonal_traffic(&SeasonalSpec::default())?;
    let cfg = PreprocessConfig::default();
    let stages = preprocess::pipeline_stages(&raw, &cfg)?;

    summary("raw", raw.values());
    summary("log", stages.logged.values());
    summary("centered", stages.centered.values());
    summary("zscore", stages.stationary.values());

    let params = stages.stationary.scale_params();
    println!("scale parameters: mean={:.3e} std={:.4}", params.mean, params.std);

    // too short for one window: the error names the stage
    let short = trafficast::TimeSeries::from_values(vec![5.0; 9])?;
    if let Err(e) = preprocess::pipeline(&short, &cfg) {
        println!("short input: {e}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> trafficast::Result<()> {
    run()
}
