//! The five-dataset by six-predictor experiment, written to a directory.
//!
//! ```sh
//! cargo run --release --example repro_paper -- out/
//! ```

use std::path::Path;

use trafficast::run;

pub fn run_in(dir: &Path) -> trafficast::Result<()> {
    let artifacts = run::repro_paper(42, dir)?;
    print!("{}", std::fs::read_to_string(&artifacts.report)?);
    println!("MSE grid: {}", artifacts.mse_csv.display());
    for p in &artifacts.predictions {
        println!("predictions: {}", p.display());
    }
    if let Some(f) = &artifacts.fig1 {
        println!("plot data: {}", f.display());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> trafficast::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "repro-out".into());
    run_in(Path::new(&dir))
}
