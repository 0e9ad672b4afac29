//! Generate the seeded synthetic traffic used in place of real captures.

use trafficast::rng::derive_seed;
use trafficast::synth::{self, SeasonalSpec};

pub fn run() -> trafficast::Result<()> {
    for (i, base_rate) in [50.0, 35.0, 65.0].into_iter().enumerate() {
        let spec = SeasonalSpec {
            base_rate,
            seed: derive_seed(42, i as u64),
            ..Default::default()
        };
        let s = synth::gen_seasonal_traffic(&spec)?;
        let v = s.values();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let zeros = v.iter().filter(|&&x| x == 0.0).count();
        println!(
            "dataset {i}: base {base_rate}, mean rate {mean:.2}, clipped bins {zeros}, first {:?}",
            v[..4].iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }

    let clean = synth::gen_seasonal_traffic(&SeasonalSpec {
        n: 8,
        period: 4,
        amplitude: 1.0,
        base_rate: 10.0,
        noise_std: 0.0,
        seed: 0,
    })?;
    print!("{}", clean.to_csv_string());
    Ok(())
}

#[allow(dead_code)]
fn main() -> trafficast::Result<()> {
    run()
}
