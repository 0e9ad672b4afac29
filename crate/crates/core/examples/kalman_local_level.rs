//! Filter a simulated random walk observed in noise with the default
//! local-level model and watch the gain settle.

use nalgebra::DVector;
use trafficast::kalman::{self, StateSpaceModel};
use trafficast::{eval, synth};

pub fn run() -> trafficast::Result<()> {
    let (q, r) = (0.01, 0.01);
    let model = StateSpaceModel::scalar(1.0, 1.0, q, r)?;
    let sim = synth::gen_linear_gaussian(&model, &DVector::zeros(1), 20_000, 3)?;
    let z = sim.measurement_series(0)?;

    let (model, init) = kalman::default_local_level(q, r, z.values().first().copied())?;
    let trace = kalman::predict_series(&model, z.values(), &init)?;
    let gains = trace.scalar_gains();
    for k in [0, 1, 2, 5, 10, 50] {
        println!("K_{k:<3} = {:.6}", gains[k]);
    }

    let steady = kalman::steady_state(&model, 1e-15, 10_000)?;
    println!(
        "steady gain {:.6}, innovation variance {:.6}",
        steady.gain[(0, 0)],
        steady.innovation_covariance[(0, 0)]
    );
    let mse = eval::mse(&trace.predictions, z.values(), 1)?;
    println!("one-step MSE {mse:.6}");

    // a two-state constant-velocity model works through the same API
    let cv = StateSpaceModel::new(
        nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        None,
        nalgebra::DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        nalgebra::DMatrix::from_diagonal(&DVector::from_vec(vec![1e-4, 1e-4])),
        nalgebra::DMatrix::from_element(1, 1, 0.25),
    )?;
    let ramp: Vec<f64> = (0..100).map(|t| 0.5 * t as f64).collect();
    let init = kalman::KalmanState::new(DVector::zeros(2), nalgebra::DMatrix::identity(2, 2) * 10.0)?;
    let cv_trace = kalman::predict_series(&cv, &ramp, &init)?;
    println!(
        "constant velocity: last prediction {:.3} for {:.3}, velocity estimate {:.4}",
        cv_trace.predictions[99], ramp[99], cv_trace.final_state.x_hat[1]
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> trafficast::Result<()> {
    run()
}
