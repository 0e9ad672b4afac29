//! Simulate an ARMA(2,1) process, recover its coefficients and score the
//! rolling one-step predictions of the fitted model.

use trafficast::arma::{self, ArmaModel};
use trafficast::eval;

pub fn run() -> trafficast::Result<()> {
    let truth = ArmaModel::new(vec![0.5, -0.3], vec![0.4], 1.0)?;
    let x = arma::simulate(&truth, 10_000, 7)?;

    let (fitted, diag) = arma::fit(x.values(), 2, 1)?;
    println!("true   theta={:?} phi={:?}", truth.theta(), truth.phi());
    println!(
        "fitted theta=[{:.3}, {:.3}] phi=[{:.3}] sigma2={:.3}",
        fitted.theta()[0],
        fitted.theta()[1],
        fitted.phi()[0],
        fitted.sigma2()
    );
    println!(
        "long AR order {}, burn-in {}, stationary {}",
        diag.long_ar_order, diag.burn_in, diag.stationary
    );
    println!("AR root moduli: {:?}", fitted.ar_root_moduli());

    let forecast = arma::predict_series(&fitted, x.values())?;
    let mse = eval::mse(&forecast.predictions, x.values(), forecast.burn_in)?;
    println!("one-step MSE {mse:.4} (innovation variance 1)");

    println!("model JSON: {}", serde_json::to_string(&fitted)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> trafficast::Result<()> {
    run()
}
