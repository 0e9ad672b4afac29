//! ARMA(p,q) estimation and one-step-ahead prediction.
//!
//! The model is
//!
//! ```text
//! X_t = θ_1·X_{t−1} + … + θ_p·X_{t−p} + φ_1·ε_{t−1} + … + φ_q·ε_{t−q} + ε_t
//! ```
//!
//! with Gaussian white noise `ε_t` of variance `σ²` and no intercept (inputs
//! are expected to be centered).
//!
//! Fitting uses the Hannan–Rissanen two-stage least-squares method: a long
//! autoregression supplies innovation estimates, then `X_t` is regressed on
//! its own lags and the lagged innovation estimates. No iterative optimizer
//! is involved, so a fit either succeeds deterministically or reports why it
//! could not.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::GaussianSource;
use crate::series::TimeSeries;

/// Samples discarded at the start of [`simulate`].
pub const SIMULATION_BURN_IN: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmaOrder {
    pub p: usize,
    pub q: usize,
}

impl ArmaOrder {
    pub fn new(p: usize, q: usize) -> Self {
        Self { p, q }
    }

    /// Rolling predictions before this index lack a full history.
    pub fn burn_in(&self) -> usize {
        self.p.max(self.q)
    }

    /// Orders of the long autoregression used in the first stage.
    pub fn long_ar_order(&self) -> usize {
        20.max(2 * (self.p + self.q))
    }

    pub fn min_fit_len(&self) -> usize {
        10 * (self.p + self.q + 1)
    }
}

impl fmt::Display for ArmaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ARMA ({},{})", self.p, self.q)
    }
}

impl FromStr for ArmaOrder {
    type Err = Error;

    /// Parses `p,q`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("expected ARMA order `p,q`, got {s:?}"));
        let (p, q) = s.split_once(',').ok_or_else(bad)?;
        Ok(Self {
            p: p.trim().parse().map_err(|_| bad())?,
            q: q.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// ARMA coefficients and innovation variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ArmaModelRecord", try_from = "ArmaModelRecord")]
pub struct ArmaModel {
    theta: Vec<f64>,
    phi: Vec<f64>,
    sigma2: f64,
}

// On-disk layout: {"p", "q", "theta", "phi", "sigma2"} in that order.
#[derive(Serialize, Deserialize)]
struct ArmaModelRecord {
    p: usize,
    q: usize,
    theta: Vec<f64>,
    phi: Vec<f64>,
    sigma2: f64,
}

impl From<ArmaModel> for ArmaModelRecord {
    fn from(m: ArmaModel) -> Self {
        Self {
            p: m.theta.len(),
            q: m.phi.len(),
            theta: m.theta,
            phi: m.phi,
            sigma2: m.sigma2,
        }
    }
}

impl TryFrom<ArmaModelRecord> for ArmaModel {
    type Error = Error;

    fn try_from(r: ArmaModelRecord) -> Result<Self> {
        if r.theta.len() != r.p || r.phi.len() != r.q {
            return Err(Error::invalid(format!(
                "declared order ({},{}) does not match {} AR and {} MA coefficients",
                r.p,
                r.q,
                r.theta.len(),
                r.phi.len()
            )));
        }
        ArmaModel::new(r.theta, r.phi, r.sigma2)
    }
}

impl ArmaModel {
    /// `theta` holds the AR coefficients, `phi` the MA coefficients.
    pub fn new(theta: Vec<f64>, phi: Vec<f64>, sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!("innovation variance must be >= 0, got {sigma2}")));
        }
        if theta.iter().chain(&phi).any(|c| !c.is_finite()) {
            return Err(Error::invalid("ARMA coefficients must be finite"));
        }
        Ok(Self { theta, phi, sigma2 })
    }

    pub fn order(&self) -> ArmaOrder {
        ArmaOrder::new(self.p(), self.q())
    }

    pub fn p(&self) -> usize {
        self.theta.len()
    }

    pub fn q(&self) -> usize {
        self.phi.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// True when every root of `1 − θ_1 z − … − θ_p z^p` lies outside the
    /// unit circle.
    ///
    /// Runs the Levinson recursion backwards: the AR part is stationary iff
    /// every reflection coefficient has modulus below one.
    pub fn is_stationary(&self) -> bool {
        let mut a = self.theta.clone();
        while let Some(&kappa) = a.last() {
            if !(kappa.abs() < 1.0) {
                return false;
            }
            let k = a.len();
            let denom = 1.0 - kappa * kappa;
            a = (0..k - 1)
                .map(|j| (a[j] + kappa * a[k - 2 - j]) / denom)
                .collect();
        }
        true
    }

    /// Moduli of the AR polynomial roots, from the companion-matrix
    /// eigenvalues (a root is the reciprocal of an eigenvalue).
    pub fn ar_root_moduli(&self) -> Vec<f64> {
        let p = self.p();
        if p == 0 {
            return Vec::new();
        }
        let companion = DMatrix::from_fn(p, p, |i, j| {
            if i == 0 {
                self.theta[j]
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        companion
            .complex_eigenvalues()
            .iter()
            .map(|l| 1.0 / l.norm())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    /// Second-stage regression residuals, one per training sample after the
    /// burn-in.
    pub residuals: Vec<f64>,
    /// Samples skipped before the first second-stage regression row.
    pub burn_in: usize,
    /// Order of the long autoregression (0 for pure AR fits, which skip it).
    pub long_ar_order: usize,
    pub converged: bool,
    /// Least-squares stages run.
    pub iterations: usize,
    /// False when the estimated AR part has a root on or inside the unit circle.
    pub stationary: bool,
}

/// Ordinary least squares through the normal equations.
fn least_squares(design: &DMatrix<f64>, target: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let gram = design.tr_mul(design);
    let rhs = design.tr_mul(target);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} regression matrix is not invertible")))?;
    let beta = chol.solve(&rhs);
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Singular(format!("{what} regression is ill-conditioned")));
    }
    Ok(beta)
}

/// Regresses `x[t]` on `x[t-1..=t-m]` for `t >= m` and returns the residuals,
/// indexed like `x` (zero before `m`).
fn long_ar_innovations(x: &[f64], m: usize) -> Result<Vec<f64>> {
    let rows = x.len() - m;
    let design = DMatrix::from_fn(rows, m, |r, j| x[m + r - 1 - j]);
    let target = DVector::from_column_slice(&x[m..]);
    let a = least_squares(&design, &target, "long autoregression")?;
    let fitted = &design * &a;
    let mut e = vec![0.0; x.len()];
    for r in 0..rows {
        e[m + r] = x[m + r] - fitted[r];
    }
    Ok(e)
}

/// Fits ARMA(p,q) by Hannan–Rissanen.
///
/// Needs `p + q >= 1` and at least `10·(p+q+1)` samples. The long
/// autoregression has order `max(20, 2(p+q))`, capped at a quarter of the
/// sample count for short series. A nonstationary AR estimate is returned
/// with `diagnostics.stationary == false`.
pub fn fit(series: &[f64], p: usize, q: usize) -> Result<(ArmaModel, FitDiagnostics)> {
    let order = ArmaOrder::new(p, q);
    let n = series.len();
    if p + q == 0 {
        return Err(Error::invalid("ARMA fit needs p + q >= 1"));
    }
    if n < order.min_fit_len() {
        return Err(Error::invalid(format!(
            "{order} needs at least {} samples, got {n}",
            order.min_fit_len()
        )));
    }
    if let Some(i) = series.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite sample at index {i}")));
    }

    let (innovations, m) = if q > 0 {
        let m = order.long_ar_order().min(n / 4).max(p + q);
        (long_ar_innovations(series, m)?, m)
    } else {
        (Vec::new(), 0)
    };

    let start = if q > 0 { p.max(m + q) } else { p };
    let rows = n - start;
    if rows <= p + q {
        return Err(Error::invalid(format!("too few samples for {order}")));
    }
    let design = DMatrix::from_fn(rows, p + q, |r, j| {
        let t = start + r;
        if j < p {
            series[t - 1 - j]
        } else {
            innovations[t - 1 - (j - p)]
        }
    });
    let target = DVector::from_column_slice(&series[start..]);
    let beta = least_squares(&design, &target, "ARMA")?;
    let residuals: Vec<f64> = (target - &design * &beta).iter().copied().collect();
    let sigma2 = residuals.iter().map(|r| r * r).sum::<f64>() / rows as f64;

    let model = ArmaModel::new(beta.rows(0, p).iter().copied().collect(), beta.rows(p, q).iter().copied().collect(), sigma2)?;
    let stationary = model.is_stationary();
    Ok((
        model,
        FitDiagnostics {
            residuals,
            burn_in: start,
            long_ar_order: m,
            converged: true,
            iterations: if q > 0 { 2 } else { 1 },
            stationary,
        },
    ))
}

/// Conditional mean of the next sample.
///
/// `history` and `innovations` are ordered oldest first; only the last `p`
/// and `q` entries are used.
pub fn predict_one_step(model: &ArmaModel, history: &[f64], innovations: &[f64]) -> Result<f64> {
    let (p, q) = (model.p(), model.q());
    if history.len() < p {
        return Err(Error::invalid(format!(
            "AR part needs {p} past samples, got {}",
            history.len()
        )));
    }
    if innovations.len() < q {
        return Err(Error::invalid(format!(
            "MA part needs {q} past innovations, got {}",
            innovations.len()
        )));
    }
    let ar: f64 = model
        .theta
        .iter()
        .zip(history.iter().rev())
        .map(|(c, x)| c * x)
        .sum();
    let ma: f64 = model
        .phi
        .iter()
        .zip(innovations.iter().rev())
        .map(|(c, e)| c * e)
        .sum();
    Ok(ar + ma)
}

/// Output of rolling one-step prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// `predictions[t]` forecasts `series[t]` from samples before `t`.
    pub predictions: Vec<f64>,
    /// `series[t] − predictions[t]`.
    pub innovations: Vec<f64>,
    /// Leading predictions computed from zero-padded history.
    pub burn_in: usize,
}

/// Rolling one-step-ahead predictions over `series`.
///
/// Missing history before the start is taken as zero, and the first
/// `max(p,q)` predictions are flagged through [`Forecast::burn_in`].
pub fn predict_series(model: &ArmaModel, series: &[f64]) -> Result<Forecast> {
    let burn_in = model.order().burn_in();
    if series.len() <= burn_in {
        return Err(Error::invalid(format!(
            "series of length {} is too short for {}",
            series.len(),
            model.order()
        )));
    }
    let mut predictions = Vec::with_capacity(series.len());
    let mut innovations = Vec::with_capacity(series.len());
    for (t, &x) in series.iter().enumerate() {
        let ar: f64 = (1..=model.p())
            .filter(|&i| i <= t)
            .map(|i| model.theta[i - 1] * series[t - i])
            .sum();
        let ma: f64 = (1..=model.q())
            .filter(|&i| i <= t)
            .map(|i| model.phi[i - 1] * innovations[t - i])
            .sum();
        let pred = ar + ma;
        predictions.push(pred);
        innovations.push(x - pred);
    }
    Ok(Forecast {
        predictions,
        innovations,
        burn_in,
    })
}

/// Draws `n` samples from the model, starting from a zero state and
/// discarding the first [`SIMULATION_BURN_IN`] samples.
pub fn simulate(model: &ArmaModel, n: usize, seed: u64) -> Result<TimeSeries> {
    if n == 0 {
        return Err(Error::invalid("simulation length must be >= 1"));
    }
    if !model.is_stationary() {
        return Err(Error::Nonstationary(format!(
            "cannot simulate {} with AR coefficients {:?}",
            model.order(),
            model.theta
        )));
    }
    let total = n + SIMULATION_BURN_IN;
    let std = model.sigma2.sqrt();
    let mut noise = GaussianSource::new(seed);
    let eps: Vec<f64> = (0..total).map(|_| noise.normal(std)).collect();
    let mut x = vec![0.0; total];
    for t in 0..total {
        let ar: f64 = (1..=model.p())
            .filter(|&i| i <= t)
            .map(|i| model.theta[i - 1] * x[t - i])
            .sum();
        let ma: f64 = (1..=model.q())
            .filter(|&i| i <= t)
            .map(|i| model.phi[i - 1] * eps[t - i])
            .sum();
        x[t] = ar + ma + eps[t];
    }
    TimeSeries::from_values(x.split_off(SIMULATION_BURN_IN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(theta: &[f64], phi: &[f64], sigma2: f64) -> ArmaModel {
        ArmaModel::new(theta.to_vec(), phi.to_vec(), sigma2).unwrap()
    }

    fn lag_one_autocorrelation(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let c1: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        c1 / c0
    }

    #[test]
    fn ar1_fit_matches_yule_walker() {
        let truth = model(&[0.8], &[], 1.0);
        let x = simulate(&truth, 10_000, 11).unwrap();
        let (fitted, diag) = fit(x.values(), 1, 0).unwrap();
        let r1 = lag_one_autocorrelation(x.values());
        assert!((fitted.theta()[0] - 0.8).abs() < 0.05, "{:?}", fitted.theta());
        assert!((r1 - 0.8).abs() < 0.05);
        assert!((fitted.theta()[0] - r1).abs() < 0.01);
        assert!(diag.stationary && diag.converged);
        assert_eq!(diag.residuals.len(), 10_000 - 1);
    }

    #[test]
    fn white_noise_has_no_ar_structure() {
        let x = simulate(&model(&[], &[0.0], 1.0), 10_000, 5).unwrap();
        let (fitted, _) = fit(x.values(), 1, 0).unwrap();
        assert!(fitted.theta()[0].abs() < 0.05);
    }

    #[test]
    fn short_series_violates_precondition() {
        let err = fit(&[1.0, 2.0, 0.5, -1.0, 0.3], 2, 1).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
        assert!(fit(&[0.0; 100], 0, 0).is_err());
    }

    #[test]
    fn constant_zero_series_is_singular() {
        let err = fit(&[0.0; 200], 2, 0).unwrap_err();
        assert!(matches!(err, Error::Singular(_)), "{err:?}");
    }

    #[test]
    fn residual_length_accounts_for_long_ar() {
        let truth = model(&[0.5, -0.3], &[0.4], 1.0);
        let x = simulate(&truth, 2000, 3).unwrap();
        let (_, diag) = fit(x.values(), 2, 1).unwrap();
        assert_eq!(diag.long_ar_order, 20);
        assert_eq!(diag.burn_in, 21);
        assert_eq!(diag.residuals.len(), 2000 - 21);
        assert_eq!(diag.iterations, 2);
    }

    #[test]
    fn nonstationary_estimate_is_flagged() {
        // an explosive path makes the AR(1) estimate exceed one
        let x: Vec<f64> = (0..200).map(|t| 1.05f64.powi(t)).collect();
        let (m, diag) = fit(&x, 1, 0).unwrap();
        assert!(m.theta()[0] >= 1.0);
        assert!(!diag.stationary);
    }

    #[test]
    fn one_step_examples() {
        assert_eq!(predict_one_step(&model(&[0.5], &[], 1.0), &[4.0], &[]).unwrap(), 2.0);
        let ma = predict_one_step(&model(&[], &[0.3], 1.0), &[], &[2.0]).unwrap();
        assert!((ma - 0.6).abs() < 1e-15);
        let arma =
            predict_one_step(&model(&[0.5, -0.2], &[0.4], 1.0), &[1.0, 3.0], &[0.5]).unwrap();
        assert!((arma - 1.5).abs() < 1e-15);
        assert!(predict_one_step(&model(&[0.5, 0.1], &[], 1.0), &[1.0], &[]).is_err());
        assert!(predict_one_step(&model(&[], &[0.5], 1.0), &[], &[]).is_err());
    }

    #[test]
    fn rolling_prediction_examples() {
        let f = predict_series(&model(&[0.5], &[], 1.0), &[2.0, 4.0, 8.0]).unwrap();
        assert_eq!(f.burn_in, 1);
        assert_eq!(&f.predictions[1..], &[1.0, 2.0]);
        assert_eq!(f.innovations, vec![2.0, 3.0, 6.0]);

        let z = predict_series(&model(&[0.3, 0.2, 0.1], &[], 1.0), &[0.0; 10]).unwrap();
        assert!(z.predictions.iter().all(|&p| p == 0.0));

        assert!(predict_series(&model(&[0.5, 0.1], &[], 1.0), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn true_model_one_step_mse_is_innovation_variance() {
        let truth = model(&[0.5, -0.3], &[0.4], 1.0);
        let x = simulate(&truth, 10_000, 99).unwrap();
        let f = predict_series(&truth, x.values()).unwrap();
        let tail = &f.innovations[f.burn_in..];
        let mse = tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64;
        assert!((mse - 1.0).abs() < 0.05, "mse {mse}");
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!(mean.abs() < 3.0 / (tail.len() as f64).sqrt());
    }

    #[test]
    fn simulation_basics() {
        let silent = simulate(&model(&[0.5, 0.2], &[0.3], 0.0), 50, 1).unwrap();
        assert!(silent.values().iter().all(|&v| v == 0.0));

        let m = model(&[0.7], &[0.2], 2.0);
        assert_eq!(simulate(&m, 300, 8).unwrap(), simulate(&m, 300, 8).unwrap());
        assert_ne!(simulate(&m, 300, 8).unwrap(), simulate(&m, 300, 9).unwrap());

        assert!(matches!(
            simulate(&model(&[1.2], &[], 1.0), 10, 1),
            Err(Error::Nonstationary(_))
        ));
        assert!(simulate(&m, 0, 1).is_err());
    }

    #[test]
    fn ar1_variance_matches_closed_form() {
        let x = simulate(&model(&[0.9], &[], 1.0), 100_000, 2024).unwrap();
        let v = x.values();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = 1.0 / (1.0 - 0.81);
        assert!((var / expected - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn stationarity_checks() {
        assert!(model(&[0.5, 0.3], &[], 1.0).is_stationary());
        assert!(!model(&[0.5, 0.6], &[], 1.0).is_stationary());
        assert!(!model(&[1.0], &[], 1.0).is_stationary());
        assert!(model(&[], &[2.0], 1.0).is_stationary());
        // complex pair with modulus sqrt(0.9) inside the unit circle
        assert!(model(&[1.6, -0.9], &[], 1.0).is_stationary());
        assert!(!model(&[1.6, -1.1], &[], 1.0).is_stationary());
    }

    #[test]
    fn json_layout() {
        let m = model(&[0.5, -0.25], &[0.125], 0.75);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"p":2,"q":1,"theta":[0.5,-0.25],"phi":[0.125],"sigma2":0.75}"#);
        assert_eq!(serde_json::from_str::<ArmaModel>(&json).unwrap(), m);
        assert!(serde_json::from_str::<ArmaModel>(
            r#"{"p":1,"q":1,"theta":[0.5,-0.25],"phi":[0.125],"sigma2":0.75}"#
        )
        .is_err());
    }

    #[test]
    fn order_parsing_and_label() {
        let o: ArmaOrder = "2, 1".parse().unwrap();
        assert_eq!(o, ArmaOrder::new(2, 1));
        assert_eq!(o.to_string(), "ARMA (2,1)");
        assert!("2".parse::<ArmaOrder>().is_err());
    }

    proptest! {
        #[test]
        fn one_step_is_linear(
            theta in prop::collection::vec(-1.0f64..1.0, 0..4),
            phi in prop::collection::vec(-1.0f64..1.0, 0..4),
            h1 in prop::collection::vec(-10.0f64..10.0, 4),
            h2 in prop::collection::vec(-10.0f64..10.0, 4),
            e1 in prop::collection::vec(-10.0f64..10.0, 4),
            e2 in prop::collection::vec(-10.0f64..10.0, 4),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let m = model(&theta, &phi, 1.0);
            let comb = |u: &[f64], v: &[f64]| -> Vec<f64> {
                u.iter().zip(v).map(|(x, y)| a * x + b * y).collect()
            };
            let lhs = predict_one_step(&m, &comb(&h1, &h2), &comb(&e1, &e2)).unwrap();
            let rhs = a * predict_one_step(&m, &h1, &e1).unwrap()
                + b * predict_one_step(&m, &h2, &e2).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }

        #[test]
        fn stationarity_agrees_with_companion_roots(
            theta in prop::collection::vec(-1.5f64..1.5, 1..5),
        ) {
            let m = model(&theta, &[], 1.0);
            let moduli = m.ar_root_moduli();
            let min = moduli.iter().cloned().fold(f64::INFINITY, f64::min);
            // skip draws too close to the boundary for either route to be decisive
            prop_assume!((min - 1.0).abs() > 1e-6);
            prop_assert_eq!(m.is_stationary(), min > 1.0);
        }
    }
}
