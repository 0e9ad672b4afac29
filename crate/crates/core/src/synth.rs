//! Seeded synthetic datasets.
//!
//! All generators draw from [`GaussianSource`], so a given spec and seed
//! always yields bitwise-identical output.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kalman::StateSpaceModel;
use crate::rng::GaussianSource;
use crate::series::TimeSeries;

/// Sinusoidal packet rate with additive Gaussian noise, clipped at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeasonalSpec {
    pub n: usize,
    pub period: usize,
    pub amplitude: f64,
    pub base_rate: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SeasonalSpec {
    fn default() -> Self {
        Self {
            n: 5000,
            period: 60,
            amplitude: 20.0,
            base_rate: 50.0,
            noise_std: 5.0,
            seed: 42,
        }
    }
}

/// `max(0, base + amplitude·sin(2πi/period) + η_i)` with `η_i ~ N(0, noise_std²)`.
pub fn gen_seasonal_traffic(spec: &SeasonalSpec) -> Result<TimeSeries> {
    if spec.period < 2 {
        return Err(Error::invalid(format!("period must be >= 2, got {}", spec.period)));
    }
    if spec.n < spec.period {
        return Err(Error::invalid(format!(
            "length {} is shorter than one period ({})",
            spec.n, spec.period
        )));
    }
    if !(spec.base_rate >= 0.0) || !(spec.noise_std >= 0.0) || !spec.amplitude.is_finite() {
        return Err(Error::invalid("base rate and noise std must be >= 0, amplitude finite"));
    }
    let mut noise = GaussianSource::new(spec.seed);
    let values = (0..spec.n)
        .map(|i| {
            let phase = TAU * i as f64 / spec.period as f64;
            let eta = noise.normal(spec.noise_std);
            (spec.base_rate + spec.amplitude * phase.sin() + eta).max(0.0)
        })
        .collect();
    TimeSeries::from_values(values)
}

/// State and measurement trajectories of a simulated linear-Gaussian system.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianTrace {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
}

impl LinearGaussianTrace {
    /// One state component as a series.
    pub fn state_series(&self, component: usize) -> Result<TimeSeries> {
        component_series(&self.states, component)
    }

    /// One measurement component as a series.
    pub fn measurement_series(&self, component: usize) -> Result<TimeSeries> {
        component_series(&self.measurements, component)
    }
}

fn component_series(rows: &[DVector<f64>], component: usize) -> Result<TimeSeries> {
    let values = rows
        .iter()
        .map(|v| {
            v.get(component)
                .copied()
                .ok_or_else(|| Error::Dimension(format!("no component {component}")))
        })
        .collect::<Result<Vec<_>>>()?;
    TimeSeries::from_values(values)
}

/// Symmetric square root of a PSD covariance via its eigendecomposition,
/// so singular matrices (including zero) are fine.
fn covariance_root(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = (cov + cov.transpose()).scale(0.5).symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose()
}

fn draw(noise: &mut GaussianSource, root: &DMatrix<f64>) -> DVector<f64> {
    let white = DVector::from_fn(root.ncols(), |_, _| noise.standard_normal());
    root * white
}

/// Simulates `x_k = A·x_{k−1} + w_k`, `z_k = H·x_k + v_k` for `k = 1..=n`
/// from `x_0 = init`. The control term is not driven.
pub fn gen_linear_gaussian(
    model: &StateSpaceModel,
    init: &DVector<f64>,
    n: usize,
    seed: u64,
) -> Result<LinearGaussianTrace> {
    if n == 0 {
        return Err(Error::invalid("trace length must be >= 1"));
    }
    if init.len() != model.state_dim() {
        return Err(Error::Dimension(format!(
            "initial state of length {} for a {}-state model",
            init.len(),
            model.state_dim()
        )));
    }
    let q_root = covariance_root(model.q());
    let r_root = covariance_root(model.r());
    let mut noise = GaussianSource::new(seed);
    let mut x = init.clone();
    let mut states = Vec::with_capacity(n);
    let mut measurements = Vec::with_capacity(n);
    for _ in 0..n {
        x = model.a() * &x + draw(&mut noise, &q_root);
        let z = model.h() * &x + draw(&mut noise, &r_root);
        states.push(x.clone());
        measurements.push(z);
    }
    Ok(LinearGaussianTrace {
        states,
        measurements,
    })
}
