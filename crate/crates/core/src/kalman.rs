//! Linear Kalman filter.
//!
//! State and measurement model:
//!
//! ```text
//! x_k = A·x_{k−1} + B·u_k + w_k,   w_k ~ N(0, Q)
//! z_k = H·x_k + v_k,               v_k ~ N(0, R)
//! ```
//!
//! Each step runs the time update (`x̂⁻ = A·x̂ + B·u`, `P⁻ = A·P·Aᵀ + Q`)
//! followed by the measurement update (`K = P⁻Hᵀ(HP⁻Hᵀ + R)⁻¹`,
//! `x̂ = x̂⁻ + K(z − Hx̂⁻)`, `P = (I − KH)P⁻`). Covariances are
//! re-symmetrized after both updates and the gain is obtained from a
//! Cholesky solve on the innovation covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;

fn dims(m: &DMatrix<f64>) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    m.is_square() && (m - m.transpose()).amax() <= SYMMETRY_TOL * scale
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// System matrices `A`, `B`, `H`, `Q`, `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: Option<DMatrix<f64>>,
    h: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl StateSpaceModel {
    /// Validates dimensions, `Q` symmetric PSD and `R` symmetric PD.
    pub fn new(
        a: DMatrix<f64>,
        b: Option<DMatrix<f64>>,
        h: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::Dimension(format!("A must be square and nonempty, got {}", dims(&a))));
        }
        if let Some(b) = &b {
            if b.nrows() != n {
                return Err(Error::Dimension(format!("B must have {n} rows, got {}", dims(b))));
            }
        }
        let k = h.nrows();
        if k == 0 || h.ncols() != n {
            return Err(Error::Dimension(format!("H must be k x {n}, got {}", dims(&h))));
        }
        if q.shape() != (n, n) {
            return Err(Error::Dimension(format!("Q must be {n}x{n}, got {}", dims(&q))));
        }
        if r.shape() != (k, k) {
            return Err(Error::Dimension(format!("R must be {k}x{k}, got {}", dims(&r))));
        }
        for (name, m) in [("A", &a), ("H", &h), ("Q", &q), ("R", &r)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("{name} has non-finite entries")));
            }
        }
        if !is_symmetric(&q) || min_eigenvalue(&q) < -PSD_TOL {
            return Err(Error::invalid("Q must be symmetric positive semidefinite"));
        }
        if !is_symmetric(&r) || symmetrize(&r).cholesky().is_none() {
            return Err(Error::invalid("R must be symmetric positive definite"));
        }
        Ok(Self { a, b, h, q, r })
    }

    /// Scalar model with the given coefficients.
    pub fn scalar(a: f64, h: f64, q: f64, r: f64) -> Result<Self> {
        let m = |v| DMatrix::from_element(1, 1, v);
        Self::new(m(a), None, m(h), m(q), m(r))
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> Option<&DMatrix<f64>> {
        self.b.as_ref()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    fn scalar_coefficients(&self) -> Option<(f64, f64, f64, f64)> {
        (self.state_dim() == 1 && self.obs_dim() == 1)
            .then(|| (self.a[(0, 0)], self.h[(0, 0)], self.q[(0, 0)], self.r[(0, 0)]))
    }
}

/// State estimate `x̂`, its error covariance `P` and the step index.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x_hat: DVector<f64>,
    pub p: DMatrix<f64>,
    pub k: u64,
}

impl KalmanState {
    pub fn new(x_hat: DVector<f64>, p: DMatrix<f64>) -> Result<Self> {
        if p.shape() != (x_hat.len(), x_hat.len()) {
            return Err(Error::Dimension(format!(
                "P must be {n}x{n} for a {n}-state, got {}",
                dims(&p),
                n = x_hat.len()
            )));
        }
        if !is_symmetric(&p) || min_eigenvalue(&p) < -PSD_TOL {
            return Err(Error::invalid("P must be symmetric positive semidefinite"));
        }
        Ok(Self { x_hat, p, k: 0 })
    }

    pub fn scalar(x_hat: f64, p: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, x_hat), DMatrix::from_element(1, 1, p))
    }

    fn check_against(&self, model: &StateSpaceModel) -> Result<()> {
        let n = model.state_dim();
        if self.x_hat.len() != n || self.p.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "state of dimension {} does not fit a {n}-state model",
                self.x_hat.len()
            )));
        }
        Ok(())
    }
}

/// Projects the state and covariance one step ahead.
///
/// `u` is the control input; it must be given exactly when the model has a
/// `B` matrix.
pub fn time_update(
    state: &KalmanState,
    model: &StateSpaceModel,
    u: Option<&DVector<f64>>,
) -> Result<KalmanState> {
    state.check_against(model)?;
    let mut x_hat = &model.a * &state.x_hat;
    match (model.b.as_ref(), u) {
        (Some(b), Some(u)) => {
            if u.len() != b.ncols() {
                return Err(Error::Dimension(format!(
                    "control vector of length {} does not match B {}",
                    u.len(),
                    dims(b)
                )));
            }
            x_hat += b * u;
        }
        (None, None) => {}
        (None, Some(_)) => return Err(Error::Dimension("control given but model has no B".into())),
        (Some(_), None) => return Err(Error::Dimension("model has B but no control given".into())),
    }
    let p = &model.a * &state.p * model.a.transpose() + &model.q;
    Ok(KalmanState {
        x_hat,
        p: symmetrize(&p),
        k: state.k + 1,
    })
}

/// Kalman gain for a prior state.
pub fn gain(prior: &KalmanState, model: &StateSpaceModel) -> Result<DMatrix<f64>> {
    prior.check_against(model)?;
    let hp = &model.h * &prior.p;
    let s = symmetrize(&(&hp * model.h.transpose() + &model.r));
    let chol = s
        .cholesky()
        .ok_or_else(|| Error::Singular("innovation covariance is not positive definite".into()))?;
    // S is symmetric, so K = (S⁻¹·H·P⁻)ᵀ
    Ok(chol.solve(&hp).transpose())
}

fn correct(
    prior: &KalmanState,
    z: &DVector<f64>,
    model: &StateSpaceModel,
) -> Result<(KalmanState, DMatrix<f64>)> {
    if z.len() != model.obs_dim() {
        return Err(Error::Dimension(format!(
            "measurement of length {} for a {}-dimensional observation",
            z.len(),
            model.obs_dim()
        )));
    }
    let k_gain = gain(prior, model)?;
    let residual = z - &model.h * &prior.x_hat;
    let x_hat = &prior.x_hat + &k_gain * residual;
    let n = model.state_dim();
    let p = (DMatrix::identity(n, n) - &k_gain * &model.h) * &prior.p;
    Ok((
        KalmanState {
            x_hat,
            p: symmetrize(&p),
            k: prior.k,
        },
        k_gain,
    ))
}

/// Corrects a prior state with measurement `z`.
pub fn measurement_update(
    prior: &KalmanState,
    z: &DVector<f64>,
    model: &StateSpaceModel,
) -> Result<KalmanState> {
    correct(prior, z, model).map(|(state, _)| state)
}

/// Per-step record of a filter run over a scalar series.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTrace {
    state_dim: usize,
    /// `H·x̂⁻` before each measurement is seen.
    pub predictions: Vec<f64>,
    // gains: state_dim per step; covariances: state_dim² per step, column-major
    gains: Vec<f64>,
    covariances: Vec<f64>,
    /// State after the last measurement update.
    pub final_state: KalmanState,
}

impl PredictionTrace {
    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    /// Gain `K_k` used at step `k`.
    pub fn gain(&self, k: usize) -> DVector<f64> {
        let n = self.state_dim;
        DVector::from_column_slice(&self.gains[k * n..(k + 1) * n])
    }

    /// Posterior covariance after step `k`.
    pub fn covariance(&self, k: usize) -> DMatrix<f64> {
        let n2 = self.state_dim * self.state_dim;
        DMatrix::from_column_slice(self.state_dim, self.state_dim, &self.covariances[k * n2..(k + 1) * n2])
    }

    /// First gain component at every step.
    pub fn scalar_gains(&self) -> Vec<f64> {
        self.gains.iter().step_by(self.state_dim).copied().collect()
    }
}

/// Rolling one-step-ahead prediction over a scalar measurement series.
///
/// For each `z_k` the time update produces the prediction `H·x̂⁻`, then the
/// measurement update folds `z_k` in. Only the current state is carried
/// between steps.
pub fn predict_series(
    model: &StateSpaceModel,
    series: &[f64],
    init: &KalmanState,
) -> Result<PredictionTrace> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    if model.obs_dim() != 1 {
        return Err(Error::Dimension(format!(
            "scalar series needs a 1-dimensional observation, model has {}",
            model.obs_dim()
        )));
    }
    if model.b.is_some() {
        return Err(Error::Dimension("series prediction runs without control input".into()));
    }
    init.check_against(model)?;
    match model.scalar_coefficients() {
        Some(coeffs) => Ok(predict_scalar(coeffs, series, init)),
        None => predict_general(model, series, init),
    }
}

// Same recursion as the matrix path, specialized to 1x1 to skip allocation.
// The covariance recursion does not depend on the data: once P maps to itself
// bitwise, every later step would recompute the same gain, so it is reused.
fn predict_scalar(
    (a, h, q, r): (f64, f64, f64, f64),
    series: &[f64],
    init: &KalmanState,
) -> PredictionTrace {
    let mut x = init.x_hat[0];
    let mut p = init.p[(0, 0)];
    let mut predictions = Vec::with_capacity(series.len());
    let mut gains = Vec::with_capacity(series.len());
    let mut covariances = Vec::with_capacity(series.len());
    let mut settled = false;
    let mut k = 0.0;
    for &z in series {
        let x_prior = a * x;
        let pred = h * x_prior;
        if !settled {
            let p_prior = a * p * a + q;
            k = p_prior * h / (h * p_prior * h + r);
            let next = (1.0 - k * h) * p_prior;
            settled = next.to_bits() == p.to_bits();
            p = next;
        }
        x = x_prior + k * (z - pred);
        predictions.push(pred);
        gains.push(k);
        covariances.push(p);
    }
    PredictionTrace {
        state_dim: 1,
        predictions,
        gains,
        covariances,
        final_state: KalmanState {
            x_hat: DVector::from_element(1, x),
            p: DMatrix::from_element(1, 1, p),
            k: init.k + series.len() as u64,
        },
    }
}

fn predict_general(
    model: &StateSpaceModel,
    series: &[f64],
    init: &KalmanState,
) -> Result<PredictionTrace> {
    let n = model.state_dim();
    let mut state = init.clone();
    let mut predictions = Vec::with_capacity(series.len());
    let mut gains = Vec::with_capacity(series.len() * n);
    let mut covariances = Vec::with_capacity(series.len() * n * n);
    for &z in series {
        let prior = time_update(&state, model, None)?;
        predictions.push((&model.h * &prior.x_hat)[0]);
        let (posterior, k_gain) = correct(&prior, &DVector::from_element(1, z), model)?;
        gains.extend(k_gain.iter());
        covariances.extend(posterior.p.iter());
        state = posterior;
    }
    Ok(PredictionTrace {
        state_dim: n,
        predictions,
        gains,
        covariances,
        final_state: state,
    })
}

/// Scalar random-walk-plus-noise model (`A = H = 1`, no control) and its
/// initial state: `x̂₀` is `first` (or 0), `P₀ = 1`.
pub fn default_local_level(
    q: f64,
    r: f64,
    first: Option<f64>,
) -> Result<(StateSpaceModel, KalmanState)> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::invalid(format!("process variance must be >= 0, got {q}")));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("measurement variance must be > 0, got {r}")));
    }
    let model = StateSpaceModel::scalar(1.0, 1.0, q, r)?;
    let init = KalmanState::scalar(first.unwrap_or(0.0), 1.0)?;
    Ok((model, init))
}

/// Fixed point of the covariance recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub prior_covariance: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// `H·P⁻·Hᵀ + R`
    pub innovation_covariance: DMatrix<f64>,
    pub iterations: usize,
}

/// Iterates the time and measurement covariance updates from `P = I` until
/// the prior covariance changes by less than `tol` (max-abs).
pub fn steady_state(model: &StateSpaceModel, tol: f64, max_iter: usize) -> Result<SteadyState> {
    let n = model.state_dim();
    let mut state = KalmanState::new(DVector::zeros(n), DMatrix::identity(n, n))?;
    let mut last_prior: Option<DMatrix<f64>> = None;
    for it in 1..=max_iter {
        let prior = time_update(&state, model, None)?;
        if let Some(prev) = &last_prior {
            if (&prior.p - prev).amax() < tol {
                let gain = gain(&prior, model)?;
                let innovation_covariance = &model.h * &prior.p * model.h.transpose() + &model.r;
                return Ok(SteadyState {
                    prior_covariance: prior.p,
                    gain,
                    innovation_covariance,
                    iterations: it,
                });
            }
        }
        last_prior = Some(prior.p.clone());
        let zero = DVector::zeros(model.obs_dim());
        state = measurement_update(&prior, &zero, model)?;
    }
    Err(Error::invalid(format!(
        "covariance recursion did not settle within {max_iter} iterations"
    )))
}
