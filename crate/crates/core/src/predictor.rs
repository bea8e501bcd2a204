//! Two-parameter recursive filter for a relay's energy trend.
//!
//! Each relay keeps only its potential acceleration (the filtered per-slot
//! energy change) and that estimate's variance. From the current energy and
//! the potential acceleration it predicts the energy one step ahead, its
//! "potential energy".
//!
//! One noise constant `eps` serves both as the process noise added to the
//! variance during evolution and as the measurement noise in the blending
//! factor. With that coupling the blending factor settles at
//! `(√5 − 1) / 2` regardless of `eps` or the initial variance.

use thiserror::Error;

/// Default noise constant.
pub const DEFAULT_EPS: f64 = 0.05;

/// Steady-state blending factor, `(√5 − 1) / 2`.
pub const STEADY_BLEND: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PredictorError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("predictor state has not been initialized with a first measurement")]
    Uninitialized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorState {
    /// Potential acceleration, energy units per slot.
    pub a_hat: f64,
    /// Variance of the acceleration estimate.
    pub v: f64,
    eps: f64,
    /// Energy seen at the previous step.
    pub last_energy: f64,
    pub initialized: bool,
}

impl Default for PredictorState {
    fn default() -> Self {
        PredictorState::new(DEFAULT_EPS).expect("default eps is valid")
    }
}

impl PredictorState {
    /// Fresh state with `a_hat = 0` and `v = 0`.
    pub fn new(eps: f64) -> Result<Self, PredictorError> {
        Self::with_prior(eps, 0.0, 0.0)
    }

    pub fn with_prior(eps: f64, a_hat: f64, v: f64) -> Result<Self, PredictorError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(PredictorError::InvalidArgument(format!(
                "eps must be positive and finite, got {eps}"
            )));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(PredictorError::InvalidArgument(format!(
                "variance must be non-negative, got {v}"
            )));
        }
        if !a_hat.is_finite() {
            return Err(PredictorError::InvalidArgument("a_hat must be finite".into()));
        }
        Ok(PredictorState {
            a_hat,
            v,
            eps,
            last_energy: 0.0,
            initialized: false,
        })
    }

    /// A state that has already seen `energy` as its last measurement.
    pub fn primed(eps: f64, energy: f64) -> Result<Self, PredictorError> {
        let mut s = Self::new(eps)?;
        s.last_energy = energy;
        s.initialized = true;
        Ok(s)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

fn check_dt(dt: f64) -> Result<(), PredictorError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(PredictorError::InvalidArgument(format!(
            "dt must be positive, got {dt}"
        )))
    }
}

/// Measured acceleration `(e_now − e_prev) / dt`; negative while draining.
pub fn measure_acceleration(e_now: f64, e_prev: f64, dt: f64) -> Result<f64, PredictorError> {
    check_dt(dt)?;
    Ok((e_now - e_prev) / dt)
}

/// Evolves the state one step: returns `(a_hat⁻, v⁻)`.
pub fn evolve(state: &PredictorState) -> Result<(f64, f64), PredictorError> {
    if !state.initialized {
        return Err(PredictorError::Uninitialized);
    }
    Ok((state.a_hat, state.v + state.eps))
}

/// `v⁻ / (v⁻ + eps)`, in `[0, 1)`.
pub fn blending_factor(v_minus: f64, eps: f64) -> Result<f64, PredictorError> {
    if !(v_minus >= 0.0) {
        return Err(PredictorError::InvalidArgument(format!(
            "v_minus must be non-negative, got {v_minus}"
        )));
    }
    if !(eps > 0.0) {
        return Err(PredictorError::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    Ok(v_minus / (v_minus + eps))
}

/// Blends a measured acceleration into the state.
pub fn update(state: &PredictorState, a_measured: f64) -> Result<PredictorState, PredictorError> {
    let (a_minus, v_minus) = evolve(state)?;
    let blend = blending_factor(v_minus, state.eps)?;
    Ok(PredictorState {
        a_hat: a_minus + blend * (a_measured - a_minus),
        v: (1.0 - blend) * v_minus,
        ..*state
    })
}

/// Energy expected one step of length `dt` ahead, never below zero.
pub fn predict_energy(e_now: f64, a_hat: f64, dt: f64) -> Result<f64, PredictorError> {
    check_dt(dt)?;
    Ok((e_now + a_hat * dt).max(0.0))
}

/// Feeds one energy measurement and returns the new state together with the
/// predicted energy for the next step.
///
/// The first measurement only records the energy; its prediction is the
/// energy itself since no trend is known yet.
pub fn step(
    state: &PredictorState,
    e_now: f64,
    dt: f64,
) -> Result<(PredictorState, f64), PredictorError> {
    check_dt(dt)?;
    if !state.initialized {
        let next = PredictorState {
            last_energy: e_now,
            initialized: true,
            ..*state
        };
        return Ok((next, e_now.max(0.0)));
    }
    let accel = measure_acceleration(e_now, state.last_energy, dt)?;
    let mut next = update(state, accel)?;
    next.last_energy = e_now;
    let predicted = predict_energy(e_now, next.a_hat, dt)?;
    Ok((next, predicted))
}

impl PredictorState {
    /// In-place form of [`step`].
    pub fn observe(&mut self, e_now: f64, dt: f64) -> Result<f64, PredictorError> {
        let (next, predicted) = step(self, e_now, dt)?;
        *self = next;
        Ok(predicted)
    }
}
