//! GNSS observation and motion models.
//!
//! The observation equation is
//! `ρ = ‖p_sat − p_rx‖ + clock_bias + m(el)·zenith_tropo (+ B_sat for phase)`
//! with the mapping function `m(el) = 1/sin(el)` clamped at 5° elevation.
//! Ionosphere, satellite clock and relativistic terms are not modelled.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use nalgebra::{DMatrix, Vector3};

use crate::factor::{Factor, Model};
use crate::key::{SatId, VariableKey};
use crate::math;
use crate::noise::Gaussian;
use crate::robust::RobustKernel;
use crate::state::{EpochState, Value, CLOCK, CORE_DIM, TROPO};
use crate::{Error, Result};

/// Elevation below which the mapping function stops growing.
pub const MAPPING_ELEVATION_FLOOR: f64 = 5.0 * core::f64::consts::PI / 180.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SatelliteObservation {
    pub sat_id: SatId,
    /// ENU position of the satellite, meters.
    pub sat_position: Vector3<f64>,
    pub pseudorange: f64,
    pub carrier_phase_range: Option<f64>,
    /// Radians in (0, π/2].
    pub elevation: f64,
}

impl SatelliteObservation {
    /// Validating constructor; rejects below-horizon and non-positive ranges.
    pub fn new(
        sat_id: SatId,
        sat_position: Vector3<f64>,
        pseudorange: f64,
        carrier_phase_range: Option<f64>,
        elevation: f64,
    ) -> Result<Self> {
        let obs = SatelliteObservation {
            sat_id,
            sat_position,
            pseudorange,
            carrier_phase_range,
            elevation,
        };
        obs.validate()?;
        Ok(obs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.elevation > 0.0 && self.elevation <= FRAC_PI_2 + 1e-12) {
            return Err(Error::InvalidConfig("elevation must lie in (0, pi/2]"));
        }
        if !(self.pseudorange > 0.0) || !self.pseudorange.is_finite() {
            return Err(Error::InvalidConfig("pseudorange must be positive"));
        }
        Ok(())
    }
}

/// Slant factor for the zenith tropospheric delay.
pub fn mapping_function(elevation: f64) -> f64 {
    1.0 / math::sin(elevation.max(MAPPING_ELEVATION_FLOOR))
}

fn line_of_sight(state: &EpochState, obs: &SatelliteObservation) -> Result<(Vector3<f64>, f64)> {
    let los = obs.sat_position - state.position;
    let range = los.norm();
    if !(range > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    Ok((los, range))
}

/// Modelled pseudorange for `obs` seen from `state`.
pub fn pseudorange_predict(state: &EpochState, obs: &SatelliteObservation) -> Result<f64> {
    let (_, range) = line_of_sight(state, obs)?;
    Ok(range + state.clock_bias + mapping_function(obs.elevation) * state.zenith_tropo)
}

/// Derivative of [`pseudorange_predict`] with respect to
/// `[e, n, u, clock, tropo]`.
pub fn pseudorange_jacobian(state: &EpochState, obs: &SatelliteObservation) -> Result<[f64; 5]> {
    let (los, range) = line_of_sight(state, obs)?;
    let u = -los / range;
    Ok([u.x, u.y, u.z, 1.0, mapping_function(obs.elevation)])
}

/// Modelled carrier-phase range, including the state's ambiguity for the
/// satellite.
pub fn carrier_phase_predict(state: &EpochState, obs: &SatelliteObservation) -> Result<Option<f64>> {
    let code = pseudorange_predict(state, obs)?;
    Ok(state.ambiguities.get(&obs.sat_id).map(|b| code + b))
}

#[derive(Debug, Clone, PartialEq)]
pub enum MotionKind {
    RandomWalk,
    /// Known velocity; the prediction is `x + v·dt` on the position.
    ConstantVelocity { velocity: Vector3<f64> },
}

/// Motion constraint between consecutive epoch states.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionModel {
    pub kind: MotionKind,
    /// Spectral density over `[e, n, u, clock, tropo]`, per second.
    pub process_noise: DMatrix<f64>,
    pub dt: f64,
    /// Per-step standard deviation linking ambiguities of the same satellite.
    pub ambiguity_sigma: f64,
}

pub const DEFAULT_AMBIGUITY_SIGMA: f64 = 1e-3;

impl MotionModel {
    pub fn new(kind: MotionKind, process_noise: DMatrix<f64>, dt: f64) -> Result<Self> {
        let model = MotionModel {
            kind,
            process_noise,
            dt,
            ambiguity_sigma: DEFAULT_AMBIGUITY_SIGMA,
        };
        model.validate()?;
        Ok(model)
    }

    /// Random walk with independent components; `sigmas` are in units per √s.
    pub fn random_walk(sigmas: [f64; 5], dt: f64) -> Result<Self> {
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            5,
            sigmas.iter().map(|s| s * s),
        ));
        Self::new(MotionKind::RandomWalk, q, dt)
    }

    pub fn with_ambiguity_sigma(mut self, sigma: f64) -> Self {
        self.ambiguity_sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig("motion model dt must be positive"));
        }
        if self.process_noise.shape() != (CORE_DIM, CORE_DIM) {
            return Err(Error::BadNoiseModel("process noise must be 5x5"));
        }
        if !(self.ambiguity_sigma > 0.0) {
            return Err(Error::BadNoiseModel("ambiguity sigma must be positive"));
        }
        if self.process_noise.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadNoiseModel("process noise has non-finite entries"));
        }
        Ok(())
    }

    /// Discrete process noise for one step, `Q·dt`; fails unless SPD.
    pub fn step_noise(&self) -> Result<Gaussian> {
        Gaussian::new(&self.process_noise * self.dt)
    }

    /// Deterministic part `f(x)` of the transition.
    pub fn predict(&self, state: &EpochState) -> EpochState {
        let mut next = state.clone();
        if let MotionKind::ConstantVelocity { velocity } = &self.kind {
            next.position += velocity * self.dt;
        }
        next
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::BadNoiseModel("sigma must be positive"))
    }
}

/// Pseudorange measurement factor on one epoch state.
pub fn pseudorange_factor(
    state_key: VariableKey,
    obs: SatelliteObservation,
    sigma: f64,
    kernel: RobustKernel,
) -> Result<Factor> {
    check_sigma(sigma)?;
    obs.validate()?;
    Factor::new(
        Model::Pseudorange { obs },
        alloc::vec![state_key],
        Gaussian::isotropic(1, sigma)?,
        kernel,
    )
}

/// Carrier-phase measurement factor; the satellite's ambiguity lives in the
/// epoch state and is created when the factor is added to a graph.
pub fn carrier_phase_factor(
    state_key: VariableKey,
    obs: SatelliteObservation,
    sigma: f64,
    kernel: RobustKernel,
) -> Result<Factor> {
    check_sigma(sigma)?;
    obs.validate()?;
    if obs.carrier_phase_range.is_none() {
        return Err(Error::MissingObservable(obs.sat_id));
    }
    Factor::new(
        Model::CarrierPhase { obs },
        alloc::vec![state_key],
        Gaussian::isotropic(1, sigma)?,
        kernel,
    )
}

pub fn between_factor(prev: VariableKey, next: VariableKey, model: MotionModel) -> Result<Factor> {
    if next.epoch() != prev.epoch() + 1 {
        return Err(Error::EpochGapError {
            prev: prev.epoch(),
            next: next.epoch(),
        });
    }
    model.validate()?;
    let noise = model.step_noise()?;
    Factor::new(
        Model::Between { motion: model },
        alloc::vec![prev, next],
        noise,
        RobustKernel::L2,
    )
}

/// Prior `mean − x` with the given covariance over `mean`'s tangent.
pub fn prior_factor(key: VariableKey, mean: impl Into<Value>, covariance: DMatrix<f64>) -> Result<Factor> {
    let mean = mean.into();
    if covariance.nrows() != mean.dim() {
        return Err(Error::BadNoiseModel("prior covariance dimension mismatch"));
    }
    let noise = Gaussian::new(covariance)?;
    Factor::new(Model::Prior { mean }, alloc::vec![key], noise, RobustKernel::L2)
}

/// Scalar prior anchoring a switch variable.
pub fn switch_prior_factor(key: VariableKey, mean: f64, sigma: f64) -> Result<Factor> {
    check_sigma(sigma)?;
    Factor::new(
        Model::SwitchPrior { mean },
        alloc::vec![key],
        Gaussian::isotropic(1, sigma)?,
        RobustKernel::L2,
    )
}

/// Links the switches of one satellite across consecutive epochs.
pub fn switch_transition_factor(prev: VariableKey, next: VariableKey, sigma: f64) -> Result<Factor> {
    check_sigma(sigma)?;
    Factor::new(
        Model::SwitchTransition,
        alloc::vec![prev, next],
        Gaussian::isotropic(1, sigma)?,
        RobustKernel::L2,
    )
}

// Raw (unwhitened) error and Jacobian rows of a measurement, over the full
// tangent of `state`.
pub(crate) fn measurement_error(
    state: &EpochState,
    obs: &SatelliteObservation,
    phase: bool,
    key: &VariableKey,
    with_jacobian: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    // z − h = (z − |s|) − (|s − p| − |s|) − clock − m·tropo: the first term
    // does not depend on the state, and the range change is formed without
    // cancellation, so the error is smooth in the state to well below the
    // rounding of a 2·10⁷ m range.
    let (_, range) = line_of_sight(state, obs)?;
    let sat_norm = obs.sat_position.norm();
    let p = &state.position;
    let range_change = (p.norm_squared() - 2.0 * obs.sat_position.dot(p)) / (range + sat_norm);
    let biases = state.clock_bias + mapping_function(obs.elevation) * state.zenith_tropo;
    let (error, amb_index) = if phase {
        let measured = obs
            .carrier_phase_range
            .ok_or_else(|| Error::MissingObservable(obs.sat_id.clone()))?;
        let idx = state
            .ambiguity_index(&obs.sat_id)
            .ok_or_else(|| Error::StateMismatch(key.clone()))?;
        let b = state.ambiguities[&obs.sat_id];
        (((measured - sat_norm) - range_change) - biases - b, Some(idx))
    } else {
        (((obs.pseudorange - sat_norm) - range_change) - biases, None)
    };
    if !with_jacobian {
        return Ok((error, None));
    }
    let h = pseudorange_jacobian(state, obs)?;
    let mut row = alloc::vec![0.0; state.dim()];
    for (dst, src) in row.iter_mut().zip(h.iter()) {
        *dst = -src;
    }
    debug_assert_eq!((CLOCK, TROPO), (3, 4));
    if let Some(i) = amb_index {
        row[i] = -1.0;
    }
    Ok((error, Some(row)))
}
