//! Extended Kalman filter baseline over the same GNSS models.
//!
//! [`ekf_update`] with one iteration is the standard EKF; with more it
//! relinearizes about each iterate (IEKF), which is Gauss-Newton on the
//! single-epoch problem "prior + measurements". Covariance updates use the
//! Joseph form.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::key::{SatId, VariableKey};
use crate::models::{self, MotionModel, SatelliteObservation};
use crate::state::{EpochState, CORE_DIM};
use crate::{Error, Result};

/// Variance given to an ambiguity when a satellite's phase is first seen.
pub const AMBIGUITY_INIT_VARIANCE: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub mean: EpochState,
    pub covariance: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Code,
    Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub obs: SatelliteObservation,
    pub sigma: f64,
    pub observable: Observable,
}

impl Measurement {
    pub fn code(obs: SatelliteObservation, sigma: f64) -> Self {
        Measurement {
            obs,
            sigma,
            observable: Observable::Code,
        }
    }

    pub fn phase(obs: SatelliteObservation, sigma: f64) -> Self {
        Measurement {
            obs,
            sigma,
            observable: Observable::Phase,
        }
    }
}

impl FilterState {
    pub fn new(mean: EpochState, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.shape() != (mean.dim(), mean.dim()) {
            return Err(Error::BadNoiseModel("covariance does not match state dimension"));
        }
        crate::noise::Gaussian::new(covariance.clone())?;
        Ok(FilterState { mean, covariance })
    }

    /// Adds an ambiguity state for `sat` with the given value and variance.
    pub fn augment_ambiguity(&mut self, sat: SatId, value: f64, variance: f64) {
        if self.mean.ambiguities.contains_key(&sat) {
            return;
        }
        self.mean.ambiguities.insert(sat.clone(), value);
        let at = self.mean.ambiguity_index(&sat).expect("just inserted");
        let n = self.covariance.nrows();
        let mut p = DMatrix::zeros(n + 1, n + 1);
        for i in 0..=n {
            for j in 0..=n {
                if i == at || j == at {
                    continue;
                }
                let si = if i > at { i - 1 } else { i };
                let sj = if j > at { j - 1 } else { j };
                p[(i, j)] = self.covariance[(si, sj)];
            }
        }
        p[(at, at)] = variance;
        self.covariance = p;
    }
}

/// Random-walk (or known-velocity) propagation: `P ← P + Q·dt`.
pub fn ekf_predict(state: &FilterState, model: &MotionModel) -> Result<FilterState> {
    model.validate()?;
    let mut covariance = state.covariance.clone();
    let q = &model.process_noise * model.dt;
    let mut core = covariance.view_mut((0, 0), (CORE_DIM, CORE_DIM));
    core += q;
    let amb_var = model.ambiguity_sigma * model.ambiguity_sigma;
    for i in CORE_DIM..covariance.nrows() {
        covariance[(i, i)] += amb_var;
    }
    symmetrize(&mut covariance);
    Ok(FilterState {
        mean: model.predict(&state.mean),
        covariance,
    })
}

fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}

/// Innovation `z − h(x)` and measurement Jacobian `H = ∂h/∂x` at `x`.
fn linearize(state: &EpochState, measurements: &[Measurement]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let key = VariableKey::epoch_state(0);
    let mut innovation = DVector::zeros(measurements.len());
    let mut h = DMatrix::zeros(measurements.len(), state.dim());
    for (i, m) in measurements.iter().enumerate() {
        let phase = m.observable == Observable::Phase;
        let (error, row) = models::measurement_error(state, &m.obs, phase, &key, true)?;
        innovation[i] = error;
        for (j, v) in row.expect("requested").into_iter().enumerate() {
            h[(i, j)] = -v;
        }
    }
    Ok((innovation, h))
}

/// Measurement update; `iterations > 1` relinearizes (IEKF) until the
/// iterate moves less than `step_tol`.
pub fn ekf_update(
    state: &FilterState,
    measurements: &[Measurement],
    iterations: usize,
    step_tol: f64,
) -> Result<FilterState> {
    if measurements.is_empty() {
        return Err(Error::InvalidConfig("update needs at least one measurement"));
    }
    if iterations < 1 {
        return Err(Error::InvalidConfig("iterations must be at least 1"));
    }
    if measurements.iter().any(|m| !(m.sigma > 0.0)) {
        return Err(Error::BadNoiseModel("measurement sigma must be positive"));
    }
    let mut prior = state.clone();
    for m in measurements.iter().filter(|m| m.observable == Observable::Phase) {
        let phase = m
            .obs
            .carrier_phase_range
            .ok_or_else(|| Error::MissingObservable(m.obs.sat_id.clone()))?;
        if !prior.mean.ambiguities.contains_key(&m.obs.sat_id) {
            let code = models::pseudorange_predict(&prior.mean, &m.obs)?;
            prior.augment_ambiguity(m.obs.sat_id.clone(), phase - code, AMBIGUITY_INIT_VARIANCE);
        }
    }

    let n = prior.mean.dim();
    let r = DMatrix::from_diagonal(&DVector::from_iterator(
        measurements.len(),
        measurements.iter().map(|m| m.sigma * m.sigma),
    ));
    let p = &prior.covariance;
    let x_prior = prior.mean.to_vector();
    let mut current = prior.mean.clone();
    let mut gain_and_h: Option<(DMatrix<f64>, DMatrix<f64>)> = None;

    for _ in 0..iterations {
        let (innovation, h) = linearize(&current, measurements)?;
        let s = &h * p * h.transpose() + &r;
        let s_chol = s.cholesky().ok_or(Error::SingularInnovation)?;
        // K = P Hᵀ S⁻¹
        let k = s_chol.solve(&(&h * p)).transpose();
        let offset = &x_prior - current.to_vector();
        let x_next = &x_prior + &k * (innovation - &h * offset);
        let mut next = prior.mean.clone();
        let step = (&x_next - current.to_vector()).norm();
        let delta: Vec<f64> = (&x_next - &x_prior).iter().copied().collect();
        next.retract(&delta);
        current = next;
        gain_and_h = Some((k, h));
        if step < step_tol {
            break;
        }
    }

    let (k, h) = gain_and_h.expect("at least one iteration");
    let ikh = DMatrix::identity(n, n) - &k * &h;
    let mut covariance = &ikh * p * ikh.transpose() + &k * &r * k.transpose();
    symmetrize(&mut covariance);
    Ok(FilterState {
        mean: current,
        covariance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn predict_adds_process_noise() {
        let s = FilterState::new(EpochState::default(), DMatrix::identity(5, 5)).unwrap();
        let zero = MotionModel::new(models::MotionKind::RandomWalk, DMatrix::zeros(5, 5), 1.0).unwrap();
        assert_eq!(ekf_predict(&s, &zero).unwrap(), s);
        let rw = MotionModel::random_walk([1.0; 5], 1.0).unwrap();
        let p = ekf_predict(&s, &rw).unwrap();
        assert_eq!(p.mean, s.mean);
        assert_eq!(p.covariance[(0, 0)], 2.0);
    }

    #[test]
    fn augment_inserts_row_in_sorted_position() {
        let mut s = FilterState::new(EpochState::default(), DMatrix::identity(5, 5) * 2.0).unwrap();
        s.augment_ambiguity("G09".into(), 1.0, 50.0);
        s.augment_ambiguity("G03".into(), 2.0, 70.0);
        assert_eq!(s.mean.ambiguity_index(&"G03".into()), Some(5));
        assert_eq!(s.covariance[(5, 5)], 70.0);
        assert_eq!(s.covariance[(6, 6)], 50.0);
        assert_eq!(s.covariance[(4, 4)], 2.0);
    }

    #[test]
    fn phase_without_range_is_missing_observable() {
        let s = FilterState::new(EpochState::default(), DMatrix::identity(5, 5)).unwrap();
        let obs = SatelliteObservation::new("G01".into(), Vector3::new(0.0, 0.0, 2e7), 2e7, None, 1.5).unwrap();
        assert_eq!(
            ekf_update(&s, &[Measurement::phase(obs, 1.0)], 1, 1e-10).unwrap_err(),
            Error::MissingObservable("G01".into())
        );
        assert!(ekf_update(&s, &[], 1, 1e-10).is_err());
    }
}
