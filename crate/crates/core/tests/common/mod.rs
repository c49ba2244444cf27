#![allow(dead_code)]

use gnss_fgo_core::models::SatelliteObservation;
use gnss_fgo_core::{EpochState, SatId, VariableKey};
use nalgebra::{DMatrix, DVector, Vector3};

/// Scalar variables reuse switch keys; `tag` keeps them distinct.
pub fn scalar_key(epoch: u32, tag: &str) -> VariableKey {
    VariableKey::switch(epoch, SatId::new(tag))
}

pub fn var(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// Satellite at `direction` (ENU, normalized internally) on a 20,200 km shell.
pub fn observation(state: &EpochState, sat: &str, direction: Vector3<f64>, noise: f64) -> SatelliteObservation {
    let u = direction.normalize();
    let sat_position = u * 20_200_000.0;
    let elevation = u.z.asin();
    let mut obs = SatelliteObservation {
        sat_id: SatId::new(sat),
        sat_position,
        pseudorange: 1.0,
        carrier_phase_range: None,
        elevation,
    };
    obs.pseudorange = gnss_fgo_core::models::pseudorange_predict(state, &obs).unwrap() + noise;
    obs
}

/// Six well-spread directions.
pub fn spread_directions() -> Vec<Vector3<f64>> {
    vec![
        Vector3::new(0.1, 0.2, 1.0),
        Vector3::new(1.0, 0.0, 0.6),
        Vector3::new(-1.0, 0.3, 0.5),
        Vector3::new(0.2, 1.0, 0.8),
        Vector3::new(-0.3, -1.0, 0.4),
        Vector3::new(0.7, -0.7, 0.3),
    ]
}

/// Dense weighted least squares `argmin Σ‖A x − b‖²` via the normal equations.
pub fn dense_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let h = a.tr_mul(a);
    let g = a.tr_mul(b);
    h.cholesky().expect("SPD normal matrix").solve(&g)
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Golden-section minimization of a unimodal function on [lo, hi].
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-12 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Grid search followed by golden-section refinement around the best node.
pub fn grid_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, nodes: usize) -> f64 {
    let step = (hi - lo) / nodes as f64;
    let best = (0..=nodes)
        .map(|i| lo + step * i as f64)
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    golden_min(&f, (best - step).max(lo), (best + step).min(hi))
}
