mod common;

use common::*;
use gnss_fgo_core::ekf::{ekf_predict, ekf_update, FilterState, Measurement};
use gnss_fgo_core::models::{prior_factor, pseudorange_factor, MotionModel};
use gnss_fgo_core::sim::{generate, to_graph, GraphOptions, Scenario, ScenarioConfig};
use gnss_fgo_core::solver::gauss_newton;
use gnss_fgo_core::{EpochState, FactorGraph, RobustKernel, SolverOptions, Values, VariableKey};
use nalgebra::{DMatrix, DVector, Vector3};

fn is_spd(p: &DMatrix<f64>) -> bool {
    p.clone().cholesky().is_some()
}

fn asymmetry(p: &DMatrix<f64>) -> f64 {
    (p - p.transpose()).amax()
}

#[test]
fn long_prediction_keeps_covariance_symmetric() {
    let model = MotionModel::random_walk([0.3, 1.7, 0.01, 2.5, 1e-3], 0.37).unwrap();
    let p0 = DMatrix::from_fn(5, 5, |i, j| if i == j { 3.0 + i as f64 } else { 0.3 / (1.0 + (i + j) as f64) });
    let mut state = FilterState::new(EpochState::default(), p0).unwrap();
    state.augment_ambiguity("G01".into(), 12.0, 4.0);
    for _ in 0..1000 {
        state = ekf_predict(&state, &model).unwrap();
        assert!(asymmetry(&state.covariance) <= 1e-12 * state.covariance.amax());
    }
    assert!(is_spd(&state.covariance));
    assert_eq!(state.mean, {
        let mut m = EpochState::default();
        m.ambiguities.insert("G01".into(), 12.0);
        m
    });
}

fn filter_prior(opts: &GraphOptions, scenario: &Scenario) -> FilterState {
    let initial = opts.initial_states(scenario, scenario.config.as_ref().unwrap().rng_seed).swap_remove(0);
    let p = opts.prior_position_sigma.powi(2);
    let c = opts.prior_clock_sigma.powi(2);
    let z = opts.prior_tropo_sigma.powi(2);
    FilterState::new(initial, DMatrix::from_diagonal(&DVector::from_vec(vec![p, p, p, c, z]))).unwrap()
}

/// Runs the filter over `scenario` and returns the final state.
fn run_filter(scenario: &Scenario, opts: &GraphOptions, iterations: usize) -> FilterState {
    let model = opts.motion_model(scenario).unwrap();
    let (code, phase) = opts.measurement_sigmas(scenario);
    let mut state = filter_prior(opts, scenario);
    for (k, epoch) in scenario.observations.iter().enumerate() {
        if k > 0 {
            state = ekf_predict(&state, &model).unwrap();
        }
        let mut ms = Vec::new();
        for obs in epoch {
            ms.push(Measurement::code(obs.clone(), code));
            if opts.use_carrier_phase && obs.carrier_phase_range.is_some() {
                ms.push(Measurement::phase(obs.clone(), phase));
            }
        }
        state = ekf_update(&state, &ms, iterations, 1e-10).unwrap();
        assert!(is_spd(&state.covariance), "epoch {k}");
        assert!(asymmetry(&state.covariance) <= 1e-9 * state.covariance.amax(), "epoch {k}");
    }
    state
}

#[test]
fn joseph_updates_stay_positive_definite() {
    let scenario = generate(&ScenarioConfig {
        carrier_phase: true,
        n_epochs: 20,
        rng_seed: 12,
        ..ScenarioConfig::default()
    })
    .unwrap();
    for iterations in [1, 5] {
        let last = run_filter(&scenario, &GraphOptions::default(), iterations);
        assert_eq!(last.mean.ambiguities.len(), 8);
    }
}

#[test]
fn iterated_update_is_gauss_newton_on_one_epoch() {
    let truth = EpochState::new(Vector3::new(3.0, -2.0, 1.0), 40.0, 2.3);
    let prior_mean = EpochState::new(Vector3::new(250.0, -180.0, 90.0), -60.0, 2.0);
    let p0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1e4, 1e4, 1e4, 1e4, 0.25]));
    let noise = [0.4, -0.7, 0.2, 1.1, -0.3, 0.5];
    let obs: Vec<_> = spread_directions()
        .into_iter()
        .zip(noise)
        .enumerate()
        .map(|(i, (d, n))| observation(&truth, &format!("G{i:02}"), d, n))
        .collect();
    let prior = FilterState::new(prior_mean.clone(), p0.clone()).unwrap();
    let ms: Vec<_> = obs.iter().map(|o| Measurement::code(o.clone(), 0.8)).collect();
    let iekf = ekf_update(&prior, &ms, 25, 1e-10).unwrap();
    let ekf = ekf_update(&prior, &ms, 1, 1e-10).unwrap();

    let key = VariableKey::epoch_state(0);
    let mut g = FactorGraph::new();
    g.add_variable(key.clone(), prior_mean.clone()).unwrap();
    g.add_factor(prior_factor(key.clone(), prior_mean.clone(), p0).unwrap()).unwrap();
    for o in obs {
        g.add_factor(pseudorange_factor(key.clone(), o, 0.8, RobustKernel::L2).unwrap())
            .unwrap();
    }
    let init: Values = [(key, prior_mean.into())].into_iter().collect();
    let gn = gauss_newton(&g, &init, &SolverOptions::default(), None).unwrap();
    let gn_pos = gn.estimate.epoch(0).unwrap().position;
    let gap = (iekf.mean.position - gn_pos).norm();
    assert!(gap < 1e-8, "IEKF vs GN {gap:e}");
    let single = (ekf.mean.position - gn_pos).norm();
    println!("single-iteration EKF position offset from the converged solution: {single:.3e} m");
    assert!(single > gap);
}

#[test]
fn filter_final_epoch_agrees_with_batch() {
    let scenario = generate(&ScenarioConfig {
        n_epochs: 20,
        rng_seed: 5,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let opts = GraphOptions::default();
    let build = to_graph(&scenario, &opts).unwrap();
    let batch = gauss_newton(&build.graph, &build.initial, &SolverOptions::default(), None).unwrap();
    let last = batch.estimate.epoch(19).unwrap();
    let filtered = run_filter(&scenario, &opts, 10);
    let diff = (filtered.mean.to_vector() - last.to_vector()).amax();
    println!("filter vs batch final epoch: {diff:.3e}");
    assert!(diff < 1e-6, "{diff:e}");
}
