mod common;

use common::*;
use gnss_fgo_core::models::{between_factor, prior_factor, MotionModel};
use gnss_fgo_core::sim::{generate, to_graph, GraphOptions, ScenarioConfig};
use gnss_fgo_core::solver::gauss_newton;
use gnss_fgo_core::window::{marginalize, EpochBatch, FixedLagSmoother, WindowConfig};
use gnss_fgo_core::{EpochState, Factor, FactorGraph, SolverOptions, Values, VariableKey};
use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};

const SIGMAS: [f64; 5] = [0.8, 1.1, 0.6, 0.5, 0.02];

/// Linear chain: a prior on every epoch (the "measurement") plus random-walk
/// motion constraints.
fn linear_chain(n: u32) -> (Vec<EpochBatch>, FactorGraph, Values) {
    let model = MotionModel::random_walk(SIGMAS, 1.0).unwrap();
    let mut batches = Vec::new();
    let mut graph = FactorGraph::new();
    let mut init = Values::new();
    for e in 0..n {
        let key = VariableKey::epoch_state(e);
        let t = e as f64;
        let mean = EpochState::new(Vector3::new(t.sin() * 3.0, t * 0.5, -t), 20.0 + t.cos(), 2.3 + 0.01 * t);
        let diag = DVector::from_vec(vec![4.0 + t, 2.0, 9.0, 25.0 / (1.0 + t), 0.04]);
        let mut factors = vec![prior_factor(key.clone(), mean, DMatrix::from_diagonal(&diag)).unwrap()];
        if e > 0 {
            factors.push(between_factor(VariableKey::epoch_state(e - 1), key.clone(), model.clone()).unwrap());
        }
        let start = EpochState::default();
        graph.add_variable(key.clone(), start.clone()).unwrap();
        for f in &factors {
            graph.add_factor(f.clone()).unwrap();
        }
        init.insert(key.clone(), start.clone());
        batches.push(EpochBatch {
            epoch: e,
            variables: vec![(key, start.into())],
            factors,
        });
    }
    (batches, graph, init)
}

/// Information matrix `JᵀJ` of the whitened system.
fn information(graph: &FactorGraph, at: &Values) -> DMatrix<f64> {
    let j = graph.linearize(at).unwrap().dense_jacobian();
    j.tr_mul(&j)
}

fn stacked(values: &Values, keys: &[VariableKey]) -> DVector<f64> {
    let parts: Vec<f64> = keys
        .iter()
        .flat_map(|k| values.get(k).unwrap().to_vector().iter().copied().collect::<Vec<_>>())
        .collect();
    DVector::from_vec(parts)
}

#[test]
fn marginal_posterior_matches_schur_complement() {
    let (_, graph, init) = linear_chain(3);
    let full = gauss_newton(&graph, &init, &SolverOptions::default(), None).unwrap();
    let cov = information(&graph, &full.estimate).try_inverse().unwrap();
    let keep = [VariableKey::epoch_state(1), VariableKey::epoch_state(2)];

    let (reduced, prior) = marginalize(&graph, &init, &[VariableKey::epoch_state(0)], None).unwrap();
    assert!(prior.is_some());
    let mut reduced_init = init.clone();
    reduced_init.remove(&VariableKey::epoch_state(0));
    let red = gauss_newton(&reduced, &reduced_init, &SolverOptions::default(), None).unwrap();
    let red_cov = information(&reduced, &red.estimate).try_inverse().unwrap();

    let mean_full = stacked(&full.estimate, &keep);
    let mean_red = stacked(&red.estimate, &keep);
    assert!(rel_err(&mean_red, &mean_full) < 1e-10);
    let block = cov.view((5, 5), (10, 10)).into_owned();
    assert!((&red_cov - &block).norm() / block.norm() < 1e-10);
}

#[test]
fn marginal_information_is_bounded_by_full_marginal() {
    let scenario = generate(&ScenarioConfig {
        n_epochs: 4,
        n_satellites: 6,
        rng_seed: 21,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let build = to_graph(&scenario, &GraphOptions::default()).unwrap();
    let solved = gauss_newton(&build.graph, &build.initial, &SolverOptions::default(), None).unwrap();
    let at = &solved.estimate;

    let (reduced, prior) = marginalize(&build.graph, at, &[VariableKey::epoch_state(0)], None).unwrap();
    let prior = prior.unwrap();
    assert_eq!(prior.keys, vec![VariableKey::epoch_state(1)]);

    // full-graph marginal information of epoch 1
    let cov = information(&build.graph, at).try_inverse().unwrap();
    let full_marginal = cov.view((5, 5), (5, 5)).into_owned().try_inverse().unwrap();
    let from_prior = prior.information();
    let prior_eig = SymmetricEigen::new(from_prior.clone()).eigenvalues;
    assert!(prior_eig.min() > 0.0, "{prior_eig}");
    let gap = SymmetricEigen::new(&full_marginal - &from_prior).eigenvalues;
    assert!(gap.min() >= -1e-9 * full_marginal.norm(), "{gap}");

    // consuming factors and adding the prior keeps the cost at the
    // linearization point, here and at the unsolved initial guess
    let mut reduced_at = at.clone();
    reduced_at.remove(&VariableKey::epoch_state(0));
    let before = build.graph.total_cost(at).unwrap();
    let after = reduced.total_cost(&reduced_at).unwrap();
    assert!((before - after).abs() <= 1e-10 * before.max(1.0), "{before} vs {after}");

    let (reduced, _) = marginalize(&build.graph, &build.initial, &[VariableKey::epoch_state(0)], None).unwrap();
    let mut reduced_init = build.initial.clone();
    reduced_init.remove(&VariableKey::epoch_state(0));
    let before = build.graph.total_cost(&build.initial).unwrap();
    let after = reduced.total_cost(&reduced_init).unwrap();
    assert!((before - after).abs() <= 1e-10 * before.max(1.0), "{before} vs {after}");
}

fn prefix_graph(batches: &[EpochBatch], upto: usize) -> (FactorGraph, Values) {
    let mut graph = FactorGraph::new();
    let mut init = Values::new();
    for b in &batches[..=upto] {
        for (k, v) in &b.variables {
            graph.add_variable(k.clone(), v.clone()).unwrap();
            init.insert(k.clone(), v.clone());
        }
    }
    for b in &batches[..=upto] {
        for f in &b.factors {
            graph.add_factor(Factor::clone(f)).unwrap();
        }
    }
    (graph, init)
}

#[test]
fn fixed_lag_is_exact_on_linear_chains() {
    let (batches, _, _) = linear_chain(12);
    for lag in [1, 3, 5] {
        let mut smoother = FixedLagSmoother::new(WindowConfig::new(lag)).unwrap();
        for (k, batch) in batches.iter().enumerate() {
            let out = smoother.slide(batch.clone()).unwrap();
            let (graph, init) = prefix_graph(&batches, k);
            let batch_sol = gauss_newton(&graph, &init, &SolverOptions::default(), None).unwrap();
            let newest = batch_sol.estimate.epoch(k as u32).unwrap().to_vector();
            let err = rel_err(&out.state.to_vector(), &newest);
            assert!(err < 1e-9, "lag {lag} epoch {k}: {err}");
        }
    }
}

#[test]
fn window_covering_the_trajectory_is_the_batch_solution() {
    let scenario = generate(&ScenarioConfig {
        n_epochs: 10,
        rng_seed: 4,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let build = to_graph(&scenario, &GraphOptions::default()).unwrap();
    let batch = gauss_newton(&build.graph, &build.initial, &SolverOptions::default(), None).unwrap();
    let mut smoother = FixedLagSmoother::new(WindowConfig::new(10)).unwrap();
    for b in build.epoch_batches() {
        let out = smoother.slide(b).unwrap();
        assert!(out.marginalized.is_none());
    }
    for e in 0..10 {
        let a = smoother.estimate().epoch(e).unwrap().to_vector();
        let b = batch.estimate.epoch(e).unwrap().to_vector();
        assert!((a - b).amax() < 1e-6, "epoch {e}");
    }
}

#[test]
fn short_and_long_windows_both_converge() {
    let scenario = generate(&ScenarioConfig {
        n_epochs: 30,
        rng_seed: 8,
        ..ScenarioConfig::default()
    })
    .unwrap();
    let build = to_graph(&scenario, &GraphOptions::default()).unwrap();
    let mut finals = Vec::new();
    for lag in [5, 20] {
        let mut smoother = FixedLagSmoother::new(WindowConfig::new(lag)).unwrap();
        let mut last = None;
        for b in build.epoch_batches() {
            let out = smoother.slide(b).unwrap();
            assert!(out.report.converged, "lag {lag} epoch {}", out.epoch);
            last = Some(out.state);
        }
        finals.push(last.unwrap().position);
    }
    let diff = (finals[0] - finals[1]).norm();
    println!("final-epoch position difference, lag 5 vs lag 20: {diff:.3e} m");
    assert!(diff.is_finite());
}
