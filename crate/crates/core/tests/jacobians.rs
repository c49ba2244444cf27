mod common;

use common::*;
use gnss_fgo_core::models::{
    between_factor, carrier_phase_factor, prior_factor, pseudorange_factor, MotionModel, SatelliteObservation,
};
use gnss_fgo_core::robust::{augment_with_switches, SwitchConfig};
use gnss_fgo_core::{EpochState, Factor, FactorGraph, RobustKernel, Values, VariableKey};
use nalgebra::{DMatrix, DVector, Vector3};
use proptest::prelude::*;

/// Largest entry-wise discrepancy between the analytic Jacobian and central
/// differences, relative to the Jacobian's scale.
fn discrepancy(graph: &FactorGraph, at: &Values) -> f64 {
    let system = graph.linearize(at).unwrap();
    let analytic = system.dense_jacobian();
    let mut numeric = DMatrix::zeros(analytic.nrows(), analytic.ncols());
    for (key, cols) in &system.column_index {
        for c in cols.clone() {
            let scale = at.get(key).unwrap().to_vector()[c - cols.start].abs().max(1.0);
            let h = 1e-6 * scale;
            let mut step = vec![0.0; cols.len()];
            let eval = |sign: f64, step: &mut Vec<f64>| {
                step[c - cols.start] = sign * h;
                let mut v = at.clone();
                v.get_mut(key).unwrap().retract(step);
                graph.linearize(&v).unwrap().stacked_residual()
            };
            let plus = eval(1.0, &mut step);
            let minus = eval(-1.0, &mut step);
            numeric.set_column(c, &((plus - minus) / (2.0 * h)));
        }
    }
    (analytic - &numeric).amax() / numeric.amax().max(1.0)
}

fn state_strategy() -> impl Strategy<Value = EpochState> {
    (
        prop::array::uniform3(-500.0..500.0f64),
        -1e3..1e3f64,
        1.5..3.0f64,
    )
        .prop_map(|(p, c, z)| EpochState::new(Vector3::from(p), c, z))
}

fn direction_strategy() -> impl Strategy<Value = Vector3<f64>> {
    (-1.0..1.0f64, -1.0..1.0f64, 0.2..1.0f64).prop_map(|(e, n, u)| Vector3::new(e, n, u))
}

fn single(state: &EpochState, factors: Vec<Factor>) -> (FactorGraph, Values) {
    let key = VariableKey::epoch_state(0);
    let mut g = FactorGraph::new();
    g.add_variable(key.clone(), state.clone()).unwrap();
    for f in factors {
        g.add_factor(f).unwrap();
    }
    let mut at: Values = [(key, state.clone().into())].into_iter().collect();
    // pick up lazily created ambiguities
    for (k, v) in g.variables().iter() {
        at.insert(k.clone(), v.clone());
    }
    (g, at)
}

fn obs_with_phase(state: &EpochState, dir: Vector3<f64>, amb: f64) -> SatelliteObservation {
    let mut o = observation(state, "G05", dir, 1.5);
    o.carrier_phase_range = Some(o.pseudorange + amb);
    o
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pseudorange_and_phase(state in state_strategy(), dir in direction_strategy(), sigma in 0.1..5.0f64, amb in -100.0..100.0f64) {
        let key = VariableKey::epoch_state(0);
        let obs = obs_with_phase(&state, dir, amb);
        let factors = vec![
            pseudorange_factor(key.clone(), obs.clone(), sigma, RobustKernel::L2).unwrap(),
            carrier_phase_factor(key, obs, sigma * 0.01, RobustKernel::L2).unwrap(),
        ];
        let (g, mut at) = single(&state, factors);
        let est = at.get_mut(&VariableKey::epoch_state(0)).unwrap();
        est.retract(&[0.3, -0.2, 0.1, 0.5, 0.01, 0.7]);
        prop_assert!(discrepancy(&g, &at) < 1e-6);
    }

    #[test]
    fn switched_measurement(state in state_strategy(), dir in direction_strategy(), s in 0.2..0.8f64) {
        let key = VariableKey::epoch_state(0);
        let obs = observation(&state, "G09", dir, 3.0);
        let (mut g, mut at) = single(&state, vec![pseudorange_factor(key, obs, 1.0, RobustKernel::L2).unwrap()]);
        let ids: Vec<_> = g.factors().iter().map(|f| f.id()).collect();
        let switches = augment_with_switches(&mut g, &ids, &SwitchConfig::default()).unwrap();
        at.insert(switches[0].clone(), s);
        prop_assert!(discrepancy(&g, &at) < 1e-6);
    }

    #[test]
    fn between_and_prior(a in state_strategy(), b in state_strategy(), sig in prop::array::uniform5(0.01..3.0f64)) {
        let k0 = VariableKey::epoch_state(0);
        let k1 = VariableKey::epoch_state(1);
        let model = MotionModel::random_walk(sig, 0.5).unwrap();
        let mut g = FactorGraph::new();
        g.add_variable(k0.clone(), a.clone()).unwrap();
        g.add_variable(k1.clone(), b.clone()).unwrap();
        g.add_factor(between_factor(k0.clone(), k1.clone(), model).unwrap()).unwrap();
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(5, sig.iter().map(|s| s * s)));
        g.add_factor(prior_factor(k1.clone(), a.clone(), cov).unwrap()).unwrap();
        let at: Values = [(k0, a.into()), (k1, b.into())].into_iter().collect();
        prop_assert!(discrepancy(&g, &at) < 1e-6);
    }
}
