//! The bipartite factor graph and its linearization.
//!
//! Factors only ever reference variables, so the edge set is exactly the
//! union of each factor's variable list.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::Range;
use nalgebra::{DMatrix, DVector};

use crate::factor::{Factor, FactorId, FactorKind};
use crate::key::VariableKey;
use crate::models;
use crate::robust;
use crate::state::{Value, Values};
use crate::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    variables: Values,
    factors: Vec<Factor>,
    next_id: u64,
}

/// Whitened residual and Jacobian blocks of one factor.
#[derive(Debug, Clone)]
pub struct FactorRows {
    pub factor: FactorId,
    pub residual: DVector<f64>,
    pub blocks: Vec<(VariableKey, DMatrix<f64>)>,
}

/// Block-sparse whitened least-squares system at a linearization point.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub rows: Vec<FactorRows>,
    /// Contiguous column range of each variable, epoch-major.
    pub column_index: BTreeMap<VariableKey, Range<usize>>,
    pub dim: usize,
}

impl LinearizedSystem {
    pub fn residual_rows(&self) -> usize {
        self.rows.iter().map(|r| r.residual.len()).sum()
    }

    /// Stacked residual vector in factor order.
    pub fn stacked_residual(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.residual_rows());
        let mut at = 0;
        for r in &self.rows {
            out.rows_mut(at, r.residual.len()).copy_from(&r.residual);
            at += r.residual.len();
        }
        out
    }

    /// Dense Jacobian; used by tests and small problems.
    pub fn dense_jacobian(&self) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.residual_rows(), self.dim);
        let mut at = 0;
        for r in &self.rows {
            for (key, block) in &r.blocks {
                let cols = &self.column_index[key];
                j.view_mut((at, cols.start), block.shape()).copy_from(block);
            }
            at += r.residual.len();
        }
        j
    }
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, key: VariableKey, initial: impl Into<Value>) -> Result<()> {
        if self.variables.contains(&key) {
            return Err(Error::DuplicateVariable(key));
        }
        let initial = initial.into();
        if !initial.is_finite() {
            return Err(Error::InvalidConfig("initial value must be finite"));
        }
        self.variables.insert(key, initial);
        Ok(())
    }

    /// Appends `factor` and returns its assigned id.
    ///
    /// A carrier-phase factor on a satellite with no ambiguity yet creates
    /// it, initialised from the measurement at the current value.
    pub fn add_factor(&mut self, mut factor: Factor) -> Result<FactorId> {
        factor.check_arity()?;
        for key in &factor.variables {
            if !self.variables.contains(key) {
                return Err(Error::DanglingEdge(key.clone()));
            }
        }
        if factor.kind() == FactorKind::CarrierPhase {
            let obs = factor.observation().expect("measurement").clone();
            let key = &factor.variables[0];
            if let Some(Value::Epoch(state)) = self.variables.get_mut(key) {
                if !state.ambiguities.contains_key(&obs.sat_id) {
                    let code = models::pseudorange_predict(state, &obs)?;
                    let phase = obs.carrier_phase_range.expect("validated at construction");
                    state.ambiguities.insert(obs.sat_id.clone(), phase - code);
                }
            } else {
                return Err(Error::StateMismatch(key.clone()));
            }
        }
        factor.id = FactorId(self.next_id);
        self.next_id += 1;
        let id = factor.id;
        self.factors.push(factor);
        Ok(id)
    }

    pub fn variables(&self) -> &Values {
        &self.variables
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, id: FactorId) -> Option<&Factor> {
        self.factors.iter().find(|f| f.id == id)
    }

    pub(crate) fn factor_mut(&mut self, id: FactorId) -> Option<&mut Factor> {
        self.factors.iter_mut().find(|f| f.id == id)
    }

    pub fn len_factors(&self) -> usize {
        self.factors.len()
    }

    /// All factor–variable edges.
    pub fn edges(&self) -> impl Iterator<Item = (FactorId, &VariableKey)> {
        self.factors
            .iter()
            .flat_map(|f| f.variables.iter().map(move |k| (f.id, k)))
    }

    /// Factors touching `key`.
    pub fn neighbors(&self, key: &VariableKey) -> impl Iterator<Item = &Factor> {
        let key = key.clone();
        self.factors.iter().filter(move |f| f.variables.contains(&key))
    }

    /// Removes factors by id, returning them in graph order.
    pub(crate) fn take_factors(&mut self, ids: &[FactorId]) -> Vec<Factor> {
        let (taken, kept) = core::mem::take(&mut self.factors)
            .into_iter()
            .partition(|f| ids.contains(&f.id));
        self.factors = kept;
        taken
    }

    pub(crate) fn remove_variable(&mut self, key: &VariableKey) -> Option<Value> {
        self.variables.remove(key)
    }

    pub(crate) fn check_complete(&self, estimate: &Values) -> Result<()> {
        for key in self.variables.keys() {
            if !estimate.contains(key) {
                return Err(Error::IncompleteEstimate(key.clone()));
            }
        }
        Ok(())
    }

    /// Column layout for `estimate`, epoch-major.
    pub fn column_index(&self, estimate: &Values) -> Result<(BTreeMap<VariableKey, Range<usize>>, usize)> {
        self.check_complete(estimate)?;
        let mut index = BTreeMap::new();
        let mut at = 0;
        for key in self.variables.keys() {
            let dim = estimate.get(key).expect("checked").dim();
            index.insert(key.clone(), at..at + dim);
            at += dim;
        }
        Ok((index, at))
    }

    /// Whitened residuals and Jacobians of every factor at `estimate`.
    /// Robust kernels are not applied here.
    pub fn linearize(&self, estimate: &Values) -> Result<LinearizedSystem> {
        let (column_index, dim) = self.column_index(estimate)?;
        let mut rows = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let eval = f.evaluate(estimate, true)?;
            let blocks = f
                .variables
                .iter()
                .cloned()
                .zip(eval.jacobians.expect("requested"))
                .collect();
            rows.push(FactorRows {
                factor: f.id,
                residual: eval.residual,
                blocks,
            });
        }
        Ok(LinearizedSystem {
            rows,
            column_index,
            dim,
        })
    }

    /// Whitened residual of every factor.
    pub fn residuals(&self, estimate: &Values) -> Result<Vec<(FactorId, DVector<f64>)>> {
        self.check_complete(estimate)?;
        self.factors
            .iter()
            .map(|f| Ok((f.id, f.evaluate(estimate, false)?.residual)))
            .collect()
    }

    /// Sum over factors of the kernel-transformed whitened residual; with L2
    /// kernels this is `Σ‖r‖²`.
    pub fn total_cost(&self, estimate: &Values) -> Result<f64> {
        self.check_complete(estimate)?;
        let mut cost = 0.0;
        for f in &self.factors {
            let r = f.evaluate(estimate, false)?.residual;
            cost += robust::kernel_cost(&f.kernel, &r);
            if let Some(p) = f.marginal_prior() {
                cost += p.cost_offset;
            }
        }
        Ok(cost)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{between_factor, prior_factor, pseudorange_factor, MotionModel, SatelliteObservation};
    use crate::robust::RobustKernel;
    use crate::state::EpochState;
    use nalgebra::Vector3;

    fn x(e: u32) -> VariableKey {
        VariableKey::epoch_state(e)
    }

    #[test]
    fn add_variable_rejects_duplicates() {
        let mut g = FactorGraph::new();
        g.add_variable(x(0), EpochState::default()).unwrap();
        assert_eq!(g.variables().len(), 1);
        assert_eq!(
            g.add_variable(x(0), EpochState::default()),
            Err(Error::DuplicateVariable(x(0)))
        );
        let s = VariableKey::switch(3, "G07".into());
        g.add_variable(s.clone(), 1.0).unwrap();
        assert_eq!(g.variables().scalar(&s), Some(1.0));
    }

    #[test]
    fn add_factor_checks_edges_and_arity() {
        let mut g = FactorGraph::new();
        g.add_variable(x(0), EpochState::default()).unwrap();
        let prior = prior_factor(x(0), EpochState::default(), DMatrix::identity(5, 5)).unwrap();
        assert_eq!(g.add_factor(prior).unwrap(), FactorId(0));

        let obs = SatelliteObservation::new("G01".into(), Vector3::new(0.0, 0.0, 2e7), 2e7, None, 1.5).unwrap();
        let pr = pseudorange_factor(x(9), obs, 1.0, RobustKernel::L2).unwrap();
        assert_eq!(g.add_factor(pr), Err(Error::DanglingEdge(x(9))));

        let mut between = between_factor(x(0), x(1), MotionModel::random_walk([1.0; 5], 1.0).unwrap()).unwrap();
        between.variables.pop();
        assert!(matches!(g.add_factor(between), Err(Error::ArityError { got: 1, .. })));
    }

    #[test]
    fn prior_linearization_examples() {
        let mut g = FactorGraph::new();
        let key = VariableKey::switch(0, "G01".into());
        g.add_variable(key.clone(), 0.0).unwrap();
        g.add_factor(prior_factor(key.clone(), 0.0, DMatrix::identity(1, 1)).unwrap())
            .unwrap();
        let sys = g.linearize(g.variables()).unwrap();
        assert_eq!(sys.rows[0].residual[0], 0.0);
        assert_eq!(sys.rows[0].blocks[0].1[(0, 0)], -1.0);

        let mut g = FactorGraph::new();
        g.add_variable(key.clone(), 2.0).unwrap();
        g.add_factor(prior_factor(key, 0.0, DMatrix::from_element(1, 1, 4.0)).unwrap())
            .unwrap();
        let sys = g.linearize(g.variables()).unwrap();
        assert!((sys.rows[0].residual[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn linearize_requires_complete_estimate() {
        let mut g = FactorGraph::new();
        g.add_variable(x(0), EpochState::default()).unwrap();
        g.add_variable(x(1), EpochState::default()).unwrap();
        let mut partial = Values::new();
        partial.insert(x(0), EpochState::default());
        assert_eq!(g.linearize(&partial).unwrap_err(), Error::IncompleteEstimate(x(1)));
        assert_eq!(g.total_cost(&partial).unwrap_err(), Error::IncompleteEstimate(x(1)));
    }

    #[test]
    fn total_cost_sums_kernel_costs() {
        let mut g = FactorGraph::new();
        let a = VariableKey::switch(0, "A".into());
        let b = VariableKey::switch(0, "B".into());
        g.add_variable(a.clone(), 0.0).unwrap();
        g.add_variable(b.clone(), 0.0).unwrap();
        g.add_factor(prior_factor(a.clone(), 3.0, DMatrix::identity(1, 1)).unwrap())
            .unwrap();
        g.add_factor(prior_factor(b, 4.0, DMatrix::identity(1, 1)).unwrap())
            .unwrap();
        assert_eq!(g.total_cost(g.variables()).unwrap(), 25.0);

        let mut h = FactorGraph::new();
        h.add_variable(a.clone(), 0.0).unwrap();
        let id = h
            .add_factor(prior_factor(a, 3.0, DMatrix::identity(1, 1)).unwrap())
            .unwrap();
        h.factor_mut(id)
            .unwrap()
            .set_kernel(RobustKernel::Huber { delta: 1.0 })
            .unwrap();
        assert!((h.total_cost(h.variables()).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn edges_only_join_factors_to_variables() {
        let mut g = FactorGraph::new();
        g.add_variable(x(0), EpochState::default()).unwrap();
        g.add_variable(x(1), EpochState::default()).unwrap();
        let rw = MotionModel::random_walk([1.0; 5], 1.0).unwrap();
        let id = g.add_factor(between_factor(x(0), x(1), rw).unwrap()).unwrap();
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, [(id, &x(0)), (id, &x(1))]);
        assert!(edges.iter().all(|(_, k)| g.variables().contains(k)));
    }
}
