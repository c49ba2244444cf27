//! Fixed-lag smoothing with square-root-information marginalization.
//!
//! Leaving epochs are eliminated from the whitened linear system of every
//! factor that touches them by a QR factorization; the rows left on the
//! boundary variables become a dense [`MarginalPrior`] factor. The prior is
//! linearized once and never relinearized, which is exact for linear models
//! and the usual fixed-lag approximation otherwise.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::factor::{Factor, FactorId};
use crate::graph::FactorGraph;
use crate::key::VariableKey;
use crate::robust::{self, GncSchedule};
use crate::solver::{self, SolveReport, SolverOptions, Weights};
use crate::state::{EpochState, Value, Values};
use crate::{Error, Result};

/// Dense Gaussian on boundary variables, `‖R·(x ⊖ x₀) + rhs‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalPrior {
    pub keys: Vec<VariableKey>,
    /// Upper-triangular (trapezoidal when rank deficient) square-root
    /// information over the concatenated tangents of `keys`.
    pub sqrt_information: DMatrix<f64>,
    pub linearization_point: Vec<Value>,
    pub rhs: DVector<f64>,
    /// Residual energy of the eliminated rows at the linearization point.
    /// Constant in the variables; kept so costs stay comparable.
    pub cost_offset: f64,
}

impl MarginalPrior {
    /// `RᵀR`, the marginal information of the boundary variables.
    pub fn information(&self) -> DMatrix<f64> {
        self.sqrt_information.tr_mul(&self.sqrt_information)
    }
}

/// Eliminates `drop_keys` and returns the reduced graph with the marginal
/// prior appended, plus the prior itself (`None` when nothing was consumed).
///
/// `weights` scales consumed factors (e.g. robust weights in effect at
/// `estimate`); missing entries weigh 1.
pub fn marginalize(
    graph: &FactorGraph,
    estimate: &Values,
    drop_keys: &[VariableKey],
    weights: Option<&Weights>,
) -> Result<(FactorGraph, Option<MarginalPrior>)> {
    let dropped: BTreeSet<VariableKey> = drop_keys.iter().cloned().collect();
    for key in &dropped {
        if !graph.variables().contains(key) {
            return Err(Error::UnknownVariable(key.clone()));
        }
        if !estimate.contains(key) {
            return Err(Error::IncompleteEstimate(key.clone()));
        }
    }
    let consumed: Vec<&Factor> = graph
        .factors()
        .iter()
        .filter(|f| f.variables().iter().any(|k| dropped.contains(k)))
        .collect();
    let boundary: BTreeSet<VariableKey> = consumed
        .iter()
        .flat_map(|f| f.variables().iter())
        .filter(|k| !dropped.contains(*k))
        .cloned()
        .collect();

    let mut columns = alloc::collections::BTreeMap::new();
    let mut n = 0;
    for key in dropped.iter().chain(boundary.iter()) {
        let value = estimate
            .get(key)
            .ok_or_else(|| Error::IncompleteEstimate(key.clone()))?;
        columns.insert(key.clone(), (n, value.dim()));
        n += value.dim();
    }
    let n_drop: usize = dropped.iter().map(|k| columns[k].1).sum();
    let n_boundary = n - n_drop;

    let mut reduced = graph.clone();
    let consumed_ids: Vec<FactorId> = consumed.iter().map(|f| f.id()).collect();
    reduced.take_factors(&consumed_ids);
    for key in &dropped {
        reduced.remove_variable(key);
    }
    if consumed.is_empty() || n_boundary == 0 {
        return Ok((reduced, None));
    }

    let mut blocks = Vec::new();
    let mut m = 0;
    for f in &consumed {
        let eval = f.evaluate(estimate, true)?;
        let w = weights.and_then(|w| w.get(&f.id())).copied().unwrap_or(1.0);
        m += eval.residual.len();
        blocks.push((f, eval, libm::sqrt(w)));
    }
    let mut stacked = DMatrix::zeros(m, n + 1);
    let mut row = 0;
    for (f, eval, sw) in &blocks {
        let rows = eval.residual.len();
        for (key, jac) in f.variables().iter().zip(eval.jacobians.as_ref().expect("requested")) {
            let (col, _) = columns[key];
            stacked.view_mut((row, col), jac.shape()).copy_from(&(jac * *sw));
        }
        stacked.view_mut((row, n), (rows, 1)).copy_from(&(&eval.residual * *sw));
        row += rows;
    }
    let energy = stacked.column(n).norm_squared();

    let r = stacked.qr().r();
    let available = r.nrows().saturating_sub(n_drop).min(n_boundary);
    if available == 0 {
        return Ok((reduced, None));
    }
    let sqrt_information = r.view((n_drop, n_drop), (available, n_boundary)).into_owned();
    let rhs = r.view((n_drop, n), (available, 1)).column(0).into_owned();
    let cost_offset = (energy - rhs.norm_squared()).max(0.0);
    let keys: Vec<VariableKey> = boundary.into_iter().collect();
    let prior = MarginalPrior {
        linearization_point: keys.iter().map(|k| estimate.get(k).expect("checked").clone()).collect(),
        keys,
        sqrt_information,
        rhs,
        cost_offset,
    };
    reduced.add_factor(Factor::marginal(prior.clone()))?;
    Ok((reduced, Some(prior)))
}

#[derive(Debug, Clone, PartialEq)]
pub enum WindowSolver {
    GaussNewton,
    LevenbergMarquardt,
    /// IRLS over each factor's robust kernel.
    Irls,
    Gnc(GncSchedule),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    /// Number of epochs kept in the window.
    pub lag: usize,
    pub solver: WindowSolver,
    pub options: SolverOptions,
}

impl WindowConfig {
    pub fn new(lag: usize) -> Self {
        WindowConfig {
            lag,
            solver: WindowSolver::GaussNewton,
            options: SolverOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag < 1 {
            return Err(Error::InvalidConfig("lag must be at least 1"));
        }
        if let WindowSolver::Gnc(s) = &self.solver {
            s.validate()?;
        }
        self.options.validate()
    }
}

/// New variables and factors arriving with one epoch.
#[derive(Debug, Clone, Default)]
pub struct EpochBatch {
    pub epoch: u32,
    pub variables: Vec<(VariableKey, Value)>,
    pub factors: Vec<Factor>,
}

#[derive(Debug, Clone)]
pub struct SlideOutput {
    pub epoch: u32,
    /// Estimate of the newest epoch state.
    pub state: EpochState,
    pub report: SolveReport,
    /// Epoch eliminated after this step, if any.
    pub marginalized: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct FixedLagSmoother {
    config: WindowConfig,
    graph: FactorGraph,
    estimate: Values,
    epochs: VecDeque<u32>,
}

impl FixedLagSmoother {
    pub fn new(config: WindowConfig) -> Result<Self> {
        config.validate()?;
        Ok(FixedLagSmoother {
            config,
            graph: FactorGraph::new(),
            estimate: Values::new(),
            epochs: VecDeque::new(),
        })
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn estimate(&self) -> &Values {
        &self.estimate
    }

    pub fn window_epochs(&self) -> impl Iterator<Item = u32> + '_ {
        self.epochs.iter().copied()
    }

    /// Adds an epoch, optimizes the window and marginalizes the oldest epoch
    /// once the window exceeds the lag.
    pub fn slide(&mut self, batch: EpochBatch) -> Result<SlideOutput> {
        if let Some(&last) = self.epochs.back() {
            if batch.epoch <= last {
                return Err(Error::EpochOrderError { last, got: batch.epoch });
            }
        }
        for (key, value) in batch.variables {
            self.graph.add_variable(key, value)?;
        }
        for factor in batch.factors {
            self.graph.add_factor(factor)?;
        }
        // pick up new variables and lazily created ambiguities
        for (key, value) in self.graph.variables().iter() {
            match (self.estimate.get_mut(key), value) {
                (None, _) => {
                    self.estimate.insert(key.clone(), value.clone());
                }
                (Some(Value::Epoch(current)), Value::Epoch(initial)) => {
                    for (sat, b) in &initial.ambiguities {
                        current.ambiguities.entry(sat.clone()).or_insert(*b);
                    }
                }
                _ => {}
            }
        }
        self.epochs.push_back(batch.epoch);

        let report = match &self.config.solver {
            WindowSolver::GaussNewton => {
                solver::gauss_newton(&self.graph, &self.estimate, &self.config.options, None)?
            }
            WindowSolver::LevenbergMarquardt => {
                solver::levenberg_marquardt(&self.graph, &self.estimate, &self.config.options, None)?
            }
            WindowSolver::Irls => robust::irls_solve(&self.graph, &self.estimate, &self.config.options)?,
            WindowSolver::Gnc(schedule) => robust::gnc_solve(&self.graph, &self.estimate, schedule)?.report,
        };
        self.estimate = report.estimate.clone();
        let state = self
            .estimate
            .epoch(batch.epoch)
            .cloned()
            .ok_or_else(|| Error::UnknownVariable(VariableKey::epoch_state(batch.epoch)))?;

        let mut marginalized = None;
        if self.epochs.len() > self.config.lag {
            let oldest = self.epochs.pop_front().expect("non-empty");
            let drop: Vec<VariableKey> = self
                .graph
                .variables()
                .keys()
                .filter(|k| k.epoch() == oldest)
                .cloned()
                .collect();
            let (reduced, _) = marginalize(&self.graph, &self.estimate, &drop, Some(&report.weights))?;
            self.graph = reduced;
            for key in &drop {
                self.estimate.remove(key);
            }
            marginalized = Some(oldest);
        }
        Ok(SlideOutput {
            epoch: batch.epoch,
            state,
            report,
            marginalized,
        })
    }
}
