//! Iteratively reweighted and graduated non-convexity solvers.

use alloc::vec::Vec;

use crate::factor::FactorId;
use crate::graph::FactorGraph;
use crate::robust::kernels::{gnc_weight, RobustKernel};
use crate::solver::{self, SolveReport, SolverOptions, Weighting, Weights};
use crate::state::Values;
use crate::{Error, Result};

/// Continuation schedule for [`gnc_solve`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GncSchedule {
    /// Starting μ; `None` picks `2·max χ²/c²` from the least-squares
    /// solution so the surrogate starts (nearly) convex.
    pub mu_initial: Option<f64>,
    pub mu_update_factor: f64,
    pub mu_final: f64,
    pub inner_solver: SolverOptions,
}

impl Default for GncSchedule {
    fn default() -> Self {
        GncSchedule {
            mu_initial: None,
            mu_update_factor: 1.4,
            mu_final: 1.0,
            inner_solver: SolverOptions::default(),
        }
    }
}

impl GncSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_update_factor > 1.0) {
            return Err(Error::InvalidConfig("mu_update_factor must exceed 1"));
        }
        if !(self.mu_final > 0.0) {
            return Err(Error::InvalidConfig("mu_final must be positive"));
        }
        if let Some(mu) = self.mu_initial {
            if !(mu >= self.mu_final) {
                return Err(Error::InvalidConfig("mu_initial must not be below mu_final"));
            }
        }
        self.inner_solver.validate()
    }
}

#[derive(Debug, Clone)]
pub struct GncReport {
    pub report: SolveReport,
    /// Final weight of each GNC-bound factor; values near 0 mark rejected
    /// outliers.
    pub weights: Weights,
    /// μ used for each outer iteration.
    pub mu_trace: Vec<f64>,
    /// Linear solves summed over all inner runs.
    pub total_iterations: usize,
}

/// Robust weights (`dφ/dχ²`) of every factor at `estimate`.
pub fn robust_weights(graph: &FactorGraph, estimate: &Values) -> Result<Weights> {
    Ok(graph
        .residuals(estimate)?
        .into_iter()
        .zip(graph.factors())
        .map(|((id, r), f)| (id, super::loss_and_weight(f.kernel(), &r).1))
        .collect())
}

/// Minimizes the sum of kernel losses by alternating weight computation at
/// the current residuals with a damped weighted least-squares step. A step
/// is kept only if the robust objective decreases.
pub fn irls_solve(graph: &FactorGraph, init: &Values, opts: &SolverOptions) -> Result<SolveReport> {
    solver::iterate(graph, init, opts, Weighting::Robust, true)
}

/// Graduated non-convexity with a Geman-McClure target.
///
/// Factors bound to [`RobustKernel::Gnc`] are reweighted with the closed-form
/// Black-Rangarajan weights while μ is annealed from the convex regime down
/// to `mu_final`; every other factor keeps its own robust weight. Each outer
/// iteration solves the weighted least-squares problem with frozen weights.
pub fn gnc_solve(graph: &FactorGraph, init: &Values, schedule: &GncSchedule) -> Result<GncReport> {
    schedule.validate()?;
    let gnc: Vec<(FactorId, f64)> = graph
        .factors()
        .iter()
        .filter_map(|f| match f.kernel() {
            RobustKernel::Gnc { c } => Some((f.id(), *c)),
            _ => None,
        })
        .collect();

    let refresh = |estimate: &Values, mu: f64| -> Result<Weights> {
        let mut weights = robust_weights(graph, estimate)?;
        let residuals = graph.residuals(estimate)?;
        for (id, c) in &gnc {
            let r = &residuals.iter().find(|(rid, _)| rid == id).expect("factor exists").1;
            weights.insert(*id, gnc_weight(r.norm_squared(), mu, *c).max(f64::MIN_POSITIVE));
        }
        Ok(weights)
    };

    let inner = &schedule.inner_solver;
    let mut report = solver::levenberg_marquardt(graph, init, inner, None)?;
    let mut total_iterations = report.iterations;

    let mut mu = match schedule.mu_initial {
        Some(mu) => mu,
        None => {
            let residuals = graph.residuals(&report.estimate)?;
            let mut max_ratio: f64 = 0.0;
            for (id, c) in &gnc {
                let r = &residuals.iter().find(|(rid, _)| rid == id).expect("factor exists").1;
                max_ratio = max_ratio.max(2.0 * r.norm_squared() / (c * c));
            }
            max_ratio.max(schedule.mu_final)
        }
    };

    let mut mu_trace = Vec::new();
    loop {
        let weights = refresh(&report.estimate, mu)?;
        report = solver::levenberg_marquardt(graph, &report.estimate, inner, Some(&weights))?;
        total_iterations += report.iterations;
        mu_trace.push(mu);
        if mu <= schedule.mu_final {
            break;
        }
        mu = (mu / schedule.mu_update_factor).max(schedule.mu_final);
    }

    let all = refresh(&report.estimate, schedule.mu_final)?;
    let weights = gnc.iter().map(|(id, _)| (*id, all[id])).collect();
    report.weights = all;
    report.final_cost = graph.total_cost(&report.estimate)?;
    Ok(GncReport {
        report,
        weights,
        mu_trace,
        total_iterations,
    })
}
