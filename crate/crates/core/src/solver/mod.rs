//! Batch nonlinear least squares over the block-sparse whitened system.
//!
//! Both engines solve the (optionally weighted and damped) normal equations
//! `(JᵀWJ + λI) δ = −JᵀW r` with an envelope Cholesky factorization and
//! relinearize at every iterate.

mod sparse;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use nalgebra::DVector;

use crate::factor::FactorId;
use crate::graph::{FactorGraph, LinearizedSystem};
use crate::key::VariableKey;
use crate::robust;
use crate::state::Values;
use crate::{Error, Result};

pub(crate) use sparse::Skyline;

/// Per-factor scalar weights; factors without an entry weigh 1.
pub type Weights = BTreeMap<FactorId, f64>;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub abs_cost_tol: f64,
    pub rel_cost_tol: f64,
    pub step_tol: f64,
    pub lm_initial_lambda: f64,
    pub lm_lambda_factor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iterations: 50,
            abs_cost_tol: 1e-12,
            rel_cost_tol: 1e-9,
            step_tol: 1e-10,
            lm_initial_lambda: 1e-4,
            lm_lambda_factor: 10.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1"));
        }
        let positive = [
            self.abs_cost_tol,
            self.rel_cost_tol,
            self.step_tol,
            self.lm_initial_lambda,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidConfig("solver tolerances must be positive"));
        }
        if !(self.lm_lambda_factor > 1.0) {
            return Err(Error::InvalidConfig("lm_lambda_factor must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub estimate: Values,
    /// Number of linear solves performed.
    pub iterations: usize,
    /// `total_cost` of the graph at `estimate`.
    pub final_cost: f64,
    pub converged: bool,
    /// Objective after the initial point and after each accepted step.
    pub cost_trace: Vec<f64>,
    /// Weights in effect at `estimate`.
    pub weights: Weights,
}

fn check_weights(weights: &Weights) -> Result<()> {
    if weights.values().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidConfig("factor weights must be positive and finite"));
    }
    Ok(())
}

/// Minimizes `‖√W(Jδ + r)‖² + damping·‖δ‖²`, returning a flat step in the
/// system's column order.
pub(crate) fn solve_flat(system: &LinearizedSystem, damping: f64, weights: Option<&Weights>) -> Result<DVector<f64>> {
    let n = system.dim;
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let mut first: Vec<usize> = (0..n).collect();
    for rows in &system.rows {
        let lo = rows
            .blocks
            .iter()
            .map(|(k, _)| system.column_index[k].start)
            .min()
            .unwrap_or(0);
        for (key, _) in &rows.blocks {
            for c in system.column_index[key].clone() {
                first[c] = first[c].min(lo);
            }
        }
    }
    let mut h = Skyline::new(first);
    let mut g = alloc::vec![0.0; n];
    for rows in &system.rows {
        let w = weights.and_then(|w| w.get(&rows.factor)).copied().unwrap_or(1.0);
        for (a, (ka, ja)) in rows.blocks.iter().enumerate() {
            let ca = system.column_index[ka].start;
            let jtr = ja.tr_mul(&rows.residual);
            for (i, v) in jtr.iter().enumerate() {
                g[ca + i] -= w * v;
            }
            for (kb, jb) in &rows.blocks[..=a] {
                let cb = system.column_index[kb].start;
                let block = ja.tr_mul(jb);
                for i in 0..block.nrows() {
                    for j in 0..block.ncols() {
                        let (row, col) = (ca + i, cb + j);
                        // same-variable blocks contribute their lower triangle only
                        if col <= row {
                            h.add(row, col, w * block[(i, j)]);
                        } else if ka != kb {
                            h.add(col, row, w * block[(i, j)]);
                        }
                    }
                }
            }
        }
    }
    if damping > 0.0 {
        for i in 0..n {
            h.add(i, i, damping);
        }
    }
    h.factorize().map_err(|column| Error::SingularSystem { column })?;
    h.solve_in_place(&mut g);
    Ok(DVector::from_vec(g))
}

/// Weighted, damped Gauss-Newton step per variable.
pub fn solve_normal_equations(
    system: &LinearizedSystem,
    damping: f64,
    weights: Option<&Weights>,
) -> Result<BTreeMap<VariableKey, DVector<f64>>> {
    if !(damping >= 0.0) {
        return Err(Error::InvalidConfig("damping must be nonnegative"));
    }
    if let Some(w) = weights {
        check_weights(w)?;
    }
    let flat = solve_flat(system, damping, weights)?;
    Ok(system
        .column_index
        .iter()
        .map(|(k, r)| (k.clone(), flat.rows(r.start, r.len()).into_owned()))
        .collect())
}

/// `values ⊞ delta` with `delta` laid out by `system.column_index`.
pub(crate) fn apply_step(values: &Values, system: &LinearizedSystem, delta: &DVector<f64>) -> Values {
    let mut out = values.clone();
    for (key, range) in &system.column_index {
        if let Some(v) = out.get_mut(key) {
            v.retract(&delta.as_slice()[range.clone()]);
        }
    }
    out
}

/// How factor weights are chosen inside the iteration loop.
#[derive(Clone, Copy)]
pub(crate) enum Weighting<'a> {
    /// Caller-supplied, held fixed; the objective is `Σ w‖r‖²`.
    Fixed(Option<&'a Weights>),
    /// Recomputed from each factor's robust kernel (IRLS); the objective is
    /// the kernel loss.
    Robust,
}

pub(crate) fn objective(graph: &FactorGraph, system: &LinearizedSystem, weighting: Weighting<'_>) -> (f64, Weights) {
    let mut total = 0.0;
    let mut weights = Weights::new();
    for (rows, factor) in system.rows.iter().zip(graph.factors()) {
        debug_assert_eq!(rows.factor, factor.id());
        let (loss, w) = match weighting {
            Weighting::Fixed(fixed) => {
                let w = fixed.and_then(|m| m.get(&rows.factor)).copied().unwrap_or(1.0);
                (w * rows.residual.norm_squared(), w)
            }
            Weighting::Robust => robust::loss_and_weight(factor.kernel(), &rows.residual),
        };
        total += loss;
        weights.insert(rows.factor, w);
    }
    (total, weights)
}

/// `‖Σ wᵢ Jᵢᵀ rᵢ‖`, half the gradient norm of the weighted objective.
fn gradient_norm(system: &LinearizedSystem, weights: &Weights) -> f64 {
    let mut g = DVector::zeros(system.dim);
    for rows in &system.rows {
        let w = weights.get(&rows.factor).copied().unwrap_or(1.0);
        for (key, block) in &rows.blocks {
            let cols = system.column_index[key].clone();
            let mut seg = g.rows_mut(cols.start, cols.len());
            seg += block.tr_mul(&rows.residual) * w;
        }
    }
    g.norm()
}

pub(crate) fn restrict(graph: &FactorGraph, init: &Values) -> Result<Values> {
    graph.check_complete(init)?;
    Ok(graph
        .variables()
        .keys()
        .map(|k| (k.clone(), init.get(k).expect("checked").clone()))
        .collect())
}

pub(crate) fn iterate(
    graph: &FactorGraph,
    init: &Values,
    opts: &SolverOptions,
    weighting: Weighting<'_>,
    damped: bool,
) -> Result<SolveReport> {
    opts.validate()?;
    if let Weighting::Fixed(Some(w)) = weighting {
        check_weights(w)?;
    }
    let mut x = restrict(graph, init)?;
    let mut system = graph.linearize(&x)?;
    let (mut cost, mut weights) = objective(graph, &system, weighting);
    let mut trace = alloc::vec![cost];
    let mut lambda = if damped { opts.lm_initial_lambda } else { 0.0 };
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;
        let delta = match solve_flat(&system, lambda, Some(&weights)) {
            Ok(d) => d,
            Err(e @ Error::SingularSystem { .. }) => {
                if !damped {
                    return Err(e.at_iteration(iterations));
                }
                lambda = (lambda * opts.lm_lambda_factor).max(opts.lm_initial_lambda);
                continue;
            }
            Err(e) => return Err(e.at_iteration(iterations)),
        };
        let step = delta.norm();
        let candidate = apply_step(&x, &system, &delta);
        let cand_system = graph.linearize(&candidate).map_err(|e| e.at_iteration(iterations))?;
        let (cand_cost, cand_weights) = objective(graph, &cand_system, weighting);

        // Reweighted objectives flatten out below cost resolution before
        // the gradient vanishes; a step that keeps the cost within rounding
        // is then judged by the gradient instead.
        let tie = matches!(weighting, Weighting::Robust)
            && cand_cost <= cost * (1.0 + 8.0 * f64::EPSILON)
            && gradient_norm(&cand_system, &cand_weights) < gradient_norm(&system, &weights);
        if !damped || cand_cost < cost || tie {
            let change = (cost - cand_cost).abs();
            let previous = cost;
            x = candidate;
            system = cand_system;
            cost = cand_cost;
            weights = cand_weights;
            trace.push(cost);
            if damped {
                lambda /= opts.lm_lambda_factor;
            }
            if change < opts.abs_cost_tol || change < opts.rel_cost_tol * previous || step < opts.step_tol {
                converged = true;
                break;
            }
        } else {
            lambda *= opts.lm_lambda_factor;
            if step < opts.step_tol {
                converged = true;
                break;
            }
        }
    }

    let final_cost = graph.total_cost(&x)?;
    Ok(SolveReport {
        estimate: x,
        iterations,
        final_cost,
        converged,
        cost_trace: trace,
        weights,
    })
}

/// Undamped Gauss-Newton, relinearizing every iteration. Every step is
/// taken; a singular system is an error.
pub fn gauss_newton(
    graph: &FactorGraph,
    init: &Values,
    opts: &SolverOptions,
    weights: Option<&Weights>,
) -> Result<SolveReport> {
    iterate(graph, init, opts, Weighting::Fixed(weights), false)
}

/// Levenberg-Marquardt: a step is accepted only when it lowers the
/// objective; λ shrinks on acceptance and grows on rejection.
pub fn levenberg_marquardt(
    graph: &FactorGraph,
    init: &Values,
    opts: &SolverOptions,
    weights: Option<&Weights>,
) -> Result<SolveReport> {
    iterate(graph, init, opts, Weighting::Fixed(weights), true)
}
