//! Runs one estimator configuration on a scenario and scores it.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use gnss_fgo_core::ekf::{ekf_predict, ekf_update, FilterState, Measurement};
use gnss_fgo_core::robust::{gnc_solve, irls_solve, maxmix_evaluate, robust_weights, RobustKernel};
use gnss_fgo_core::sim::{generate, to_graph, GraphBuild, KernelConfig, Scenario};
use gnss_fgo_core::solver::{gauss_newton, levenberg_marquardt};
use gnss_fgo_core::state::{EpochState, Values};
use gnss_fgo_core::window::{FixedLagSmoother, WindowConfig, WindowSolver};
use gnss_fgo_core::{FactorGraph, FactorKind};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::{Estimator, RunConfig, SolverChoice};
use crate::error::CliError;
use crate::metrics::{accuracy, Confusion, MetricsReport};
use crate::scenario_io;

/// Estimates are below this weight (or switch value) count as rejected.
pub const REJECTION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub label: String,
    pub estimator: Estimator,
    pub kernel: String,
    pub estimates: Vec<EpochState>,
    pub metrics: MetricsReport,
}

pub fn load_scenario(config: &RunConfig) -> Result<Scenario, CliError> {
    match (&config.scenario.generate, &config.scenario.path) {
        (Some(g), _) => generate(g).map_err(|e| CliError::estimator("generating scenario", e)),
        (None, Some(p)) => scenario_io::read_scenario(&scenario_io::scenario_dir(p)),
        (None, None) => Err(CliError::Config("no scenario source".into())),
    }
}

pub fn run(config: &RunConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let scenario = load_scenario(config)?;
    run_on(config, &scenario)
}

/// Runs `config` on an already loaded scenario.
pub fn run_on(config: &RunConfig, scenario: &Scenario) -> Result<RunOutput, CliError> {
    if config.estimator.is_filter() && config.kernel != KernelConfig::L2 {
        log::warn!(
            "kernel `{}` is ignored by the {} estimator",
            config.kernel.name(),
            config.estimator.name()
        );
    }
    let start = Instant::now();
    let (estimates, iterations, confusion) = match config.estimator {
        Estimator::Batch => run_batch(config, scenario)?,
        Estimator::FixedLag { lag } => run_fixed_lag(config, scenario, lag)?,
        Estimator::Ekf => run_filter(config, scenario, 1)?,
        Estimator::Iekf { iterations } => run_filter(config, scenario, iterations)?,
    };
    let wall_time_s = start.elapsed().as_secs_f64();

    let mut metrics = accuracy(&estimates, &scenario.truth);
    metrics.iterations_total = iterations;
    metrics.wall_time_s = wall_time_s;
    if let Some(c) = confusion {
        metrics.precision = Some(c.precision());
        metrics.recall = Some(c.recall());
    }
    let kernel = if config.estimator.is_filter() {
        "l2".to_string()
    } else {
        config.kernel.name().to_string()
    };
    Ok(RunOutput {
        label: config.label(),
        estimator: config.estimator,
        kernel,
        estimates,
        metrics,
    })
}

fn build(config: &RunConfig, scenario: &Scenario) -> Result<GraphBuild, CliError> {
    to_graph(scenario, &config.graph_options()).map_err(|e| CliError::estimator("building graph", e))
}

type RunParts = (Vec<EpochState>, usize, Option<Confusion>);

fn run_batch(config: &RunConfig, scenario: &Scenario) -> Result<RunParts, CliError> {
    let b = build(config, scenario)?;
    let ctx = |e| CliError::estimator("batch solve", e);
    let (estimate, iterations) = match &config.kernel {
        KernelConfig::Gnc { .. } => {
            let r = gnc_solve(&b.graph, &b.initial, &config.gnc).map_err(ctx)?;
            (r.report.estimate, r.total_iterations)
        }
        KernelConfig::L2 | KernelConfig::Switch(_) => {
            let r = match config.solver {
                SolverChoice::GaussNewton => gauss_newton(&b.graph, &b.initial, &config.solver_options, None),
                SolverChoice::LevenbergMarquardt => {
                    levenberg_marquardt(&b.graph, &b.initial, &config.solver_options, None)
                }
            }
            .map_err(ctx)?;
            (r.estimate, r.iterations)
        }
        _ => {
            let r = irls_solve(&b.graph, &b.initial, &config.solver_options).map_err(ctx)?;
            (r.estimate, r.iterations)
        }
    };
    let states = epoch_states(&estimate, scenario.n_epochs())?;
    let confusion = detect(&config.kernel, &b.graph, &estimate, scenario)?;
    Ok((states, iterations, confusion))
}

fn run_fixed_lag(config: &RunConfig, scenario: &Scenario, lag: usize) -> Result<RunParts, CliError> {
    let b = build(config, scenario)?;
    let solver = match (&config.kernel, config.solver) {
        (KernelConfig::Gnc { .. }, _) => WindowSolver::Gnc(config.gnc.clone()),
        (KernelConfig::L2 | KernelConfig::Switch(_), SolverChoice::GaussNewton) => WindowSolver::GaussNewton,
        (KernelConfig::L2 | KernelConfig::Switch(_), SolverChoice::LevenbergMarquardt) => {
            WindowSolver::LevenbergMarquardt
        }
        _ => WindowSolver::Irls,
    };
    let mut smoother = FixedLagSmoother::new(WindowConfig {
        lag,
        solver,
        options: config.solver_options.clone(),
    })
    .map_err(|e| CliError::estimator("fixed-lag setup", e))?;

    // each epoch keeps its estimate from the last window that contained it
    let mut smoothed = Values::new();
    let mut iterations = 0;
    for batch in b.epoch_batches() {
        let epoch = batch.epoch;
        let out = smoother
            .slide(batch)
            .map_err(|e| CliError::estimator(format!("fixed-lag epoch {epoch}"), e))?;
        iterations += out.report.iterations;
        if let Some(old) = out.marginalized {
            for (k, v) in out.report.estimate.iter().filter(|(k, _)| k.epoch() == old) {
                smoothed.insert(k.clone(), v.clone());
            }
        }
    }
    for (k, v) in smoother.estimate().iter() {
        smoothed.insert(k.clone(), v.clone());
    }
    let states = epoch_states(&smoothed, scenario.n_epochs())?;
    let confusion = detect(&config.kernel, &b.graph, &smoothed, scenario)?;
    Ok((states, iterations, confusion))
}

fn run_filter(config: &RunConfig, scenario: &Scenario, iterations: usize) -> Result<RunParts, CliError> {
    let opts = config.graph_options();
    let seed = scenario.config.as_ref().map_or(0, |c| c.rng_seed);
    let initial = opts.initial_states(scenario, seed).swap_remove(0);
    let model = opts
        .motion_model(scenario)
        .map_err(|e| CliError::estimator("motion model", e))?;
    let (code_sigma, phase_sigma) = opts.measurement_sigmas(scenario);
    let p = opts.prior_position_sigma.powi(2);
    let c = opts.prior_clock_sigma.powi(2);
    let z = opts.prior_tropo_sigma.powi(2);
    let p0 = DMatrix::from_diagonal(&DVector::from_vec(vec![p, p, p, c, z]));
    let mut state = FilterState::new(initial, p0).map_err(|e| CliError::estimator("filter prior", e))?;

    let mut states = Vec::with_capacity(scenario.n_epochs());
    for (k, epoch) in scenario.observations.iter().enumerate() {
        let ctx = |e| CliError::estimator(format!("filter epoch {k}"), e);
        if k > 0 {
            state = ekf_predict(&state, &model).map_err(ctx)?;
        }
        let mut measurements = Vec::new();
        for obs in epoch {
            measurements.push(Measurement::code(obs.clone(), code_sigma));
            if opts.use_carrier_phase && obs.carrier_phase_range.is_some() {
                measurements.push(Measurement::phase(obs.clone(), phase_sigma));
            }
        }
        if !measurements.is_empty() {
            state = ekf_update(&state, &measurements, iterations, config.solver_options.step_tol).map_err(ctx)?;
        }
        states.push(state.mean.clone());
    }
    Ok((states, scenario.n_epochs() * iterations, None))
}

fn epoch_states(values: &Values, n: usize) -> Result<Vec<EpochState>, CliError> {
    (0..n as u32)
        .map(|k| {
            values
                .epoch(k)
                .cloned()
                .ok_or_else(|| {
                    let key = gnss_fgo_core::VariableKey::epoch_state(k);
                    CliError::estimator("collecting estimates", gnss_fgo_core::Error::IncompleteEstimate(key))
                })
        })
        .collect()
}

/// Scores pseudorange rejection against the simulator labels. Plain least
/// squares rejects nothing and yields `None`.
pub fn detect(
    kernel: &KernelConfig,
    graph: &FactorGraph,
    estimate: &Values,
    scenario: &Scenario,
) -> Result<Option<Confusion>, CliError> {
    if *kernel == KernelConfig::L2 {
        return Ok(None);
    }
    let ctx = |e| CliError::estimator("outlier detection", e);
    let weights = robust_weights(graph, estimate).map_err(ctx)?;
    let residuals: BTreeMap<_, _> = graph.residuals(estimate).map_err(ctx)?.into_iter().collect();
    let mut confusion = Confusion::default();
    for f in graph.factors().iter().filter(|f| f.kind() == FactorKind::Pseudorange) {
        let (Some(epoch), Some(obs)) = (f.epoch(), f.observation()) else {
            continue;
        };
        let Some(label) = scenario.label(epoch, &obs.sat_id) else {
            continue;
        };
        let flagged = match f.kernel() {
            RobustKernel::SwitchLinked(key) => {
                estimate.scalar(key).is_some_and(|s| s.clamp(0.0, 1.0) < REJECTION_THRESHOLD)
            }
            RobustKernel::MaxMixture(components) => {
                let (k, _) = maxmix_evaluate(&residuals[&f.id()], components).map_err(ctx)?;
                let tightest = components.iter().map(|c| c.variance).fold(f64::INFINITY, f64::min);
                components[k].variance > tightest
            }
            _ => weights[&f.id()] < REJECTION_THRESHOLD,
        };
        confusion.add(flagged, label);
    }
    Ok(Some(confusion))
}

/// Writes `estimates.csv` and `metrics.json` into `dir`.
pub fn write_run(output: &RunOutput, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut csv = String::from("# epoch,x,y,z,clock,tropo,position_error\n");
    for (k, (s, err)) in output
        .estimates
        .iter()
        .zip(&output.metrics.per_epoch_position_error)
        .enumerate()
    {
        csv.push_str(&format!(
            "{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            s.position.x, s.position.y, s.position.z, s.clock_bias, s.zenith_tropo, err
        ));
    }
    let path = dir.join("estimates.csv");
    std::fs::write(&path, csv).map_err(|e| CliError::io(path, e))?;
    let json = serde_json::to_string_pretty(&output.metrics).expect("metrics serialize");
    let path = dir.join("metrics.json");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::io(path, e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub estimator: String,
    pub kernel: String,
    pub horizontal_rmse: f64,
    pub position_rmse: f64,
    pub clock_rmse: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub iterations_total: usize,
    pub wall_time_s: f64,
}

impl From<&RunOutput> for ComparisonRow {
    fn from(o: &RunOutput) -> Self {
        ComparisonRow {
            label: o.label.clone(),
            estimator: o.estimator.name(),
            kernel: o.kernel.clone(),
            horizontal_rmse: o.metrics.horizontal_rmse,
            position_rmse: o.metrics.position_rmse,
            clock_rmse: o.metrics.clock_rmse,
            precision: o.metrics.precision,
            recall: o.metrics.recall,
            iterations_total: o.metrics.iterations_total,
            wall_time_s: o.metrics.wall_time_s,
        }
    }
}

/// Runs every configuration on the one scenario they share. Runs execute on
/// separate threads; rows come back in input order.
pub fn compare(configs: &[RunConfig]) -> Result<Vec<RunOutput>, CliError> {
    if configs.len() < 2 {
        return Err(CliError::Config(format!(
            "compare needs at least 2 configurations, got {}",
            configs.len()
        )));
    }
    for (i, c) in configs.iter().enumerate() {
        c.validate()?;
        if c.scenario != configs[0].scenario {
            return Err(CliError::Config(format!(
                "configuration {} (`{}`) uses a different scenario than `{}`",
                i + 1,
                c.label(),
                configs[0].label()
            )));
        }
    }
    let scenario = load_scenario(&configs[0])?;
    std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|c| {
                let scenario = &scenario;
                s.spawn(move || run_on(c, scenario))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Comma-separated comparison table with a header row.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(
        "label,estimator,kernel,horizontal_rmse,position_rmse,clock_rmse,precision,recall,iterations_total,wall_time_s\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{},{},{},{:.6}\n",
            r.label,
            r.estimator,
            r.kernel,
            r.horizontal_rmse,
            r.position_rmse,
            r.clock_rmse,
            opt(r.precision),
            opt(r.recall),
            r.iterations_total,
            r.wall_time_s
        ));
    }
    out
}
