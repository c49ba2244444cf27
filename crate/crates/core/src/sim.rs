//! Synthetic GNSS scenarios with labelled multipath outliers, and the
//! builder that turns a scenario into a factor graph.
//!
//! Satellites sit still on a 20,200 km shell around the local origin. The
//! receiver clock and zenith troposphere evolve as random walks; multipath
//! adds a positive bias to the pseudorange only.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::factor::FactorId;
use crate::graph::FactorGraph;
use crate::key::{SatId, VariableKey};
use crate::math;
use crate::models::{
    self, between_factor, carrier_phase_factor, prior_factor, pseudorange_factor, MotionKind, MotionModel,
    SatelliteObservation,
};
use crate::robust::{augment_with_switches, MixtureComponent, RobustKernel, SwitchConfig};
use crate::state::{EpochState, Value, Values};
use crate::window::EpochBatch;
use crate::{Error, Result};

pub const SHELL_RADIUS: f64 = 20_200_000.0;
pub const MAX_GDOP: f64 = 10.0;
pub const GEOMETRY_ATTEMPTS: usize = 100;
/// Clean-noise draws are truncated at this many sigmas.
pub const NOISE_TRUNCATION: f64 = 6.0;
const NOMINAL_ZENITH_TROPO: f64 = 2.3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", deny_unknown_fields))]
pub enum Trajectory {
    Static,
    ConstantVelocity { velocity: [f64; 3] },
    /// Piecewise-linear path through the points, evenly timed.
    Waypoints { points: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct OutlierModel {
    pub probability: f64,
    /// Uniform bias range in meters, `[min, max]` with `min > 0`.
    pub bias_range: [f64; 2],
    /// Raise the probability linearly below 30° elevation (doubling it at
    /// the horizon).
    pub elevation_dependent: bool,
}

impl Default for OutlierModel {
    fn default() -> Self {
        OutlierModel {
            probability: 0.0,
            bias_range: [20.0, 60.0],
            elevation_dependent: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioConfig {
    pub n_epochs: usize,
    /// Seconds between epochs.
    pub dt: f64,
    pub n_satellites: usize,
    pub trajectory: Trajectory,
    pub pseudorange_sigma: f64,
    pub phase_sigma: f64,
    /// Emit carrier-phase ranges alongside pseudoranges.
    pub carrier_phase: bool,
    /// m/√s
    pub clock_walk_sigma: f64,
    /// m/√s
    pub tropo_walk_sigma: f64,
    pub outlier: OutlierModel,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_epochs: 30,
            dt: 1.0,
            n_satellites: 8,
            trajectory: Trajectory::Static,
            pseudorange_sigma: 1.0,
            phase_sigma: 0.01,
            carrier_phase: false,
            clock_walk_sigma: 0.5,
            tropo_walk_sigma: 0.001,
            outlier: OutlierModel::default(),
            rng_seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_epochs < 1 {
            return Err(Error::InvalidConfig("n_epochs must be at least 1"));
        }
        if self.n_satellites < 4 {
            return Err(Error::InvalidConfig("at least 4 satellites are needed"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidConfig("dt must be positive"));
        }
        let sigmas = [
            self.pseudorange_sigma,
            self.phase_sigma,
            self.clock_walk_sigma,
            self.tropo_walk_sigma,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig("sigmas must be nonnegative"));
        }
        let o = &self.outlier;
        if !(0.0..=1.0).contains(&o.probability) {
            return Err(Error::InvalidConfig("outlier probability must lie in [0, 1]"));
        }
        if !(o.bias_range[0] > 0.0) || o.bias_range[0] > o.bias_range[1] {
            return Err(Error::InvalidConfig("outlier bias range must satisfy 0 < min <= max"));
        }
        if let Trajectory::Waypoints { points } = &self.trajectory {
            if points.is_empty() {
                return Err(Error::InvalidConfig("waypoint trajectory needs at least one point"));
            }
        }
        Ok(())
    }

    fn position_at(&self, epoch: usize) -> Vector3<f64> {
        match &self.trajectory {
            Trajectory::Static => Vector3::zeros(),
            Trajectory::ConstantVelocity { velocity } => Vector3::from(*velocity) * (epoch as f64 * self.dt),
            Trajectory::Waypoints { points } => {
                if points.len() == 1 || self.n_epochs == 1 {
                    return Vector3::from(points[0]);
                }
                let segments = (points.len() - 1) as f64;
                let u = epoch as f64 / (self.n_epochs - 1) as f64 * segments;
                let i = (u as usize).min(points.len() - 2);
                let t = u - i as f64;
                Vector3::from(points[i]) * (1.0 - t) + Vector3::from(points[i + 1]) * t
            }
        }
    }
}

/// Ground truth plus generated observations. `outlier_labels[k][i]` labels
/// `observations[k][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: Option<ScenarioConfig>,
    pub truth: Vec<EpochState>,
    pub observations: Vec<Vec<SatelliteObservation>>,
    pub outlier_labels: Vec<Vec<bool>>,
}

impl Scenario {
    pub fn n_epochs(&self) -> usize {
        self.truth.len()
    }

    /// Outlier label of the pseudorange of `sat` at `epoch`.
    pub fn label(&self, epoch: u32, sat: &SatId) -> Option<bool> {
        let k = epoch as usize;
        let i = self.observations.get(k)?.iter().position(|o| &o.sat_id == sat)?;
        Some(self.outlier_labels[k][i])
    }
}

fn elevation_azimuth_unit(elevation: f64, azimuth: f64) -> Vector3<f64> {
    Vector3::new(
        math::cos(elevation) * math::sin(azimuth),
        math::cos(elevation) * math::cos(azimuth),
        math::sin(elevation),
    )
}

/// Geometric dilution of precision for unit line-of-sight vectors.
pub fn gdop(lines_of_sight: &[Vector3<f64>]) -> Option<f64> {
    let mut hth = Matrix4::zeros();
    for u in lines_of_sight {
        let row = nalgebra::RowVector4::new(-u.x, -u.y, -u.z, 1.0);
        hth += row.transpose() * row;
    }
    let inv = hth.try_inverse()?;
    let trace = inv.trace();
    (trace > 0.0).then(|| math::sqrt(trace))
}

fn place_satellites(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vector3<f64>>> {
    let deg = PI / 180.0;
    for _ in 0..GEOMETRY_ATTEMPTS {
        let offset = rng.random::<f64>() * 2.0 * PI;
        let units: Vec<Vector3<f64>> = (0..n)
            .map(|i| {
                let az = offset + (i as f64 + 0.5 * rng.random::<f64>()) * 2.0 * PI / n as f64;
                let el = if i == 0 {
                    (60.0 + 25.0 * rng.random::<f64>()) * deg
                } else {
                    (15.0 + 60.0 * rng.random::<f64>()) * deg
                };
                elevation_azimuth_unit(el, az)
            })
            .collect();
        if gdop(&units).is_some_and(|g| g < MAX_GDOP) {
            return Ok(units.into_iter().map(|u| u * SHELL_RADIUS).collect());
        }
    }
    Err(Error::GeometryError(GEOMETRY_ATTEMPTS))
}

fn truncated_normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= NOISE_TRUNCATION {
            return z * sigma;
        }
    }
}

pub fn sat_id(index: usize) -> SatId {
    SatId(format!("G{:02}", index + 1))
}

/// Deterministic in `config.rng_seed`.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let satellites = place_satellites(config.n_satellites, &mut rng)?;
    let ambiguities: Vec<f64> = satellites
        .iter()
        .map(|_| (rng.random::<f64>() - 0.5) * 2000.0)
        .collect();

    let mut truth = Vec::with_capacity(config.n_epochs);
    let mut observations = Vec::with_capacity(config.n_epochs);
    let mut outlier_labels = Vec::with_capacity(config.n_epochs);
    let mut clock = (rng.random::<f64>() - 0.5) * 200.0;
    let mut tropo = NOMINAL_ZENITH_TROPO;
    let sqrt_dt = math::sqrt(config.dt);

    for k in 0..config.n_epochs {
        if k > 0 {
            let dc: f64 = StandardNormal.sample(&mut rng);
            let dz: f64 = StandardNormal.sample(&mut rng);
            clock += dc * config.clock_walk_sigma * sqrt_dt;
            tropo += dz * config.tropo_walk_sigma * sqrt_dt;
        }
        let mut state = EpochState::new(config.position_at(k), clock, tropo);
        if config.carrier_phase {
            for (i, b) in ambiguities.iter().enumerate() {
                state.ambiguities.insert(sat_id(i), *b);
            }
        }

        let mut epoch_obs = Vec::with_capacity(satellites.len());
        let mut labels = Vec::with_capacity(satellites.len());
        for (i, sat) in satellites.iter().enumerate() {
            let los = sat - state.position;
            let elevation = math::asin((los.z / los.norm()).clamp(-1.0, 1.0));
            let geometric = los.norm() + clock + models::mapping_function(elevation) * tropo;
            let mut pseudorange = geometric + truncated_normal(&mut rng, config.pseudorange_sigma);

            let o = &config.outlier;
            let ramp = if o.elevation_dependent && elevation < 30.0 * PI / 180.0 {
                2.0 - elevation / (30.0 * PI / 180.0)
            } else {
                1.0
            };
            let hit = rng.random::<f64>() < (o.probability * ramp).min(1.0);
            if hit {
                pseudorange += o.bias_range[0] + rng.random::<f64>() * (o.bias_range[1] - o.bias_range[0]);
            }
            let phase = config
                .carrier_phase
                .then(|| geometric + ambiguities[i] + truncated_normal(&mut rng, config.phase_sigma));
            epoch_obs.push(SatelliteObservation::new(sat_id(i), *sat, pseudorange, phase, elevation)?);
            labels.push(hit);
        }
        truth.push(state);
        observations.push(epoch_obs);
        outlier_labels.push(labels);
    }

    Ok(Scenario {
        config: Some(config.clone()),
        truth,
        observations,
        outlier_labels,
    })
}

/// Kernel choice for the measurement factors.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum KernelConfig {
    #[default]
    L2,
    Huber { delta: f64 },
    Cauchy { c: f64 },
    Dcs { phi: f64 },
    MaxMixture { components: Vec<MixtureComponent> },
    Gnc { c: f64 },
    Switch(SwitchConfig),
}

impl KernelConfig {
    pub fn kernel(&self) -> RobustKernel {
        match self {
            KernelConfig::L2 | KernelConfig::Switch(_) => RobustKernel::L2,
            KernelConfig::Huber { delta } => RobustKernel::Huber { delta: *delta },
            KernelConfig::Cauchy { c } => RobustKernel::Cauchy { c: *c },
            KernelConfig::Dcs { phi } => RobustKernel::Dcs { phi: *phi },
            KernelConfig::MaxMixture { components } => RobustKernel::MaxMixture(components.clone()),
            KernelConfig::Gnc { c } => RobustKernel::Gnc { c: *c },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelConfig::Switch(_) => "switch",
            other => other.kernel().name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MotionChoice {
    #[default]
    RandomWalk,
    /// Use the scenario's known velocity when the trajectory has one.
    ConstantVelocity,
}

/// How a scenario is turned into a graph.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GraphOptions {
    /// Set by the caller's estimator configuration, never read from a file.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub kernel: KernelConfig,
    pub prior_position_sigma: f64,
    pub prior_clock_sigma: f64,
    pub prior_tropo_sigma: f64,
    /// Per-axis standard deviation of the initial-guess perturbation.
    pub init_position_noise: f64,
    pub init_clock_noise: f64,
    pub init_tropo_noise: f64,
    /// Seed for the initial-guess perturbation; defaults to the scenario seed.
    pub init_seed: Option<u64>,
    /// Measurement sigmas; default to the scenario's.
    pub pseudorange_sigma: Option<f64>,
    pub phase_sigma: Option<f64>,
    /// Lower bound applied to every noise sigma so zero-noise scenarios
    /// still give SPD noise models.
    pub sigma_floor: f64,
    /// m/√s
    pub position_walk_sigma: f64,
    pub clock_walk_sigma: Option<f64>,
    pub tropo_walk_sigma: Option<f64>,
    pub ambiguity_sigma: f64,
    pub motion: MotionChoice,
    pub use_carrier_phase: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            kernel: KernelConfig::L2,
            prior_position_sigma: 100.0,
            prior_clock_sigma: 100.0,
            prior_tropo_sigma: 0.5,
            init_position_noise: 30.0,
            init_clock_noise: 30.0,
            init_tropo_noise: 0.0,
            init_seed: None,
            pseudorange_sigma: None,
            phase_sigma: None,
            sigma_floor: 1e-3,
            position_walk_sigma: 1.0,
            clock_walk_sigma: None,
            tropo_walk_sigma: None,
            ambiguity_sigma: models::DEFAULT_AMBIGUITY_SIGMA,
            motion: MotionChoice::RandomWalk,
            use_carrier_phase: true,
        }
    }
}

/// Graph, initial estimate and the switch keys added by augmentation.
#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: FactorGraph,
    pub initial: Values,
    pub switches: Vec<VariableKey>,
}

impl GraphBuild {
    /// Splits the graph into per-epoch batches for fixed-lag smoothing: each
    /// factor goes with the newest epoch it touches.
    pub fn epoch_batches(&self) -> Vec<EpochBatch> {
        let mut batches: BTreeMap<u32, EpochBatch> = BTreeMap::new();
        for (key, value) in self.initial.iter() {
            let b = batches.entry(key.epoch()).or_default();
            b.epoch = key.epoch();
            b.variables.push((key.clone(), value.clone()));
        }
        for f in self.graph.factors() {
            let newest = f.variables().iter().map(|k| k.epoch()).max().unwrap_or(0);
            batches.entry(newest).or_default().factors.push(f.clone());
        }
        batches.into_values().collect()
    }
}

impl GraphOptions {
    fn floor(&self, sigma: f64) -> f64 {
        sigma.max(self.sigma_floor)
    }

    /// Motion model used between consecutive epochs of `scenario`.
    pub fn motion_model(&self, scenario: &Scenario) -> Result<MotionModel> {
        let cfg = scenario.config.as_ref();
        let dt = cfg.map_or(1.0, |c| c.dt);
        let clock = self
            .clock_walk_sigma
            .or(cfg.map(|c| c.clock_walk_sigma))
            .unwrap_or(1.0);
        let tropo = self
            .tropo_walk_sigma
            .or(cfg.map(|c| c.tropo_walk_sigma))
            .unwrap_or(0.01);
        let pos = self.floor(self.position_walk_sigma);
        let mut model = MotionModel::random_walk([pos, pos, pos, self.floor(clock), self.floor(tropo)], dt)?
            .with_ambiguity_sigma(self.floor(self.ambiguity_sigma));
        if let (MotionChoice::ConstantVelocity, Some(ScenarioConfig {
            trajectory: Trajectory::ConstantVelocity { velocity },
            ..
        })) = (self.motion, cfg)
        {
            model.kind = MotionKind::ConstantVelocity {
                velocity: Vector3::from(*velocity),
            };
        }
        Ok(model)
    }

    pub fn measurement_sigmas(&self, scenario: &Scenario) -> (f64, f64) {
        let cfg = scenario.config.as_ref();
        let code = self
            .pseudorange_sigma
            .or(cfg.map(|c| c.pseudorange_sigma))
            .unwrap_or(1.0);
        let phase = self.phase_sigma.or(cfg.map(|c| c.phase_sigma)).unwrap_or(0.01);
        (self.floor(code), self.floor(phase))
    }

    /// Perturbed initial guesses, one per epoch.
    pub fn initial_states(&self, scenario: &Scenario, seed: u64) -> Vec<EpochState> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.init_seed.unwrap_or(seed) ^ 0x5eed_1417);
        scenario
            .truth
            .iter()
            .map(|t| {
                let mut n = || -> f64 { StandardNormal.sample(&mut rng) };
                let dp = Vector3::new(n(), n(), n()) * self.init_position_noise;
                let dc = n() * self.init_clock_noise;
                let dz = n() * self.init_tropo_noise;
                // ambiguities are created from the first phase measurement
                EpochState::new(t.position + dp, t.clock_bias + dc, t.zenith_tropo + dz)
            })
            .collect()
    }
}

/// Builds the prior / motion / measurement topology for `scenario`.
pub fn to_graph(scenario: &Scenario, opts: &GraphOptions) -> Result<GraphBuild> {
    if scenario.truth.is_empty() {
        return Err(Error::InvalidConfig("scenario has no epochs"));
    }
    let seed = scenario.config.as_ref().map_or(0, |c| c.rng_seed);
    let initial_states = opts.initial_states(scenario, seed);
    let motion = opts.motion_model(scenario)?;
    let (code_sigma, phase_sigma) = opts.measurement_sigmas(scenario);
    let kernel = opts.kernel.kernel();

    let mut graph = FactorGraph::new();
    let mut measurements: Vec<FactorId> = Vec::new();
    for (k, init) in initial_states.iter().enumerate() {
        let epoch = k as u32;
        let key = VariableKey::epoch_state(epoch);
        graph.add_variable(key.clone(), init.clone())?;
        if k == 0 {
            let p = opts.prior_position_sigma;
            let c = opts.prior_clock_sigma;
            let z = opts.prior_tropo_sigma;
            let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![
                p * p,
                p * p,
                p * p,
                c * c,
                z * z
            ]));
            graph.add_factor(prior_factor(key.clone(), init.clone(), cov)?)?;
        } else {
            graph.add_factor(between_factor(
                VariableKey::epoch_state(epoch - 1),
                key.clone(),
                motion.clone(),
            )?)?;
        }
        for obs in &scenario.observations[k] {
            measurements.push(graph.add_factor(pseudorange_factor(
                key.clone(),
                obs.clone(),
                code_sigma,
                kernel.clone(),
            )?)?);
            if opts.use_carrier_phase && obs.carrier_phase_range.is_some() {
                measurements.push(graph.add_factor(carrier_phase_factor(
                    key.clone(),
                    obs.clone(),
                    phase_sigma,
                    kernel.clone(),
                )?)?);
            }
        }
    }

    let switches = match &opts.kernel {
        KernelConfig::Switch(cfg) => augment_with_switches(&mut graph, &measurements, cfg)?,
        _ => Vec::new(),
    };
    let initial = graph
        .variables()
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect::<Values>();
    debug_assert!(initial.iter().all(|(_, v)| matches!(v, Value::Epoch(_) | Value::Scalar(_))));
    Ok(GraphBuild {
        graph,
        initial,
        switches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::FactorKind;

    fn count(g: &FactorGraph, kind: FactorKind) -> usize {
        g.factors().iter().filter(|f| f.kind() == kind).count()
    }

    #[test]
    fn graph_topology_counts() {
        let one = generate(&ScenarioConfig {
            n_epochs: 1,
            n_satellites: 4,
            ..Default::default()
        })
        .unwrap();
        let b = to_graph(&one, &GraphOptions::default()).unwrap();
        assert_eq!(count(&b.graph, FactorKind::Prior), 1);
        assert_eq!(count(&b.graph, FactorKind::Pseudorange), 4);
        assert_eq!(count(&b.graph, FactorKind::Between), 0);

        let three = generate(&ScenarioConfig {
            n_epochs: 3,
            ..Default::default()
        })
        .unwrap();
        let b = to_graph(&three, &GraphOptions::default()).unwrap();
        assert_eq!(count(&b.graph, FactorKind::Between), 2);

        let opts = GraphOptions {
            kernel: KernelConfig::Switch(SwitchConfig::default()),
            ..Default::default()
        };
        let b = to_graph(&three, &opts).unwrap();
        let n_meas = count(&b.graph, FactorKind::Pseudorange);
        assert_eq!(b.switches.len(), n_meas);
        assert_eq!(count(&b.graph, FactorKind::SwitchPrior), n_meas);
        assert_eq!(b.graph.variables().keys().filter(|k| k.is_switch()).count(), n_meas);
    }

    #[test]
    fn generation_is_deterministic_and_labelled() {
        let cfg = ScenarioConfig {
            outlier: OutlierModel {
                probability: 0.3,
                ..Default::default()
            },
            carrier_phase: true,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let clean = generate(&ScenarioConfig::default()).unwrap();
        assert!(clean.outlier_labels.iter().flatten().all(|l| !l));

        let sigma = cfg.pseudorange_sigma;
        let mut outliers = 0;
        for (k, epoch) in a.observations.iter().enumerate() {
            for (i, obs) in epoch.iter().enumerate() {
                let model = models::pseudorange_predict(&a.truth[k], obs).unwrap();
                let dev = obs.pseudorange - model;
                if a.outlier_labels[k][i] {
                    outliers += 1;
                    assert!(dev >= cfg.outlier.bias_range[0] - NOISE_TRUNCATION * sigma);
                } else {
                    assert!(dev.abs() <= NOISE_TRUNCATION * sigma);
                }
            }
        }
        assert!(outliers > 0);
    }

    #[test]
    fn geometry_is_well_conditioned() {
        for seed in 0..20 {
            let s = generate(&ScenarioConfig {
                rng_seed: seed,
                n_satellites: 4,
                ..Default::default()
            })
            .unwrap();
            let units: Vec<_> = s.observations[0]
                .iter()
                .map(|o| (o.sat_position - s.truth[0].position).normalize())
                .collect();
            assert!(gdop(&units).unwrap() < MAX_GDOP);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = ScenarioConfig {
            n_satellites: 3,
            ..Default::default()
        };
        assert!(generate(&bad).is_err());
        let bad = ScenarioConfig {
            outlier: OutlierModel {
                probability: 1.5,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(generate(&bad).is_err());
    }
}
