//! TOML run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use gnss_fgo_core::robust::GncSchedule;
use gnss_fgo_core::sim::{GraphOptions, KernelConfig, ScenarioConfig};
use gnss_fgo_core::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where the scenario comes from: generated in place or read from files
/// written by `gnss-fgo generate`. Exactly one must be set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSource {
    pub generate: Option<ScenarioConfig>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator {
    #[default]
    Batch,
    FixedLag {
        lag: usize,
    },
    Ekf,
    Iekf {
        iterations: usize,
    },
}

impl Estimator {
    pub fn name(&self) -> String {
        match self {
            Estimator::Batch => "batch".into(),
            Estimator::FixedLag { lag } => format!("fixed_lag({lag})"),
            Estimator::Ekf => "ekf".into(),
            Estimator::Iekf { iterations } => format!("iekf({iterations})"),
        }
    }

    pub fn is_filter(&self) -> bool {
        matches!(self, Estimator::Ekf | Estimator::Iekf { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    #[default]
    GaussNewton,
    LevenbergMarquardt,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Label used in comparison tables; defaults to `<estimator>-<kernel>`.
    #[serde(default)]
    pub name: Option<String>,
    pub scenario: ScenarioSource,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub solver: SolverChoice,
    #[serde(default)]
    pub solver_options: SolverOptions,
    #[serde(default)]
    pub gnc: GncSchedule,
    #[serde(default)]
    pub graph: GraphOptions,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config = Self::from_toml(&text, path)?;
        // scenario paths are relative to the config file
        if let (Some(p), Some(dir)) = (&config.scenario.path, path.parent()) {
            if p.is_relative() {
                config.scenario.path = Some(dir.join(p));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.scenario.generate, &self.scenario.path) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "scenario: set exactly one of `generate` and `path`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "scenario: one of `generate` or `path` is required".into(),
                ))
            }
            (Some(g), None) => g
                .validate()
                .map_err(|e| CliError::Config(format!("scenario.generate: {e}")))?,
            (None, Some(_)) => {}
        }
        match self.estimator {
            Estimator::FixedLag { lag } if lag < 1 => {
                return Err(CliError::Config("estimator.lag must be at least 1".into()))
            }
            Estimator::Iekf { iterations } if iterations < 1 => {
                return Err(CliError::Config("estimator.iterations must be at least 1".into()))
            }
            _ => {}
        }
        self.kernel
            .kernel()
            .validate()
            .map_err(|e| CliError::Config(format!("kernel: {e}")))?;
        self.solver_options
            .validate()
            .map_err(|e| CliError::Config(format!("solver_options: {e}")))?;
        self.gnc
            .validate()
            .map_err(|e| CliError::Config(format!("gnc: {e}")))?;
        Ok(())
    }

    /// Replaces the seed of a generated scenario and of the initial-guess
    /// perturbation.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(g) = &mut self.scenario.generate {
            g.rng_seed = seed;
        }
        self.graph.init_seed = Some(seed);
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.estimator.name(), self.kernel.name()))
    }

    pub fn graph_options(&self) -> GraphOptions {
        GraphOptions {
            kernel: self.kernel.clone(),
            ..self.graph.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_toml(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = parse("[scenario.generate]\nn_epochs = 5\n").unwrap();
        assert_eq!(c.estimator, Estimator::Batch);
        assert_eq!(c.kernel, KernelConfig::L2);
        assert_eq!(c.scenario.generate.unwrap().n_epochs, 5);
    }

    #[test]
    fn tagged_sections_parse() {
        let c = parse(
            r#"
[scenario.generate]
rng_seed = 4
[scenario.generate.outlier]
probability = 0.2
[estimator]
type = "fixed_lag"
lag = 3
[kernel]
type = "max_mixture"
components = [{ weight = 0.8, variance = 1.0 }, { weight = 0.2, variance = 400.0 }]
"#,
        )
        .unwrap();
        assert_eq!(c.estimator, Estimator::FixedLag { lag: 3 });
        assert!(matches!(c.kernel, KernelConfig::MaxMixture { ref components } if components.len() == 2));

        let c = parse("[scenario.generate]\n[kernel]\ntype = \"switch\"\nprior_sigma = 0.2\n").unwrap();
        assert!(matches!(c.kernel, KernelConfig::Switch(ref s) if s.prior_sigma == 0.2));
    }

    #[test]
    fn unknown_keys_are_errors_with_location() {
        let err = parse("[scenario.generate]\nn_epoch = 5\n").unwrap_err().to_string();
        assert!(err.contains("n_epoch"), "{err}");
        assert!(err.contains("line 2"), "{err}");
        assert!(parse("[scenario.generate]\n[kernel]\ntype = \"huber\"\ndelta = 1.0\nc = 2.0\n").is_err());
        assert!(parse("bogus = 1\n[scenario.generate]\n").is_err());
        assert!(parse("[scenario.generate]\n[graph]\nkernel = \"l2\"\n").is_err());
    }

    #[test]
    fn scenario_source_must_be_unique() {
        assert!(matches!(parse("[scenario]\n"), Err(CliError::Config(_))));
        assert!(matches!(
            parse("[scenario]\npath = \"x\"\n[scenario.generate]\n"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(
            parse("[scenario.generate]\nn_satellites = 3\n"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            parse("[scenario.generate]\n[kernel]\ntype = \"huber\"\ndelta = -1.0\n"),
            Err(CliError::Config(_))
        ));
    }
}
