//! Factor vertices: each one is a Gaussian constraint on a few variables
//! with an optional robust-kernel binding.

use alloc::vec::Vec;
use core::fmt;
use nalgebra::{DMatrix, DVector};

use crate::key::{VariableKey, VariableKind};
use crate::models::{self, MotionKind, MotionModel, SatelliteObservation};
use crate::noise::Gaussian;
use crate::robust::RobustKernel;
use crate::state::{Value, Values, CORE_DIM};
use crate::window::MarginalPrior;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FactorId(pub u64);

impl fmt::Display for FactorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Prior,
    Between,
    Pseudorange,
    CarrierPhase,
    SwitchPrior,
    SwitchTransition,
    /// Dense prior left behind by marginalization.
    Marginal,
}

impl FactorKind {
    pub fn name(self) -> &'static str {
        match self {
            FactorKind::Prior => "prior",
            FactorKind::Between => "between",
            FactorKind::Pseudorange => "pseudorange",
            FactorKind::CarrierPhase => "carrier-phase",
            FactorKind::SwitchPrior => "switch-prior",
            FactorKind::SwitchTransition => "switch-transition",
            FactorKind::Marginal => "marginal",
        }
    }

    pub fn is_measurement(self) -> bool {
        matches!(self, FactorKind::Pseudorange | FactorKind::CarrierPhase)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Model {
    Prior { mean: Value },
    Between { motion: MotionModel },
    Pseudorange { obs: SatelliteObservation },
    CarrierPhase { obs: SatelliteObservation },
    SwitchPrior { mean: f64 },
    SwitchTransition,
    Marginal(MarginalPrior),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub(crate) id: FactorId,
    pub(crate) model: Model,
    pub(crate) variables: Vec<VariableKey>,
    pub(crate) noise: Gaussian,
    pub(crate) kernel: RobustKernel,
}

/// Whitened residual and, optionally, one whitened Jacobian block per
/// variable of the factor.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub residual: DVector<f64>,
    pub jacobians: Option<Vec<DMatrix<f64>>>,
}

impl Factor {
    pub(crate) fn new(
        model: Model,
        variables: Vec<VariableKey>,
        noise: Gaussian,
        kernel: RobustKernel,
    ) -> Result<Self> {
        kernel.validate()?;
        let factor = Factor {
            id: FactorId::default(),
            model,
            variables,
            noise,
            kernel,
        };
        factor.check_arity()?;
        Ok(factor)
    }

    pub(crate) fn marginal(prior: MarginalPrior) -> Self {
        let rows = prior.sqrt_information.nrows();
        Factor {
            id: FactorId::default(),
            variables: prior.keys.clone(),
            model: Model::Marginal(prior),
            noise: Gaussian::unit(rows.max(1)),
            kernel: RobustKernel::L2,
        }
    }

    pub fn id(&self) -> FactorId {
        self.id
    }

    pub fn kind(&self) -> FactorKind {
        match self.model {
            Model::Prior { .. } => FactorKind::Prior,
            Model::Between { .. } => FactorKind::Between,
            Model::Pseudorange { .. } => FactorKind::Pseudorange,
            Model::CarrierPhase { .. } => FactorKind::CarrierPhase,
            Model::SwitchPrior { .. } => FactorKind::SwitchPrior,
            Model::SwitchTransition => FactorKind::SwitchTransition,
            Model::Marginal(_) => FactorKind::Marginal,
        }
    }

    pub fn variables(&self) -> &[VariableKey] {
        &self.variables
    }

    pub fn noise(&self) -> &Gaussian {
        &self.noise
    }

    pub fn kernel(&self) -> &RobustKernel {
        &self.kernel
    }

    pub fn set_kernel(&mut self, kernel: RobustKernel) -> Result<()> {
        kernel.validate()?;
        if matches!(kernel, RobustKernel::SwitchLinked(_)) != self.switch_key().is_some() {
            return Err(Error::KernelMisuse(
                "switch-linked kernels are set by switch augmentation",
            ));
        }
        self.kernel = kernel;
        Ok(())
    }

    /// The observation behind a measurement factor.
    pub fn observation(&self) -> Option<&SatelliteObservation> {
        match &self.model {
            Model::Pseudorange { obs } | Model::CarrierPhase { obs } => Some(obs),
            _ => None,
        }
    }

    pub fn marginal_prior(&self) -> Option<&MarginalPrior> {
        match &self.model {
            Model::Marginal(p) => Some(p),
            _ => None,
        }
    }

    /// The switch gating this measurement, if augmented.
    pub fn switch_key(&self) -> Option<&VariableKey> {
        if self.kind().is_measurement() && self.variables.len() == 2 {
            self.variables.get(1)
        } else {
            None
        }
    }

    pub fn epoch(&self) -> Option<u32> {
        self.variables.first().map(|k| k.epoch())
    }

    pub(crate) fn attach_switch(&mut self, key: VariableKey) {
        debug_assert!(self.kind().is_measurement() && self.variables.len() == 1);
        self.variables.push(key.clone());
        self.kernel = RobustKernel::SwitchLinked(key);
    }

    pub(crate) fn check_arity(&self) -> Result<()> {
        let kind = self.kind();
        let n = self.variables.len();
        let (ok, expected) = match kind {
            FactorKind::Prior | FactorKind::SwitchPrior => (n == 1, "1"),
            FactorKind::Between | FactorKind::SwitchTransition => (n == 2, "2"),
            FactorKind::Pseudorange | FactorKind::CarrierPhase => (n == 1 || n == 2, "1 or 2"),
            FactorKind::Marginal => (n >= 1, "at least 1"),
        };
        if !ok {
            return Err(Error::ArityError {
                kind: kind.name(),
                expected,
                got: n,
            });
        }
        let kinds_ok = match kind {
            FactorKind::Between => self.variables.iter().all(|k| k.kind() == VariableKind::EpochState),
            FactorKind::SwitchPrior | FactorKind::SwitchTransition => {
                self.variables.iter().all(|k| k.is_switch())
            }
            FactorKind::Pseudorange | FactorKind::CarrierPhase => {
                self.variables[0].kind() == VariableKind::EpochState
                    && self.variables.get(1).is_none_or(|k| k.is_switch())
            }
            FactorKind::Prior | FactorKind::Marginal => true,
        };
        if !kinds_ok {
            return Err(Error::ArityError {
                kind: kind.name(),
                expected: "variables of matching kind",
                got: n,
            });
        }
        Ok(())
    }

    fn value<'a>(&self, values: &'a Values, i: usize) -> Result<&'a Value> {
        let key = &self.variables[i];
        values.get(key).ok_or_else(|| Error::IncompleteEstimate(key.clone()))
    }

    fn epoch_value<'a>(&self, values: &'a Values, i: usize) -> Result<&'a crate::EpochState> {
        self.value(values, i)?
            .as_epoch()
            .ok_or_else(|| Error::StateMismatch(self.variables[i].clone()))
    }

    fn scalar_value(&self, values: &Values, i: usize) -> Result<f64> {
        self.value(values, i)?
            .as_scalar()
            .ok_or_else(|| Error::StateMismatch(self.variables[i].clone()))
    }

    /// Whitened residual only.
    pub fn residual(&self, values: &Values) -> Result<DVector<f64>> {
        Ok(self.evaluate(values, false)?.residual)
    }

    pub(crate) fn evaluate(&self, values: &Values, with_jacobian: bool) -> Result<Evaluation> {
        match &self.model {
            Model::Pseudorange { obs } => self.eval_measurement(values, obs, false, with_jacobian),
            Model::CarrierPhase { obs } => self.eval_measurement(values, obs, true, with_jacobian),
            Model::Prior { mean } => {
                let x = self.value(values, 0)?;
                let map = x
                    .component_map(mean)
                    .ok_or_else(|| Error::StateMismatch(self.variables[0].clone()))?;
                let delta = x.local(mean).expect("component map exists");
                let residual = self.noise.whiten(&(-delta));
                let jacobians = with_jacobian.then(|| {
                    let e = embedding(&map, x.dim());
                    alloc::vec![self.noise.whiten_jacobian(&(-e))]
                });
                Ok(Evaluation { residual, jacobians })
            }
            Model::Between { motion } => self.eval_between(values, motion, with_jacobian),
            Model::SwitchPrior { mean } => {
                let s = self.scalar_value(values, 0)?;
                let w = self.noise.sqrt_information()[(0, 0)];
                Ok(Evaluation {
                    residual: DVector::from_element(1, w * (mean - s)),
                    jacobians: with_jacobian.then(|| alloc::vec![DMatrix::from_element(1, 1, -w)]),
                })
            }
            Model::SwitchTransition => {
                let prev = self.scalar_value(values, 0)?;
                let next = self.scalar_value(values, 1)?;
                let w = self.noise.sqrt_information()[(0, 0)];
                Ok(Evaluation {
                    residual: DVector::from_element(1, w * (next - prev)),
                    jacobians: with_jacobian.then(|| {
                        alloc::vec![
                            DMatrix::from_element(1, 1, -w),
                            DMatrix::from_element(1, 1, w)
                        ]
                    }),
                })
            }
            Model::Marginal(prior) => self.eval_marginal(values, prior, with_jacobian),
        }
    }

    fn eval_measurement(
        &self,
        values: &Values,
        obs: &SatelliteObservation,
        phase: bool,
        with_jacobian: bool,
    ) -> Result<Evaluation> {
        let state = self.epoch_value(values, 0)?;
        let (error, row) = models::measurement_error(state, obs, phase, &self.variables[0], with_jacobian)?;
        let w = self.noise.sqrt_information()[(0, 0)];
        let r = w * error;
        let jac_x = row.map(|row| DMatrix::from_iterator(1, row.len(), row.into_iter().map(|v| v * w)));
        match self.switch_key() {
            None => Ok(Evaluation {
                residual: DVector::from_element(1, r),
                jacobians: jac_x.map(|j| alloc::vec![j]),
            }),
            Some(_) => {
                let s = self.scalar_value(values, 1)?;
                let (psi, dpsi) = crate::robust::switch_scale(s);
                Ok(Evaluation {
                    residual: DVector::from_element(1, psi * r),
                    jacobians: jac_x.map(|j| alloc::vec![j * psi, DMatrix::from_element(1, 1, dpsi * r)]),
                })
            }
        }
    }

    fn eval_between(&self, values: &Values, motion: &MotionModel, with_jacobian: bool) -> Result<Evaluation> {
        let prev = self.epoch_value(values, 0)?;
        let next = self.epoch_value(values, 1)?;
        let predicted = motion.predict(prev);
        let common: Vec<_> = prev
            .ambiguities
            .keys()
            .filter(|s| next.ambiguities.contains_key(*s))
            .collect();
        let rows = CORE_DIM + common.len();
        let mut error = DVector::zeros(rows);
        let d = next.position - predicted.position;
        error.fixed_rows_mut::<3>(0).copy_from(&d);
        error[3] = next.clock_bias - predicted.clock_bias;
        error[4] = next.zenith_tropo - predicted.zenith_tropo;
        let amb_w = 1.0 / motion.ambiguity_sigma;
        let core_w = self.noise.sqrt_information();
        let mut residual = DVector::zeros(rows);
        residual.rows_mut(0, CORE_DIM).copy_from(&(core_w * error.rows(0, CORE_DIM)));
        for (i, sat) in common.iter().enumerate() {
            residual[CORE_DIM + i] = amb_w * (next.ambiguities[*sat] - prev.ambiguities[*sat]);
        }
        let jacobians = with_jacobian.then(|| {
            let mut jn = DMatrix::zeros(rows, next.dim());
            let mut jp = DMatrix::zeros(rows, prev.dim());
            jn.view_mut((0, 0), (CORE_DIM, CORE_DIM)).copy_from(core_w);
            jp.view_mut((0, 0), (CORE_DIM, CORE_DIM)).copy_from(&(-core_w));
            for (i, sat) in common.iter().enumerate() {
                jn[(CORE_DIM + i, next.ambiguity_index(sat).unwrap())] = amb_w;
                jp[(CORE_DIM + i, prev.ambiguity_index(sat).unwrap())] = -amb_w;
            }
            alloc::vec![jp, jn]
        });
        debug_assert!(matches!(motion.kind, MotionKind::RandomWalk | MotionKind::ConstantVelocity { .. }));
        Ok(Evaluation { residual, jacobians })
    }

    fn eval_marginal(&self, values: &Values, prior: &MarginalPrior, with_jacobian: bool) -> Result<Evaluation> {
        let n: usize = prior.linearization_point.iter().map(Value::dim).sum();
        let mut delta = DVector::zeros(n);
        let mut maps = Vec::with_capacity(prior.keys.len());
        let mut offset = 0;
        for (i, base) in prior.linearization_point.iter().enumerate() {
            let x = self.value(values, i)?;
            let local = x
                .local(base)
                .ok_or_else(|| Error::StateMismatch(self.variables[i].clone()))?;
            delta.rows_mut(offset, base.dim()).copy_from(&local);
            maps.push((offset, x.component_map(base).unwrap(), x.dim()));
            offset += base.dim();
        }
        let residual = &prior.sqrt_information * delta + &prior.rhs;
        let jacobians = with_jacobian.then(|| {
            maps.iter()
                .map(|(offset, map, dim)| {
                    let cols = prior.sqrt_information.columns(*offset, map.len());
                    cols * embedding(map, *dim)
                })
                .collect()
        });
        Ok(Evaluation { residual, jacobians })
    }
}

// Selection matrix E with E[i, map[i]] = 1.
fn embedding(map: &[usize], dim: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(map.len(), dim);
    for (i, &j) in map.iter().enumerate() {
        e[(i, j)] = 1.0;
    }
    e
}
