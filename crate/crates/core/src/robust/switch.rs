//! Switch-constraint augmentation.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::factor::FactorId;
use crate::graph::FactorGraph;
use crate::key::{SatId, VariableKey};
use crate::models::{switch_prior_factor, switch_transition_factor};
use crate::{Error, Result};

/// Defaults are a starting point; good values depend on the data set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SwitchConfig {
    pub prior_mean: f64,
    pub prior_sigma: f64,
    /// When set, switches of the same satellite in consecutive epochs are
    /// linked with this standard deviation.
    pub transition_sigma: Option<f64>,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        SwitchConfig {
            prior_mean: 1.0,
            prior_sigma: 0.1,
            transition_sigma: None,
        }
    }
}

/// Gates each target measurement with a switch variable `s` so its residual
/// becomes `Ψ(s)·r`, and anchors every switch with a prior.
///
/// Measurements of one satellite at one epoch share a switch. Returns the
/// switch keys that were created, in key order.
pub fn augment_with_switches(
    graph: &mut FactorGraph,
    targets: &[FactorId],
    config: &SwitchConfig,
) -> Result<Vec<VariableKey>> {
    let mut planned: BTreeMap<VariableKey, Vec<FactorId>> = BTreeMap::new();
    for id in targets {
        let factor = graph.factor(*id).ok_or(Error::UnknownFactor(*id))?;
        if !factor.kind().is_measurement() {
            return Err(Error::KernelMisuse("switches gate measurement factors only"));
        }
        if factor.switch_key().is_some() {
            return Err(Error::KernelMisuse("factor already carries a switch"));
        }
        let sat = factor.observation().expect("measurement").sat_id.clone();
        let key = VariableKey::switch(factor.epoch().expect("non-empty"), sat);
        planned.entry(key).or_default().push(*id);
    }

    let mut created = Vec::new();
    for (key, ids) in &planned {
        if !graph.variables().contains(key) {
            graph.add_variable(key.clone(), config.prior_mean)?;
            graph.add_factor(switch_prior_factor(key.clone(), config.prior_mean, config.prior_sigma)?)?;
            created.push(key.clone());
        }
        for id in ids {
            graph.factor_mut(*id).expect("checked").attach_switch(key.clone());
        }
    }

    if let Some(sigma) = config.transition_sigma {
        let mut by_sat: BTreeMap<SatId, Vec<u32>> = BTreeMap::new();
        for key in graph.variables().keys().filter(|k| k.is_switch()) {
            by_sat.entry(key.tag().expect("switch tag").clone()).or_default().push(key.epoch());
        }
        for key in &created {
            let sat = key.tag().expect("switch tag");
            let epochs = &by_sat[sat];
            let e = key.epoch();
            if e > 0 && epochs.contains(&(e - 1)) {
                let prev = VariableKey::switch(e - 1, sat.clone());
                graph.add_factor(switch_transition_factor(prev, key.clone(), sigma)?)?;
            }
            if epochs.contains(&(e + 1)) && !created.contains(&VariableKey::switch(e + 1, sat.clone())) {
                let next = VariableKey::switch(e + 1, sat.clone());
                graph.add_factor(switch_transition_factor(key.clone(), next, sigma)?)?;
            }
        }
    }
    Ok(created)
}
