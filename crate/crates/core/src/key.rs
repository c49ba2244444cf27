//! Variable identifiers.
//!
//! Keys order epoch-major with each epoch's receiver state ahead of its
//! switch variables, which is the column ordering used by the solver.

use alloc::string::String;
use core::fmt;

/// Satellite identifier such as `G07`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SatId(pub String);

impl SatId {
    pub fn new(id: impl Into<String>) -> Self {
        SatId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SatId {
    fn from(s: &str) -> Self {
        SatId(s.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariableKind {
    EpochState,
    SwitchVar,
}

/// Identifies one variable vertex of the graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariableKey {
    // field order defines the epoch-major ordering
    epoch: u32,
    kind: VariableKind,
    tag: Option<SatId>,
}

impl VariableKey {
    pub fn epoch_state(epoch: u32) -> Self {
        VariableKey {
            epoch,
            kind: VariableKind::EpochState,
            tag: None,
        }
    }

    /// A switch variable always carries the satellite it gates.
    pub fn switch(epoch: u32, sat: SatId) -> Self {
        VariableKey {
            epoch,
            kind: VariableKind::SwitchVar,
            tag: Some(sat),
        }
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn kind(&self) -> VariableKind {
        self.kind
    }

    pub fn tag(&self) -> Option<&SatId> {
        self.tag.as_ref()
    }

    pub fn is_switch(&self) -> bool {
        self.kind == VariableKind::SwitchVar
    }
}

impl fmt::Display for VariableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, &self.tag) {
            (VariableKind::EpochState, None) => write!(f, "x{}", self.epoch),
            (VariableKind::EpochState, Some(t)) => write!(f, "x{}:{}", self.epoch, t),
            (VariableKind::SwitchVar, Some(t)) => write!(f, "s{}:{}", self.epoch, t),
            (VariableKind::SwitchVar, None) => write!(f, "s{}", self.epoch),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn ordering_is_epoch_major_with_switches_after_state() {
        let keys: BTreeSet<_> = [
            VariableKey::switch(1, "G02".into()),
            VariableKey::epoch_state(1),
            VariableKey::switch(0, "G09".into()),
            VariableKey::epoch_state(0),
            VariableKey::switch(0, "G01".into()),
        ]
        .into_iter()
        .collect();
        let names: alloc::vec::Vec<_> = keys.iter().map(|k| alloc::format!("{k}")).collect();
        assert_eq!(names, ["x0", "s0:G01", "s0:G09", "x1", "s1:G02"]);
    }
}
