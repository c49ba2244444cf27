//! Variable values and their flat tangent representation.
//!
//! Every state is vector-valued, so the retraction is plain addition. An
//! epoch state flattens to `[e, n, u, clock, tropo, ambiguities...]` with
//! ambiguities in satellite-id order.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use nalgebra::{DVector, Vector3};

use crate::key::{SatId, VariableKey};

/// Number of tangent components that every epoch state carries.
pub const CORE_DIM: usize = 5;
pub const CLOCK: usize = 3;
pub const TROPO: usize = 4;

/// Per-epoch receiver state, all quantities in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochState {
    /// Local ENU position.
    pub position: Vector3<f64>,
    /// Receiver clock bias times the speed of light.
    pub clock_bias: f64,
    pub zenith_tropo: f64,
    /// Carrier-phase ambiguity per tracked satellite.
    pub ambiguities: BTreeMap<SatId, f64>,
}

impl Default for EpochState {
    fn default() -> Self {
        Self::new(Vector3::zeros(), 0.0, 0.0)
    }
}

impl EpochState {
    pub fn new(position: Vector3<f64>, clock_bias: f64, zenith_tropo: f64) -> Self {
        EpochState {
            position,
            clock_bias,
            zenith_tropo,
            ambiguities: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        CORE_DIM + self.ambiguities.len()
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.clock_bias.is_finite()
            && self.zenith_tropo.is_finite()
            && self.ambiguities.values().all(|v| v.is_finite())
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v.fixed_rows_mut::<3>(0).copy_from(&self.position);
        v[CLOCK] = self.clock_bias;
        v[TROPO] = self.zenith_tropo;
        for (i, b) in self.ambiguities.values().enumerate() {
            v[CORE_DIM + i] = *b;
        }
        v
    }

    /// Tangent index of the ambiguity for `sat`.
    pub fn ambiguity_index(&self, sat: &SatId) -> Option<usize> {
        self.ambiguities.keys().position(|s| s == sat).map(|i| CORE_DIM + i)
    }

    pub fn retract(&mut self, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.dim());
        self.position += Vector3::new(delta[0], delta[1], delta[2]);
        self.clock_bias += delta[CLOCK];
        self.zenith_tropo += delta[TROPO];
        for (b, d) in self.ambiguities.values_mut().zip(&delta[CORE_DIM..]) {
            *b += d;
        }
    }

    /// Positions in `self`'s tangent of each component of `layout`'s tangent,
    /// or `None` when `self` lacks an ambiguity that `layout` tracks.
    pub fn component_map(&self, layout: &EpochState) -> Option<Vec<usize>> {
        let mut map: Vec<usize> = (0..CORE_DIM).collect();
        let mut own = self.ambiguities.keys().enumerate();
        for sat in layout.ambiguities.keys() {
            let (i, _) = own.by_ref().find(|(_, s)| *s == sat)?;
            map.push(CORE_DIM + i);
        }
        Some(map)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Epoch(EpochState),
    /// Scalar variable, e.g. a switch.
    Scalar(f64),
}

impl Value {
    pub fn dim(&self) -> usize {
        match self {
            Value::Epoch(s) => s.dim(),
            Value::Scalar(_) => 1,
        }
    }

    pub fn to_vector(&self) -> DVector<f64> {
        match self {
            Value::Epoch(s) => s.to_vector(),
            Value::Scalar(v) => DVector::from_element(1, *v),
        }
    }

    pub fn retract(&mut self, delta: &[f64]) {
        match self {
            Value::Epoch(s) => s.retract(delta),
            Value::Scalar(v) => *v += delta[0],
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Value::Epoch(s) => s.is_finite(),
            Value::Scalar(v) => v.is_finite(),
        }
    }

    pub fn as_epoch(&self) -> Option<&EpochState> {
        match self {
            Value::Epoch(s) => Some(s),
            Value::Scalar(_) => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(v) => Some(*v),
            Value::Epoch(_) => None,
        }
    }

    /// See [`EpochState::component_map`]; scalars map onto themselves.
    pub fn component_map(&self, layout: &Value) -> Option<Vec<usize>> {
        match (self, layout) {
            (Value::Epoch(a), Value::Epoch(b)) => a.component_map(b),
            (Value::Scalar(_), Value::Scalar(_)) => Some(alloc::vec![0]),
            _ => None,
        }
    }

    /// `self - base` over the components of `base`.
    pub fn local(&self, base: &Value) -> Option<DVector<f64>> {
        let map = self.component_map(base)?;
        let own = self.to_vector();
        let reference = base.to_vector();
        Some(DVector::from_iterator(
            map.len(),
            map.iter().zip(reference.iter()).map(|(&i, r)| own[i] - r),
        ))
    }
}

impl From<EpochState> for Value {
    fn from(s: EpochState) -> Self {
        Value::Epoch(s)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Scalar(v)
    }
}

/// An assignment of values to variable keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Values(BTreeMap<VariableKey, Value>);

impl Values {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: VariableKey, value: impl Into<Value>) -> Option<Value> {
        self.0.insert(key, value.into())
    }

    pub fn get(&self, key: &VariableKey) -> Option<&Value> {
        self.0.get(key)
    }

    pub fn get_mut(&mut self, key: &VariableKey) -> Option<&mut Value> {
        self.0.get_mut(key)
    }

    pub fn remove(&mut self, key: &VariableKey) -> Option<Value> {
        self.0.remove(key)
    }

    pub fn contains(&self, key: &VariableKey) -> bool {
        self.0.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VariableKey, &Value)> {
        self.0.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &VariableKey> {
        self.0.keys()
    }

    pub fn epoch(&self, epoch: u32) -> Option<&EpochState> {
        self.get(&VariableKey::epoch_state(epoch))?.as_epoch()
    }

    pub fn scalar(&self, key: &VariableKey) -> Option<f64> {
        self.get(key)?.as_scalar()
    }
}

impl FromIterator<(VariableKey, Value)> for Values {
    fn from_iter<T: IntoIterator<Item = (VariableKey, Value)>>(iter: T) -> Self {
        Values(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Values {
    type Item = (&'a VariableKey, &'a Value);
    type IntoIter = alloc::collections::btree_map::Iter<'a, VariableKey, Value>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_ambiguities(sats: &[&str]) -> EpochState {
        let mut s = EpochState::new(Vector3::new(1.0, 2.0, 3.0), 4.0, 5.0);
        for (i, sat) in sats.iter().enumerate() {
            s.ambiguities.insert(SatId::from(*sat), 10.0 + i as f64);
        }
        s
    }

    #[test]
    fn flattened_dimension_counts_ambiguities() {
        assert_eq!(EpochState::default().dim(), 5);
        assert_eq!(with_ambiguities(&["G01", "G05"]).dim(), 7);
    }

    #[test]
    fn retract_adds_componentwise() {
        let mut s = with_ambiguities(&["G01"]);
        s.retract(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(s.to_vector().as_slice(), &[2.0, 3.0, 4.0, 5.0, 6.0, 11.0]);
    }

    #[test]
    fn component_map_skips_untracked_ambiguities() {
        let full = with_ambiguities(&["G01", "G03", "G05"]);
        let sub = with_ambiguities(&["G03", "G05"]);
        assert_eq!(full.component_map(&sub).unwrap(), [0, 1, 2, 3, 4, 6, 7]);
        assert!(sub.component_map(&full).is_none());
        let d = Value::Epoch(full).local(&Value::Epoch(sub)).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
    }
}
