//! The complete binary tree `T^h_2`, instances of the tree evaluation
//! problem, and their evaluation.
//!
//! Nodes are numbered in heap order: the root is 1 and node `i` has children
//! `2i` and `2i + 1`. Values are 1-based, i.e. they live in `[k] = {1..k}`.
//!
//! An instance is stored as a flat vector of *slots*. Slot order is fixed:
//! leaf values by ascending node id first, then the function tables by
//! ascending node id with entries in `(x, y)` lexicographic order.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A value in `[k]`.
pub type Value = u8;

/// Largest supported `k`; sets over `[k]` are stored as `u32` bitmasks.
pub const MAX_K: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeShape {
    h: u32,
}

impl TreeShape {
    pub fn new(h: u32) -> Result<Self> {
        if h < 2 {
            return Err(Error::HeightTooSmall(h));
        }
        if h > 12 {
            return Err(Error::MalformedInstance(format!("height {h} is too large")));
        }
        Ok(Self { h })
    }

    pub fn height(&self) -> u32 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        (1usize << self.h) - 1
    }

    pub fn first_leaf(&self) -> usize {
        1usize << (self.h - 1)
    }

    pub fn leaf_count(&self) -> usize {
        self.first_leaf()
    }

    pub fn internal_count(&self) -> usize {
        self.first_leaf() - 1
    }

    pub fn contains(&self, node: usize) -> bool {
        node >= 1 && node <= self.node_count()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node >= self.first_leaf() && node <= self.node_count()
    }

    pub fn is_internal(&self, node: usize) -> bool {
        node >= 1 && node < self.first_leaf()
    }

    pub fn nodes(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.node_count()
    }

    pub fn leaves(&self) -> std::ops::RangeInclusive<usize> {
        self.first_leaf()..=self.node_count()
    }

    pub fn internals(&self) -> std::ops::Range<usize> {
        1..self.first_leaf()
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        (node > 1).then_some(node / 2)
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        self.is_internal(node).then_some((2 * node, 2 * node + 1))
    }

    pub fn sibling(&self, node: usize) -> Option<usize> {
        (node > 1).then_some(node ^ 1)
    }

    /// Depth of a node; the root has depth 0.
    pub fn depth(&self, node: usize) -> u32 {
        usize::BITS - 1 - node.leading_zeros()
    }

    /// Total number of slots `m = 2^{h-1} + (2^{h-1} - 1) k^2`.
    pub fn slot_count(&self, k: u32) -> usize {
        self.leaf_count() + self.internal_count() * (k as usize) * (k as usize)
    }

    /// Slot index of a query; panics on malformed queries (use
    /// [`QueryId::check`] first for untrusted input).
    pub fn slot(&self, k: u32, query: QueryId) -> usize {
        let k = k as usize;
        match query {
            QueryId::Leaf(i) => i - self.first_leaf(),
            QueryId::Func(i, x, y) => {
                self.leaf_count() + (i - 1) * k * k + (x as usize - 1) * k + (y as usize - 1)
            }
        }
    }

    /// Inverse of [`TreeShape::slot`].
    pub fn query_of_slot(&self, k: u32, slot: usize) -> QueryId {
        if slot < self.leaf_count() {
            return QueryId::Leaf(self.first_leaf() + slot);
        }
        let k = k as usize;
        let rest = slot - self.leaf_count();
        let node = rest / (k * k) + 1;
        let x = (rest % (k * k)) / k + 1;
        let y = rest % k + 1;
        QueryId::Func(node, x as Value, y as Value)
    }
}

/// A single input variable: a leaf value or one entry of a function table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueryId {
    Leaf(usize),
    Func(usize, Value, Value),
}

impl QueryId {
    pub fn node(&self) -> usize {
        match *self {
            QueryId::Leaf(i) | QueryId::Func(i, _, _) => i,
        }
    }

    pub fn check(&self, shape: TreeShape, k: u32) -> Result<()> {
        let ok = match *self {
            QueryId::Leaf(i) => shape.is_leaf(i),
            QueryId::Func(i, x, y) => {
                shape.is_internal(i) && in_range(x as u32, k) && in_range(y as u32, k)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::MalformedQuery(self.to_string()))
        }
    }
}

impl Serialize for QueryId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryId::Leaf(i) => write!(f, "v{i}"),
            QueryId::Func(i, x, y) => write!(f, "f{i}({x},{y})"),
        }
    }
}

pub(crate) fn in_range(value: u32, k: u32) -> bool {
    value >= 1 && value <= k
}

pub(crate) fn check_k(k: u32) -> Result<()> {
    if (2..=MAX_K).contains(&k) {
        Ok(())
    } else {
        Err(Error::BadK(k))
    }
}

/// A complete input to `TEP^h_2(k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TepInstance {
    shape: TreeShape,
    k: u32,
    slots: Vec<Value>,
}

impl TepInstance {
    pub fn from_slots(shape: TreeShape, k: u32, slots: Vec<Value>) -> Result<Self> {
        check_k(k)?;
        let m = shape.slot_count(k);
        if slots.len() != m {
            return Err(Error::MalformedInstance(format!(
                "expected {m} slots, got {}",
                slots.len()
            )));
        }
        if let Some(bad) = slots.iter().find(|&&v| !in_range(v as u32, k)) {
            return Err(Error::ValueOutOfRange { value: *bad as u32, k });
        }
        Ok(Self { shape, k, slots })
    }

    /// Builds an instance from leaf values (ascending leaf id) and tables
    /// (ascending internal id, each a `k x k` row-major array).
    pub fn new(h: u32, k: u32, leaves: &[Value], tables: &[Vec<Vec<Value>>]) -> Result<Self> {
        let shape = TreeShape::new(h)?;
        check_k(k)?;
        if leaves.len() != shape.leaf_count() {
            return Err(Error::MalformedInstance(format!(
                "expected {} leaf values, got {}",
                shape.leaf_count(),
                leaves.len()
            )));
        }
        if tables.len() != shape.internal_count() {
            return Err(Error::MalformedInstance(format!(
                "expected {} tables, got {}",
                shape.internal_count(),
                tables.len()
            )));
        }
        let mut slots = leaves.to_vec();
        for (idx, table) in tables.iter().enumerate() {
            if table.len() != k as usize || table.iter().any(|row| row.len() != k as usize) {
                return Err(Error::MalformedInstance(format!(
                    "table of node {} is not {k}x{k}",
                    idx + 1
                )));
            }
            slots.extend(table.iter().flatten().copied());
        }
        Self::from_slots(shape, k, slots)
    }

    /// Every leaf and table entry set to `value`.
    pub fn constant(h: u32, k: u32, value: Value) -> Result<Self> {
        let shape = TreeShape::new(h)?;
        check_k(k)?;
        Self::from_slots(shape, k, vec![value; shape.slot_count(k)])
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn height(&self) -> u32 {
        self.shape.h
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn slots(&self) -> &[Value] {
        &self.slots
    }

    pub fn m(&self) -> usize {
        self.slots.len()
    }

    pub fn value(&self, query: QueryId) -> Value {
        self.slots[self.shape.slot(self.k, query)]
    }

    pub fn leaf(&self, node: usize) -> Value {
        self.value(QueryId::Leaf(node))
    }

    pub fn table(&self, node: usize, x: Value, y: Value) -> Value {
        self.value(QueryId::Func(node, x, y))
    }

    /// Correct values of every node, bottom-up.
    pub fn evaluate(&self) -> NodeValues {
        let n = self.shape.node_count();
        let mut values = vec![0; n + 1];
        for node in (1..=n).rev() {
            values[node] = if self.shape.is_leaf(node) {
                self.leaf(node)
            } else {
                self.table(node, values[2 * node], values[2 * node + 1])
            };
        }
        NodeValues { values }
    }

    /// Returns a copy with a single slot replaced.
    pub fn perturb(&self, query: QueryId, value: Value) -> Result<Self> {
        query.check(self.shape, self.k)?;
        if !in_range(value as u32, self.k) {
            return Err(Error::ValueOutOfRange { value: value as u32, k: self.k });
        }
        let mut out = self.clone();
        out.slots[self.shape.slot(self.k, query)] = value;
        Ok(out)
    }

    /// The query `f_i(v_{2i}, v_{2i+1})` or `v_i` that carries node `i`'s
    /// correct value.
    pub fn thrifty_query(&self, values: &NodeValues, node: usize) -> QueryId {
        if self.shape.is_leaf(node) {
            QueryId::Leaf(node)
        } else {
            QueryId::Func(node, values.get(2 * node), values.get(2 * node + 1))
        }
    }

    /// Slot indices holding correct node values, indexed by node id.
    pub fn thrifty_slots(&self, values: &NodeValues) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.shape.node_count() + 1];
        for node in self.shape.nodes() {
            out[node] = self.shape.slot(self.k, self.thrifty_query(values, node));
        }
        out
    }
}

/// Correct values `v_i` of every node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeValues {
    values: Vec<Value>,
}

impl NodeValues {
    pub fn get(&self, node: usize) -> Value {
        self.values[node]
    }

    pub fn root(&self) -> Value {
        self.values[1]
    }

    /// Values by node id, index 0 unused.
    pub fn as_slice(&self) -> &[Value] {
        &self.values
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceRepr {
    h: u32,
    k: u32,
    leaves: Vec<Value>,
    tables: TablesRepr,
}

struct TablesRepr(BTreeMap<usize, Vec<Vec<Value>>>);

impl Serialize for TablesRepr {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (node, table) in &self.0 {
            map.serialize_entry(&node.to_string(), table)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for TablesRepr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<String, Vec<Vec<Value>>>::deserialize(deserializer)?;
        let mut out = BTreeMap::new();
        for (key, table) in raw {
            let node = key
                .parse::<usize>()
                .map_err(|_| D::Error::custom(format!("table key {key:?} is not a node id")))?;
            out.insert(node, table);
        }
        Ok(TablesRepr(out))
    }
}

impl Serialize for TepInstance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let k = self.k as usize;
        let leaves = self.slots[..self.shape.leaf_count()].to_vec();
        let mut tables = BTreeMap::new();
        for node in self.shape.internals() {
            let start = self.shape.slot(self.k, QueryId::Func(node, 1, 1));
            let rows = self.slots[start..start + k * k]
                .chunks(k)
                .map(<[Value]>::to_vec)
                .collect();
            tables.insert(node, rows);
        }
        InstanceRepr { h: self.shape.h, k: self.k, leaves, tables: TablesRepr(tables) }
            .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TepInstance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = InstanceRepr::deserialize(deserializer)?;
        let shape = TreeShape::new(repr.h).map_err(D::Error::custom)?;
        let expected: Vec<usize> = shape.internals().collect();
        let got: Vec<usize> = repr.tables.0.keys().copied().collect();
        if expected != got {
            return Err(D::Error::custom(format!(
                "tables must cover internal nodes {expected:?}, got {got:?}"
            )));
        }
        let tables: Vec<_> = repr.tables.0.into_values().collect();
        TepInstance::new(repr.h, repr.k, &repr.leaves, &tables).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix_a() -> TepInstance {
        TepInstance::new(2, 2, &[1, 2], &[vec![vec![1, 2], vec![2, 1]]]).unwrap()
    }

    #[test]
    fn shape_layout() {
        let s = TreeShape::new(3).unwrap();
        assert_eq!(s.node_count(), 7);
        assert_eq!(s.leaves().collect::<Vec<_>>(), vec![4, 5, 6, 7]);
        assert_eq!(s.children(2), Some((4, 5)));
        assert_eq!(s.children(4), None);
        assert_eq!(s.sibling(5), Some(4));
        assert_eq!(s.depth(1), 0);
        assert_eq!(s.depth(7), 2);
        assert!(TreeShape::new(1).is_err());
    }

    #[test]
    fn slot_count_identities() {
        for h in 2..=5u32 {
            for k in 2..=5u32 {
                let s = TreeShape::new(h).unwrap();
                let m = s.slot_count(k);
                let via_definition =
                    (1usize << h) - 1 + (k as usize * k as usize - 1) * ((1usize << (h - 1)) - 1);
                let via_slots = (1usize << (h - 1)) + ((1usize << (h - 1)) - 1) * (k * k) as usize;
                assert_eq!(m, via_definition);
                assert_eq!(m, via_slots);
            }
        }
    }

    #[test]
    fn slot_roundtrip() {
        let s = TreeShape::new(3).unwrap();
        for slot in 0..s.slot_count(3) {
            assert_eq!(s.slot(3, s.query_of_slot(3, slot)), slot);
        }
    }

    #[test]
    fn evaluate_fixtures() {
        assert_eq!(fix_a().evaluate().root(), 2);
        let f = vec![vec![1, 2], vec![2, 1]];
        let b = TepInstance::new(3, 2, &[1, 2, 1, 1], &[f.clone(), f.clone(), f]).unwrap();
        let v = b.evaluate();
        assert_eq!((v.get(2), v.get(3), v.get(1)), (2, 1, 2));
        let c = TepInstance::constant(3, 3, 1).unwrap();
        assert!(c.shape().nodes().all(|i| c.evaluate().get(i) == 1));
    }

    #[test]
    fn perturb_examples() {
        let a = fix_a();
        assert_eq!(a.perturb(QueryId::Func(1, 1, 2), 1).unwrap().evaluate().root(), 1);
        assert_eq!(a.perturb(QueryId::Func(1, 2, 2), 2).unwrap().evaluate().root(), 2);
        assert_eq!(a.perturb(QueryId::Leaf(2), 2).unwrap().evaluate().root(), 1);
        assert!(a.perturb(QueryId::Leaf(1), 1).is_err());
        assert!(a.perturb(QueryId::Func(2, 1, 1), 1).is_err());
        assert!(a.perturb(QueryId::Leaf(2), 3).is_err());
    }

    #[test]
    fn json_shape() {
        let a = fix_a();
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(text, r#"{"h":2,"k":2,"leaves":[1,2],"tables":{"1":[[1,2],[2,1]]}}"#);
        let back: TepInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<TepInstance>(
            r#"{"h":2,"k":2,"leaves":[1,3],"tables":{"1":[[1,2],[2,1]]}}"#
        )
        .is_err());
    }
}
