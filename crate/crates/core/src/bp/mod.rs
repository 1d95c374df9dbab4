//! k-way branching programs over `TEP^h_2(k)` inputs.

mod checks;
mod cylinder;
mod dot;
mod json;
mod paths;
mod reach;
mod validate;

pub use checks::{
    check_null_path_free, check_semantic_read_once, check_syntactic_read_once, check_thrifty,
    computes_tep, Property, Verdict, Witness,
};
pub use cylinder::{cylinders, Cylinder};
pub use dot::to_dot;
pub use paths::{
    canonical_path, enumerate_complete_paths, path_through, run_deterministic, ComputationPath,
    InstanceRun,
};
pub use reach::{
    bit_projection, check_bitwise_independent, check_node_independent, count_inputs_through,
    is_bit_product, reach_sets, StateValueProfile,
};
pub use validate::{Defect, StructuralReport};
pub(crate) use paths::canonical_with;
pub use checks::Support;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tep::{in_range, QueryId, TreeShape, Value};

pub type StateId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Query(QueryId),
    Output(Value),
}

impl Label {
    pub fn query(&self) -> Option<QueryId> {
        match self {
            Label::Query(q) => Some(*q),
            Label::Output(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: StateId,
    pub label: Value,
    pub to: StateId,
}

/// Layer metadata attached by the compilers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct LayerInfo {
    pub step: usize,
    pub pebbles: u32,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct BranchingProgram {
    k: u32,
    shape: TreeShape,
    start: StateId,
    labels: Vec<Label>,
    edges: Vec<Edge>,
    /// Out-edges per state as `(label, to)`, sorted.
    out: Vec<Vec<(Value, StateId)>>,
    claims_deterministic: Option<bool>,
    layers: Option<Vec<LayerInfo>>,
}

impl BranchingProgram {
    /// Builds a program, rejecting dangling ids, labels outside `[k]` and
    /// queries that do not fit the tree. Structural properties such as
    /// acyclicity are reported by [`BranchingProgram::validate`].
    pub fn new(
        k: u32,
        h: u32,
        start: StateId,
        labels: Vec<Label>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let shape = TreeShape::new(h)?;
        crate::tep::check_k(k)?;
        let n = labels.len();
        if start >= n {
            return Err(Error::MalformedProgram(format!("start state {start} does not exist")));
        }
        for (id, label) in labels.iter().enumerate() {
            match label {
                Label::Query(q) => q.check(shape, k).map_err(|_| {
                    Error::MalformedProgram(format!("state {id} queries {q}, not an input of h={h}"))
                })?,
                Label::Output(v) if !in_range(*v as u32, k) => {
                    return Err(Error::MalformedProgram(format!(
                        "state {id} outputs {v}, outside [1, {k}]"
                    )))
                }
                Label::Output(_) => {}
            }
        }
        let mut out = vec![Vec::new(); n];
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::MalformedProgram(format!(
                    "edge {} -{}-> {} references a missing state",
                    e.from, e.label, e.to
                )));
            }
            if !in_range(e.label as u32, k) {
                return Err(Error::MalformedProgram(format!(
                    "edge {} -> {} has label {}, outside [1, {k}]",
                    e.from, e.to, e.label
                )));
            }
            out[e.from].push((e.label, e.to));
        }
        for list in &mut out {
            list.sort_unstable();
        }
        Ok(Self { k, shape, start, labels, edges, out, claims_deterministic: None, layers: None })
    }

    pub fn with_claim(mut self, deterministic: Option<bool>) -> Self {
        self.claims_deterministic = deterministic;
        self
    }

    pub fn with_layers(mut self, layers: Option<Vec<LayerInfo>>) -> Self {
        self.layers = layers;
        self
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn height(&self) -> u32 {
        self.shape.height()
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, state: StateId) -> Label {
        self.labels[state]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn query(&self, state: StateId) -> Option<QueryId> {
        self.labels[state].query()
    }

    pub fn output_value(&self, state: StateId) -> Option<Value> {
        match self.labels[state] {
            Label::Output(v) => Some(v),
            Label::Query(_) => None,
        }
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Sorted `(label, to)` pairs leaving `state`.
    pub fn out_edges(&self, state: StateId) -> &[(Value, StateId)] {
        &self.out[state]
    }

    /// Successors along edges labelled `label`, ascending.
    pub fn successors(&self, state: StateId, label: Value) -> impl Iterator<Item = StateId> + '_ {
        self.out[state].iter().filter(move |(l, _)| *l == label).map(|&(_, to)| to)
    }

    pub fn claims_deterministic(&self) -> Option<bool> {
        self.claims_deterministic
    }

    pub fn layers(&self) -> Option<&[LayerInfo]> {
        self.layers.as_deref()
    }

    /// Every query state has one edge per label and outputs have none.
    pub fn is_deterministic(&self) -> bool {
        (0..self.len()).all(|s| self.deterministic_at(s))
    }

    pub(crate) fn deterministic_at(&self, s: StateId) -> bool {
        match self.labels[s] {
            Label::Output(_) => self.out[s].is_empty(),
            Label::Query(_) => {
                self.out[s].len() == self.k as usize
                    && self.out[s].iter().enumerate().all(|(j, &(l, _))| l as usize == j + 1)
            }
        }
    }

    /// Output states by value, index 0 unused.
    pub fn outputs(&self) -> Vec<Option<StateId>> {
        let mut outs = vec![None; self.k as usize + 1];
        for (id, label) in self.labels.iter().enumerate() {
            if let Label::Output(v) = label {
                outs[*v as usize].get_or_insert(id);
            }
        }
        outs
    }

    /// States in topological order, or `None` when the graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<StateId>> {
        let n = self.len();
        let mut indeg = vec![0usize; n];
        for e in &self.edges {
            indeg[e.to] += 1;
        }
        let mut ready: Vec<StateId> = (0..n).rev().filter(|&s| indeg[s] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(s) = ready.pop() {
            order.push(s);
            for &(_, t) in self.out[s].iter().rev() {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.push(t);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Topological order, failing unless the program is structurally valid.
    pub(crate) fn checked_order(&self) -> Result<Vec<StateId>> {
        let report = self.validate();
        if let Some(defect) = report.defects.first() {
            return Err(Error::MalformedProgram(defect.to_string()));
        }
        Ok(self.topological_order().expect("validated programs are acyclic"))
    }

    /// For each state, the set of states reachable from it (itself
    /// included), as bit rows.
    pub(crate) fn descendants(&self, order: &[StateId]) -> Vec<Vec<u64>> {
        let n = self.len();
        let words = n.div_ceil(64);
        let mut reach = vec![vec![0u64; words]; n];
        for &s in order.iter().rev() {
            let mut row = vec![0u64; words];
            row[s / 64] |= 1 << (s % 64);
            for &(_, t) in &self.out[s] {
                for (w, x) in row.iter_mut().zip(&reach[t]) {
                    *w |= x;
                }
            }
            reach[s] = row;
        }
        reach
    }

    /// Number of states whose label is a query.
    pub fn query_state_count(&self) -> usize {
        self.labels.iter().filter(|l| matches!(l, Label::Query(_))).count()
    }
}

pub(crate) fn bit(row: &[u64], s: usize) -> bool {
    row[s / 64] >> (s % 64) & 1 == 1
}
