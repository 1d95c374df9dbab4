//! Deterministic thrifty programs: critical states, the black pebbling they
//! induce, and the tag `(γ, v, x)`.

use num_traits::One;
use serde::Serialize;

use super::{first_marked_at_least, query_at};
use crate::amount::Rational;
use crate::bp::{BranchingProgram, ComputationPath, Label, StateId};
use crate::error::{Error, Result};
use crate::pebbling::{Game, Move, PebbleSequence};
use crate::tep::{QueryId, TepInstance, Value};

/// Path position of each node's critical state; index 0 unused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CriticalMap {
    pub position: Vec<usize>,
}

impl CriticalMap {
    /// Nodes sorted by critical position.
    pub fn order(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = (1..self.position.len()).collect();
        nodes.sort_by_key(|&i| self.position[i]);
        nodes
    }
}

/// Root: its last query on the path. Other nodes: their last query before
/// the parent's critical position.
pub fn det_thrifty_critical_states(bp: &BranchingProgram, path: &ComputationPath) -> Result<CriticalMap> {
    let shape = bp.shape();
    let n = shape.node_count();
    let queried: Vec<usize> = (0..path.len() - 1)
        .map(|t| query_at(bp, path, t).map(|q| q.node()))
        .collect::<Result<_>>()?;
    let mut position = vec![0; n + 1];
    for i in shape.nodes() {
        let limit = match shape.parent(i) {
            None => queried.len(),
            Some(j) => position[j],
        };
        position[i] = (0..limit).rev().find(|&t| queried[t] == i).ok_or_else(|| {
            Error::Premise(match shape.parent(i) {
                None => "the path never queries the root".to_string(),
                Some(j) => format!("node {i} is not queried before the critical state of its parent {j}"),
            })
        })?;
    }
    Ok(CriticalMap { position })
}

/// One black move per critical state. The configuration made at a critical
/// state is associated with the next critical state, the last one with the
/// output state. Markers are path positions.
pub fn det_thrifty_pebbling(
    bp: &BranchingProgram,
    path: &ComputationPath,
    critical: &CriticalMap,
) -> Result<PebbleSequence<Rational>> {
    let shape = bp.shape();
    let order = critical.order();
    let mut seq = PebbleSequence::start(shape, Game::Black, Rational::one());
    seq.mark(critical.position[order[0]]);
    for (j, &i) in order.iter().enumerate() {
        let mv = match shape.children(i) {
            None => Move::PlaceBlackLeaf(i),
            Some((l, r)) => Move::BlackSlide { node: i, clear: vec![l, r] },
        };
        seq.push(mv)?;
        let next = order.get(j + 1).map_or(path.len() - 1, |&n| critical.position[n]);
        seq.mark(next);
    }
    Ok(seq)
}

/// `(γ, v, x)`: the supercritical state, the node values not among the
/// first `h` learned after it (`u₁` then `u₂`), and the off-path table
/// entries in canonical slot order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ThriftyTag {
    pub state: StateId,
    pub v: Vec<Value>,
    pub x: Vec<Value>,
}

/// Walk state while replaying `C₁(I, γ)`.
struct Learning {
    known: Vec<bool>,
    value: Vec<Value>,
    u1_nodes: Vec<usize>,
    learned: Vec<usize>,
}

impl Learning {
    fn new(n: usize) -> Self {
        Self { known: vec![false; n + 1], value: vec![0; n + 1], u1_nodes: Vec::new(), learned: Vec::new() }
    }

    /// Records the query; `answer` supplies the value of a node met for the
    /// first time.
    fn step(&mut self, q: QueryId, answer: impl FnOnce() -> Result<Value>) -> Result<Value> {
        let i = q.node();
        if !self.known[i] {
            self.known[i] = true;
            self.value[i] = answer()?;
            self.u1_nodes.push(i);
        }
        if let QueryId::Func(_, x, y) = q {
            for (c, arg) in [(2 * i, x), (2 * i + 1, y)] {
                if !self.known[c] {
                    self.known[c] = true;
                    self.value[c] = arg;
                    self.learned.push(c);
                }
            }
        }
        Ok(self.value[i])
    }

    /// Nodes covered by `u₂`: everything outside `u₁` and the first `h`
    /// learned nodes, ascending.
    fn u2_nodes(&self, n: usize, h: usize) -> Vec<usize> {
        let omitted = &self.learned[..h];
        (1..=n).filter(|i| !self.u1_nodes.contains(i) && !omitted.contains(i)).collect()
    }
}

pub fn det_thrifty_tag(bp: &BranchingProgram, instance: &TepInstance, path: &ComputationPath) -> Result<ThriftyTag> {
    let shape = bp.shape();
    let (n, h) = (shape.node_count(), shape.height() as usize);
    let critical = det_thrifty_critical_states(bp, path)?;
    let seq = det_thrifty_pebbling(bp, path, &critical)?;
    let g = first_marked_at_least(&seq, &Rational::from_integer(h as i64))
        .ok_or_else(|| Error::Premise("no configuration reaches h pebbles".into()))?;
    let values = instance.evaluate();
    let mut walk = Learning::new(n);
    for t in g..path.len() - 1 {
        let q = query_at(bp, path, t)?;
        walk.step(q, || Ok(values.get(q.node())))?;
    }
    for &c in &walk.learned {
        if walk.value[c] != values.get(c) {
            return Err(Error::Premise(format!("node {c} is learned with a wrong value")));
        }
    }
    if walk.learned.len() < h {
        return Err(Error::Premise(format!("only {} nodes are learned after γ", walk.learned.len())));
    }
    let mut v: Vec<Value> = walk.u1_nodes.iter().map(|&i| values.get(i)).collect();
    v.extend(walk.u2_nodes(n, h).iter().map(|&i| values.get(i)));
    let thrifty = instance.thrifty_slots(&values);
    let x = (0..instance.m())
        .filter(|s| shape.is_internal(shape.query_of_slot(bp.k(), *s).node()) && !thrifty.contains(s))
        .map(|s| instance.slots()[s])
        .collect();
    Ok(ThriftyTag { state: path.states[g], v, x })
}

/// Inverts [`det_thrifty_tag`] by replaying the program from the tagged
/// state.
pub fn det_thrifty_untag(bp: &BranchingProgram, tag: &ThriftyTag) -> Result<TepInstance> {
    let shape = bp.shape();
    let (n, h, k) = (shape.node_count(), shape.height() as usize, bp.k());
    let bad = |what: &str| Error::Premise(format!("tag does not decode: {what}"));
    let mut walk = Learning::new(n);
    let mut next_v = tag.v.iter().copied();
    let mut s = tag.state;
    while let Label::Query(q) = bp.label(s) {
        let label = walk.step(q, || next_v.next().ok_or_else(|| bad("v is too short")))?;
        let mut succ = bp.successors(s, label);
        s = succ.next().ok_or_else(|| bad("the replay is rejected"))?;
        if succ.next().is_some() {
            return Err(Error::NotDeterministic(s));
        }
    }
    if walk.learned.len() < h {
        return Err(bad("fewer than h nodes are learned"));
    }
    for i in walk.u2_nodes(n, h) {
        let a = next_v.next().ok_or_else(|| bad("v is too short"))?;
        if walk.known[i] && walk.value[i] != a {
            return Err(bad("a learned value disagrees with v"));
        }
        walk.value[i] = a;
    }
    if next_v.next().is_some() {
        return Err(bad("v is too long"));
    }
    let value = walk.value;
    let mut next_x = tag.x.iter().copied();
    let mut slots = Vec::with_capacity(shape.slot_count(k));
    for s in 0..shape.slot_count(k) {
        slots.push(match shape.query_of_slot(k, s) {
            QueryId::Leaf(i) => value[i],
            QueryId::Func(i, x, y) if (x, y) == (value[2 * i], value[2 * i + 1]) => value[i],
            QueryId::Func(..) => next_x.next().ok_or_else(|| bad("x is too short"))?,
        });
    }
    if next_x.next().is_some() {
        return Err(bad("x is too long"));
    }
    TepInstance::from_slots(shape, k, slots)
}
