//! The grey/black pebbling algorithm for deterministic read-once programs.
//!
//! Memory at a state is the set of answered queries before it. Ranges,
//! equivalence classes and activity are recomputed from scratch at every
//! state; pebbles carry over.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::One;
use serde::Serialize;

use super::query_at;
use crate::amount::Rational;
use crate::bp::{run_deterministic, BranchingProgram, ComputationPath, StateId};
use crate::error::{Error, Result};
use crate::pebbling::{Game, PebbleConfig, PebbleSequence};
use crate::space::{Budget, Inputs};
use crate::tep::{QueryId, TepInstance, TreeShape, Value};

/// `[2i, a] ∧ [2i+1, b] ⇒ [i, c]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Grey {
    pub node: usize,
    pub a: Value,
    pub b: Value,
    pub c: Value,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct A1Config {
    /// `[i, a]` labels.
    pub black: BTreeSet<(usize, Value)>,
    pub grey: BTreeSet<Grey>,
}

impl A1Config {
    pub fn pebbles(&self) -> usize {
        self.black.len() + self.grey.len()
    }

    pub fn black_nodes(&self) -> Vec<usize> {
        self.black.iter().map(|&(i, _)| i).collect()
    }
}

/// Derived memory at one state. Per-node vectors are indexed by node id
/// (index 0 unused); ranges are bitmasks with bit `a - 1` for value `a`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct A1Memory {
    pub range: Vec<u32>,
    /// Equivalence class id of each value `a` at index `a - 1`. Values
    /// outside the range get classes of their own.
    pub class: Vec<Vec<u8>>,
    pub complete: Vec<bool>,
    pub active: Vec<bool>,
    /// Answered queries `f_i(x, y)` with `x`, `y` in the children's ranges.
    pub relevant: Vec<u32>,
}

impl A1Memory {
    fn compute(shape: TreeShape, k: u32, answers: &[Option<Value>]) -> Self {
        let n = shape.node_count();
        let full = full_mask(k);
        let answer = |q: QueryId| answers[shape.slot(k, q)];
        let mut range = vec![0u32; n + 1];
        let mut complete = vec![false; n + 1];
        let mut relevant = vec![0u32; n + 1];
        for i in shape.nodes().rev() {
            match shape.children(i) {
                None => match answer(QueryId::Leaf(i)) {
                    Some(a) => {
                        range[i] = bit(a);
                        complete[i] = true;
                    }
                    None => range[i] = full,
                },
                Some((l, r)) => {
                    let mut image = 0u32;
                    let mut gap = false;
                    for x in values(range[l]) {
                        for y in values(range[r]) {
                            match answer(QueryId::Func(i, x, y)) {
                                Some(c) => {
                                    image |= bit(c);
                                    relevant[i] += 1;
                                }
                                None => gap = true,
                            }
                        }
                    }
                    complete[i] = !gap;
                    range[i] = if gap { full } else { image };
                }
            }
        }
        let mut class = vec![Vec::new(); n + 1];
        class[1] = (0..k as u8).collect();
        for i in shape.nodes().skip(1) {
            let j = shape.parent(i).unwrap();
            let s = shape.sibling(i).unwrap();
            let left = i == 2 * j;
            let mut ids: BTreeMap<Vec<u8>, u8> = BTreeMap::new();
            let mut next = 0u8;
            let mut row = vec![0u8; k as usize];
            for a in 1..=k as Value {
                let signature: Option<Vec<u8>> = if range[i] & bit(a) == 0 {
                    None
                } else {
                    values(range[s])
                        .map(|b| {
                            let q = if left { QueryId::Func(j, a, b) } else { QueryId::Func(j, b, a) };
                            answer(q).map(|c| class[j][c as usize - 1])
                        })
                        .collect()
                };
                row[a as usize - 1] = match signature {
                    Some(sig) => *ids.entry(sig).or_insert_with(|| {
                        next += 1;
                        next - 1
                    }),
                    None => {
                        next += 1;
                        next - 1
                    }
                };
            }
            class[i] = row;
        }
        let mut active = vec![false; n + 1];
        for i in shape.nodes() {
            let classes: BTreeSet<u8> = values(range[i]).map(|a| class[i][a as usize - 1]).collect();
            let parent_active = shape.parent(i).is_none_or(|j| active[j]);
            active[i] = parent_active && classes.len() > 1;
        }
        Self { range, class, complete, active, relevant }
    }

    fn in_range(&self, i: usize, a: Value) -> bool {
        self.range[i] & bit(a) != 0
    }

    fn singleton(&self, i: usize) -> Option<Value> {
        (self.range[i].count_ones() == 1).then(|| self.range[i].trailing_zeros() as Value + 1)
    }
}

fn bit(a: Value) -> u32 {
    1 << (a - 1)
}

fn full_mask(k: u32) -> u32 {
    if k == 32 {
        u32::MAX
    } else {
        (1 << k) - 1
    }
}

fn values(mask: u32) -> impl Iterator<Item = Value> {
    (0..32u32).filter(move |b| mask >> b & 1 == 1).map(|b| (b + 1) as Value)
}

#[derive(Debug, Clone, Serialize)]
pub struct A1Step {
    pub position: usize,
    pub state: StateId,
    pub memory: A1Memory,
    /// Configurations produced while processing this state, one per change.
    pub produced: Vec<A1Config>,
    /// The latest configuration after processing; associated with the state.
    pub associated: A1Config,
}

#[derive(Debug, Clone, Serialize)]
pub struct A1Trace {
    pub k: u32,
    pub h: u32,
    pub steps: Vec<A1Step>,
    /// Black placements per node over the whole run.
    pub black_placements: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceViolation {
    RangeGrew { position: usize, node: usize },
    Reactivated { position: usize, node: usize },
    BlackTwice { node: usize },
    GreyOutsideRange { position: usize, grey: Grey },
    WrongBlack { position: usize, node: usize, label: Value, correct: Value },
    NoRootBlackAtEnd,
    /// The associated pebble count rose by more than one between states.
    PebbleJump { position: usize, from: usize, to: usize, black_only: bool },
}

pub fn algorithm1_trace(bp: &BranchingProgram, path: &ComputationPath) -> Result<A1Trace> {
    let (shape, k) = (bp.shape(), bp.k());
    if let Some((a, b)) = path.repeats_query(bp) {
        return Err(Error::Premise(format!("the path repeats a query at positions {a} and {b}")));
    }
    let n = shape.node_count();
    let mut answers = vec![None; shape.slot_count(k)];
    let mut cfg = A1Config::default();
    let mut ever_black = vec![false; n + 1];
    let mut black_placements = vec![0u32; n + 1];
    let mut steps = Vec::with_capacity(path.len());
    for t in 0..path.len() {
        let mut produced = Vec::new();
        let prior = if t > 0 {
            let q = query_at(bp, path, t - 1)?;
            let a = path.labels[t - 1];
            answers[shape.slot(k, q)] = Some(a);
            Some((q, a))
        } else {
            None
        };
        let mem = A1Memory::compute(shape, k, &answers);
        match prior {
            Some((QueryId::Leaf(i), a)) => {
                cfg.black.insert((i, a));
                ever_black[i] = true;
                black_placements[i] += 1;
                produced.push(cfg.clone());
            }
            Some((QueryId::Func(i, a, b), c)) => {
                cfg.grey.insert(Grey { node: i, a, b, c });
                produced.push(cfg.clone());
            }
            None => {}
        }
        for i in shape.nodes().rev() {
            let before = cfg.clone();
            if !mem.active[i] {
                cfg.grey.retain(|g| g.node != i);
                if let Some(a) = mem.singleton(i) {
                    if !ever_black[i] {
                        cfg.black.insert((i, a));
                        ever_black[i] = true;
                        black_placements[i] += 1;
                    }
                }
            }
            if !mem.active[i] || mem.complete[i] {
                if let Some((l, r)) = shape.children(i) {
                    cfg.black.retain(|&(j, _)| j != l && j != r);
                }
            }
            if let Some(j) = shape.parent(i) {
                let left = i == 2 * j;
                cfg.grey.retain(|g| g.node != j || mem.in_range(i, if left { g.a } else { g.b }));
            }
            if cfg != before {
                produced.push(cfg.clone());
            }
        }
        steps.push(A1Step { position: t, state: path.states[t], memory: mem, produced, associated: cfg.clone() });
    }
    Ok(A1Trace { k, h: shape.height(), steps, black_placements })
}

impl A1Trace {
    /// First `(position, node)` where an active node has `k - 1` relevant
    /// queries.
    pub fn inefficiency(&self) -> Option<(usize, usize)> {
        let need = self.k - 1;
        self.steps.iter().find_map(|s| {
            (1..s.memory.active.len())
                .find(|&i| s.memory.active[i] && s.memory.relevant[i] >= need && need > 0)
                .map(|i| (s.position, i))
        })
    }

    /// Invariants that hold for every trace of a correct deterministic
    /// read-once program.
    pub fn violations(&self, instance: &TepInstance) -> Vec<TraceViolation> {
        let values = instance.evaluate();
        let mut out = Vec::new();
        for (node, &c) in self.black_placements.iter().enumerate() {
            if c > 1 {
                out.push(TraceViolation::BlackTwice { node });
            }
        }
        for (idx, step) in self.steps.iter().enumerate() {
            let (t, mem) = (step.position, &step.memory);
            if idx > 0 {
                let prev = &self.steps[idx - 1];
                for i in 1..mem.range.len() {
                    if mem.range[i] & !prev.memory.range[i] != 0 {
                        out.push(TraceViolation::RangeGrew { position: t, node: i });
                    }
                    if mem.active[i] && !prev.memory.active[i] {
                        out.push(TraceViolation::Reactivated { position: t, node: i });
                    }
                }
                for black_only in [false, true] {
                    let count = |c: &A1Config| if black_only { c.black.len() } else { c.pebbles() };
                    let (from, to) = (count(&prev.associated), count(&step.associated));
                    if to > from + 1 {
                        out.push(TraceViolation::PebbleJump { position: t, from, to, black_only });
                    }
                }
            }
            for cfg in step.produced.iter().chain([&step.associated]) {
                for &(i, a) in &cfg.black {
                    if values.get(i) != a {
                        out.push(TraceViolation::WrongBlack { position: t, node: i, label: a, correct: values.get(i) });
                    }
                }
            }
            for g in &step.associated.grey {
                if !mem.in_range(2 * g.node, g.a) || !mem.in_range(2 * g.node + 1, g.b) {
                    out.push(TraceViolation::GreyOutsideRange { position: t, grey: *g });
                }
            }
        }
        let end = &self.steps.last().expect("paths are non-empty").associated;
        if !end.black.iter().any(|&(i, _)| i == 1) {
            out.push(TraceViolation::NoRootBlackAtEnd);
        }
        out.sort_by_key(|v| format!("{v:?}"));
        out.dedup();
        out
    }
}

/// No state has an active node with `k - 1` relevant queries.
pub fn check_efficient(trace: &A1Trace) -> bool {
    trace.inefficiency().is_none()
}

/// First position whose associated configuration has at least `h`
/// pebbles, black or grey.
pub fn ro_det_supercritical(trace: &A1Trace) -> Result<usize> {
    let h = trace.h as usize;
    trace
        .steps
        .iter()
        .find(|s| s.associated.pebbles() >= h)
        .map(|s| s.position)
        .ok_or_else(|| Error::Counterexample(format!("no state carries {h} pebbles")))
}

/// The black pebbling left after dropping grey pebbles from every produced
/// configuration. Each associated configuration is marked with its path
/// position.
pub fn strip_grey(trace: &A1Trace, shape: TreeShape) -> Result<PebbleSequence<Rational>> {
    let mut seq = PebbleSequence::start(shape, Game::Black, Rational::one());
    for step in &trace.steps {
        for cfg in &step.produced {
            let target = PebbleConfig::whole(shape, &cfg.black_nodes(), &[]);
            if *seq.last() != target {
                seq.extend_to(&target)?;
            }
        }
        seq.mark(step.position);
    }
    Ok(seq)
}

/// Exhaustive check that two inputs sharing a state, where every node
/// active for either has a gap for both, get the same associated
/// configuration up to equivalent grey consequents. Returns the number of
/// pairs compared.
pub fn check_ident_config(bp: &BranchingProgram, budget: &Budget) -> Result<u64> {
    let space = Inputs::exhaustive(bp.shape(), bp.k(), budget)?;
    let traces: Vec<A1Trace> = space
        .iter()
        .map(|inst| algorithm1_trace(bp, &run_deterministic(bp, &inst)?))
        .collect::<Result<_>>()?;
    let mut by_state: BTreeMap<StateId, Vec<(usize, usize)>> = BTreeMap::new();
    for (n, tr) in traces.iter().enumerate() {
        for (idx, step) in tr.steps.iter().enumerate() {
            by_state.entry(step.state).or_default().push((n, idx));
        }
    }
    let mut compared = 0u64;
    for (state, members) in &by_state {
        for (x, &(ni, si)) in members.iter().enumerate() {
            for &(nj, sj) in &members[x + 1..] {
                let (a, b) = (&traces[ni].steps[si], &traces[nj].steps[sj]);
                let (ma, mb) = (&a.memory, &b.memory);
                let premise = (1..ma.active.len())
                    .all(|i| !(ma.active[i] || mb.active[i]) || (!ma.complete[i] && !mb.complete[i]));
                if !premise {
                    continue;
                }
                compared += 1;
                if !same_up_to_equivalence(a, b) || !same_up_to_equivalence(b, a) {
                    return Err(Error::Counterexample(format!(
                        "inputs {} and {} reach state {state} with configurations {:?} and {:?}",
                        space.get(ni as u64).slots().iter().map(|v| v.to_string()).collect::<String>(),
                        space.get(nj as u64).slots().iter().map(|v| v.to_string()).collect::<String>(),
                        a.associated,
                        b.associated,
                    )));
                }
            }
        }
    }
    Ok(compared)
}

fn same_up_to_equivalence(a: &A1Step, b: &A1Step) -> bool {
    if a.associated.black != b.associated.black {
        return false;
    }
    a.associated.grey.iter().all(|g| {
        b.associated.grey.iter().any(|o| {
            let eq = |m: &A1Memory| m.class[g.node][g.c as usize - 1] == m.class[g.node][o.c as usize - 1];
            (o.node, o.a, o.b) == (g.node, g.a, g.b) && eq(&a.memory) && eq(&b.memory)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fixture_a_hand_trace() {
        let bp = fixtures::bp_det();
        let inst = fixtures::fix_a();
        let path = run_deterministic(&bp, &inst).unwrap();
        let tr = algorithm1_trace(&bp, &path).unwrap();
        let assoc: Vec<BTreeSet<(usize, Value)>> = tr.steps.iter().map(|s| s.associated.black.clone()).collect();
        assert_eq!(
            assoc,
            vec![
                BTreeSet::new(),
                BTreeSet::from([(2, 1)]),
                BTreeSet::from([(2, 1), (3, 2)]),
                BTreeSet::from([(1, 2)]),
            ]
        );
        let last = tr.steps.last().unwrap();
        assert_eq!(last.produced[0].grey, BTreeSet::from([Grey { node: 1, a: 1, b: 2, c: 2 }]));
        assert!(last.associated.grey.is_empty());
        assert!(!last.memory.active[1] && last.memory.complete[1]);
        assert!(tr.violations(&inst).is_empty());
        assert!(check_efficient(&tr));
        assert_eq!(ro_det_supercritical(&tr).unwrap(), 2);
        assert!(strip_grey(&tr, bp.shape()).unwrap().validate().is_ok());
    }

    #[test]
    fn root_classes_are_singletons_and_start_is_all_active() {
        let bp = fixtures::bp_det();
        let path = run_deterministic(&bp, &fixtures::fix_a()).unwrap();
        let tr = algorithm1_trace(&bp, &path).unwrap();
        let m0 = &tr.steps[0].memory;
        assert!(m0.active[1..].iter().all(|&a| a));
        assert_eq!(m0.class[1], vec![0, 1]);
    }

    #[test]
    fn row_scan_is_inefficient() {
        let bp = fixtures::row_scanning();
        let inst = fixtures::fix_a();
        let path = run_deterministic(&bp, &inst).unwrap();
        let tr = algorithm1_trace(&bp, &path).unwrap();
        assert_eq!(tr.inefficiency(), Some((1, 1)));
    }
}
