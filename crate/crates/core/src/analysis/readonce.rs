//! Nondeterministic read-once thrifty programs: the black-white pebbling of
//! a path, soundness of its pebbles, and the permutation tag `(u, γ, x)`.

use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;

use super::thrifty::{det_thrifty_critical_states, det_thrifty_pebbling};
use super::query_at;
use crate::amount::Rational;
use crate::bp::{
    canonical_with, reach_sets, BranchingProgram, ComputationPath, InstanceRun, Property, StateId, Verdict,
    Witness,
};
use crate::amount::Amount;
use crate::error::{Error, Result};
use crate::pebbling::{Game, Move, PebbleSequence};
use crate::space::{Budget, Coverage, Inputs};
use crate::tep::{NodeValues, QueryId, TepInstance, TreeShape, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadOnceMode {
    /// Every state of the path takes part.
    Syntactic,
    /// Only the first query of each node takes part.
    NullPathFree,
}

/// Black-white whole pebbling of a complete path. For a state querying `i`:
/// white pebbles go on unpebbled children; a pebbled `i` must be white and
/// is removed together with black pebbles on its children; an unpebbled
/// `i` gets a black pebble while black pebbles leave its children. The
/// black placement is associated with the following state, everything else
/// with the current one. A final move removes the root's black pebble.
pub fn ro_thrifty_bw_pebbling(
    bp: &BranchingProgram,
    path: &ComputationPath,
    mode: ReadOnceMode,
) -> Result<PebbleSequence<Rational>> {
    let queried = queried_nodes(bp, path)?;
    bw_pebbling(bp.shape(), &queried, mode)
}

fn queried_nodes(bp: &BranchingProgram, path: &ComputationPath) -> Result<Vec<usize>> {
    (0..path.len() - 1).map(|t| query_at(bp, path, t).map(|q| q.node())).collect()
}

/// The rules above applied to `queried[t]`, the node asked at position `t`.
fn bw_pebbling(shape: TreeShape, queried: &[usize], mode: ReadOnceMode) -> Result<PebbleSequence<Rational>> {
    let one = Rational::one();
    let mut seq = PebbleSequence::start(shape, Game::Whole, one);
    seq.mark(0);
    let mut seen = vec![false; shape.node_count() + 1];
    for (t, &i) in queried.iter().enumerate() {
        if seen[i] {
            match mode {
                ReadOnceMode::NullPathFree => continue,
                ReadOnceMode::Syntactic => {
                    return Err(Error::Premise(format!("node {i} is queried twice on the path (position {t})")))
                }
            }
        }
        seen[i] = true;
        let children = shape.children(i);
        if let Some((l, r)) = children {
            for c in [l, r] {
                if seq.last().total(c).is_zero() {
                    seq.push(Move::IncW { node: c, by: one })?;
                    seq.mark(t);
                }
            }
        }
        let cfg = seq.last().clone();
        let black_children: Vec<usize> =
            children.map_or(Vec::new(), |(l, r)| [l, r].into_iter().filter(|&c| cfg.b[c] == one).collect());
        if cfg.total(i) == one {
            if cfg.b[i] == one {
                return Err(Error::Premise(format!("node {i} is queried at position {t} while black-pebbled")));
            }
            seq.push(match children {
                None => Move::DecWLeaf { node: i, by: one },
                Some(_) => Move::DecWInternal { node: i, by: one },
            })?;
            seq.mark(t);
            for c in black_children {
                seq.push(Move::DecB { node: c, by: one })?;
                seq.mark(t);
            }
        } else {
            seq.push(match children {
                None => Move::IncBLeaf { node: i, by: one },
                Some(_) => Move::IncBInternal {
                    node: i,
                    by: one,
                    child_dec: black_children.into_iter().map(|c| (c, one)).collect(),
                },
            })?;
            seq.mark(t + 1);
        }
    }
    seq.push(Move::DecB { node: 1, by: one })?;
    Ok(seq)
}

/// The pebbling whose soundness is checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pebbler {
    DetThrifty,
    ReadOnce(ReadOnceMode),
}

impl Pebbler {
    pub fn run(&self, bp: &BranchingProgram, path: &ComputationPath) -> Result<PebbleSequence<Rational>> {
        match self {
            Pebbler::DetThrifty => {
                let crit = det_thrifty_critical_states(bp, path)?;
                det_thrifty_pebbling(bp, path, &crit)
            }
            Pebbler::ReadOnce(mode) => ro_thrifty_bw_pebbling(bp, path, *mode),
        }
    }
}

/// For every input, every configuration associated with a state of its
/// canonical path, and every node pebbled there: all inputs completing
/// through that state agree with it on the node's value.
pub fn check_pebble_soundness(bp: &BranchingProgram, pebbler: Pebbler, budget: &Budget) -> Result<Verdict> {
    let space = Inputs::exhaustive(bp.shape(), bp.k(), budget)?;
    let profile = reach_sets(bp, budget)?;
    let order = bp.checked_order()?;
    let k = bp.k();
    let found = (0..space.len())
        .into_par_iter()
        .map(|n| -> Result<Option<(StateId, usize, TepInstance)>> {
            let inst = space.get(n);
            let run = InstanceRun::new(bp, &order, &inst);
            let path = canonical_with(bp, &inst, &run)?;
            let seq = pebbler.run(bp, &path)?;
            let values = inst.evaluate();
            for (t, cfg) in seq.marked() {
                let s = path.states[t];
                for i in cfg.pebbled() {
                    if profile.a[s][i] != 1 << (values.get(i) - 1) {
                        return Ok(Some((s, i, inst)));
                    }
                }
            }
            Ok(None)
        })
        .find_first(|r| !matches!(r, Ok(None)));
    let coverage = Coverage::Exhaustive { inputs: space.len() };
    match found {
        None => Ok(Verdict::pass(Property::PebbleSoundness, coverage)),
        Some(Err(e)) => Err(e),
        Some(Ok(None)) => unreachable!(),
        Some(Ok(Some((s, i, inst)))) => {
            let v = inst.evaluate().get(i);
            let other = (0..space.len())
                .into_par_iter()
                .map(|n| space.get(n))
                .find_first(|j| {
                    j.evaluate().get(i) != v && InstanceRun::new(bp, &order, j).complete[s]
                })
                .ok_or_else(|| Error::Premise(format!("A set of state {s} disagrees with a rerun (k={k})")))?;
            Ok(Verdict::fail(
                Property::PebbleSoundness,
                coverage,
                Witness::Unsound { state: s, node: i, instance: inst, other },
            ))
        }
    }
}

/// Rank of a permutation in lexicographic order.
pub fn lehmer_code(perm: &[usize]) -> Result<u64> {
    if perm.len() > 20 {
        return Err(Error::BudgetExceeded {
            what: "permutation code",
            needed: format!("{}!", perm.len()),
            cap: "20!".into(),
        });
    }
    let n = perm.len();
    let mut code = 0u64;
    for (a, &p) in perm.iter().enumerate() {
        let smaller = perm[a + 1..].iter().filter(|&&q| q < p).count() as u64;
        code = code * (n - a) as u64 + smaller;
    }
    Ok(code)
}

fn decode_lehmer(code: u64, n: usize) -> Vec<usize> {
    let mut digits = vec![0; n];
    let mut c = code;
    for a in (0..n).rev() {
        let base = (n - a) as u64;
        digits[a] = (c % base) as usize;
        c /= base;
    }
    let mut pool: Vec<usize> = (1..=n).collect();
    digits.into_iter().map(|d| pool.remove(d)).collect()
}

/// `(u, γ, x)`: the code of the node permutation, the supercritical state
/// and every input value except the correct values of the nodes pebbled
/// there, in canonical slot order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SemanticTag {
    pub u: u64,
    pub state: StateId,
    pub x: Vec<Value>,
}

/// Supercritical position of the read-once pebbling of a node order and
/// the nodes pebbled there.
fn supercritical(shape: TreeShape, perm: &[usize]) -> Result<(usize, Vec<usize>)> {
    let mut sorted = perm.to_vec();
    sorted.sort_unstable();
    if !sorted.iter().copied().eq(shape.nodes()) {
        return Err(Error::Premise("the path does not query every node exactly once".into()));
    }
    let seq = bw_pebbling(shape, perm, ReadOnceMode::Syntactic)?;
    let bound = Rational::from_integer(shape.height().div_ceil(2) as i64 + 1);
    let found = seq.marked().find(|(_, c)| c.cost() >= bound).map(|(t, c)| (t, c.pebbled()));
    found.ok_or_else(|| Error::Premise("no configuration reaches ceil(h/2)+1 pebbles".into()))
}

/// Slot holding the correct value of node `i`.
fn correct_slot(shape: TreeShape, k: u32, i: usize, values: &NodeValues) -> usize {
    match shape.children(i) {
        None => shape.slot(k, QueryId::Leaf(i)),
        Some((l, r)) => shape.slot(k, QueryId::Func(i, values.get(l), values.get(r))),
    }
}

pub fn semantic_ro_tag(bp: &BranchingProgram, instance: &TepInstance, path: &ComputationPath) -> Result<SemanticTag> {
    let (shape, k) = (bp.shape(), bp.k());
    let perm = queried_nodes(bp, path)?;
    let (t, pebbled) = supercritical(shape, &perm)?;
    let values = instance.evaluate();
    let skip: Vec<usize> = pebbled.iter().map(|&i| correct_slot(shape, k, i, &values)).collect();
    let x = (0..instance.m()).filter(|s| !skip.contains(s)).map(|s| instance.slots()[s]).collect();
    Ok(SemanticTag { u: lehmer_code(&perm)?, state: path.states[t], x })
}

/// Inverts [`semantic_ro_tag`]. The permutation fixes which nodes are
/// pebbled at γ; every choice of their values (and argument pairs for
/// internal nodes) is tried and the unique input whose own tag matches is
/// returned.
pub fn semantic_ro_untag(bp: &BranchingProgram, tag: &SemanticTag) -> Result<TepInstance> {
    let (shape, k) = (bp.shape(), bp.k());
    let m = shape.slot_count(k);
    let perm = decode_lehmer(tag.u, shape.node_count());
    let (_, pebbled) = supercritical(shape, &perm)?;
    if tag.x.len() + pebbled.len() != m {
        return Err(Error::Premise("tag x has the wrong length".into()));
    }
    // Per pebbled node: (slot, value) choices.
    let choices: Vec<Vec<(usize, Value)>> = pebbled
        .iter()
        .map(|&i| {
            let slots: Vec<usize> = match shape.children(i) {
                None => vec![shape.slot(k, QueryId::Leaf(i))],
                Some(_) => (1..=k as Value)
                    .flat_map(|x| (1..=k as Value).map(move |y| (x, y)))
                    .map(|(x, y)| shape.slot(k, QueryId::Func(i, x, y)))
                    .collect(),
            };
            slots.into_iter().flat_map(|s| (1..=k as Value).map(move |a| (s, a))).collect()
        })
        .collect();
    let total = choices.iter().try_fold(1u64, |acc, c| acc.checked_mul(c.len() as u64)).unwrap_or(u64::MAX);
    if total > DECODE_CAP {
        return Err(Error::BudgetExceeded { what: "tag decoding", needed: total.to_string(), cap: DECODE_CAP.to_string() });
    }
    let order = bp.checked_order()?;
    let mut found: Vec<TepInstance> = Vec::new();
    for code in 0..total {
        let mut c = code;
        let mut fixed: Vec<(usize, Value)> = choices
            .iter()
            .map(|opts| {
                let pick = opts[(c % opts.len() as u64) as usize];
                c /= opts.len() as u64;
                pick
            })
            .collect();
        fixed.sort_unstable();
        let mut rest = tag.x.iter().copied();
        let slots: Vec<Value> = (0..m)
            .map(|s| match fixed.iter().find(|e| e.0 == s) {
                Some(&(_, a)) => a,
                None => rest.next().expect("length checked"),
            })
            .collect();
        let cand = TepInstance::from_slots(shape, k, slots)?;
        let run = InstanceRun::new(bp, &order, &cand);
        let Ok(path) = canonical_with(bp, &cand, &run) else { continue };
        if semantic_ro_tag(bp, &cand, &path).is_ok_and(|t| t == *tag) {
            found.push(cand);
        }
    }
    match found.len() {
        1 => Ok(found.pop().unwrap()),
        0 => Err(Error::Premise("no input carries this tag".into())),
        c => Err(Error::Counterexample(format!("{c} inputs share one tag"))),
    }
}

const DECODE_CAP: u64 = 1 << 24;
