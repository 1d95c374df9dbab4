//! Compiling whole pebbling sequences into branching programs.
//!
//! Memory at any point is an assignment of values to the pebbled nodes:
//! black nodes hold verified values, white nodes hold guesses. Each query
//! move becomes a layer with one state per memory assignment. Removing a
//! black pebble projects the memory, merging states. Placing a white
//! pebble multiplies the out-edges of the preceding layer by `k` guesses.
//! Removing a white pebble queries the node (its leaf value, or its table
//! at the remembered child values) and keeps only the edge labelled with
//! the guess. The output is emitted as soon as the root's value is known
//! and no guess remains unverified.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::amount::Rational;
use crate::bp::{BranchingProgram, Edge, Label, LayerInfo, StateId};
use crate::error::{Error, Result};
use crate::pebbling::{Game, Move, PebbleSequence};
use crate::tep::{check_k, QueryId, Value};

/// `(node, value, is_guess)` sorted by node.
type Memory = Vec<(usize, Value, bool)>;

/// Where the edges into a not-yet-created state come from; `None` marks
/// the start of the program.
type Incoming = Vec<Option<(StateId, Value)>>;

/// Deterministic program from a valid black pebbling sequence.
pub fn compile_black(seq: &PebbleSequence<Rational>, k: u32) -> Result<BranchingProgram> {
    if seq.game != Game::Black {
        return Err(Error::InvalidSequence("compile_black needs a black pebbling".into()));
    }
    compile(seq, k)
}

/// Nondeterministic guess-and-verify program from a valid whole
/// black-white pebbling sequence.
pub fn compile_bw(seq: &PebbleSequence<Rational>, k: u32) -> Result<BranchingProgram> {
    if seq.game != Game::Whole {
        return Err(Error::InvalidSequence("compile_bw needs a whole black-white pebbling".into()));
    }
    compile(seq, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    LearnLeaf(usize),
    LearnFunc(usize),
    VerifyLeaf(usize),
    VerifyFunc(usize),
    Guess(usize),
    Forget(usize),
}

fn ops(moves: &[Move<Rational>]) -> Vec<Op> {
    moves
        .iter()
        .map(|mv| match mv {
                Move::PlaceBlackLeaf(i) | Move::IncBLeaf { node: i, .. } => Op::LearnLeaf(*i),
                Move::BlackSlide { node, .. } | Move::IncBInternal { node, .. } => Op::LearnFunc(*node),
                Move::Remove(i) | Move::DecB { node: i, .. } => Op::Forget(*i),
                Move::IncW { node, .. } => Op::Guess(*node),
                Move::DecWLeaf { node, .. } => Op::VerifyLeaf(*node),
                Move::DecWInternal { node, .. } => Op::VerifyFunc(*node),
        })
        .collect()
}

/// Children cleared by a move, if it is a black increase on an internal
/// node.
fn cleared(mv: &Move<Rational>) -> Vec<usize> {
    match mv {
        Move::BlackSlide { clear, .. } => clear.clone(),
        Move::IncBInternal { child_dec, .. } => child_dec.iter().map(|(j, _)| *j).collect(),
        _ => Vec::new(),
    }
}

/// Moves each white placement as late as possible: just before the first
/// move that needs the pebble. Delaying a placement keeps every move legal
/// and never raises an intermediate cost.
fn delay_guesses(seq: &PebbleSequence<Rational>) -> Vec<Move<Rational>> {
    let mut out: Vec<Move<Rational>> = Vec::new();
    let mut pending: Vec<Move<Rational>> = Vec::new();
    for mv in &seq.moves {
        if let Move::IncW { .. } = mv {
            pending.push(mv.clone());
            continue;
        }
        let node = mv.node();
        let needs: Vec<usize> = match mv {
            Move::IncBInternal { .. } | Move::DecWInternal { .. } | Move::BlackSlide { .. } => {
                vec![node, 2 * node, 2 * node + 1]
            }
            _ => vec![node],
        };
        let mut keep = Vec::new();
        for p in pending.drain(..) {
            if needs.contains(&p.node()) {
                out.push(p);
            } else {
                keep.push(p);
            }
        }
        pending = keep;
        out.push(mv.clone());
    }
    out.extend(pending);
    out
}

fn compile(seq: &PebbleSequence<Rational>, k: u32) -> Result<BranchingProgram> {
    check_k(k)?;
    seq.validate()
        .map_err(|(i, reason)| Error::InvalidSequence(format!("configuration {i}: {reason}")))?;
    let shape = seq.shape;
    let moves = delay_guesses(seq);
    let ops = ops(&moves);
    if !ops.iter().any(|op| !matches!(op, Op::Guess(_) | Op::Forget(_))) {
        return Err(Error::InvalidSequence("the sequence makes no query".into()));
    }

    let mut labels: Vec<Label> = Vec::new();
    let mut edges: Vec<Edge> = Vec::new();
    let mut layers: Vec<LayerInfo> = Vec::new();
    let mut start: Option<StateId> = None;
    let mut frontier: BTreeMap<Memory, Incoming> = BTreeMap::from([(Vec::new(), vec![None])]);
    // Guesses made before any query are realized on the first layer's
    // out-edges.
    let mut deferred: Vec<usize> = Vec::new();

    let lookup = |mem: &Memory, node: usize| {
        mem.iter().find(|e| e.0 == node).map(|e| e.1)
    };

    for (t, (op, mv)) in ops.iter().zip(&moves).enumerate() {
        match *op {
            Op::Guess(i) => {
                if start.is_none() {
                    deferred.push(i);
                } else {
                    frontier = guess(frontier, i, k);
                }
            }
            Op::Forget(i) => {
                frontier = project(frontier, i);
            }
            Op::LearnLeaf(_) | Op::LearnFunc(_) | Op::VerifyLeaf(_) | Op::VerifyFunc(_) => {
                let mut next: BTreeMap<Memory, Incoming> = BTreeMap::new();
                let width = frontier.len();
                let pebbles = frontier.keys().next().map_or(0, |m| m.len()) as u32;
                for (mem, incoming) in std::mem::take(&mut frontier) {
                    let query = match *op {
                        Op::LearnLeaf(i) | Op::VerifyLeaf(i) => QueryId::Leaf(i),
                        Op::LearnFunc(i) | Op::VerifyFunc(i) => {
                            let (l, r) = shape.children(i).ok_or_else(|| {
                                Error::InvalidSequence(format!("node {i} has no children"))
                            })?;
                            match (lookup(&mem, l), lookup(&mem, r)) {
                                (Some(x), Some(y)) => QueryId::Func(i, x, y),
                                _ => {
                                    return Err(Error::InvalidSequence(format!(
                                        "move {t} queries node {i} before its children are remembered \
                                         (a guess needed by the first query cannot be folded)"
                                    )))
                                }
                            }
                        }
                        _ => unreachable!(),
                    };
                    let id = labels.len();
                    labels.push(Label::Query(query));
                    for inc in incoming {
                        match inc {
                            None => start = Some(id),
                            Some((from, label)) => edges.push(Edge { from, label, to: id }),
                        }
                    }
                    let answers: Vec<Value> = match *op {
                        Op::VerifyLeaf(i) | Op::VerifyFunc(i) => vec![lookup(&mem, i).ok_or_else(|| {
                            Error::InvalidSequence(format!("move {t} verifies node {i} without a guess"))
                        })?],
                        _ => (1..=k as Value).collect(),
                    };
                    for a in answers {
                        let after = match *op {
                            Op::LearnLeaf(i) | Op::LearnFunc(i) => {
                                let mut m: Memory =
                                    mem.iter().copied().filter(|e| !cleared(mv).contains(&e.0)).collect();
                                m.retain(|e| e.0 != i);
                                m.push((i, a, false));
                                m.sort_unstable();
                                m
                            }
                            Op::VerifyLeaf(i) | Op::VerifyFunc(i) => {
                                mem.iter().copied().filter(|e| e.0 != i).collect()
                            }
                            _ => unreachable!(),
                        };
                        next.entry(after).or_default().push(Some((id, a)));
                    }
                }
                layers.push(LayerInfo { step: t, pebbles, width });
                frontier = next;
                for i in deferred.drain(..) {
                    frontier = guess(frontier, i, k);
                }
            }
        }
        // Emit outputs once the root is known and nothing is left to verify.
        let ready = !frontier.is_empty()
            && frontier.keys().all(|m| m.iter().any(|e| e.0 == 1 && !e.2) && m.iter().all(|e| !e.2))
            && deferred.is_empty()
            && start.is_some();
        if ready {
            let first_out = labels.len();
            for v in 1..=k as Value {
                labels.push(Label::Output(v));
            }
            for (mem, incoming) in frontier {
                let v = lookup(&mem, 1).unwrap();
                for (from, label) in incoming.into_iter().flatten() {
                    edges.push(Edge { from, label, to: first_out + v as usize - 1 });
                }
            }
            let bp = BranchingProgram::new(k, shape.height(), start.unwrap(), labels, edges)?
                .with_claim(Some(seq.game == Game::Black))
                .with_layers(Some(layers));
            return Ok(bp);
        }
    }
    Err(Error::InvalidSequence("the root value is never known with all guesses verified".into()))
}

fn guess(frontier: BTreeMap<Memory, Incoming>, node: usize, k: u32) -> BTreeMap<Memory, Incoming> {
    let mut out: BTreeMap<Memory, Incoming> = BTreeMap::new();
    for (mem, incoming) in frontier {
        for g in 1..=k as Value {
            let mut m = mem.clone();
            m.retain(|e| e.0 != node);
            m.push((node, g, true));
            m.sort_unstable();
            out.entry(m).or_default().extend(incoming.iter().copied());
        }
    }
    out
}

fn project(frontier: BTreeMap<Memory, Incoming>, node: usize) -> BTreeMap<Memory, Incoming> {
    let mut out: BTreeMap<Memory, Incoming> = BTreeMap::new();
    for (mem, incoming) in frontier {
        let m: Memory = mem.into_iter().filter(|e| e.0 != node).collect();
        let slot = out.entry(m).or_default();
        for inc in incoming {
            if !slot.contains(&inc) {
                slot.push(inc);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeReport {
    pub k: u32,
    pub layers: Vec<LayerInfo>,
    pub outputs: usize,
    pub total: usize,
    /// `Σ_t k^{p_t} + k`, the count predicted from the layer pebble counts.
    pub predicted: u128,
}

/// Per-layer widths of a compiled program.
pub fn size_report(bp: &BranchingProgram) -> Result<SizeReport> {
    let layers = bp
        .layers()
        .ok_or_else(|| Error::MalformedProgram("program carries no layer metadata".into()))?
        .to_vec();
    let k = bp.k();
    let predicted = layers.iter().map(|l| (k as u128).pow(l.pebbles)).sum::<u128>() + k as u128;
    Ok(SizeReport {
        k,
        outputs: bp.labels().iter().filter(|l| matches!(l, Label::Output(_))).count(),
        total: bp.len(),
        layers,
        predicted,
    })
}

/// Least-squares slope of `log total` against `log k`.
pub fn fit_exponent(points: &[(u32, usize)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|&(k, _)| (k as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, n)| (n as f64).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}
