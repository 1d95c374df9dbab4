//! Canonical instances and programs, plus adversarial programs that break
//! one restriction each.

use std::collections::BTreeMap;

use num_traits::One;

use crate::amount::Rational;
use crate::bp::{BranchingProgram, Edge, Label};
use crate::pebbling::{optimal_black_sequence, Game, PebbleConfig, PebbleSequence};
use crate::synthesis::{compile_black, compile_bw};
use crate::tep::{QueryId, TepInstance, TreeShape, Value};

/// h=2, k=2: v₂=1, v₃=2, f₁ = [[1,2],[2,1]]; root value 2.
pub fn fix_a() -> TepInstance {
    TepInstance::new(2, 2, &[1, 2], &[vec![vec![1, 2], vec![2, 1]]]).expect("valid fixture")
}

/// h=3, k=2: leaves 1,2,1,1 and every table equal to FIX-A's.
pub fn fix_b() -> TepInstance {
    let f = vec![vec![1, 2], vec![2, 1]];
    TepInstance::new(3, 2, &[1, 2, 1, 1], &[f.clone(), f.clone(), f]).expect("valid fixture")
}

/// `compile_black(optimal_black_sequence(h), k)`.
pub fn compiled_det(h: u32, k: u32) -> BranchingProgram {
    compile_black(&optimal_black_sequence(h).expect("h in range"), k).expect("valid sequence")
}

/// The compiled black pebbling program at h=2, k=2.
pub fn bp_det() -> BranchingProgram {
    compiled_det(2, 2)
}

/// `[∅, {w3}, {w3,b2}, {b1,w3}, {b1}, ∅]`: guess v₃, learn v₂, learn v₁,
/// verify v₃.
pub fn guess_verify_sequence() -> PebbleSequence<Rational> {
    let shape = TreeShape::new(2).expect("h=2");
    let configs = [
        PebbleConfig::empty(shape),
        PebbleConfig::whole(shape, &[], &[3]),
        PebbleConfig::whole(shape, &[2], &[3]),
        PebbleConfig::whole(shape, &[1], &[3]),
        PebbleConfig::whole(shape, &[1], &[]),
        PebbleConfig::empty(shape),
    ];
    PebbleSequence::from_configs(shape, Game::Whole, Rational::one(), &configs).expect("valid sequence")
}

pub fn compiled_nd(k: u32) -> BranchingProgram {
    compile_bw(&guess_verify_sequence(), k).expect("valid sequence")
}

/// The compiled guess-and-verify program at h=2, k=2.
pub fn bp_nd() -> BranchingProgram {
    compiled_nd(2)
}

fn rebuild(bp: &BranchingProgram, labels: Vec<Label>, edges: Vec<Edge>, claim: Option<bool>) -> BranchingProgram {
    BranchingProgram::new(bp.k(), bp.height(), bp.start(), labels, edges)
        .expect("well-formed mutation")
        .with_claim(claim)
}

/// FIX-BP-DET with a second edge labelled 1 out of the start state, still
/// claiming determinism.
pub fn duplicate_label() -> BranchingProgram {
    let bp = bp_det();
    let mut edges = bp.edges().to_vec();
    edges.push(Edge { from: bp.start(), label: 1, to: 2 });
    rebuild(&bp, bp.labels().to_vec(), edges, Some(true))
}

/// FIX-BP-DET with its two leaf-3 states pointing at each other on label 2.
pub fn two_cycle() -> BranchingProgram {
    let bp = bp_det();
    let mut edges = bp.edges().to_vec();
    edges.push(Edge { from: 1, label: 2, to: 2 });
    edges.push(Edge { from: 2, label: 2, to: 1 });
    rebuild(&bp, bp.labels().to_vec(), edges, None)
}

/// FIX-BP-DET with the edge `f₁(1,1) = 1` sent to output 2.
pub fn retargeted_output() -> BranchingProgram {
    let bp = bp_det();
    let out2 = (0..bp.len()).find(|&s| bp.output_value(s) == Some(2)).unwrap();
    let f11 = (0..bp.len()).find(|&s| bp.query(s) == Some(QueryId::Func(1, 1, 1))).unwrap();
    let edges = bp
        .edges()
        .iter()
        .map(|e| if e.from == f11 && e.label == 1 { Edge { to: out2, ..*e } } else { *e })
        .collect();
    rebuild(&bp, bp.labels().to_vec(), edges, Some(true))
}

/// FIX-BP-DET where `f₁(2,2) = 2` leads to a state with no way out.
pub fn trap_state() -> BranchingProgram {
    let bp = bp_det();
    let mut labels = bp.labels().to_vec();
    let trap = labels.len();
    labels.push(Label::Query(QueryId::Leaf(2)));
    let f22 = (0..bp.len()).find(|&s| bp.query(s) == Some(QueryId::Func(1, 2, 2))).unwrap();
    let edges = bp
        .edges()
        .iter()
        .map(|e| if e.from == f22 && e.label == 2 { Edge { to: trap, ..*e } } else { *e })
        .collect();
    rebuild(&bp, labels, edges, None)
}

/// What a decision program does next given the answers so far.
pub enum Step {
    Ask(QueryId),
    Answer(Value),
}

/// Tree-shaped program whose state is the full record of answers so far.
pub fn decision_program(
    h: u32,
    k: u32,
    next: impl Fn(&BTreeMap<QueryId, Value>) -> Step,
) -> BranchingProgram {
    let mut labels = Vec::new();
    let mut edges = Vec::new();
    let mut outputs: Vec<Option<usize>> = vec![None; k as usize + 1];
    let mut queue = std::collections::VecDeque::from([(BTreeMap::new(), None::<(usize, Value)>)]);
    while let Some((known, from)) = queue.pop_front() {
        let id = match next(&known) {
            Step::Answer(a) => {
                if let Some(id) = outputs[a as usize] {
                    id
                } else {
                    labels.push(Label::Output(a));
                    outputs[a as usize] = Some(labels.len() - 1);
                    labels.len() - 1
                }
            }
            Step::Ask(q) => {
                labels.push(Label::Query(q));
                let id = labels.len() - 1;
                for a in 1..=k as Value {
                    let mut more = known.clone();
                    more.insert(q, a);
                    queue.push_back((more, Some((id, a))));
                }
                id
            }
        };
        if let Some((s, a)) = from {
            edges.push(Edge { from: s, label: a, to: id });
        }
    }
    BranchingProgram::new(k, h, 0, labels, edges).expect("decision program is well formed")
}

/// Reads `f₁(1,1)` first on every input, then evaluates thriftily.
pub fn unconditional_query() -> BranchingProgram {
    decision_program(2, 2, |known| {
        for q in [QueryId::Func(1, 1, 1), QueryId::Leaf(2), QueryId::Leaf(3)] {
            if !known.contains_key(&q) {
                return Step::Ask(q);
            }
        }
        let f = QueryId::Func(1, known[&QueryId::Leaf(2)], known[&QueryId::Leaf(3)]);
        match known.get(&f) {
            Some(&c) => Step::Answer(c),
            None => Step::Ask(f),
        }
    })
}

/// Scans the row `f₁(1,·)` before reading the leaves.
pub fn row_scanning() -> BranchingProgram {
    decision_program(2, 2, |known| {
        for q in [QueryId::Func(1, 1, 1), QueryId::Func(1, 1, 2), QueryId::Leaf(2), QueryId::Leaf(3)] {
            if !known.contains_key(&q) {
                return Step::Ask(q);
            }
        }
        let f = QueryId::Func(1, known[&QueryId::Leaf(2)], known[&QueryId::Leaf(3)]);
        match known.get(&f) {
            Some(&c) => Step::Answer(c),
            None => Step::Ask(f),
        }
    })
}

/// Reads v₂ and forgets it, reads v₃, guesses v₂ to read f₁, then reads v₂
/// again to verify the guess. Correct and thrifty, but not read-once, and
/// its pebbling marks v₂ at a state that no longer knows it.
pub fn forgetful_requery() -> BranchingProgram {
    let k = 2u32;
    let mut labels = vec![Label::Query(QueryId::Leaf(2)), Label::Query(QueryId::Leaf(3))];
    let mut edges: Vec<Edge> = (1..=k as Value).map(|a| Edge { from: 0, label: a, to: 1 }).collect();
    let mut ids = BTreeMap::new();
    for y in 1..=k as Value {
        for g in 1..=k as Value {
            labels.push(Label::Query(QueryId::Func(1, g, y)));
            let id = labels.len() - 1;
            ids.insert((g, y), id);
            edges.push(Edge { from: 1, label: y, to: id });
        }
    }
    let mut verify = BTreeMap::new();
    for g in 1..=k as Value {
        for c in 1..=k as Value {
            labels.push(Label::Query(QueryId::Leaf(2)));
            verify.insert((g, c), labels.len() - 1);
        }
    }
    let out = labels.len();
    for a in 1..=k as Value {
        labels.push(Label::Output(a));
    }
    for (&(g, _y), &id) in &ids {
        for c in 1..=k as Value {
            edges.push(Edge { from: id, label: c, to: verify[&(g, c)] });
        }
    }
    for (&(g, c), &id) in &verify {
        edges.push(Edge { from: id, label: g, to: out + c as usize - 1 });
    }
    BranchingProgram::new(k, 2, 0, labels, edges).expect("well formed").with_claim(Some(false))
}

/// h=2, k=4 program whose state after the first read only knows
/// `v₂ ∈ {1,4}` or `v₂ ∈ {2,3}`; it then re-reads v₂ and evaluates. The
/// set `{1,4}` (bits 00 and 11) is not a product of bit sets.
pub fn split_range() -> BranchingProgram {
    let k = 4u32;
    let det = compiled_det(2, k);
    // det: 0 = Leaf2, then the Leaf3 states for v₂ = 1..=4, and so on.
    let shift = 3;
    let mut labels = vec![Label::Query(QueryId::Leaf(2)), Label::Query(QueryId::Leaf(2)), Label::Query(QueryId::Leaf(2))];
    labels.extend(det.labels()[1..].iter().copied());
    let remap = |s: usize| s + shift - 1;
    let mut edges = Vec::new();
    for a in 1..=k as Value {
        let to = if a == 1 || a == 4 { 1 } else { 2 };
        edges.push(Edge { from: 0, label: a, to });
    }
    for e in det.edges() {
        if e.from == det.start() {
            edges.push(Edge { from: 1, label: e.label, to: remap(e.to) });
            edges.push(Edge { from: 2, label: e.label, to: remap(e.to) });
        } else {
            edges.push(Edge { from: remap(e.from), label: e.label, to: remap(e.to) });
        }
    }
    BranchingProgram::new(k, 2, 0, labels, edges).expect("well formed").with_claim(Some(true))
}
