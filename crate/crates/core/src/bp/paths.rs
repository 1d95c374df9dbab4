use serde::Serialize;

use super::{BranchingProgram, Label, StateId};
use crate::error::{Error, Result};
use crate::tep::{TepInstance, Value};

/// `s_0 -a_1-> s_1 -a_2-> ...`; `labels[j]` is the edge leaving `states[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ComputationPath {
    pub states: Vec<StateId>,
    pub labels: Vec<Value>,
    pub complete: bool,
}

impl ComputationPath {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> StateId {
        *self.states.last().expect("paths are non-empty")
    }

    pub fn output(&self, bp: &BranchingProgram) -> Option<Value> {
        self.complete.then(|| bp.output_value(self.last())).flatten()
    }

    /// First position of `state` on the path.
    pub fn position(&self, state: StateId) -> Option<usize> {
        self.states.iter().position(|&s| s == state)
    }

    /// `C_0` (start through `states[at]`) and `C_1` (`states[at]` onward);
    /// both halves contain the split state.
    pub fn split(&self, at: usize) -> (&[StateId], &[StateId]) {
        (&self.states[..=at], &self.states[at..])
    }

    /// Re-checks that every step is an edge of `bp` answered as `instance`
    /// answers it.
    pub fn is_consistent(&self, bp: &BranchingProgram, instance: &TepInstance) -> bool {
        if self.states.first() != Some(&bp.start()) || self.labels.len() + 1 != self.states.len() {
            return false;
        }
        let steps_ok = self.states.windows(2).zip(&self.labels).all(|(w, &a)| {
            bp.query(w[0]).is_some_and(|q| instance.value(q) == a)
                && bp.out_edges(w[0]).contains(&(a, w[1]))
        });
        steps_ok && self.complete == bp.output_value(self.last()).is_some()
    }

    /// Whether some input slot is queried twice.
    pub fn repeats_query(&self, bp: &BranchingProgram) -> Option<(usize, usize)> {
        for j in 0..self.states.len() {
            let Some(q) = bp.query(self.states[j]) else { continue };
            for l in j + 1..self.states.len() {
                if bp.query(self.states[l]) == Some(q) {
                    return Some((j, l));
                }
            }
        }
        None
    }
}

/// The consistent subgraph of one program on one input.
#[derive(Debug, Clone)]
pub struct InstanceRun {
    /// Reached by some computation path.
    pub reach: Vec<bool>,
    /// Reached, and some consistent continuation ends at an output.
    pub complete: Vec<bool>,
}

impl InstanceRun {
    pub fn new(bp: &BranchingProgram, order: &[StateId], instance: &TepInstance) -> Self {
        let n = bp.len();
        let mut reach = vec![false; n];
        reach[bp.start()] = true;
        for &s in order {
            if !reach[s] {
                continue;
            }
            if let Label::Query(q) = bp.label(s) {
                for t in bp.successors(s, instance.value(q)) {
                    reach[t] = true;
                }
            }
        }
        let mut complete = vec![false; n];
        for &s in order.iter().rev() {
            if !reach[s] {
                continue;
            }
            complete[s] = match bp.label(s) {
                Label::Output(_) => true,
                Label::Query(q) => bp.successors(s, instance.value(q)).any(|t| complete[t]),
            };
        }
        Self { reach, complete }
    }

    /// Output values reached by complete paths.
    pub fn outputs(&self, bp: &BranchingProgram) -> Vec<Value> {
        let mut vals: Vec<Value> = (0..bp.len())
            .filter(|&s| self.complete[s])
            .filter_map(|s| bp.output_value(s))
            .collect();
        vals.sort_unstable();
        vals.dedup();
        vals
    }
}

pub(crate) fn check_fits(bp: &BranchingProgram, instance: &TepInstance) -> Result<()> {
    if instance.height() != bp.height() || instance.k() != bp.k() {
        return Err(Error::MalformedInstance(format!(
            "instance has h={}, k={} but the program expects h={}, k={}",
            instance.height(),
            instance.k(),
            bp.height(),
            bp.k()
        )));
    }
    Ok(())
}

/// The unique computation path of a deterministic program.
pub fn run_deterministic(bp: &BranchingProgram, instance: &TepInstance) -> Result<ComputationPath> {
    check_fits(bp, instance)?;
    if let Some(s) = (0..bp.len()).find(|&s| !bp.deterministic_at(s)) {
        return Err(Error::NotDeterministic(s));
    }
    let mut states = vec![bp.start()];
    let mut labels = Vec::new();
    let mut s = bp.start();
    while let Label::Query(q) = bp.label(s) {
        if states.len() > bp.len() {
            return Err(Error::MalformedProgram("computation path revisits a state".into()));
        }
        let a = instance.value(q);
        s = bp.successors(s, a).next().expect("deterministic states have every label");
        labels.push(a);
        states.push(s);
    }
    Ok(ComputationPath { states, labels, complete: true })
}

/// Greedy walk from `from` to an output through `complete` states, taking
/// the least successor id at each step.
fn finish(
    bp: &BranchingProgram,
    instance: &TepInstance,
    run: &InstanceRun,
    from: StateId,
    path: &mut ComputationPath,
) {
    let mut s = from;
    while let Label::Query(q) = bp.label(s) {
        let a = instance.value(q);
        s = bp
            .successors(s, a)
            .find(|&t| run.complete[t])
            .expect("complete states have a complete successor");
        path.labels.push(a);
        path.states.push(s);
    }
    path.complete = true;
}

/// The lexicographically least complete path under (label, successor id).
/// On a consistent path the label at each state is forced, so the order
/// reduces to successor ids and a greedy walk over states that can still
/// complete attains it.
pub fn canonical_path(bp: &BranchingProgram, instance: &TepInstance) -> Result<ComputationPath> {
    check_fits(bp, instance)?;
    let order = bp.checked_order()?;
    let run = InstanceRun::new(bp, &order, instance);
    canonical_with(bp, instance, &run)
}

pub(crate) fn canonical_with(
    bp: &BranchingProgram,
    instance: &TepInstance,
    run: &InstanceRun,
) -> Result<ComputationPath> {
    if !run.complete[bp.start()] {
        return Err(Error::NoCompletePath);
    }
    let mut path = ComputationPath { states: vec![bp.start()], labels: Vec::new(), complete: false };
    finish(bp, instance, run, bp.start(), &mut path);
    Ok(path)
}

/// The least complete path passing through `via`, if any.
pub fn path_through(
    bp: &BranchingProgram,
    order: &[StateId],
    instance: &TepInstance,
    run: &InstanceRun,
    via: StateId,
) -> Option<ComputationPath> {
    if !run.complete[via] {
        return None;
    }
    // Least predecessor on the consistent subgraph, in topological order.
    let mut pred: Vec<Option<StateId>> = vec![None; bp.len()];
    for &s in order {
        if !run.reach[s] {
            continue;
        }
        if let Label::Query(q) = bp.label(s) {
            for t in bp.successors(s, instance.value(q)) {
                if pred[t].is_none_or(|p| s < p) {
                    pred[t] = Some(s);
                }
            }
        }
    }
    let mut prefix = vec![via];
    let mut s = via;
    while s != bp.start() {
        s = pred[s]?;
        prefix.push(s);
    }
    prefix.reverse();
    let labels = prefix[..prefix.len() - 1]
        .iter()
        .map(|&s| instance.value(bp.query(s).expect("inner states query")))
        .collect();
    let mut path = ComputationPath { states: prefix, labels, complete: false };
    finish(bp, instance, run, via, &mut path);
    Some(path)
}

/// Every complete computation path, in lexicographic order.
pub fn enumerate_complete_paths(
    bp: &BranchingProgram,
    instance: &TepInstance,
    cap: u64,
) -> Result<Vec<ComputationPath>> {
    check_fits(bp, instance)?;
    let order = bp.checked_order()?;
    let run = InstanceRun::new(bp, &order, instance);
    let mut found = Vec::new();
    if !run.complete[bp.start()] {
        return Ok(found);
    }
    let mut states = vec![bp.start()];
    let mut labels = Vec::new();
    walk(bp, instance, &run, &mut states, &mut labels, &mut found, cap)?;
    Ok(found)
}

fn walk(
    bp: &BranchingProgram,
    instance: &TepInstance,
    run: &InstanceRun,
    states: &mut Vec<StateId>,
    labels: &mut Vec<Value>,
    found: &mut Vec<ComputationPath>,
    cap: u64,
) -> Result<()> {
    let s = *states.last().unwrap();
    match bp.label(s) {
        Label::Output(_) => {
            if found.len() as u64 >= cap {
                return Err(Error::BudgetExceeded {
                    what: "complete path enumeration",
                    needed: format!("more than {cap} paths"),
                    cap: cap.to_string(),
                });
            }
            found.push(ComputationPath { states: states.clone(), labels: labels.clone(), complete: true });
        }
        Label::Query(q) => {
            let a = instance.value(q);
            let mut next: Vec<_> = bp.successors(s, a).filter(|&t| run.complete[t]).collect();
            next.dedup();
            for t in next {
                states.push(t);
                labels.push(a);
                walk(bp, instance, run, states, labels, found, cap)?;
                states.pop();
                labels.pop();
            }
        }
    }
    Ok(())
}
