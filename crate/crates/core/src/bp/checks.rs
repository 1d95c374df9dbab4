//! Restriction checkers and their self-certifying witnesses.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::Serialize;

use super::cylinder::{cylinders, values};
use super::paths::InstanceRun;
use super::validate::Defect;
use super::{bit, BranchingProgram, ComputationPath, Label, StateId};
use crate::error::{Error, Result};
use crate::space::{Budget, Coverage, Inputs};
use crate::tep::{QueryId, TepInstance, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Structure,
    ComputesTep,
    Thrifty,
    SyntacticReadOnce,
    NullPathFree,
    SemanticReadOnce,
    NodeIndependent,
    BitwiseIndependent,
    PebbleSoundness,
}

impl Property {
    pub fn name(&self) -> &'static str {
        match self {
            Property::Structure => "structure",
            Property::ComputesTep => "computes_tep",
            Property::Thrifty => "thrifty",
            Property::SyntacticReadOnce => "syntactic_read_once",
            Property::NullPathFree => "null_path_free",
            Property::SemanticReadOnce => "semantic_read_once",
            Property::NodeIndependent => "node_independent",
            Property::BitwiseIndependent => "bitwise_independent",
            Property::PebbleSoundness => "pebble_soundness",
        }
    }
}

/// Evidence that an instance's node value (or one bit of it) is attained
/// by some input reaching the state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Support {
    pub node: usize,
    pub bit: Option<u32>,
    pub instance: TepInstance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Structural { defects: Vec<Defect> },
    /// No complete computation path.
    Rejected { instance: TepInstance },
    WrongOutput { instance: TepInstance, path: ComputationPath, expected: Value },
    /// `path.states[position]` queries a table entry off the correct row or
    /// column.
    NonThrifty { instance: TepInstance, path: ComputationPath, position: usize },
    /// A complete computation path querying one slot at two positions.
    RepeatedQuery { instance: TepInstance, path: ComputationPath, first: usize, second: usize },
    /// Two states with the same query, the second reachable from the first,
    /// both on some start-to-output graph path.
    StatePair { first: StateId, second: StateId, query: QueryId },
    /// A start-to-output graph path answering one query two ways.
    NullPath { states: Vec<StateId>, labels: Vec<Value>, first: usize, second: usize },
    /// An input whose node values (or their bits) all occur among inputs
    /// reaching `state`, yet which does not reach it (with `complete`, does
    /// not complete through it).
    OutsideRectangle {
        state: StateId,
        complete: bool,
        instance: TepInstance,
        support: Vec<Support>,
    },
    /// Two inputs completing through `state` that disagree on a node the
    /// pebbling of the first marks as pebbled there.
    Unsound { state: StateId, node: usize, instance: TepInstance, other: TepInstance },
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub property: Property,
    pub pass: bool,
    pub coverage: Coverage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Verdict {
    pub fn pass(property: Property, coverage: Coverage) -> Self {
        Self { property, pass: true, coverage, witness: None, note: None }
    }

    pub fn fail(property: Property, coverage: Coverage, witness: Witness) -> Self {
        Self { property, pass: false, coverage, witness: Some(witness), note: None }
    }

    pub fn from_option(property: Property, coverage: Coverage, witness: Option<Witness>) -> Self {
        match witness {
            Some(w) => Self::fail(property, coverage, w),
            None => Self::pass(property, coverage),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// A sampled pass is advisory; anything else is definitive.
    pub fn is_definitive(&self) -> bool {
        !self.pass || self.coverage.is_exact()
    }

    /// Re-executes the witness of a failing verdict.
    pub fn reproduces(&self, bp: &BranchingProgram) -> bool {
        match &self.witness {
            Some(w) => w.reproduces(self.property, bp),
            None => false,
        }
    }
}

impl Witness {
    /// Whether the witness is a genuine violation of `property` in `bp`.
    pub fn reproduces(&self, property: Property, bp: &BranchingProgram) -> bool {
        let Some(order) = bp.topological_order() else {
            return matches!(self, Witness::Structural { defects } if defects.iter().any(|d| matches!(d, Defect::Cycle { .. })));
        };
        let run = |inst: &TepInstance| InstanceRun::new(bp, &order, inst);
        match self {
            Witness::Structural { defects } => {
                let now = bp.validate().defects;
                !defects.is_empty() && defects.iter().all(|d| now.contains(d))
            }
            Witness::Rejected { instance } => {
                property == Property::ComputesTep && !run(instance).complete[bp.start()]
            }
            Witness::WrongOutput { instance, path, expected } => {
                property == Property::ComputesTep
                    && *expected == instance.evaluate().root()
                    && path.is_consistent(bp, instance)
                    && path.output(bp).is_some_and(|a| a != *expected)
            }
            Witness::NonThrifty { instance, path, position } => {
                let v = instance.evaluate();
                property == Property::Thrifty
                    && path.is_consistent(bp, instance)
                    && path.complete
                    && match path.states.get(*position).and_then(|&s| bp.query(s)) {
                        Some(QueryId::Func(i, x, y)) => x != v.get(2 * i) || y != v.get(2 * i + 1),
                        _ => false,
                    }
            }
            Witness::RepeatedQuery { instance, path, first, second } => {
                property == Property::SemanticReadOnce
                    && path.is_consistent(bp, instance)
                    && path.complete
                    && first < second
                    && *second < path.len()
                    && bp.query(path.states[*first]).is_some()
                    && bp.query(path.states[*first]) == bp.query(path.states[*second])
            }
            Witness::StatePair { first, second, query } => {
                if property != Property::SyntacticReadOnce || first == second {
                    return false;
                }
                let desc = bp.descendants(&order);
                let co = coreachable(bp);
                bp.query(*first) == Some(*query)
                    && bp.query(*second) == Some(*query)
                    && bit(&desc[bp.start()], *first)
                    && bit(&desc[*first], *second)
                    && co[*second]
            }
            Witness::NullPath { states, labels, first, second } => {
                property == Property::NullPathFree
                    && is_graph_path(bp, states, labels)
                    && bp.output_value(*states.last().unwrap()).is_some()
                    && first < second
                    && *second < labels.len()
                    && bp.query(states[*first]).is_some()
                    && bp.query(states[*first]) == bp.query(states[*second])
                    && labels[*first] != labels[*second]
            }
            Witness::OutsideRectangle { state, complete, instance, support } => {
                let marks = |inst: &TepInstance| {
                    let r = run(inst);
                    if *complete {
                        r.complete[*state]
                    } else {
                        r.reach[*state]
                    }
                };
                let v = instance.evaluate();
                let nodes = bp.shape().node_count();
                let supported = match property {
                    Property::NodeIndependent => (1..=nodes).all(|i| {
                        support.iter().any(|s| {
                            s.node == i && s.bit.is_none() && s.instance.evaluate().get(i) == v.get(i)
                        })
                    }),
                    Property::BitwiseIndependent => (1..=nodes).all(|i| {
                        (0..bits_of(bp.k())).all(|l| {
                            support.iter().any(|s| {
                                s.node == i
                                    && s.bit == Some(l)
                                    && (s.instance.evaluate().get(i) - 1) >> l & 1
                                        == (v.get(i) - 1) >> l & 1
                            })
                        })
                    }),
                    _ => false,
                };
                supported && support.iter().all(|s| marks(&s.instance)) && !marks(instance)
            }
            Witness::Unsound { state, node, instance, other } => {
                property == Property::PebbleSoundness
                    && run(instance).complete[*state]
                    && run(other).complete[*state]
                    && instance.evaluate().get(*node) != other.evaluate().get(*node)
            }
        }
    }
}

pub(crate) fn bits_of(k: u32) -> u32 {
    k.trailing_zeros()
}

fn is_graph_path(bp: &BranchingProgram, states: &[StateId], labels: &[Value]) -> bool {
    states.first() == Some(&bp.start())
        && labels.len() + 1 == states.len()
        && states
            .windows(2)
            .zip(labels)
            .all(|(w, &a)| bp.query(w[0]).is_some() && bp.out_edges(w[0]).contains(&(a, w[1])))
}

/// States from which some graph path reaches an output.
pub(crate) fn coreachable(bp: &BranchingProgram) -> Vec<bool> {
    let mut co = vec![false; bp.len()];
    let mut rev: Vec<Vec<StateId>> = vec![Vec::new(); bp.len()];
    for e in bp.edges() {
        rev[e.to].push(e.from);
    }
    let mut queue: VecDeque<StateId> =
        (0..bp.len()).filter(|&s| bp.output_value(s).is_some()).collect();
    for &s in &queue {
        co[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &p in &rev[s] {
            if !co[p] {
                co[p] = true;
                queue.push_back(p);
            }
        }
    }
    co
}

fn structural_failure(property: Property, bp: &BranchingProgram) -> Option<Verdict> {
    let defects = bp.validate().defects;
    (!defects.is_empty())
        .then(|| Verdict::fail(property, Coverage::Structural, Witness::Structural { defects }))
}

/// A complete path visiting `points` in order, each segment taking least
/// state ids.
pub(crate) fn path_via(
    bp: &BranchingProgram,
    order: &[StateId],
    instance: &TepInstance,
    run: &InstanceRun,
    points: &[StateId],
) -> Option<ComputationPath> {
    let mut path = super::path_through(bp, order, instance, run, points[0])?;
    for w in points.windows(2) {
        let (from, to) = (w[0], w[1]);
        let at = path.position(from)?;
        path.states.truncate(at + 1);
        path.labels.truncate(at);
        let segment = consistent_route(bp, instance, run, from, to)?;
        for (a, s) in segment {
            path.labels.push(a);
            path.states.push(s);
        }
        let tail = super::path_through(bp, order, instance, run, to)?;
        let pos = tail.position(to)?;
        path.labels.extend_from_slice(&tail.labels[pos..]);
        path.states.extend_from_slice(&tail.states[pos + 1..]);
    }
    Some(path)
}

/// Breadth-first consistent route from `from` to `to` (exclusive of `from`).
fn consistent_route(
    bp: &BranchingProgram,
    instance: &TepInstance,
    run: &InstanceRun,
    from: StateId,
    to: StateId,
) -> Option<Vec<(Value, StateId)>> {
    let mut parent: Vec<Option<StateId>> = vec![None; bp.len()];
    let mut seen = vec![false; bp.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(s) = queue.pop_front() {
        if s == to {
            break;
        }
        let Some(q) = bp.query(s) else { continue };
        for t in bp.successors(s, instance.value(q)) {
            if !seen[t] && run.reach[t] {
                seen[t] = true;
                parent[t] = Some(s);
                queue.push_back(t);
            }
        }
    }
    if !seen[to] {
        return None;
    }
    let mut route = Vec::new();
    let mut s = to;
    while s != from {
        let p = parent[s]?;
        route.push((instance.value(bp.query(p)?), s));
        s = p;
    }
    route.reverse();
    Some(route)
}

/// Runs `probe` on every input (or a seeded sample) and returns the first
/// witness in enumeration order.
fn scan<F>(inputs: &Inputs, probe: F) -> Option<Witness>
where
    F: Fn(&TepInstance) -> Option<Witness> + Sync,
{
    (0..inputs.len()).into_par_iter().find_map_first(|idx| probe(&inputs.get(idx)))
}

/// Every input has a complete path and every complete path outputs `v_1`.
pub fn computes_tep(bp: &BranchingProgram, budget: &Budget) -> Result<Verdict> {
    let property = Property::ComputesTep;
    if let Some(v) = structural_failure(property, bp) {
        return Ok(v);
    }
    let order = bp.checked_order()?;
    let inputs = Inputs::new(bp.shape(), bp.k(), budget)?;
    if matches!(inputs, Inputs::Sample { .. }) && bp.is_deterministic() {
        return cylinder_verdict(bp, budget, property, |cyl, ranges| {
            let out = bp.output_value(cyl.path.last()).unwrap();
            let root = ranges[1];
            (root != 1 << (out - 1)).then(|| {
                let wrong = values(root).find(|&v| v != out).unwrap();
                (1usize, wrong)
            })
        });
    }
    let witness = scan(&inputs, |inst| {
        let run = InstanceRun::new(bp, &order, inst);
        let expected = inst.evaluate().root();
        if !run.complete[bp.start()] {
            return Some(Witness::Rejected { instance: inst.clone() });
        }
        let bad = (0..bp.len()).find(|&s| {
            run.complete[s] && bp.output_value(s).is_some_and(|a| a != expected)
        })?;
        let path = super::path_through(bp, &order, inst, &run, bad)?;
        Some(Witness::WrongOutput { instance: inst.clone(), path, expected })
    });
    Ok(Verdict::from_option(property, inputs.coverage(), witness))
}

/// Cylinder-based check for deterministic programs above the enumeration
/// cap. `bad` inspects a cylinder with its node ranges and returns a node
/// and a value it can take that makes some input in the cylinder a
/// violation; a concrete input is then built from it.
fn cylinder_verdict<F>(
    bp: &BranchingProgram,
    budget: &Budget,
    property: Property,
    bad: F,
) -> Result<Verdict>
where
    F: Fn(&super::Cylinder, &[u32]) -> Option<(usize, Value)>,
{
    let cyls = cylinders(bp, budget.path_cap)?;
    let m = bp.shape().slot_count(bp.k()) as u32;
    let coverage = Coverage::Cylinder { inputs_log_k: m };
    for cyl in &cyls {
        let ranges = cyl.ranges(bp);
        if let Some((node, value)) = bad(cyl, &ranges) {
            let instance = realize(bp, cyl, &ranges, node, value)
                .ok_or_else(|| Error::Counterexample("cylinder witness could not be realized".into()))?;
            let path = cyl.path.clone();
            let witness = match property {
                Property::ComputesTep => Witness::WrongOutput {
                    expected: instance.evaluate().root(),
                    instance,
                    path,
                },
                Property::Thrifty => {
                    let position = path
                        .states
                        .iter()
                        .position(|&s| match bp.query(s) {
                            Some(QueryId::Func(i, x, y)) => {
                                let v = instance.evaluate();
                                x != v.get(2 * i) || y != v.get(2 * i + 1)
                            }
                            _ => false,
                        })
                        .unwrap_or(0);
                    Witness::NonThrifty { instance, path, position }
                }
                _ => unreachable!("only output and thrift checks use cylinders"),
            };
            return Ok(Verdict::fail(property, coverage, witness));
        }
    }
    Ok(Verdict::pass(property, coverage))
}

/// An input in the cylinder where `node` takes `value`: searches the node
/// value vectors allowed by the ranges.
fn realize(
    bp: &BranchingProgram,
    cyl: &super::Cylinder,
    ranges: &[u32],
    node: usize,
    value: Value,
) -> Option<TepInstance> {
    let n = bp.shape().node_count();
    let mut v = vec![0 as Value; n + 1];
    fn fill(
        bp: &BranchingProgram,
        cyl: &super::Cylinder,
        ranges: &[u32],
        v: &mut Vec<Value>,
        i: usize,
        node: usize,
        value: Value,
    ) -> Option<TepInstance> {
        if i == 0 {
            return cyl.witness_with_values(bp, v);
        }
        let mask = if i == node { 1 << (value - 1) } else { ranges[i] };
        for a in values(mask & ranges[i]) {
            v[i] = a;
            if let Some(inst) = fill(bp, cyl, ranges, v, i - 1, node, value) {
                return Some(inst);
            }
        }
        None
    }
    fill(bp, cyl, ranges, &mut v, n, node, value)
}

/// Every table query on a complete computation path uses the children's
/// correct values.
pub fn check_thrifty(bp: &BranchingProgram, budget: &Budget) -> Result<Verdict> {
    let property = Property::Thrifty;
    if let Some(v) = structural_failure(property, bp) {
        return Ok(v);
    }
    let order = bp.checked_order()?;
    let inputs = Inputs::new(bp.shape(), bp.k(), budget)?;
    if matches!(inputs, Inputs::Sample { .. }) && bp.is_deterministic() {
        return cylinder_verdict(bp, budget, property, |cyl, ranges| {
            cyl.path.states.iter().find_map(|&s| match bp.query(s) {
                Some(QueryId::Func(i, x, y)) => {
                    if ranges[2 * i] != 1 << (x - 1) {
                        values(ranges[2 * i]).find(|&a| a != x).map(|a| (2 * i, a))
                    } else if ranges[2 * i + 1] != 1 << (y - 1) {
                        values(ranges[2 * i + 1]).find(|&a| a != y).map(|a| (2 * i + 1, a))
                    } else {
                        None
                    }
                }
                _ => None,
            })
        });
    }
    let witness = scan(&inputs, |inst| {
        let run = InstanceRun::new(bp, &order, inst);
        let v = inst.evaluate();
        let bad = (0..bp.len()).find(|&s| {
            run.complete[s]
                && matches!(bp.label(s), Label::Query(QueryId::Func(i, x, y))
                    if x != v.get(2 * i) || y != v.get(2 * i + 1))
        })?;
        let path = super::path_through(bp, &order, inst, &run, bad)?;
        let position = path.position(bad)?;
        Some(Witness::NonThrifty { instance: inst.clone(), path, position })
    });
    Ok(Verdict::from_option(property, inputs.coverage(), witness))
}

/// Groups of at least two states sharing a query.
fn shared_queries(bp: &BranchingProgram) -> Vec<(QueryId, Vec<StateId>)> {
    let mut groups: std::collections::BTreeMap<QueryId, Vec<StateId>> = Default::default();
    for s in 0..bp.len() {
        if let Some(q) = bp.query(s) {
            groups.entry(q).or_default().push(s);
        }
    }
    groups.into_iter().filter(|(_, v)| v.len() > 1).collect()
}

/// No start-to-output graph path visits two states with the same query.
pub fn check_syntactic_read_once(bp: &BranchingProgram) -> Result<Verdict> {
    let property = Property::SyntacticReadOnce;
    if let Some(v) = structural_failure(property, bp) {
        return Ok(v);
    }
    let order = bp.checked_order()?;
    let desc = bp.descendants(&order);
    let co = coreachable(bp);
    let live = |s: StateId| bit(&desc[bp.start()], s) && co[s];
    for (query, states) in shared_queries(bp) {
        for &a in &states {
            for &b in &states {
                if a != b && live(a) && live(b) && bit(&desc[a], b) {
                    return Ok(Verdict::fail(
                        property,
                        Coverage::Structural,
                        Witness::StatePair { first: a, second: b, query },
                    ));
                }
            }
        }
    }
    Ok(Verdict::pass(property, Coverage::Structural))
}

/// No start-to-output graph path answers one query in two ways. Depth-first
/// over graph paths carrying the partial assignment; `budget.path_cap`
/// bounds the number of edges explored.
pub fn check_null_path_free(bp: &BranchingProgram, budget: &Budget) -> Result<Verdict> {
    let property = Property::NullPathFree;
    if let Some(v) = structural_failure(property, bp) {
        return Ok(v);
    }
    let co = coreachable(bp);
    let m = bp.shape().slot_count(bp.k());
    let mut dfs = NullDfs {
        bp,
        co: &co,
        assigned: vec![None; m],
        states: vec![bp.start()],
        labels: Vec::new(),
        explored: 0,
        cap: budget.path_cap,
    };
    let witness = if co[bp.start()] { dfs.visit()? } else { None };
    Ok(Verdict::from_option(property, Coverage::Structural, witness))
}

struct NullDfs<'a> {
    bp: &'a BranchingProgram,
    co: &'a [bool],
    /// Per slot: answer and position of the state that gave it.
    assigned: Vec<Option<(Value, usize)>>,
    states: Vec<StateId>,
    labels: Vec<Value>,
    explored: u64,
    cap: u64,
}

impl NullDfs<'_> {
    fn visit(&mut self) -> Result<Option<Witness>> {
        let s = *self.states.last().unwrap();
        let Some(q) = self.bp.query(s) else { return Ok(None) };
        let slot = self.bp.shape().slot(self.bp.k(), q);
        let here = self.states.len() - 1;
        let mut edges: Vec<(Value, StateId)> = self.bp.out_edges(s).to_vec();
        edges.dedup();
        for (a, t) in edges {
            if !self.co[t] {
                continue;
            }
            self.explored += 1;
            if self.explored > self.cap {
                return Err(Error::BudgetExceeded {
                    what: "null-path search",
                    needed: format!("more than {} edges", self.cap),
                    cap: self.cap.to_string(),
                });
            }
            let found = match self.assigned[slot] {
                Some((b, first)) if b != a => {
                    let mut states = self.states.clone();
                    let mut labels = self.labels.clone();
                    labels.push(a);
                    states.push(t);
                    complete_graph_path(self.bp, self.co, &mut states, &mut labels);
                    Some(Witness::NullPath { states, labels, first, second: here })
                }
                Some(_) => self.descend(a, t)?,
                None => {
                    self.assigned[slot] = Some((a, here));
                    let found = self.descend(a, t)?;
                    self.assigned[slot] = None;
                    found
                }
            };
            if found.is_some() {
                return Ok(found);
            }
        }
        Ok(None)
    }

    fn descend(&mut self, a: Value, t: StateId) -> Result<Option<Witness>> {
        self.states.push(t);
        self.labels.push(a);
        let found = self.visit()?;
        self.states.pop();
        self.labels.pop();
        Ok(found)
    }
}

fn complete_graph_path(
    bp: &BranchingProgram,
    co: &[bool],
    states: &mut Vec<StateId>,
    labels: &mut Vec<Value>,
) {
    let mut s = *states.last().unwrap();
    while bp.output_value(s).is_none() {
        let &(a, t) = bp.out_edges(s).iter().find(|&&(_, t)| co[t]).expect("coreachable");
        labels.push(a);
        states.push(t);
        s = t;
    }
}

/// No complete computation path of any input queries a slot twice.
pub fn check_semantic_read_once(bp: &BranchingProgram, budget: &Budget) -> Result<Verdict> {
    let property = Property::SemanticReadOnce;
    if let Some(v) = structural_failure(property, bp) {
        return Ok(v);
    }
    let order = bp.checked_order()?;
    let inputs = Inputs::new(bp.shape(), bp.k(), budget)?;
    if matches!(inputs, Inputs::Sample { .. }) && bp.is_deterministic() {
        let cyls = cylinders(bp, budget.path_cap)?;
        let m = bp.shape().slot_count(bp.k()) as u32;
        let coverage = Coverage::Cylinder { inputs_log_k: m };
        for cyl in cyls {
            if let Some((first, second)) = cyl.repeated {
                let instance = TepInstance::from_slots(
                    bp.shape(),
                    bp.k(),
                    cyl.assigned.iter().map(|a| a.unwrap_or(1)).collect(),
                )?;
                let w = Witness::RepeatedQuery { instance, path: cyl.path, first, second };
                return Ok(Verdict::fail(property, coverage, w));
            }
        }
        return Ok(Verdict::pass(property, coverage));
    }
    let groups = shared_queries(bp);
    let witness = scan(&inputs, |inst| {
        let run = InstanceRun::new(bp, &order, inst);
        for (_, states) in &groups {
            for &a in states {
                if !run.complete[a] {
                    continue;
                }
                for &b in states {
                    if a == b || !run.complete[b] || consistent_route(bp, inst, &run, a, b).is_none() {
                        continue;
                    }
                    let path = path_via(bp, &order, inst, &run, &[a, b])?;
                    let first = path.position(a)?;
                    let second = first + 1 + path.states[first + 1..].iter().position(|&s| s == b)?;
                    return Some(Witness::RepeatedQuery { instance: inst.clone(), path, first, second });
                }
            }
        }
        None
    });
    Ok(Verdict::from_option(property, inputs.coverage(), witness))
}
