//! Fractional pebblings read off state pebble values `(b_γ, w_γ)` for
//! node-independent programs, and the monotonicity facts they rest on.

use std::collections::BTreeMap;

use serde::Serialize;

use super::query_at;
use crate::amount::{Amount, LogAmount};
use crate::bp::{BranchingProgram, ComputationPath, StateId, StateValueProfile};
use crate::error::{Error, Result};
use crate::pebbling::{Game, Move, PebbleConfig, PebbleSequence};
use crate::tep::{QueryId, TepInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    BitwiseThrifty,
    NodeIndependentRo,
}

/// `(b_γ(i), w_γ(i))` for every node.
pub fn configuration_at(profile: &StateValueProfile, s: StateId) -> PebbleConfig<LogAmount> {
    let n = profile.nodes();
    let mut c = PebbleConfig { b: vec![LogAmount::zero(); n + 1], w: vec![LogAmount::zero(); n + 1] };
    for i in 1..=n {
        c.b[i] = profile.b(s, i);
        c.w[i] = profile.w(s, i);
    }
    c
}

/// Moves between consecutive states `γ → δ`, `γ` querying `i`:
/// (1) black decreases off `i` and its children; (2') for the read-once
/// variant, white raised on `i`'s children to full when `i` is about to
/// lose white or gain black; (2a) white decrease on `i`; (2b) black
/// increase on `i` with the children's black decreases, otherwise the
/// children's and `i`'s own black decreases; (3) white increases. Each
/// state's configuration is marked with its path position.
pub fn independent_schedule(
    bp: &BranchingProgram,
    profile: &StateValueProfile,
    path: &ComputationPath,
    variant: Variant,
) -> Result<PebbleSequence<LogAmount>> {
    let shape = bp.shape();
    let unit = LogAmount::unit(bp.k());
    let mut seq = PebbleSequence::start(shape, Game::Fractional, unit.clone());
    let first = configuration_at(profile, path.states[0]);
    if *seq.last() != first {
        return Err(Error::Counterexample(format!("start state has nonzero pebble values {first}")));
    }
    seq.mark(0);
    for t in 0..path.len() - 1 {
        let (g, d) = (path.states[t], path.states[t + 1]);
        let i = query_at(bp, path, t)?.node();
        let cd = configuration_at(profile, d);
        let children = shape.children(i);
        let is_child = |j: usize| children.is_some_and(|(l, r)| j == l || j == r);
        let context = |what: String| {
            Error::Counterexample(format!("position {t}, states {g} -> {d}, node {i} queried: {what}"))
        };
        let push = |seq: &mut PebbleSequence<LogAmount>, mv: Move<LogAmount>| {
            let name = format!("{mv:?}");
            seq.push(mv).map_err(|e| context(format!("{name} is illegal ({e})")))
        };
        // (1)
        for j in shape.nodes() {
            if j != i && !is_child(j) && cd.b[j] < seq.last().b[j] {
                let by = seq.last().b[j].minus(&cd.b[j]);
                push(&mut seq, Move::DecB { node: j, by })?;
            }
        }
        let loses_white = cd.w[i] < seq.last().w[i];
        let gains_black = cd.b[i] > seq.last().b[i];
        // (2')
        if let (Variant::NodeIndependentRo, Some((l, r))) = (variant, children) {
            if loses_white || gains_black {
                for c in [l, r] {
                    let total = seq.last().total(c);
                    if total < unit {
                        push(&mut seq, Move::IncW { node: c, by: unit.minus(&total) })?;
                    }
                }
            }
        }
        // (2a)
        if loses_white {
            let by = seq.last().w[i].minus(&cd.w[i]);
            push(&mut seq, if children.is_some() { Move::DecWInternal { node: i, by } } else { Move::DecWLeaf { node: i, by } })?;
        }
        // (2b)
        let child_drops: Vec<(usize, LogAmount)> = children
            .map_or(Vec::new(), |(l, r)| vec![l, r])
            .into_iter()
            .filter(|&c| cd.b[c] < seq.last().b[c])
            .map(|c| (c, seq.last().b[c].minus(&cd.b[c])))
            .collect();
        if gains_black {
            let by = cd.b[i].minus(&seq.last().b[i]);
            push(
                &mut seq,
                match children {
                    None => Move::IncBLeaf { node: i, by },
                    Some(_) => Move::IncBInternal { node: i, by, child_dec: child_drops },
                },
            )?;
        } else {
            for (c, by) in child_drops {
                push(&mut seq, Move::DecB { node: c, by })?;
            }
            if cd.b[i] < seq.last().b[i] {
                let by = seq.last().b[i].minus(&cd.b[i]);
                push(&mut seq, Move::DecB { node: i, by })?;
            }
        }
        // (3)
        for j in shape.nodes().rev() {
            if cd.w[j] > seq.last().w[j] {
                let by = cd.w[j].minus(&seq.last().w[j]);
                push(&mut seq, Move::IncW { node: j, by })?;
            }
        }
        if *seq.last() != cd {
            return Err(context(format!("reached {} but the next state has {cd}", seq.last())));
        }
        seq.mark(t + 1);
    }
    let root = seq.last().b[1].clone();
    if !root.is_zero() {
        seq.push(Move::DecB { node: 1, by: root })?;
    }
    Ok(seq)
}

/// One property's tally along paths.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PropTally {
    pub checked: u64,
    /// Cases where the conclusion is not implied by the trivial bounds.
    pub nontrivial: u64,
    pub failures: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

impl PropTally {
    fn record(&mut self, nontrivial: bool, holds: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        self.nontrivial += nontrivial as u64;
        if !holds {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.checked += other.checked;
        self.nontrivial += other.nontrivial;
        self.failures += other.failures;
        self.first_failure = self.first_failure.or(other.first_failure);
        self
    }

    pub fn is_vacuous(&self) -> bool {
        self.nontrivial == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PropReport {
    pub props: BTreeMap<&'static str, PropTally>,
}

pub const PROPS: [&str; 6] = ["bi_black", "bi_white", "niro_mix", "niro_white", "niro_glue", "niro_children"];

impl PropReport {
    pub fn merge(mut self, other: Self) -> Self {
        for (name, tally) in other.props {
            let mine = self.props.remove(name).unwrap_or_default();
            self.props.insert(name, mine.merge(tally));
        }
        self
    }

    pub fn holds(&self, name: &str) -> bool {
        self.props.get(name).is_some_and(|t| t.failures == 0)
    }

    pub fn get(&self, name: &str) -> PropTally {
        self.props.get(name).cloned().unwrap_or_default()
    }
}

/// Checks the monotonicity facts on every consecutive pair of `path` and
/// every node. Which of them are theorems depends on the program's
/// restrictions; the caller decides which to require.
pub fn check_props(
    bp: &BranchingProgram,
    profile: &StateValueProfile,
    instance: &TepInstance,
    path: &ComputationPath,
) -> Result<PropReport> {
    let shape = bp.shape();
    let k = bp.k();
    let values = instance.evaluate();
    let mut report = PropReport::default();
    for name in PROPS {
        report.props.insert(name, PropTally::default());
    }
    let full = |m: u32| m.count_ones() == k;
    let single = |m: u32, v: u8| m == 1 << (v - 1);
    for t in 0..path.len() {
        let g = path.states[t];
        for i in shape.nodes() {
            let (r, a) = (profile.r[g][i], profile.a[g][i]);
            let (b_pos, w_pos) = (!full(r), a != r);
            report.props.get_mut("niro_mix").unwrap().record(b_pos || w_pos, !(b_pos && w_pos), || {
                format!("state {g} node {i}: R={r:#b} A={a:#b}")
            });
        }
        if t + 1 == path.len() {
            break;
        }
        let d = path.states[t + 1];
        let q = query_at(bp, path, t)?;
        for i in shape.nodes() {
            let thrifty = q == instance.thrifty_query(&values, i);
            let (rg, ag, rd, ad) = (profile.r[g][i], profile.a[g][i], profile.r[d][i], profile.a[d][i]);
            let at = || format!("states {g} -> {d} node {i}: R {rg:#b} -> {rd:#b}, A {ag:#b} -> {ad:#b}");
            // w_γ ≤ w_δ  ⇔  |R_γ|·|A_δ| ≤ |R_δ|·|A_γ|
            let white_ok =
                rg.count_ones() as u64 * ad.count_ones() as u64 <= rd.count_ones() as u64 * ag.count_ones() as u64;
            if !thrifty {
                report.props.get_mut("bi_black").unwrap().record(!full(rd), rg & !rd == 0, at);
                report.props.get_mut("bi_white").unwrap().record(ag != rg, white_ok, at);
                report.props.get_mut("niro_white").unwrap().record(ag != rg, white_ok, at);
                let glue = if full(rg) { ad & !rg == 0 } else { rg & !ad == 0 };
                report.props.get_mut("niro_glue").unwrap().record(!full(rg), glue, at);
            }
            let rises = rd.count_ones() < rg.count_ones();
            let w_drops = !white_ok;
            if rises || w_drops {
                let children_ok = shape.children(i).is_none_or(|(l, r)| {
                    [l, r].into_iter().all(|j| {
                        let v = values.get(j);
                        single(profile.r[g][j], v) || single(profile.a[d][j], v)
                    })
                });
                report.props.get_mut("niro_children").unwrap().record(true, thrifty && children_ok, at);
            } else {
                report.props.get_mut("niro_children").unwrap().record(false, true, at);
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Supercritical {
    pub position: usize,
    pub state: StateId,
    /// `p_γ`, or `p_γ − p_γ(2i) − p_γ(2i+1) + 2` for the fallback.
    pub effective: String,
    pub effective_approx: f64,
    pub fallback: bool,
}

/// First state with `p_γ ≥ h/2 + 1`; for the read-once variant, failing
/// that, the first state making the thrifty query to an internal `i` with
/// `p_γ − p_γ(2i) − p_γ(2i+1) + 2 ≥ h/2 + 1`.
pub fn independent_supercritical(
    bp: &BranchingProgram,
    profile: &StateValueProfile,
    instance: &TepInstance,
    path: &ComputationPath,
    variant: Variant,
) -> Result<Supercritical> {
    let (k, h) = (bp.k(), bp.height() as i64);
    let found = |t: usize, p: LogAmount, fallback: bool| Supercritical {
        position: t,
        state: path.states[t],
        effective: p.to_string(),
        effective_approx: p.approx(k),
        fallback,
    };
    for (t, &s) in path.states.iter().enumerate() {
        let p = profile.p(s);
        if p.at_least(k, h + 2, 2) {
            return Ok(found(t, p, false));
        }
    }
    if variant == Variant::NodeIndependentRo {
        let values = instance.evaluate();
        let two = LogAmount::unit(k).plus(&LogAmount::unit(k));
        for t in 0..path.len() - 1 {
            let s = path.states[t];
            let q = query_at(bp, path, t)?;
            let QueryId::Func(i, ..) = q else { continue };
            if q != instance.thrifty_query(&values, i) {
                continue;
            }
            let p = profile.p(s).minus(&profile.p_node(s, 2 * i)).minus(&profile.p_node(s, 2 * i + 1)).plus(&two);
            if p.at_least(k, h + 2, 2) {
                return Ok(found(t, p, true));
            }
        }
    }
    Err(Error::Counterexample(format!(
        "no state on the path of {:?} reaches pebble value h/2+1",
        instance.slots()
    )))
}
