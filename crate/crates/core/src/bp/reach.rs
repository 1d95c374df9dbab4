//! Reaching and accepting value sets `R_γ(i)`, `A_γ(i)` and the state pebble
//! values derived from them.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use super::checks::{bits_of, Property, Support, Verdict, Witness};
use super::cylinder::{cylinders, full_mask, values, Cylinder};
use super::paths::InstanceRun;
use super::{BranchingProgram, StateId};
use crate::amount::{Amount, LogAmount};
use crate::error::{Error, Result};
use crate::space::{Budget, Coverage, Inputs};
use crate::tep::{TepInstance, Value};

type ValueTest = Box<dyn Fn(Value) -> bool + Sync>;

/// Per state and node: the correct values of inputs reaching the state
/// (`r`) and of inputs with a complete path through it (`a`), as bitmasks
/// with bit `a - 1` standing for value `a`. Node index 0 is unused.
#[derive(Debug, Clone, Serialize)]
pub struct StateValueProfile {
    pub k: u32,
    pub h: u32,
    pub m: usize,
    pub r: Vec<Vec<u32>>,
    pub a: Vec<Vec<u32>>,
    pub reach_count: Vec<u128>,
    pub complete_count: Vec<u128>,
    pub coverage: Coverage,
}

impl StateValueProfile {
    pub fn nodes(&self) -> usize {
        (1usize << self.h) - 1
    }

    pub fn on_complete_path(&self, s: StateId) -> bool {
        self.complete_count[s] > 0
    }

    pub fn r_size(&self, s: StateId, i: usize) -> u32 {
        self.r[s][i].count_ones()
    }

    pub fn a_size(&self, s: StateId, i: usize) -> u32 {
        self.a[s][i].count_ones()
    }

    /// `b_γ(i) = log_k(k / |R_γ(i)|)`.
    pub fn b(&self, s: StateId, i: usize) -> LogAmount {
        LogAmount::ratio(self.k as u64, self.r_size(s, i) as u64)
    }

    /// `w_γ(i) = log_k(|R_γ(i)| / |A_γ(i)|)`.
    pub fn w(&self, s: StateId, i: usize) -> LogAmount {
        LogAmount::ratio(self.r_size(s, i) as u64, self.a_size(s, i) as u64)
    }

    /// `p_γ(i) = b_γ(i) + w_γ(i) = log_k(k / |A_γ(i)|)`.
    pub fn p_node(&self, s: StateId, i: usize) -> LogAmount {
        LogAmount::ratio(self.k as u64, self.a_size(s, i) as u64)
    }

    /// `p_γ = Σ_i p_γ(i)`.
    pub fn p(&self, s: StateId) -> LogAmount {
        (1..=self.nodes()).fold(LogAmount::zero(), |acc, i| acc.plus(&self.p_node(s, i)))
    }

    /// `count ≤ k^(m - p_γ)`, decided as `count · k^n ≤ k^m · Π_i |A_γ(i)|`.
    pub fn count_bound_holds(&self, s: StateId) -> bool {
        if !self.on_complete_path(s) {
            return true;
        }
        let k = BigUint::from(self.k);
        let lhs = BigUint::from(self.complete_count[s]) * k.pow(self.nodes() as u32);
        let rhs = (1..=self.nodes())
            .fold(k.pow(self.m as u32), |acc, i| acc * BigUint::from(self.a_size(s, i)));
        lhs <= rhs
    }

    /// Whether every set is well formed: `∅ ≠ A ⊆ R ⊆ [k]` on states of
    /// complete paths.
    pub fn sets_nested(&self, s: StateId) -> bool {
        let full = full_mask(self.k);
        !self.on_complete_path(s)
            || (1..=self.nodes()).all(|i| {
                let (r, a) = (self.r[s][i], self.a[s][i]);
                a != 0 && a & !r == 0 && r & !full == 0
            })
    }
}

/// The two bit projections `R(i, l)` of a value set, as 2-bit masks over
/// `{0, 1}`, one per bit `l` of the encoding `a - 1`.
pub fn bit_projection(mask: u32, k: u32) -> Vec<u8> {
    (0..bits_of(k))
        .map(|l| {
            values(mask).fold(0u8, |acc, a| acc | 1 << ((a as u32 - 1) >> l & 1))
        })
        .collect()
}

/// The smallest bit product containing `mask`.
pub(crate) fn bit_closure(mask: u32, k: u32) -> u32 {
    let proj = bit_projection(mask, k);
    (1..=k as Value)
        .filter(|&a| proj.iter().enumerate().all(|(l, p)| p >> ((a as u32 - 1) >> l & 1) & 1 == 1))
        .fold(0, |acc, a| acc | 1 << (a - 1))
}

pub fn is_bit_product(mask: u32, k: u32) -> bool {
    bit_closure(mask, k) == mask
}

/// Exact data for deterministic programs: per state, the number of inputs
/// with each node value vector that pass through it, and the cylinders
/// through it.
struct CylinderData {
    cyls: Vec<Cylinder>,
    per_state: Vec<BTreeMap<Vec<Value>, (u128, usize)>>,
}

impl CylinderData {
    fn new(bp: &BranchingProgram, budget: &Budget) -> Result<Self> {
        let cyls = cylinders(bp, budget.path_cap)?;
        let n = bp.shape().node_count();
        let vectors = (bp.k() as u64).checked_pow(n as u32).filter(|&v| v <= 1 << 20).ok_or(
            Error::BudgetExceeded {
                what: "node value vectors",
                needed: format!("{}^{n}", bp.k()),
                cap: (1u64 << 20).to_string(),
            },
        )?;
        let k = bp.k() as u128;
        let mut per_state = vec![BTreeMap::new(); bp.len()];
        for (ci, cyl) in cyls.iter().enumerate() {
            let mut on_path: Vec<StateId> = cyl.path.states.clone();
            on_path.sort_unstable();
            on_path.dedup();
            for_each_vector(n, bp.k(), vectors, |v| {
                if let Some(e) = cyl.log_count_with_values(bp, v) {
                    let c = k.pow(e as u32);
                    for &s in &on_path {
                        let slot = per_state[s].entry(v.to_vec()).or_insert((0, ci));
                        slot.0 += c;
                    }
                }
            });
        }
        Ok(Self { cyls, per_state })
    }

    fn profile(&self, bp: &BranchingProgram) -> StateValueProfile {
        let n = bp.shape().node_count();
        let mut r = vec![vec![0u32; n + 1]; bp.len()];
        let mut counts = vec![0u128; bp.len()];
        for (s, map) in self.per_state.iter().enumerate() {
            for (v, &(c, _)) in map {
                counts[s] += c;
                for i in 1..=n {
                    r[s][i] |= 1 << (v[i] - 1);
                }
            }
        }
        let m = bp.shape().slot_count(bp.k());
        StateValueProfile {
            k: bp.k(),
            h: bp.height(),
            m,
            a: r.clone(),
            r,
            reach_count: counts.clone(),
            complete_count: counts,
            coverage: Coverage::Cylinder { inputs_log_k: m as u32 },
        }
    }

    /// An input with node values `v` that does not pass through `s`.
    fn outside(&self, bp: &BranchingProgram, s: StateId, v: &[Value]) -> Option<TepInstance> {
        self.cyls
            .iter()
            .filter(|c| !c.path.states.contains(&s))
            .find_map(|c| c.witness_with_values(bp, v))
    }

    /// An input through `s` whose node `i` satisfies `pick`.
    fn inside(
        &self,
        bp: &BranchingProgram,
        s: StateId,
        i: usize,
        pick: impl Fn(Value) -> bool,
    ) -> Option<TepInstance> {
        let (v, &(_, ci)) = self.per_state[s].iter().find(|(v, _)| pick(v[i]))?;
        self.cyls[ci].witness_with_values(bp, v)
    }
}

fn for_each_vector(n: usize, k: u32, total: u64, mut f: impl FnMut(&[Value])) {
    let mut v = vec![1 as Value; n + 1];
    v[0] = 0;
    for mut idx in 0..total {
        for slot in v.iter_mut().skip(1) {
            *slot = (idx % k as u64) as Value + 1;
            idx /= k as u64;
        }
        f(&v);
    }
}

enum Source {
    Brute { order: Vec<StateId>, inputs: Inputs },
    Cylinders(CylinderData),
}

impl Source {
    fn new(bp: &BranchingProgram, budget: &Budget) -> Result<Self> {
        let order = bp.checked_order()?;
        let inputs = Inputs::new(bp.shape(), bp.k(), budget)?;
        if matches!(inputs, Inputs::Sample { .. }) && bp.is_deterministic() {
            return Ok(Source::Cylinders(CylinderData::new(bp, budget)?));
        }
        Ok(Source::Brute { order, inputs })
    }

    fn profile(&self, bp: &BranchingProgram) -> StateValueProfile {
        match self {
            Source::Cylinders(data) => data.profile(bp),
            Source::Brute { order, inputs } => brute_profile(bp, order, inputs),
        }
    }
}

fn brute_profile(bp: &BranchingProgram, order: &[StateId], inputs: &Inputs) -> StateValueProfile {
    let n = bp.shape().node_count();
    let states = bp.len();
    type Acc = (Vec<u32>, Vec<u32>, Vec<u128>, Vec<u128>);
    let empty = || -> Acc {
        (vec![0; states * (n + 1)], vec![0; states * (n + 1)], vec![0; states], vec![0; states])
    };
    let (r, a, rc, cc) = (0..inputs.len())
        .into_par_iter()
        .fold(empty, |mut acc, idx| {
            let inst = inputs.get(idx);
            let v = inst.evaluate();
            let run = InstanceRun::new(bp, order, &inst);
            for s in 0..states {
                if !run.reach[s] {
                    continue;
                }
                acc.2[s] += 1;
                let complete = run.complete[s];
                if complete {
                    acc.3[s] += 1;
                }
                for i in 1..=n {
                    let b = 1u32 << (v.get(i) - 1);
                    acc.0[s * (n + 1) + i] |= b;
                    if complete {
                        acc.1[s * (n + 1) + i] |= b;
                    }
                }
            }
            acc
        })
        .reduce(empty, |mut x, y| {
            x.0.iter_mut().zip(&y.0).for_each(|(p, q)| *p |= q);
            x.1.iter_mut().zip(&y.1).for_each(|(p, q)| *p |= q);
            x.2.iter_mut().zip(&y.2).for_each(|(p, q)| *p += q);
            x.3.iter_mut().zip(&y.3).for_each(|(p, q)| *p += q);
            x
        });
    StateValueProfile {
        k: bp.k(),
        h: bp.height(),
        m: bp.shape().slot_count(bp.k()),
        r: r.chunks(n + 1).map(<[u32]>::to_vec).collect(),
        a: a.chunks(n + 1).map(<[u32]>::to_vec).collect(),
        reach_count: rc,
        complete_count: cc,
        coverage: inputs.coverage(),
    }
}

/// `R_γ(i)`, `A_γ(i)` and input counts for every state.
pub fn reach_sets(bp: &BranchingProgram, budget: &Budget) -> Result<StateValueProfile> {
    Ok(Source::new(bp, budget)?.profile(bp))
}

/// Number of inputs with a complete computation path through `state`.
pub fn count_inputs_through(
    bp: &BranchingProgram,
    state: StateId,
    budget: &Budget,
) -> Result<u128> {
    if state >= bp.len() {
        return Err(Error::MalformedProgram(format!("no state {state}")));
    }
    let profile = reach_sets(bp, budget)?;
    if !profile.coverage.is_exact() {
        return Err(Error::BudgetExceeded {
            what: "exact input count",
            needed: format!("{}^{}", bp.k(), profile.m),
            cap: budget.enumeration_cap.to_string(),
        });
    }
    Ok(profile.complete_count[state])
}

/// Reaching and completing sets are rectangles over node values.
pub fn check_node_independent(bp: &BranchingProgram, budget: &Budget) -> Result<Verdict> {
    independence(bp, budget, false)
}

/// Reaching and completing sets are rectangles over the bits of node
/// values (standard binary encoding of `a - 1`).
pub fn check_bitwise_independent(bp: &BranchingProgram, budget: &Budget) -> Result<Verdict> {
    if !bp.k().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(bp.k()));
    }
    independence(bp, budget, true)
}

fn independence(bp: &BranchingProgram, budget: &Budget, bitwise: bool) -> Result<Verdict> {
    let property = if bitwise { Property::BitwiseIndependent } else { Property::NodeIndependent };
    let source = Source::new(bp, budget)?;
    let profile = source.profile(bp);
    let k = bp.k();
    let n = bp.shape().node_count();
    let close = |mask: u32| if bitwise { bit_closure(mask, k) } else { mask };
    let rect_r: Vec<Vec<u32>> = profile.r.iter().map(|row| row.iter().map(|&m| close(m)).collect()).collect();
    let rect_a: Vec<Vec<u32>> = profile.a.iter().map(|row| row.iter().map(|&m| close(m)).collect()).collect();
    let inside = |rect: &[u32], v: &[Value]| (1..=n).all(|i| rect[i] >> (v[i] - 1) & 1 == 1);

    // (state, complete flag, offending input)
    let found: Option<(StateId, bool, TepInstance)> = match &source {
        Source::Brute { order, inputs } => (0..inputs.len()).into_par_iter().find_map_first(|idx| {
            let inst = inputs.get(idx);
            let v = inst.evaluate();
            let run = InstanceRun::new(bp, order, &inst);
            (0..bp.len()).find_map(|s| {
                if profile.reach_count[s] > 0 && !run.reach[s] && inside(&rect_r[s], v.as_slice()) {
                    Some((s, false, inst.clone()))
                } else if profile.complete_count[s] > 0
                    && !run.complete[s]
                    && inside(&rect_a[s], v.as_slice())
                {
                    Some((s, true, inst.clone()))
                } else {
                    None
                }
            })
        }),
        Source::Cylinders(data) => {
            let full = (k as u128).pow((profile.m - n) as u32);
            let total = (k as u64).pow(n as u32);
            let mut hit = None;
            'states: for s in 0..bp.len() {
                if profile.reach_count[s] == 0 {
                    continue;
                }
                let mut miss = None;
                for_each_vector(n, k, total, |v| {
                    if miss.is_none() && inside(&rect_r[s], v) {
                        let c = data.per_state[s].get(v).map_or(0, |e| e.0);
                        if c < full {
                            miss = Some(v.to_vec());
                        }
                    }
                });
                if let Some(v) = miss {
                    let inst = data.outside(bp, s, &v).ok_or_else(|| {
                        Error::Counterexample("rectangle gap without an input".into())
                    })?;
                    hit = Some((s, false, inst));
                    break 'states;
                }
            }
            hit
        }
    };

    let Some((state, complete, instance)) = found else {
        return Ok(Verdict::pass(property, profile.coverage));
    };
    let v = instance.evaluate();
    let mut support = Vec::new();
    for i in 1..=n {
        let targets: Vec<(Option<u32>, ValueTest)> = if bitwise {
            (0..bits_of(k))
                .map(|l| {
                    let want = (v.get(i) as u32 - 1) >> l & 1;
                    let f: ValueTest =
                        Box::new(move |a: Value| (a as u32 - 1) >> l & 1 == want);
                    (Some(l), f)
                })
                .collect()
        } else {
            let want = v.get(i);
            vec![(None, Box::new(move |a: Value| a == want) as ValueTest)]
        };
        for (bit, pick) in targets {
            let found = match &source {
                Source::Brute { order, inputs } => {
                    (0..inputs.len()).into_par_iter().find_map_first(|idx| {
                        let j = inputs.get(idx);
                        let run = InstanceRun::new(bp, order, &j);
                        let marked = if complete { run.complete[state] } else { run.reach[state] };
                        (marked && pick(j.evaluate().get(i))).then_some(j)
                    })
                }
                Source::Cylinders(data) => data.inside(bp, state, i, &pick),
            };
            let instance = found.ok_or_else(|| {
                Error::Counterexample(format!("no support for node {i} at state {state}"))
            })?;
            support.push(Support { node: i, bit, instance });
        }
    }
    Ok(Verdict::fail(
        property,
        profile.coverage,
        Witness::OutsideRectangle { state, complete, instance, support },
    ))
}
