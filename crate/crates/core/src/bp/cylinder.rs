//! Exact input accounting for deterministic programs.
//!
//! Following a deterministic program while branching only on input slots not
//! queried yet splits the input space into disjoint cylinders, one per
//! distinct computation path. A cylinder fixes the `|P|` queried slots and
//! leaves the other `m - |P|` free, so it holds `k^(m-|P|)` inputs.

use super::{BranchingProgram, ComputationPath, Label, StateId};
use crate::error::{Error, Result};
use crate::tep::{TepInstance, Value};

#[derive(Debug, Clone)]
pub struct Cylinder {
    pub path: ComputationPath,
    /// Assigned value per slot.
    pub assigned: Vec<Option<Value>>,
    /// Number of assigned slots.
    pub fixed: usize,
    /// Positions of the first repeated query on the path, if any.
    pub repeated: Option<(usize, usize)>,
}

impl Cylinder {
    /// Possible values of every node over the inputs of the cylinder, as
    /// bitmasks (bit `a - 1` for value `a`), indexed by node id.
    pub fn ranges(&self, bp: &BranchingProgram) -> Vec<u32> {
        let shape = bp.shape();
        let k = bp.k();
        let full = full_mask(k);
        let mut r = vec![0u32; shape.node_count() + 1];
        for node in shape.nodes().rev() {
            r[node] = if shape.is_leaf(node) {
                self.mask_at(shape.slot(k, crate::tep::QueryId::Leaf(node)), full)
            } else {
                let mut acc = 0;
                for x in values(r[2 * node]) {
                    for y in values(r[2 * node + 1]) {
                        let slot = shape.slot(k, crate::tep::QueryId::Func(node, x, y));
                        acc |= self.mask_at(slot, full);
                    }
                }
                acc
            };
        }
        r
    }

    fn mask_at(&self, slot: usize, full: u32) -> u32 {
        match self.assigned[slot] {
            Some(a) => 1 << (a - 1),
            None => full,
        }
    }

    /// `log_k` of the number of inputs in the cylinder whose correct node
    /// values are `v` (indexed by node id), or `None` if there are none.
    pub fn log_count_with_values(&self, bp: &BranchingProgram, v: &[Value]) -> Option<usize> {
        let shape = bp.shape();
        let k = bp.k();
        let mut pinned = 0;
        for node in shape.nodes() {
            let q = if shape.is_leaf(node) {
                crate::tep::QueryId::Leaf(node)
            } else {
                crate::tep::QueryId::Func(node, v[2 * node], v[2 * node + 1])
            };
            match self.assigned[shape.slot(k, q)] {
                Some(a) if a != v[node] => return None,
                Some(_) => {}
                None => pinned += 1,
            }
        }
        Some(self.assigned.len() - self.fixed - pinned)
    }

    /// One input of the cylinder with node values `v`; free slots get 1.
    pub fn witness_with_values(&self, bp: &BranchingProgram, v: &[Value]) -> Option<TepInstance> {
        self.log_count_with_values(bp, v)?;
        let shape = bp.shape();
        let k = bp.k();
        let mut slots: Vec<Value> = self.assigned.iter().map(|a| a.unwrap_or(1)).collect();
        for node in shape.nodes() {
            let q = if shape.is_leaf(node) {
                crate::tep::QueryId::Leaf(node)
            } else {
                crate::tep::QueryId::Func(node, v[2 * node], v[2 * node + 1])
            };
            slots[shape.slot(k, q)] = v[node];
        }
        TepInstance::from_slots(shape, k, slots).ok()
    }
}

pub(crate) fn full_mask(k: u32) -> u32 {
    if k == 32 {
        u32::MAX
    } else {
        (1u32 << k) - 1
    }
}

/// Values in a bitmask, ascending.
pub(crate) fn values(mask: u32) -> impl Iterator<Item = Value> {
    (0..32u32).filter(move |b| mask >> b & 1 == 1).map(|b| (b + 1) as Value)
}

/// All cylinders of a deterministic program, in lexicographic path order.
pub fn cylinders(bp: &BranchingProgram, cap: u64) -> Result<Vec<Cylinder>> {
    bp.checked_order()?;
    if let Some(s) = (0..bp.len()).find(|&s| !bp.deterministic_at(s)) {
        return Err(Error::NotDeterministic(s));
    }
    let m = bp.shape().slot_count(bp.k());
    let mut out = Vec::new();
    let mut assigned = vec![None; m];
    let mut states = vec![bp.start()];
    let mut labels = Vec::new();
    descend(bp, &mut assigned, 0, &mut states, &mut labels, None, &mut out, cap)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    bp: &BranchingProgram,
    assigned: &mut Vec<Option<Value>>,
    fixed: usize,
    states: &mut Vec<StateId>,
    labels: &mut Vec<Value>,
    repeated: Option<(usize, usize)>,
    out: &mut Vec<Cylinder>,
    cap: u64,
) -> Result<()> {
    let s = *states.last().unwrap();
    let q = match bp.label(s) {
        Label::Output(_) => {
            if out.len() as u64 >= cap {
                return Err(Error::BudgetExceeded {
                    what: "cylinder enumeration",
                    needed: format!("more than {cap} paths"),
                    cap: cap.to_string(),
                });
            }
            out.push(Cylinder {
                path: ComputationPath { states: states.clone(), labels: labels.clone(), complete: true },
                assigned: assigned.clone(),
                fixed,
                repeated,
            });
            return Ok(());
        }
        Label::Query(q) => q,
    };
    let slot = bp.shape().slot(bp.k(), q);
    let step = |a: Value,
                assigned: &mut Vec<Option<Value>>,
                fixed: usize,
                states: &mut Vec<StateId>,
                labels: &mut Vec<Value>,
                repeated: Option<(usize, usize)>,
                out: &mut Vec<Cylinder>|
     -> Result<()> {
        let t = bp.successors(s, a).next().expect("deterministic");
        states.push(t);
        labels.push(a);
        descend(bp, assigned, fixed, states, labels, repeated, out, cap)?;
        states.pop();
        labels.pop();
        Ok(())
    };
    match assigned[slot] {
        Some(a) => {
            let repeated = repeated.or_else(|| {
                let here = states.len() - 1;
                let first = states.iter().position(|&p| bp.query(p) == Some(q)).unwrap();
                Some((first, here))
            });
            step(a, assigned, fixed, states, labels, repeated, out)
        }
        None => {
            for a in 1..=bp.k() as Value {
                assigned[slot] = Some(a);
                step(a, assigned, fixed + 1, states, labels, repeated, out)?;
            }
            assigned[slot] = None;
            Ok(())
        }
    }
}
