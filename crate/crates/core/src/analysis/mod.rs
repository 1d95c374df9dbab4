//! Pebbling arguments run against concrete computation paths.
//!
//! Each pipeline turns a complete computation path into a pebbling sequence
//! whose configurations are associated with path positions, locates the
//! supercritical position, and feeds a bottleneck census.

mod algorithm1;
mod census;
mod readonce;
mod schedule;
mod thrifty;

pub use algorithm1::{
    algorithm1_trace, check_efficient, check_ident_config, ro_det_supercritical, strip_grey, A1Config,
    A1Memory, A1Step, A1Trace, Grey, TraceViolation,
};
pub use census::{bottleneck_census, Census, Pipeline};
pub use readonce::{
    check_pebble_soundness, lehmer_code, ro_thrifty_bw_pebbling, semantic_ro_tag, semantic_ro_untag, Pebbler,
    ReadOnceMode, SemanticTag,
};
pub use schedule::{
    check_props, configuration_at, independent_schedule, independent_supercritical, PropReport, Supercritical,
    Variant,
};
pub use thrifty::{
    det_thrifty_critical_states, det_thrifty_pebbling, det_thrifty_tag, det_thrifty_untag, CriticalMap, ThriftyTag,
};

use rayon::prelude::*;

use crate::amount::Amount;
use crate::bp::{canonical_with, cylinders, run_deterministic, BranchingProgram, ComputationPath, InstanceRun};
use crate::error::{Error, Result};
use crate::pebbling::PebbleSequence;
use crate::space::{Budget, Coverage, Inputs};
use crate::tep::{QueryId, TepInstance};

/// The query made at `path.states[t]`.
pub(crate) fn query_at(bp: &BranchingProgram, path: &ComputationPath, t: usize) -> Result<QueryId> {
    path.states
        .get(t)
        .and_then(|&s| bp.query(s))
        .ok_or_else(|| Error::Premise(format!("position {t} of the path makes no query")))
}

/// First marked configuration with cost at least `bound`; returns its
/// marker (a path position).
pub fn first_marked_at_least<A: Amount>(seq: &PebbleSequence<A>, bound: &A) -> Option<usize> {
    seq.marked().find(|(_, c)| c.cost() >= *bound).map(|(marker, _)| marker)
}

/// Runs `map` on the canonical complete path of every input and folds the
/// results with `reduce`.
///
/// Inputs are enumerated exhaustively when their number is within the
/// enumeration cap. Above it, deterministic programs are covered exactly by
/// their computation paths: `map` sees one member of each path's input set
/// together with the size of that set. Nondeterministic programs above the
/// cap are refused.
pub fn map_reduce_paths<T, M, R>(
    bp: &BranchingProgram,
    budget: &Budget,
    identity: impl Fn() -> T + Sync + Send,
    map: M,
    reduce: R,
) -> Result<(T, Coverage)>
where
    T: Send,
    M: Fn(&TepInstance, &ComputationPath, u128) -> Result<T> + Sync + Send,
    R: Fn(T, T) -> T + Sync + Send,
{
    let shape = bp.shape();
    let k = bp.k();
    match Inputs::exhaustive(shape, k, budget) {
        Ok(space) => {
            let det = bp.is_deterministic();
            let order = bp.checked_order()?;
            let out = (0..space.len())
                .into_par_iter()
                .map(|n| {
                    let inst = space.get(n);
                    let path = if det {
                        run_deterministic(bp, &inst)?
                    } else {
                        let run = InstanceRun::new(bp, &order, &inst);
                        canonical_with(bp, &inst, &run)?
                    };
                    map(&inst, &path, 1)
                })
                .try_reduce(&identity, |a, b| Ok(reduce(a, b)))?;
            Ok((out, Coverage::Exhaustive { inputs: space.len() }))
        }
        Err(e @ Error::BudgetExceeded { .. }) => {
            if !bp.is_deterministic() {
                return Err(e);
            }
            let cyls = cylinders(bp, budget.path_cap)?;
            let m = shape.slot_count(k);
            let out = cyls
                .par_iter()
                .map(|c| {
                    let slots = c.assigned.iter().map(|v| v.unwrap_or(1)).collect();
                    let inst = TepInstance::from_slots(shape, k, slots)?;
                    let weight = (k as u128).checked_pow((m - c.fixed) as u32).ok_or(Error::BudgetExceeded {
                        what: "path weight",
                        needed: format!("{k}^{}", m - c.fixed),
                        cap: "2^128".into(),
                    })?;
                    map(&inst, &c.path, weight)
                })
                .try_reduce(&identity, |a, b| Ok(reduce(a, b)))?;
            Ok((out, Coverage::Cylinder { inputs_log_k: m as u32 }))
        }
        Err(e) => Err(e),
    }
}
