//! Bottleneck census: how many inputs share each supercritical state.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::Serialize;

use super::algorithm1::{algorithm1_trace, ro_det_supercritical};
use super::readonce::{ro_thrifty_bw_pebbling, ReadOnceMode};
use super::schedule::{independent_supercritical, Variant};
use super::thrifty::{det_thrifty_critical_states, det_thrifty_pebbling};
use super::{first_marked_at_least, map_reduce_paths};
use crate::amount::{format_rational, Rational};
use crate::bp::{reach_sets, BranchingProgram, ComputationPath, StateId, StateValueProfile};
use crate::error::{Error, Result};
use crate::space::{Budget, Coverage};
use crate::tep::TepInstance;

/// Which argument assigns supercritical states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    DetThrifty,
    RoThrifty(ReadOnceMode),
    Algorithm1,
    Bitwise,
    NodeIndependentRo,
}

impl Pipeline {
    /// Exponent `e` of the per-state bound `k^(m-e)`.
    pub fn exponent(&self, h: u32) -> Rational {
        let h = h as i64;
        match self {
            Pipeline::DetThrifty | Pipeline::Algorithm1 => Rational::from_integer(h),
            Pipeline::RoThrifty(_) => Rational::from_integer((h + 1) / 2 + 1),
            Pipeline::Bitwise | Pipeline::NodeIndependentRo => Rational::new(h + 2, 2),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::DetThrifty => "det-thrifty",
            Pipeline::RoThrifty(ReadOnceMode::Syntactic) => "ro-thrifty",
            Pipeline::RoThrifty(ReadOnceMode::NullPathFree) => "ro-thrifty-npf",
            Pipeline::Algorithm1 => "algorithm1",
            Pipeline::Bitwise => "bitwise",
            Pipeline::NodeIndependentRo => "niro",
        }
    }

    fn needs_profile(&self) -> bool {
        matches!(self, Pipeline::Bitwise | Pipeline::NodeIndependentRo)
    }

    /// Path position of the supercritical state.
    pub fn supercritical(
        &self,
        bp: &BranchingProgram,
        profile: Option<&StateValueProfile>,
        instance: &TepInstance,
        path: &ComputationPath,
    ) -> Result<usize> {
        let h = bp.height();
        let missing = |what: &str| Error::Counterexample(format!("{what} on the path of {:?}", instance.slots()));
        match self {
            Pipeline::DetThrifty => {
                let crit = det_thrifty_critical_states(bp, path)?;
                let seq = det_thrifty_pebbling(bp, path, &crit)?;
                first_marked_at_least(&seq, &self.exponent(h)).ok_or_else(|| missing("no h-pebble configuration"))
            }
            Pipeline::RoThrifty(mode) => {
                let seq = ro_thrifty_bw_pebbling(bp, path, *mode)?;
                first_marked_at_least(&seq, &self.exponent(h))
                    .ok_or_else(|| missing("no configuration with ceil(h/2)+1 pebbles"))
            }
            Pipeline::Algorithm1 => ro_det_supercritical(&algorithm1_trace(bp, path)?),
            Pipeline::Bitwise | Pipeline::NodeIndependentRo => {
                let profile = profile.ok_or_else(|| Error::Premise("state values were not computed".into()))?;
                let variant =
                    if *self == Pipeline::Bitwise { Variant::BitwiseThrifty } else { Variant::NodeIndependentRo };
                Ok(independent_supercritical(bp, profile, instance, path, variant)?.position)
            }
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "det-thrifty" => Pipeline::DetThrifty,
            "ro-thrifty" => Pipeline::RoThrifty(ReadOnceMode::Syntactic),
            "ro-thrifty-npf" => Pipeline::RoThrifty(ReadOnceMode::NullPathFree),
            "algorithm1" | "ro-det" => Pipeline::Algorithm1,
            "bitwise" => Pipeline::Bitwise,
            "niro" => Pipeline::NodeIndependentRo,
            other => return Err(Error::Premise(format!("unknown pipeline {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Census {
    pub pipeline: Pipeline,
    pub k: u32,
    pub h: u32,
    pub m: usize,
    /// `e` in the bound `k^(m-e)`, as `p` or `p/q`.
    pub exponent: String,
    pub counts: BTreeMap<StateId, u128>,
    pub max: u128,
    pub instances: u128,
    pub coverage: Coverage,
}

impl Census {
    fn exponent_ratio(&self) -> Rational {
        self.pipeline.exponent(self.h)
    }

    /// `max ≤ k^(m-e)`, decided as `max^q · k^p ≤ k^(m·q)` for `e = p/q`.
    pub fn bound_holds(&self) -> bool {
        let e = self.exponent_ratio();
        let (p, q) = (*e.numer() as u32, *e.denom() as u32);
        let k = BigUint::from(self.k);
        BigUint::from(self.max).pow(q) * k.pow(p) <= k.pow(self.m as u32 * q)
    }

    /// `k^(m-e)` as an exact integer when `e` is one.
    pub fn bound(&self) -> String {
        let e = self.exponent_ratio();
        if e.is_integer() && (*e.numer() as usize) <= self.m {
            BigUint::from(self.k).pow(self.m as u32 - *e.numer() as u32).to_string()
        } else {
            format!("{}^({}-{})", self.k, self.m, format_rational(&e))
        }
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    /// `k^e`: the state count every input landing somewhere forces.
    pub fn floor(&self) -> f64 {
        let e = self.exponent_ratio();
        (self.k as f64).powf(e.numer().to_f64().unwrap() / e.denom().to_f64().unwrap())
    }

    pub fn floor_holds(&self) -> bool {
        let e = self.exponent_ratio();
        let (p, q) = (*e.numer() as u32, *e.denom() as u32);
        BigUint::from(self.distinct()).pow(q) >= BigUint::from(self.k).pow(p)
    }

    pub fn verdict(&self) -> &'static str {
        if self.bound_holds() {
            "pass"
        } else {
            "fail"
        }
    }

    /// Flat map: one key per state plus the summary fields.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (s, c) in &self.counts {
            map.insert(s.to_string(), count_json(*c));
        }
        map.insert("max".into(), count_json(self.max));
        map.insert("bound".into(), serde_json::json!(self.bound()));
        map.insert("verdict".into(), serde_json::json!(self.verdict()));
        map.insert("exponent".into(), serde_json::json!(self.exponent));
        map.insert("instances".into(), count_json(self.instances));
        map.insert("distinct".into(), serde_json::json!(self.distinct()));
        map.insert("pipeline".into(), serde_json::json!(self.pipeline.name()));
        serde_json::Value::Object(map)
    }
}

/// Counts above `u64` are written as decimal strings.
fn count_json(c: u128) -> serde_json::Value {
    u64::try_from(c).map_or_else(|_| serde_json::Value::String(c.to_string()), serde_json::Value::from)
}

/// Maps every input to its supercritical state under `pipeline` and counts
/// inputs per state. Deterministic programs above the enumeration cap are
/// counted exactly through their computation paths.
pub fn bottleneck_census(bp: &BranchingProgram, pipeline: Pipeline, budget: &Budget) -> Result<Census> {
    let profile = if pipeline.needs_profile() { Some(reach_sets(bp, budget)?) } else { None };
    let (counts, coverage) = map_reduce_paths(
        bp,
        budget,
        BTreeMap::new,
        |inst, path, weight| {
            let t = pipeline.supercritical(bp, profile.as_ref(), inst, path)?;
            Ok(BTreeMap::from([(path.states[t], weight)]))
        },
        |mut a: BTreeMap<StateId, u128>, b| {
            for (s, c) in b {
                *a.entry(s).or_default() += c;
            }
            a
        },
    )?;
    let max = counts.values().copied().max().unwrap_or(0);
    let instances = counts.values().sum();
    let e = pipeline.exponent(bp.height());
    Ok(Census {
        pipeline,
        k: bp.k(),
        h: bp.height(),
        m: bp.shape().slot_count(bp.k()),
        exponent: format_rational(&e),
        counts,
        max,
        instances,
        coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn det_fixture_census() {
        let c = bottleneck_census(&fixtures::bp_det(), Pipeline::DetThrifty, &Budget::default()).unwrap();
        assert_eq!(c.instances, 64);
        assert_eq!(c.max, 16);
        assert_eq!(c.distinct(), 4);
        assert!(c.bound_holds() && c.floor_holds());
        assert_eq!(c.bound(), "16");
    }

    #[test]
    fn fractional_exponent_bound() {
        let mut c = bottleneck_census(&fixtures::bp_det(), Pipeline::Bitwise, &Budget::default()).unwrap();
        assert_eq!(c.exponent, "2");
        c.h = 3;
        c.m = 6;
        c.max = 11;
        // 11^2 * 2^5 = 3872 <= 2^12 = 4096; 12 would give 4608.
        assert!(c.bound_holds());
        c.max = 12;
        assert!(!c.bound_holds());
    }
}
