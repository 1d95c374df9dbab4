//! Instance enumeration and sampling under an enumeration budget.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tep::{check_k, TepInstance, TreeShape, Value};

/// Default cap on exhaustively enumerated inputs.
pub const DEFAULT_CAP: u64 = 1 << 24;
/// Default number of inputs drawn when falling back to sampling.
pub const DEFAULT_SAMPLES: u64 = 4096;
/// Environment variable overriding the enumeration cap.
pub const BUDGET_ENV: &str = "TEP_BUDGET";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Budget {
    /// Largest `k^m` enumerated exhaustively.
    pub enumeration_cap: u64,
    /// Inputs drawn when `k^m` exceeds the cap.
    pub samples: u64,
    /// Seed for the sampling fallback.
    pub seed: u64,
    /// Cap on paths explored by path-enumerating routines.
    pub path_cap: u64,
    /// Cap on configurations visited by pebbling searches.
    pub search_cap: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            enumeration_cap: DEFAULT_CAP,
            samples: DEFAULT_SAMPLES,
            seed: 0,
            path_cap: 1 << 22,
            search_cap: 1 << 26,
        }
    }
}

impl Budget {
    /// Defaults with the enumeration cap taken from `TEP_BUDGET` if set.
    pub fn from_env() -> Result<Self> {
        let mut budget = Self::default();
        if let Ok(raw) = std::env::var(BUDGET_ENV) {
            budget.enumeration_cap = raw.trim().parse().map_err(|_| Error::BudgetExceeded {
                what: "TEP_BUDGET",
                needed: raw.clone(),
                cap: "a positive integer".into(),
            })?;
        }
        Ok(budget)
    }

    pub fn with_cap(cap: u64) -> Self {
        Self { enumeration_cap: cap, ..Self::default() }
    }
}

/// `k^m`, or `None` when it does not fit in a `u64`.
pub fn instance_count(shape: TreeShape, k: u32) -> Option<u64> {
    (k as u64).checked_pow(shape.slot_count(k) as u32)
}

/// The set of all inputs for a given `(h, k)`.
#[derive(Debug, Clone, Copy)]
pub struct InstanceSpace {
    shape: TreeShape,
    k: u32,
    total: u64,
}

impl InstanceSpace {
    /// Fails with a budget error when `k^m` exceeds `cap`.
    pub fn new(h: u32, k: u32, cap: u64) -> Result<Self> {
        let shape = TreeShape::new(h)?;
        check_k(k)?;
        let m = shape.slot_count(k);
        match instance_count(shape, k) {
            Some(total) if total <= cap => Ok(Self { shape, k, total }),
            _ => Err(Error::BudgetExceeded {
                what: "exhaustive enumeration",
                needed: format!("{k}^{m}"),
                cap: cap.to_string(),
            }),
        }
    }

    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn shape(&self) -> TreeShape {
        self.shape
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// The instance with enumeration index `index`: slot `j` holds digit
    /// `j` of `index` in base `k`, plus one.
    pub fn get(&self, index: u64) -> TepInstance {
        debug_assert!(index < self.total);
        let k = self.k as u64;
        let mut rest = index;
        let slots = (0..self.shape.slot_count(self.k))
            .map(|_| {
                let digit = rest % k;
                rest /= k;
                (digit + 1) as Value
            })
            .collect();
        TepInstance::from_slots(self.shape, self.k, slots).expect("digits lie in [k]")
    }

    /// Inverse of [`InstanceSpace::get`].
    pub fn index_of(&self, instance: &TepInstance) -> u64 {
        instance
            .slots()
            .iter()
            .rev()
            .fold(0u64, |acc, &v| acc * self.k as u64 + (v as u64 - 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = TepInstance> + '_ {
        (0..self.total).map(move |i| self.get(i))
    }

    pub fn par_iter(&self) -> impl ParallelIterator<Item = TepInstance> + '_ {
        (0..self.total).into_par_iter().map(move |i| self.get(i))
    }
}

/// Every instance in enumeration order.
pub fn enumerate_instances(h: u32, k: u32, budget: &Budget) -> Result<InstanceSpace> {
    InstanceSpace::new(h, k, budget.enumeration_cap)
}

/// Uniformly random instance, deterministic in `seed`.
pub fn sample_instance(h: u32, k: u32, seed: u64) -> Result<TepInstance> {
    let shape = TreeShape::new(h)?;
    check_k(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_with(shape, k, &mut rng))
}

pub(crate) fn sample_with(shape: TreeShape, k: u32, rng: &mut impl Rng) -> TepInstance {
    let slots = (0..shape.slot_count(k))
        .map(|_| rng.gen_range(1..=k) as Value)
        .collect();
    TepInstance::from_slots(shape, k, slots).expect("sampled values lie in [k]")
}

/// How a verdict covered the input space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Coverage {
    Exhaustive { inputs: u64 },
    Sampled { inputs: u64, seed: u64 },
    /// Exact, via path cylinders of a deterministic program.
    Cylinder { inputs_log_k: u32 },
    /// Decided on the program graph alone.
    Structural,
}

impl Coverage {
    pub fn is_exact(&self) -> bool {
        !matches!(self, Coverage::Sampled { .. })
    }
}

/// Either the full space or a seeded sample, chosen by the budget.
#[derive(Debug, Clone)]
pub enum Inputs {
    All(InstanceSpace),
    Sample { shape: TreeShape, k: u32, count: u64, seed: u64 },
}

impl Inputs {
    pub fn new(shape: TreeShape, k: u32, budget: &Budget) -> Result<Self> {
        check_k(k)?;
        match InstanceSpace::new(shape.height(), k, budget.enumeration_cap) {
            Ok(space) => Ok(Inputs::All(space)),
            Err(Error::BudgetExceeded { .. }) => Ok(Inputs::Sample {
                shape,
                k,
                count: budget.samples,
                seed: budget.seed,
            }),
            Err(e) => Err(e),
        }
    }

    /// Exhaustive or an error; for analyses that need the whole space.
    pub fn exhaustive(shape: TreeShape, k: u32, budget: &Budget) -> Result<InstanceSpace> {
        InstanceSpace::new(shape.height(), k, budget.enumeration_cap)
    }

    pub fn coverage(&self) -> Coverage {
        match self {
            Inputs::All(space) => Coverage::Exhaustive { inputs: space.len() },
            Inputs::Sample { count, seed, .. } => Coverage::Sampled { inputs: *count, seed: *seed },
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            Inputs::All(space) => space.len(),
            Inputs::Sample { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `index`-th input; sampled inputs derive their own seed from the
    /// base seed and the index so that parallel order does not matter.
    pub fn get(&self, index: u64) -> TepInstance {
        match self {
            Inputs::All(space) => space.get(index),
            Inputs::Sample { shape, k, seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(index);
                sample_with(*shape, *k, &mut rng)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn enumeration_sizes() {
        let b = Budget::default();
        assert_eq!(enumerate_instances(2, 2, &b).unwrap().len(), 64);
        assert_eq!(enumerate_instances(3, 2, &b).unwrap().len(), 65536);
        assert_eq!(enumerate_instances(2, 3, &b).unwrap().len(), 3u64.pow(11));
        assert!(matches!(enumerate_instances(4, 2, &b), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn enumeration_is_a_bijection() {
        let space = enumerate_instances(2, 2, &Budget::default()).unwrap();
        let all: HashSet<_> = space.iter().collect();
        assert_eq!(all.len(), 64);
        for (i, inst) in space.iter().enumerate() {
            assert_eq!(space.index_of(&inst), i as u64);
        }
        // Slot 0 (leaf 2) varies fastest.
        assert_eq!(space.get(1).leaf(2), 2);
        assert_eq!(space.get(1).leaf(3), 1);
    }

    #[test]
    fn sampling_is_deterministic_and_in_space() {
        let a = sample_instance(4, 2, 11).unwrap();
        assert_eq!(a, sample_instance(4, 2, 11).unwrap());
        let c = sample_instance(2, 3, 5).unwrap();
        assert_eq!(c.m(), 11);
        assert!(c.slots().iter().all(|&v| (1..=3).contains(&v)));
        let space = enumerate_instances(2, 3, &Budget::default()).unwrap();
        assert_eq!(space.get(space.index_of(&c)), c);
    }

    #[test]
    fn sampled_root_distribution_matches_enumeration() {
        let space = enumerate_instances(2, 2, &Budget::default()).unwrap();
        let exact = space.iter().filter(|i| i.evaluate().root() == 1).count() as f64 / 64.0;
        let n = 10_000;
        let ones = (0..n)
            .filter(|&s| sample_instance(2, 2, s).unwrap().evaluate().root() == 1)
            .count() as f64
            / n as f64;
        assert!(ones > 0.0 && ones < 1.0);
        assert!((ones - exact).abs() < 0.03, "sampled {ones}, exact {exact}");
    }
}
