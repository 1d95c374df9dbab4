//! Minimum pebble numbers by budget-bounded breadth-first search.
//!
//! Pebble values are counted in units of `1/d`. For a budget `B` (in units)
//! the search explores configurations of cost at most `B`, keyed together
//! with a flag recording whether the root has held a full black pebble. The
//! budget grows by one unit until a valid sequence exists, so the first
//! success is the minimum within granularity `1/d`.
//!
//! Increases of `w`, decreases of `b`, leaf increases of `b` and decreases
//! of `w` are explored one unit at a time: a larger step is a run of unit
//! steps with no higher intermediate cost. Increasing `b` on an internal
//! node changes the children at the same time, so every amount is tried.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;
use serde::Serialize;

use super::{Game, Move, PebbleSequence};
use crate::amount::Rational;
use crate::error::{Error, Result};
use crate::tep::TreeShape;

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub game: Game,
    pub d: u32,
    pub min: Rational,
    pub witness: PebbleSequence<Rational>,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchStats {
    /// Budgets (in units of `1/d`) tried, ascending.
    pub budgets: Vec<u32>,
    /// Keys visited at the successful budget.
    pub visited: u64,
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Place(u8),
    Slide(u8, bool, bool),
    Remove(u8),
    IncW(u8),
    DecB(u8),
    IncBLeaf(u8),
    DecWLeaf(u8),
    IncBInternal { node: u8, by: u8, dl: u8, dr: u8 },
    DecWInternal(u8),
}

struct Codec {
    n: usize,
    bits: u32,
    mask: u128,
}

impl Codec {
    fn new(n: usize, d: u32) -> Result<Self> {
        let bits = 32 - d.leading_zeros();
        if 2 * n as u32 * bits + 1 > 128 {
            return Err(Error::BudgetExceeded {
                what: "pebbling search key",
                needed: format!("{} bits", 2 * n as u32 * bits + 1),
                cap: "128 bits".into(),
            });
        }
        Ok(Self { n, bits, mask: (1u128 << bits) - 1 })
    }

    fn encode(&self, b: &[u8], w: &[u8], flag: bool) -> u128 {
        let mut key = flag as u128;
        for i in 1..=self.n {
            let shift = 1 + 2 * (i as u32 - 1) * self.bits;
            key |= (b[i] as u128) << shift;
            key |= (w[i] as u128) << (shift + self.bits);
        }
        key
    }

    fn decode(&self, key: u128, b: &mut [u8], w: &mut [u8]) -> bool {
        for i in 1..=self.n {
            let shift = 1 + 2 * (i as u32 - 1) * self.bits;
            b[i] = (key >> shift & self.mask) as u8;
            w[i] = (key >> (shift + self.bits) & self.mask) as u8;
        }
        key & 1 == 1
    }
}

/// Minimum over valid sequences of the maximum configuration cost, with a
/// witness. `d` is the granularity of the fractional game and is ignored
/// for the black and whole games.
pub fn min_pebble_number(game: Game, h: u32, d: u32, search_cap: u64) -> Result<SearchOutcome> {
    let shape = TreeShape::new(h)?;
    let d = match game {
        Game::Fractional if d == 0 => return Err(Error::InvalidSequence("denominator must be positive".into())),
        Game::Fractional => d,
        _ => 1,
    };
    let n = shape.node_count();
    let codec = Codec::new(n, d)?;
    let mut budgets = Vec::new();
    for budget in 1..=(n as u32 * d) {
        budgets.push(budget);
        if let Some((steps, visited)) = bfs(shape, game, d, budget, &codec, search_cap)? {
            let witness = build_witness(shape, game, d, &steps)?;
            let min = witness.max_pebbles();
            debug_assert_eq!(min, Rational::new(budget as i64, d as i64));
            return Ok(SearchOutcome {
                game,
                d,
                min,
                witness,
                stats: SearchStats { budgets, visited },
            });
        }
    }
    Err(Error::InvalidSequence("no valid sequence under any budget".into()))
}

fn bfs(
    shape: TreeShape,
    game: Game,
    d: u32,
    budget: u32,
    codec: &Codec,
    cap: u64,
) -> Result<Option<(Vec<Step>, u64)>> {
    let n = shape.node_count();
    let first_leaf = shape.first_leaf();
    let du = d as u8;
    let start = codec.encode(&vec![0; n + 1], &vec![0; n + 1], false);
    let goal = match game {
        Game::Black => {
            let mut b = vec![0; n + 1];
            b[1] = 1;
            codec.encode(&b, &vec![0; n + 1], true)
        }
        _ => codec.encode(&vec![0; n + 1], &vec![0; n + 1], true),
    };
    let mut parent: FxHashMap<u128, (u128, Step)> = FxHashMap::default();
    parent.insert(start, (start, Step::Remove(0)));
    let mut queue = VecDeque::from([start]);
    let mut b = vec![0u8; n + 1];
    let mut w = vec![0u8; n + 1];
    let mut next_moves: Vec<Step> = Vec::new();
    while let Some(key) = queue.pop_front() {
        if key == goal {
            let mut steps = Vec::new();
            let mut at = key;
            while at != start {
                let (prev, step) = parent[&at];
                steps.push(step);
                at = prev;
            }
            steps.reverse();
            return Ok(Some((steps, parent.len() as u64)));
        }
        let flag = codec.decode(key, &mut b, &mut w);
        let cost: u32 = (1..=n).map(|i| (b[i] + w[i]) as u32).sum();
        next_moves.clear();
        for i in 1..=n {
            let leaf = i >= first_leaf;
            let full_children = !leaf && {
                let (l, r) = (2 * i, 2 * i + 1);
                b[l] + w[l] == du && b[r] + w[r] == du
            };
            let room = du - b[i] - w[i];
            let node = i as u8;
            match game {
                Game::Black => {
                    if b[i] == 1 {
                        next_moves.push(Step::Remove(node));
                    } else if leaf {
                        next_moves.push(Step::Place(node));
                    } else if full_children {
                        for (cl, cr) in [(false, false), (true, false), (false, true), (true, true)] {
                            next_moves.push(Step::Slide(node, cl, cr));
                        }
                    }
                }
                _ => {
                    if b[i] > 0 {
                        next_moves.push(Step::DecB(node));
                    }
                    if room > 0 {
                        next_moves.push(Step::IncW(node));
                    }
                    if leaf {
                        if room > 0 {
                            next_moves.push(Step::IncBLeaf(node));
                        }
                        if w[i] > 0 {
                            next_moves.push(Step::DecWLeaf(node));
                        }
                    } else if full_children {
                        if w[i] > 0 {
                            next_moves.push(Step::DecWInternal(node));
                        }
                        for by in 1..=room {
                            for dl in 0..=b[2 * i] {
                                for dr in 0..=b[2 * i + 1] {
                                    next_moves.push(Step::IncBInternal { node, by, dl, dr });
                                }
                            }
                        }
                    }
                }
            }
        }
        for &step in &next_moves {
            let (mut nb, mut nw) = (b.clone(), w.clone());
            let mut delta: i32 = 0;
            match step {
                Step::Place(i) | Step::IncBLeaf(i) => {
                    nb[i as usize] += 1;
                    delta = 1;
                }
                Step::Slide(i, cl, cr) => {
                    let i = i as usize;
                    nb[i] = 1;
                    delta = 1;
                    if cl {
                        nb[2 * i] = 0;
                        delta -= 1;
                    }
                    if cr {
                        nb[2 * i + 1] = 0;
                        delta -= 1;
                    }
                }
                Step::Remove(i) | Step::DecB(i) => {
                    nb[i as usize] -= 1;
                    delta = -1;
                }
                Step::IncW(i) => {
                    nw[i as usize] += 1;
                    delta = 1;
                }
                Step::DecWLeaf(i) | Step::DecWInternal(i) => {
                    nw[i as usize] -= 1;
                    delta = -1;
                }
                Step::IncBInternal { node, by, dl, dr } => {
                    let i = node as usize;
                    nb[i] += by;
                    nb[2 * i] -= dl;
                    nb[2 * i + 1] -= dr;
                    delta += by as i32 - dl as i32 - dr as i32;
                }
            }
            if (cost as i32 + delta) as u32 > budget {
                continue;
            }
            let next_flag = flag || nb[1] == du;
            let next = codec.encode(&nb, &nw, next_flag);
            if let std::collections::hash_map::Entry::Vacant(slot) = parent.entry(next) {
                slot.insert((key, step));
                if parent.len() as u64 > cap {
                    return Err(Error::BudgetExceeded {
                        what: "pebbling search",
                        needed: format!("more than {cap} configurations at budget {budget}/{d}"),
                        cap: cap.to_string(),
                    });
                }
                queue.push_back(next);
            }
        }
    }
    Ok(None)
}

fn build_witness(shape: TreeShape, game: Game, d: u32, steps: &[Step]) -> Result<PebbleSequence<Rational>> {
    let unit = Rational::from_integer(1);
    let q = |x: u8| Rational::new(x as i64, d as i64);
    let mut seq = PebbleSequence::start(shape, game, unit);
    for &step in steps {
        let mv = match step {
            Step::Place(i) => Move::PlaceBlackLeaf(i as usize),
            Step::Slide(i, cl, cr) => {
                let i = i as usize;
                let mut clear = Vec::new();
                if cl {
                    clear.push(2 * i);
                }
                if cr {
                    clear.push(2 * i + 1);
                }
                Move::BlackSlide { node: i, clear }
            }
            Step::Remove(i) => Move::Remove(i as usize),
            Step::IncW(i) => Move::IncW { node: i as usize, by: q(1) },
            Step::DecB(i) => Move::DecB { node: i as usize, by: q(1) },
            Step::IncBLeaf(i) => Move::IncBLeaf { node: i as usize, by: q(1) },
            Step::DecWLeaf(i) => Move::DecWLeaf { node: i as usize, by: q(1) },
            Step::DecWInternal(i) => Move::DecWInternal { node: i as usize, by: q(1) },
            Step::IncBInternal { node, by, dl, dr } => {
                let i = node as usize;
                let child_dec = [(2 * i, dl), (2 * i + 1, dr)]
                    .into_iter()
                    .filter(|&(_, x)| x > 0)
                    .map(|(j, x)| (j, q(x)))
                    .collect();
                Move::IncBInternal { node: i, by: q(by), child_dec }
            }
        };
        seq.push(mv)?;
    }
    seq.validate().map_err(|(i, reason)| Error::IllegalMove { index: i, reason })?;
    Ok(seq)
}
