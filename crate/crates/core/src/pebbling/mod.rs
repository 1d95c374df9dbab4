//! Black, whole black-white and fractional pebbling of `T^h_2`.

mod json;
mod optimal;
mod search;

pub use json::SequenceJson;
pub use optimal::optimal_black_sequence;
pub use search::{min_pebble_number, SearchOutcome};

use std::fmt;

use num_traits::One;
use serde::Serialize;

use crate::amount::{Amount, Rational};
use crate::error::{Error, Result};
use crate::tep::TreeShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Game {
    Black,
    Whole,
    Fractional,
}

impl Game {
    pub fn name(&self) -> &'static str {
        match self {
            Game::Black => "black",
            Game::Whole => "whole",
            Game::Fractional => "fractional",
        }
    }
}

impl std::str::FromStr for Game {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "black" => Ok(Game::Black),
            "whole" => Ok(Game::Whole),
            "fractional" => Ok(Game::Fractional),
            other => Err(Error::InvalidSequence(format!("unknown game {other:?}"))),
        }
    }
}

/// Black and white pebble values per node, index 0 unused.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PebbleConfig<A> {
    pub b: Vec<A>,
    pub w: Vec<A>,
}

impl<A: Amount> PebbleConfig<A> {
    pub fn empty(shape: TreeShape) -> Self {
        let n = shape.node_count() + 1;
        Self { b: vec![A::zero(); n], w: vec![A::zero(); n] }
    }

    pub fn nodes(&self) -> usize {
        self.b.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.b.iter().chain(&self.w).all(Amount::is_zero)
    }

    /// `Σ_i b(i) + w(i)`.
    pub fn cost(&self) -> A {
        self.b.iter().chain(&self.w).fold(A::zero(), |acc, x| acc.plus(x))
    }

    pub fn total(&self, i: usize) -> A {
        self.b[i].plus(&self.w[i])
    }

    pub fn is_full(&self, i: usize, unit: &A) -> bool {
        self.total(i) == *unit
    }

    /// Nodes with any pebble.
    pub fn pebbled(&self) -> Vec<usize> {
        (1..=self.nodes()).filter(|&i| !self.total(i).is_zero()).collect()
    }
}

impl PebbleConfig<Rational> {
    /// Whole-pebble configuration from node lists.
    pub fn whole(shape: TreeShape, black: &[usize], white: &[usize]) -> Self {
        let mut c = Self::empty(shape);
        for &i in black {
            c.b[i] = Rational::one();
        }
        for &i in white {
            c.w[i] = Rational::one();
        }
        c
    }
}

impl<A: Amount> fmt::Display for PebbleConfig<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for i in 1..=self.nodes() {
            for (tag, v) in [("b", &self.b[i]), ("w", &self.w[i])] {
                if !v.is_zero() {
                    if !first {
                        write!(f, ", ")?;
                    }
                    first = false;
                    write!(f, "{tag}{i}={v}")?;
                }
            }
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move<A> {
    /// Black game: pebble an empty leaf.
    PlaceBlackLeaf(usize),
    /// Black game: pebble `node` whose children are pebbled, clearing the
    /// listed children.
    BlackSlide { node: usize, clear: Vec<usize> },
    /// Black game: remove the pebble on `node`.
    Remove(usize),
    IncW { node: usize, by: A },
    DecB { node: usize, by: A },
    IncBLeaf { node: usize, by: A },
    DecWLeaf { node: usize, by: A },
    /// Needs both children fully pebbled; children's black values may drop
    /// at the same time.
    IncBInternal { node: usize, by: A, child_dec: Vec<(usize, A)> },
    DecWInternal { node: usize, by: A },
}

impl<A> Move<A> {
    pub fn node(&self) -> usize {
        match self {
            Move::PlaceBlackLeaf(n) | Move::Remove(n) => *n,
            Move::BlackSlide { node, .. }
            | Move::IncW { node, .. }
            | Move::DecB { node, .. }
            | Move::IncBLeaf { node, .. }
            | Move::DecWLeaf { node, .. }
            | Move::IncBInternal { node, .. }
            | Move::DecWInternal { node, .. } => *node,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Move::PlaceBlackLeaf(_) => "place_black_leaf",
            Move::BlackSlide { .. } => "black_slide",
            Move::Remove(_) => "remove",
            Move::IncW { .. } => "inc_w",
            Move::DecB { .. } => "dec_b",
            Move::IncBLeaf { .. } => "inc_b_leaf",
            Move::DecWLeaf { .. } => "dec_w_leaf",
            Move::IncBInternal { .. } => "inc_b_internal",
            Move::DecWInternal { .. } => "dec_w_internal",
        }
    }
}

/// Applies one move under the rules of `game` with full pebble value
/// `unit`.
pub fn apply_move<A: Amount>(
    shape: TreeShape,
    game: Game,
    unit: &A,
    config: &PebbleConfig<A>,
    mv: &Move<A>,
) -> std::result::Result<PebbleConfig<A>, String> {
    let node = mv.node();
    if !shape.contains(node) {
        return Err(format!("node {node} is not in the tree"));
    }
    let black_only = matches!(mv, Move::PlaceBlackLeaf(_) | Move::BlackSlide { .. } | Move::Remove(_));
    if (game == Game::Black) != black_only {
        return Err(format!("move {} is not part of the {} game", mv.name(), game.name()));
    }
    let zero = A::zero();
    let positive = |by: &A| {
        if *by > zero {
            Ok(())
        } else {
            Err(format!("move {} needs a positive amount", mv.name()))
        }
    };
    let children_full = |c: &PebbleConfig<A>| -> std::result::Result<(), String> {
        let (l, r) = shape.children(node).ok_or(format!("node {node} is a leaf"))?;
        for j in [l, r] {
            if !c.is_full(j, unit) {
                return Err(format!("child {j} of node {node} is not fully pebbled"));
            }
        }
        Ok(())
    };
    let mut next = config.clone();
    match mv {
        Move::PlaceBlackLeaf(i) => {
            if !shape.is_leaf(*i) {
                return Err(format!("node {i} is not a leaf"));
            }
            if !config.b[*i].is_zero() {
                return Err(format!("leaf {i} already holds a pebble"));
            }
            next.b[*i] = unit.clone();
        }
        Move::BlackSlide { node, clear } => {
            children_full(config)?;
            if !config.b[*node].is_zero() {
                return Err(format!("node {node} already holds a pebble"));
            }
            let (l, r) = shape.children(*node).unwrap();
            for &j in clear {
                if j != l && j != r {
                    return Err(format!("node {j} is not a child of {node}"));
                }
                next.b[j] = zero.clone();
            }
            next.b[*node] = unit.clone();
        }
        Move::Remove(i) => {
            if config.b[*i].is_zero() {
                return Err(format!("node {i} holds no pebble"));
            }
            next.b[*i] = zero.clone();
        }
        Move::IncW { node, by } => {
            positive(by)?;
            next.w[*node] = config.w[*node].plus(by);
        }
        Move::DecB { node, by } => {
            positive(by)?;
            next.b[*node] = config.b[*node].minus(by);
        }
        Move::IncBLeaf { node, by } => {
            positive(by)?;
            if !shape.is_leaf(*node) {
                return Err(format!("node {node} is not a leaf"));
            }
            next.b[*node] = config.b[*node].plus(by);
        }
        Move::DecWLeaf { node, by } => {
            positive(by)?;
            if !shape.is_leaf(*node) {
                return Err(format!("node {node} is not a leaf"));
            }
            next.w[*node] = config.w[*node].minus(by);
        }
        Move::IncBInternal { node, by, child_dec } => {
            positive(by)?;
            children_full(config)?;
            let (l, r) = shape.children(*node).unwrap();
            for (j, dec) in child_dec {
                if *j != l && *j != r {
                    return Err(format!("node {j} is not a child of {node}"));
                }
                positive(dec)?;
                next.b[*j] = next.b[*j].minus(dec);
            }
            next.b[*node] = config.b[*node].plus(by);
        }
        Move::DecWInternal { node, by } => {
            positive(by)?;
            children_full(config)?;
            next.w[*node] = config.w[*node].minus(by);
        }
    }
    for i in 1..=next.nodes() {
        let (b, w) = (&next.b[i], &next.w[i]);
        if *b < zero || *w < zero {
            return Err(format!("pebble value of node {i} would become negative"));
        }
        if next.total(i) > *unit {
            return Err(format!("node {i} would exceed a full pebble"));
        }
        let whole = |x: &A| x.is_zero() || x == unit;
        if game != Game::Fractional && !(whole(b) && whole(w)) {
            return Err(format!("node {i} would hold a partial pebble in the {} game", game.name()));
        }
    }
    Ok(next)
}

/// Configurations with the move between each adjacent pair, plus markers
/// tying configurations to external objects (e.g. program states).
#[derive(Debug, Clone)]
pub struct PebbleSequence<A> {
    pub shape: TreeShape,
    pub game: Game,
    pub unit: A,
    pub configs: Vec<PebbleConfig<A>>,
    pub moves: Vec<Move<A>>,
    /// `(config index, marker)`, ascending by index.
    pub markers: Vec<(usize, usize)>,
}

impl<A: Amount> PebbleSequence<A> {
    pub fn start(shape: TreeShape, game: Game, unit: A) -> Self {
        Self {
            shape,
            game,
            unit,
            configs: vec![PebbleConfig::empty(shape)],
            moves: Vec::new(),
            markers: Vec::new(),
        }
    }

    pub fn last(&self) -> &PebbleConfig<A> {
        self.configs.last().unwrap()
    }

    /// Appends a move, failing if it is illegal.
    pub fn push(&mut self, mv: Move<A>) -> Result<()> {
        let next = apply_move(self.shape, self.game, &self.unit, self.last(), &mv)
            .map_err(|reason| Error::IllegalMove { index: self.moves.len(), reason })?;
        self.configs.push(next);
        self.moves.push(mv);
        Ok(())
    }

    /// Marks the current last configuration.
    pub fn mark(&mut self, marker: usize) {
        self.markers.push((self.configs.len() - 1, marker));
    }

    /// Moves taking the last configuration to `target`: decreases first,
    /// then increases from the leaves up, folding decreases of a child's
    /// black value into its parent's increase where the rules allow it.
    pub fn extend_to(&mut self, target: &PebbleConfig<A>) -> Result<()> {
        for mv in transition_moves(self.shape, self.game, self.last(), target) {
            self.push(mv)?;
        }
        if self.last() != target {
            return Err(Error::InvalidSequence(format!(
                "could not reach {target} from {}",
                self.last()
            )));
        }
        Ok(())
    }

    /// Builds a sequence from configurations alone, inferring moves.
    pub fn from_configs(
        shape: TreeShape,
        game: Game,
        unit: A,
        configs: &[PebbleConfig<A>],
    ) -> Result<Self> {
        let first = configs.first().ok_or_else(|| Error::InvalidSequence("no configurations".into()))?;
        if !first.is_empty() {
            return Err(Error::InvalidSequence("first configuration is not empty".into()));
        }
        let mut seq = Self::start(shape, game, unit);
        for (t, c) in configs.iter().enumerate().skip(1) {
            seq.extend_to(c)?;
            seq.markers.push((seq.configs.len() - 1, t));
        }
        Ok(seq)
    }

    pub fn max_pebbles(&self) -> A {
        self.configs.iter().map(PebbleConfig::cost).max().unwrap()
    }

    /// Every move legal and the start/end conditions of the game met.
    pub fn validate(&self) -> std::result::Result<(), (usize, String)> {
        if self.moves.len() + 1 != self.configs.len() {
            return Err((0, "move count does not match configuration count".into()));
        }
        if !self.configs[0].is_empty() {
            return Err((0, "first configuration is not empty".into()));
        }
        for (t, mv) in self.moves.iter().enumerate() {
            let next = apply_move(self.shape, self.game, &self.unit, &self.configs[t], mv)
                .map_err(|reason| (t + 1, reason))?;
            if next != self.configs[t + 1] {
                return Err((t + 1, format!("move {} does not produce the listed configuration", mv.name())));
            }
        }
        let last = self.configs.len() - 1;
        match self.game {
            Game::Black => {
                let end = self.last();
                let lone_root = end.b[1] == self.unit && end.pebbled() == vec![1];
                if !lone_root {
                    return Err((last, "last configuration is not a lone pebble on the root".into()));
                }
            }
            Game::Whole | Game::Fractional => {
                if !self.last().is_empty() {
                    return Err((last, "sequence must begin and end with empty configurations".into()));
                }
                if !self.configs.iter().any(|c| c.b[1] == self.unit) {
                    return Err((last, "the root never holds a full black pebble".into()));
                }
            }
        }
        Ok(())
    }

    /// Configurations carrying a marker, in order.
    pub fn marked(&self) -> impl Iterator<Item = (usize, &PebbleConfig<A>)> + '_ {
        self.markers.iter().map(|&(idx, marker)| (marker, &self.configs[idx]))
    }
}

/// Legal-order decomposition of the change from `from` to `to`.
fn transition_moves<A: Amount>(
    shape: TreeShape,
    game: Game,
    from: &PebbleConfig<A>,
    to: &PebbleConfig<A>,
) -> Vec<Move<A>> {
    let n = from.nodes();
    let mut moves = Vec::new();
    let rises = |i: usize| to.b[i] > from.b[i];
    let folded = |j: usize| {
        to.b[j] < from.b[j] && j > 1 && rises(j / 2) && shape.is_internal(j / 2)
    };
    // Plain decreases.
    for i in 1..=n {
        if to.b[i] < from.b[i] && !folded(i) {
            let by = from.b[i].minus(&to.b[i]);
            moves.push(match game {
                Game::Black => Move::Remove(i),
                _ => Move::DecB { node: i, by },
            });
        }
    }
    for i in (1..=n).rev() {
        if to.w[i] < from.w[i] {
            let by = from.w[i].minus(&to.w[i]);
            moves.push(if shape.is_leaf(i) {
                Move::DecWLeaf { node: i, by }
            } else {
                Move::DecWInternal { node: i, by }
            });
        }
    }
    // Increases, children before parents.
    for i in (1..=n).rev() {
        if to.w[i] > from.w[i] {
            moves.push(Move::IncW { node: i, by: to.w[i].minus(&from.w[i]) });
        }
        if rises(i) {
            let by = to.b[i].minus(&from.b[i]);
            moves.push(match (game, shape.children(i)) {
                (Game::Black, None) => Move::PlaceBlackLeaf(i),
                (Game::Black, Some((l, r))) => Move::BlackSlide {
                    node: i,
                    clear: [l, r].into_iter().filter(|&j| folded(j)).collect(),
                },
                (_, None) => Move::IncBLeaf { node: i, by },
                (_, Some((l, r))) => Move::IncBInternal {
                    node: i,
                    by,
                    child_dec: [l, r]
                        .into_iter()
                        .filter(|&j| folded(j))
                        .map(|j| (j, from.b[j].minus(&to.b[j])))
                        .collect(),
                },
            });
        }
    }
    moves
}

/// Renders the configuration sequence, one per line.
pub fn describe<A: Amount>(seq: &PebbleSequence<A>) -> String {
    let mut out = String::new();
    for (t, c) in seq.configs.iter().enumerate() {
        let mv = if t == 0 { "start".to_string() } else { seq.moves[t - 1].name().to_string() };
        out.push_str(&format!("{t:>3} {mv:<16} {c} cost={}\n", c.cost()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one() -> Rational {
        Rational::one()
    }

    #[test]
    fn apply_move_examples() {
        let shape = TreeShape::new(2).unwrap();
        let empty = PebbleConfig::empty(shape);
        let c = apply_move(shape, Game::Black, &one(), &empty, &Move::PlaceBlackLeaf(2)).unwrap();
        assert_eq!(c, PebbleConfig::whole(shape, &[2], &[]));
        let both = PebbleConfig::whole(shape, &[2, 3], &[]);
        let slid = apply_move(
            shape,
            Game::Black,
            &one(),
            &both,
            &Move::BlackSlide { node: 1, clear: vec![2, 3] },
        )
        .unwrap();
        assert_eq!(slid, PebbleConfig::whole(shape, &[1], &[]));
        let err = apply_move(shape, Game::Black, &one(), &c, &Move::BlackSlide { node: 1, clear: vec![] })
            .unwrap_err();
        assert!(err.contains("child 3"), "{err}");
    }

    #[test]
    fn validate_examples() {
        let shape = TreeShape::new(2).unwrap();
        let canonical = [
            PebbleConfig::empty(shape),
            PebbleConfig::whole(shape, &[2], &[]),
            PebbleConfig::whole(shape, &[2, 3], &[]),
            PebbleConfig::whole(shape, &[1], &[]),
        ];
        let seq = PebbleSequence::from_configs(shape, Game::Black, one(), &canonical).unwrap();
        assert!(seq.validate().is_ok());
        assert_eq!(seq.max_pebbles(), Rational::from_integer(2));
        let short = PebbleSequence::from_configs(shape, Game::Black, one(), &canonical[..3]).unwrap();
        assert_eq!(short.validate().unwrap_err().0, 2);

        let half = Rational::new(1, 2);
        let mut frac = PebbleSequence::start(shape, Game::Fractional, one());
        frac.push(Move::IncW { node: 3, by: half }).unwrap();
        assert!(frac.validate().unwrap_err().1.contains("begin and end with empty"));
    }

    #[test]
    fn whole_hand_sequence() {
        let shape = TreeShape::new(2).unwrap();
        let configs = [
            PebbleConfig::empty(shape),
            PebbleConfig::whole(shape, &[], &[3]),
            PebbleConfig::whole(shape, &[2], &[3]),
            PebbleConfig::whole(shape, &[1], &[3]),
            PebbleConfig::whole(shape, &[1], &[]),
            PebbleConfig::empty(shape),
        ];
        let seq = PebbleSequence::from_configs(shape, Game::Whole, one(), &configs).unwrap();
        assert!(seq.validate().is_ok());
        assert_eq!(seq.moves.len(), 5);
        assert_eq!(seq.max_pebbles(), Rational::from_integer(2));
    }

    #[test]
    fn white_removal_needs_full_children() {
        let shape = TreeShape::new(2).unwrap();
        let c = PebbleConfig::whole(shape, &[2], &[1]);
        let err = apply_move(shape, Game::Whole, &one(), &c, &Move::DecWInternal { node: 1, by: one() })
            .unwrap_err();
        assert!(err.contains("child 3"));
    }
}
