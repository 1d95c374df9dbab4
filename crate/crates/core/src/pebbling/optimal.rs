use num_traits::One;

use super::{Game, Move, PebbleSequence};
use crate::amount::Rational;
use crate::error::Result;
use crate::tep::TreeShape;

/// The standard `h`-pebble black strategy: pebble the left subtree's root,
/// then the right one's, then slide onto the parent.
pub fn optimal_black_sequence(h: u32) -> Result<PebbleSequence<Rational>> {
    let shape = TreeShape::new(h)?;
    let mut seq = PebbleSequence::start(shape, Game::Black, Rational::one());
    pebble(shape, 1, &mut seq)?;
    Ok(seq)
}

fn pebble(shape: TreeShape, node: usize, seq: &mut PebbleSequence<Rational>) -> Result<()> {
    match shape.children(node) {
        None => seq.push(Move::PlaceBlackLeaf(node)),
        Some((l, r)) => {
            pebble(shape, l, seq)?;
            pebble(shape, r, seq)?;
            seq.push(Move::BlackSlide { node, clear: vec![l, r] })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pebbling::PebbleConfig;

    #[test]
    fn base_case_is_the_canonical_sequence() {
        let seq = optimal_black_sequence(2).unwrap();
        let shape = TreeShape::new(2).unwrap();
        assert_eq!(
            seq.configs,
            vec![
                PebbleConfig::empty(shape),
                PebbleConfig::whole(shape, &[2], &[]),
                PebbleConfig::whole(shape, &[2, 3], &[]),
                PebbleConfig::whole(shape, &[1], &[]),
            ]
        );
    }

    #[test]
    fn costs_and_lengths() {
        for h in 2..=6 {
            let seq = optimal_black_sequence(h).unwrap();
            assert!(seq.validate().is_ok(), "h={h}");
            assert_eq!(seq.max_pebbles(), Rational::from_integer(h as i64));
            // one placement or slide per node
            assert_eq!(seq.moves.len(), (1 << h) - 1);
        }
    }
}
