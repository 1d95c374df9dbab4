use std::sync::OnceLock;

use proptest::prelude::*;
use tep_core::amount::{Amount, LogAmount, Rational};
use tep_core::analysis::{algorithm1_trace, check_efficient, det_thrifty_tag, det_thrifty_untag, strip_grey};
use tep_core::bp::{run_deterministic, BranchingProgram};
use tep_core::fixtures;
use tep_core::pebbling::{optimal_black_sequence, Game, Move, PebbleSequence, SequenceJson};
use tep_core::space::sample_instance;
use tep_core::tep::{QueryId, TepInstance, TreeShape};

fn instance(h: u32, k: u32) -> impl Strategy<Value = TepInstance> {
    let shape = TreeShape::new(h).unwrap();
    prop::collection::vec(1..=k as u8, shape.slot_count(k))
        .prop_map(move |slots| TepInstance::from_slots(shape, k, slots).unwrap())
}

/// Compiled black-pebbling programs too large to enumerate.
fn big(h: u32, k: u32) -> &'static BranchingProgram {
    static B33: OnceLock<BranchingProgram> = OnceLock::new();
    static B42: OnceLock<BranchingProgram> = OnceLock::new();
    let cell = match (h, k) {
        (3, 3) => &B33,
        (4, 2) => &B42,
        _ => unreachable!(),
    };
    cell.get_or_init(|| fixtures::compiled_det(h, k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn slot_count_formula(h in 2u32..=6, k in 2u32..=9) {
        let m = TreeShape::new(h).unwrap().slot_count(k);
        prop_assert_eq!(m, (1 << (h - 1)) + ((1 << (h - 1)) - 1) * (k * k) as usize);
    }

    #[test]
    fn sampling_is_seeded(h in 2u32..=4, k in 2u32..=5, seed: u64) {
        let a = sample_instance(h, k, seed).unwrap();
        prop_assert_eq!(&a, &sample_instance(h, k, seed).unwrap());
        let text = serde_json::to_string(&a).unwrap();
        prop_assert_eq!(serde_json::from_str::<TepInstance>(&text).unwrap(), a);
    }

    #[test]
    fn only_thrifty_slots_matter(inst in instance(3, 3), slot in 0usize..31, v in 1u8..=3) {
        let values = inst.evaluate();
        let q = inst.shape().query_of_slot(3, slot);
        let moved = inst.perturb(q, v).unwrap();
        if !inst.thrifty_slots(&values).contains(&slot) {
            prop_assert_eq!(moved.evaluate().root(), values.root());
        }
        prop_assert_eq!(inst.shape().slot(3, q), slot);
    }

    #[test]
    fn compiled_program_is_thrifty_and_correct(inst in instance(3, 3)) {
        let bp = big(3, 3);
        let path = run_deterministic(bp, &inst).unwrap();
        prop_assert_eq!(path.output(bp), Some(inst.evaluate().root()));
        let thrifty = inst.thrifty_slots(&inst.evaluate());
        for &s in &path.states[..path.states.len() - 1] {
            let q = bp.query(s).unwrap();
            prop_assert!(thrifty.contains(&inst.shape().slot(3, q)), "{:?} is not thrifty", q);
        }
    }

    #[test]
    fn thrifty_tag_round_trip(inst in instance(3, 3)) {
        let bp = big(3, 3);
        let path = run_deterministic(bp, &inst).unwrap();
        let tag = det_thrifty_tag(bp, &inst, &path).unwrap();
        prop_assert_eq!(det_thrifty_untag(bp, &tag).unwrap(), inst);
    }

    #[test]
    fn algorithm1_invariants_off_the_enumerable_range(inst in instance(4, 2)) {
        let bp = big(4, 2);
        let path = run_deterministic(bp, &inst).unwrap();
        let trace = algorithm1_trace(bp, &path).unwrap();
        prop_assert!(trace.violations(&inst).is_empty(), "{:?}", trace.violations(&inst));
        prop_assert!(check_efficient(&trace));
        prop_assert!(strip_grey(&trace, bp.shape()).unwrap().validate().is_ok());
    }

    #[test]
    fn log_amounts_add_by_multiplying(a in 1u64..1000, b in 1u64..1000, c in 1u64..1000, d in 1u64..1000) {
        let (x, y) = (LogAmount::ratio(a, b), LogAmount::ratio(c, d));
        prop_assert_eq!(x.plus(&y), LogAmount::ratio(a * c, b * d));
        prop_assert_eq!(x.plus(&y).minus(&y), x.clone());
        prop_assert_eq!(x.plus(&LogAmount::zero()), x);
    }

    #[test]
    fn random_black_walks_stay_valid(h in 2u32..=4, picks in prop::collection::vec((0usize..15, 0u8..3), 0..40)) {
        let shape = TreeShape::new(h).unwrap();
        let mut seq = PebbleSequence::start(shape, Game::Black, Rational::from_integer(1));
        for (i, kind) in picks {
            let node = 1 + i % shape.node_count();
            let mv = match (kind, shape.children(node)) {
                (0, None) => Move::PlaceBlackLeaf(node),
                (0 | 1, Some((l, r))) => Move::BlackSlide { node, clear: if kind == 0 { vec![l, r] } else { vec![] } },
                _ => Move::Remove(node),
            };
            let before = seq.configs.len();
            if seq.push(mv).is_err() {
                prop_assert_eq!(seq.configs.len(), before);
            }
        }
        // Every move is legal; only the end condition may be unmet.
        if let Err((t, _)) = seq.validate() {
            prop_assert_eq!(t, seq.configs.len() - 1);
        }
        let back = SequenceJson::from_sequence(&seq, 1).to_sequence().unwrap();
        prop_assert_eq!(back.configs, seq.configs);
    }
}

#[test]
fn optimal_black_sequences() {
    for h in 2..=7 {
        let seq = optimal_black_sequence(h).unwrap();
        assert!(seq.validate().is_ok());
        assert_eq!(seq.max_pebbles(), Rational::from_integer(h as i64));
        assert!(seq.last().b[1] == Rational::from_integer(1));
    }
}

#[test]
fn perturb_rejects_out_of_range() {
    let a = fixtures::fix_a();
    assert!(a.perturb(QueryId::Leaf(2), 3).is_err());
    assert!(a.perturb(QueryId::Leaf(4), 1).is_err());
}
