use tep_core::amount::LogAmount;
use tep_core::bp::{
    canonical_path, check_bitwise_independent, check_node_independent, check_null_path_free,
    check_semantic_read_once, check_syntactic_read_once, check_thrifty, computes_tep, count_inputs_through,
    enumerate_complete_paths, reach_sets, run_deterministic, BranchingProgram, Defect, Edge, Label, Verdict, Witness,
};
use tep_core::fixtures::{self, decision_program, Step};
use tep_core::space::{enumerate_instances, Budget, Coverage};
use tep_core::tep::QueryId;
use tep_core::Error;

fn all(h: u32, k: u32) -> Vec<tep_core::tep::TepInstance> {
    enumerate_instances(h, k, &Budget::default()).unwrap().iter().collect()
}

fn exhaustive_pass(v: &Verdict, inputs: u64) {
    assert!(v.pass, "{:?}", v.witness);
    assert_eq!(v.coverage, Coverage::Exhaustive { inputs });
}

fn failing(v: &Verdict, bp: &BranchingProgram) -> Witness {
    assert!(!v.pass);
    assert!(v.reproduces(bp), "{:?}", v.witness);
    v.witness.clone().unwrap()
}

/// Reads v₃, then v₂ in each branch, then the table.
fn parallel_reads() -> BranchingProgram {
    decision_program(2, 2, |known| {
        for q in [QueryId::Leaf(3), QueryId::Leaf(2)] {
            if !known.contains_key(&q) {
                return Step::Ask(q);
            }
        }
        let f = QueryId::Func(1, known[&QueryId::Leaf(2)], known[&QueryId::Leaf(3)]);
        match known.get(&f) {
            Some(&c) => Step::Answer(c),
            None => Step::Ask(f),
        }
    })
}

/// FIX-BP-DET where `v₂ = 1` is asked again: answer 1 dead-ends, answer 2
/// rejoins the evaluation as if `v₂ = 1`. The second query only lies on
/// null paths.
fn requery_on_null_paths_only() -> BranchingProgram {
    let det = fixtures::bp_det();
    let mut labels = det.labels().to_vec();
    let again = labels.len();
    labels.push(Label::Query(QueryId::Leaf(2)));
    let dead = labels.len();
    labels.push(Label::Query(QueryId::Leaf(3)));
    let mut edges = Vec::new();
    let mut after_one = None;
    for e in det.edges() {
        if e.from == det.start() && e.label == 1 {
            after_one = Some(e.to);
            edges.push(Edge { to: again, ..*e });
        } else {
            edges.push(*e);
        }
    }
    edges.push(Edge { from: again, label: 1, to: dead });
    edges.push(Edge { from: again, label: 2, to: after_one.unwrap() });
    BranchingProgram::new(2, 2, det.start(), labels, edges).unwrap()
}

#[test]
fn structural_validation() {
    let det = fixtures::bp_det();
    let report = det.validate();
    assert!(report.is_valid() && report.deterministic && report.acyclic && report.single_source);
    assert_eq!(report.states, 9);

    let dup = fixtures::duplicate_label().validate();
    assert!(dup.defects.iter().any(|d| matches!(d, Defect::NotDeterministic { .. })));
    let cyc = fixtures::two_cycle().validate();
    assert!(!cyc.acyclic);
    assert!(cyc.defects.iter().any(|d| matches!(d, Defect::Cycle { .. })));

    for bp in [fixtures::duplicate_label(), fixtures::two_cycle()] {
        let v = computes_tep(&bp, &Budget::default()).unwrap();
        assert!(matches!(failing(&v, &bp), Witness::Structural { .. }));
        assert!(matches!(
            run_deterministic(&bp, &fixtures::fix_a()),
            Err(Error::MalformedProgram(_) | Error::NotDeterministic(_))
        ));
    }
}

#[test]
fn deterministic_runs() {
    let det = fixtures::bp_det();
    let a = fixtures::fix_a();
    let path = run_deterministic(&det, &a).unwrap();
    assert_eq!(path.states.len(), 4);
    assert!(path.complete);
    assert_eq!(path.output(&det), Some(2));
    let b = a.perturb(QueryId::Leaf(2), 2).unwrap();
    assert_eq!(run_deterministic(&det, &b).unwrap().output(&det), Some(1));
    for inst in all(2, 2) {
        let p = run_deterministic(&det, &inst).unwrap();
        assert!(p.states.len() <= det.len());
        assert_eq!(canonical_path(&det, &inst).unwrap(), p);
        assert_eq!(enumerate_complete_paths(&det, &inst, 1 << 20).unwrap(), vec![p]);
    }
    assert!(matches!(run_deterministic(&fixtures::bp_nd(), &a), Err(Error::NotDeterministic(_))));
    let b = fixtures::fix_b();
    assert!(matches!(run_deterministic(&det, &b), Err(Error::MalformedInstance(_))));
    assert!(matches!(canonical_path(&fixtures::bp_nd(), &b), Err(Error::MalformedInstance(_))));
    assert!(matches!(enumerate_complete_paths(&det, &b, 10), Err(Error::MalformedInstance(_))));
}

#[test]
fn guess_verify_paths() {
    let nd = fixtures::bp_nd();
    for inst in all(2, 2) {
        let paths = enumerate_complete_paths(&nd, &inst, 1 << 20).unwrap();
        assert_eq!(paths.len(), 1, "{:?}", inst.slots());
        let canon = canonical_path(&nd, &inst).unwrap();
        assert_eq!(canon, paths[0]);
        assert_eq!(canonical_path(&nd, &inst).unwrap(), canon);
        assert_eq!(paths[0].output(&nd), Some(inst.evaluate().root()));
    }
}

#[test]
fn correctness() {
    let b = Budget::default();
    exhaustive_pass(&computes_tep(&fixtures::bp_det(), &b).unwrap(), 64);
    exhaustive_pass(&computes_tep(&fixtures::bp_nd(), &b).unwrap(), 64);
    let bad = fixtures::retargeted_output();
    match failing(&computes_tep(&bad, &b).unwrap(), &bad) {
        Witness::WrongOutput { instance, expected, .. } => assert_eq!(instance.evaluate().root(), expected),
        w => panic!("{w:?}"),
    }
    let trap = fixtures::trap_state();
    assert!(matches!(failing(&computes_tep(&trap, &b).unwrap(), &trap), Witness::Rejected { .. }));
}

#[test]
fn thrifty() {
    let b = Budget::default();
    exhaustive_pass(&check_thrifty(&fixtures::bp_det(), &b).unwrap(), 64);
    exhaustive_pass(&check_thrifty(&fixtures::bp_nd(), &b).unwrap(), 64);
    let bp = fixtures::unconditional_query();
    match failing(&check_thrifty(&bp, &b).unwrap(), &bp) {
        Witness::NonThrifty { instance, position, .. } => {
            assert_eq!(instance.leaf(2), 2);
            assert_eq!(position, 0);
        }
        w => panic!("{w:?}"),
    }
}

#[test]
fn read_once_variants() {
    let b = Budget::default();
    for bp in [fixtures::bp_det(), fixtures::bp_nd(), parallel_reads()] {
        assert!(check_syntactic_read_once(&bp).unwrap().pass);
        assert!(check_null_path_free(&bp, &b).unwrap().pass);
        exhaustive_pass(&check_semantic_read_once(&bp, &b).unwrap(), 64);
    }

    let forgetful = fixtures::forgetful_requery();
    assert!(matches!(
        failing(&check_syntactic_read_once(&forgetful).unwrap(), &forgetful),
        Witness::StatePair { query: QueryId::Leaf(2), .. }
    ));
    match failing(&check_null_path_free(&forgetful, &b).unwrap(), &forgetful) {
        Witness::NullPath { states, labels, first, second } => {
            assert_eq!(forgetful.query(states[first]), forgetful.query(states[second]));
            assert_ne!(labels[first], labels[second]);
        }
        w => panic!("{w:?}"),
    }
    assert!(matches!(
        failing(&check_semantic_read_once(&forgetful, &b).unwrap(), &forgetful),
        Witness::RepeatedQuery { .. }
    ));

    let null_only = requery_on_null_paths_only();
    assert!(!check_syntactic_read_once(&null_only).unwrap().pass);
    assert!(!check_null_path_free(&null_only, &b).unwrap().pass);
    assert!(check_semantic_read_once(&null_only, &b).unwrap().pass);
}

#[test]
fn state_values() {
    let b = Budget::default();
    for bp in [fixtures::bp_det(), fixtures::bp_nd()] {
        let prof = reach_sets(&bp, &b).unwrap();
        let s = bp.start();
        for i in 1..=3 {
            assert_eq!((prof.r_size(s, i), prof.a_size(s, i)), (2, 2));
        }
        assert_eq!(prof.p(s), LogAmount::ratio(1, 1));
        assert_eq!(prof.reach_count[s], 64);
        for out in (0..bp.len()).filter(|&t| bp.output_value(t).is_some()) {
            let a = bp.output_value(out).unwrap();
            assert_eq!(prof.a[out][1], 1 << (a - 1));
            assert_eq!(prof.p_node(out, 1), LogAmount::unit(2));
        }
        assert!((0..bp.len()).all(|t| prof.count_bound_holds(t)));
    }
}

#[test]
fn input_counts() {
    let b = Budget::default();
    let det = fixtures::bp_det();
    assert_eq!(count_inputs_through(&det, det.start(), &b).unwrap(), 64);
    let remembers_12 = (0..det.len()).find(|&s| det.query(s) == Some(QueryId::Func(1, 1, 2))).unwrap();
    assert_eq!(count_inputs_through(&det, remembers_12, &b).unwrap(), 16);
    let out2 = (0..det.len()).find(|&s| det.output_value(s) == Some(2)).unwrap();
    assert_eq!(count_inputs_through(&det, out2, &b).unwrap(), 32);
    assert!(count_inputs_through(&det, 99, &b).is_err());
}

#[test]
fn independence() {
    let b = Budget::default();
    exhaustive_pass(&check_node_independent(&fixtures::bp_det(), &b).unwrap(), 64);
    assert!(check_bitwise_independent(&fixtures::compiled_det(2, 4), &b).unwrap().pass);

    let nd = fixtures::bp_nd();
    match failing(&check_node_independent(&nd, &b).unwrap(), &nd) {
        Witness::OutsideRectangle { state, .. } => assert_ne!(state, nd.start()),
        w => panic!("{w:?}"),
    }
    let split = fixtures::split_range();
    assert!(check_node_independent(&split, &b).unwrap().pass);
    assert!(matches!(
        failing(&check_bitwise_independent(&split, &b).unwrap(), &split),
        Witness::OutsideRectangle { .. }
    ));
    assert!(matches!(
        check_bitwise_independent(&fixtures::compiled_det(2, 3), &b),
        Err(Error::NotPowerOfTwo(3))
    ));
}

#[test]
fn cylinder_route_matches_enumeration() {
    let small = Budget::with_cap(10);
    let full = Budget::default();
    for bp in [fixtures::bp_det(), fixtures::retargeted_output()] {
        let (a, b) = (computes_tep(&bp, &small).unwrap(), computes_tep(&bp, &full).unwrap());
        assert!(matches!(a.coverage, Coverage::Cylinder { inputs_log_k: 6 }));
        assert_eq!(a.pass, b.pass);
        if !a.pass {
            assert!(a.reproduces(&bp));
        }
        let (p, q) = (reach_sets(&bp, &small).unwrap(), reach_sets(&bp, &full).unwrap());
        assert_eq!((p.r, p.a, p.reach_count, p.complete_count), (q.r, q.a, q.reach_count, q.complete_count));
    }
    // Nondeterministic programs fall back to sampling.
    let v = computes_tep(&fixtures::bp_nd(), &small).unwrap();
    assert!(matches!(v.coverage, Coverage::Sampled { .. }) && !v.is_definitive() == v.pass);
}

#[test]
fn json_and_dot() {
    for bp in [fixtures::bp_det(), fixtures::bp_nd(), fixtures::duplicate_label()] {
        let text = bp.to_json();
        assert_eq!(BranchingProgram::from_json(&text).unwrap().to_json(), text);
    }
    let bad = r#"{"k":2,"h":2,"start":0,"states":[{"id":1,"query":{"kind":"output","value":1}}],"edges":[]}"#;
    assert!(BranchingProgram::from_json(bad).is_err());
    let det = fixtures::bp_det();
    let dot = tep_core::bp::to_dot(&det, &[0]);
    assert_eq!(dot.matches("->").count(), det.edges().len());
    assert_eq!(dot.matches("style=bold").count(), 1);
}
