//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always print. The process
//! fails if any criterion outside `KNOWN_RED` fails.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use tep_core::amount::Rational;
use tep_core::analysis::{
    algorithm1_trace, bottleneck_census, check_efficient, check_ident_config, check_pebble_soundness, check_props,
    configuration_at, det_thrifty_critical_states, det_thrifty_pebbling, det_thrifty_tag, det_thrifty_untag,
    independent_schedule, independent_supercritical, map_reduce_paths, ro_det_supercritical, ro_thrifty_bw_pebbling,
    semantic_ro_tag, semantic_ro_untag, strip_grey, Census, Pebbler, Pipeline, PropReport, ReadOnceMode, Variant,
};
use tep_core::bp::{
    canonical_path, check_bitwise_independent, check_node_independent, check_null_path_free,
    check_semantic_read_once, check_syntactic_read_once, check_thrifty, computes_tep, reach_sets,
    run_deterministic, BranchingProgram, Defect, Verdict, Witness,
};
use tep_core::fixtures;
use tep_core::pebbling::{min_pebble_number, Game};
use tep_core::space::{enumerate_instances, Budget};

/// Criteria whose literal target is out of reach; see the decisions ledger.
const KNOWN_RED: &[u32] = &[4];

const SEARCH_LIMIT: Duration = Duration::from_secs(60);
const COMPILE_CHECK_LIMIT: Duration = Duration::from_secs(300);
const ALGORITHM1_LIMIT: Duration = Duration::from_secs(600);
/// Literal bucket target of the read-once census at (2,2).
const RO_CENSUS_TARGET: u128 = 8;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e(err: tep_core::Error) -> String {
    err.to_string()
}

fn budget() -> Budget {
    Budget::from_env().expect("TEP_BUDGET parses")
}

fn pebble_numbers() -> Outcome {
    let cap = budget().search_cap;
    let mut cases: Vec<(Game, u32, u32, Rational)> = Vec::new();
    for h in 2..=5 {
        cases.push((Game::Black, h, 1, Rational::from_integer(h as i64)));
    }
    for h in 2..=4 {
        cases.push((Game::Whole, h, 1, Rational::from_integer(h.div_ceil(2) as i64 + 1)));
        cases.push((Game::Fractional, h, 2, Rational::new(h as i64 + 2, 2)));
    }
    let mut slowest = Duration::ZERO;
    for (game, h, d, want) in cases {
        let t = Instant::now();
        let out = min_pebble_number(game, h, d, cap).map_err(e)?;
        let took = t.elapsed();
        slowest = slowest.max(took);
        ensure(out.min == want, || format!("{} h={h}: min {} != {want}", game.name(), out.min))?;
        ensure(took < SEARCH_LIMIT, || format!("{} h={h} took {took:?}", game.name()))?;
    }
    Ok(format!("11 searches exact, slowest {slowest:.2?}"))
}

fn pass(v: Verdict) -> Result<(), String> {
    ensure(v.pass && v.coverage.is_exact(), || format!("{:?} failed: {:?}", v.property, v.witness))
}

fn upper_bounds() -> Outcome {
    let t = Instant::now();
    for (k, want) in [(2, 9), (3, 16), (4, 25)] {
        let n = fixtures::compiled_det(2, k).len();
        ensure(n == want && n == 1 + 2 * k as usize + (k * k) as usize, || format!("k={k}: {n} states"))?;
    }
    let b = budget();
    for (h, k) in [(2, 2), (2, 3), (3, 2)] {
        let bp = fixtures::compiled_det(h, k);
        pass(computes_tep(&bp, &b).map_err(e)?)?;
        pass(check_thrifty(&bp, &b).map_err(e)?)?;
        pass(check_syntactic_read_once(&bp).map_err(e)?)?;
    }
    let took = t.elapsed();
    ensure(took < COMPILE_CHECK_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("sizes 9/16/25; (2,2),(2,3),(3,2) correct, thrifty, read-once in {took:.2?}"))
}

fn census_line(c: &Census) -> String {
    format!("max {} (bound {}), {} states >= k^{}", c.max, c.bound(), c.distinct(), c.exponent)
}

fn thrifty_pipeline() -> Outcome {
    let b = budget();
    let mut notes = Vec::new();
    for (h, k, target) in [(2u32, 2u32, 16u128), (3, 2, 8192)] {
        let bp = fixtures::compiled_det(h, k);
        let space = enumerate_instances(h, k, &b).map_err(e)?;
        let mut tags = HashSet::new();
        for inst in space.iter() {
            let path = run_deterministic(&bp, &inst).map_err(e)?;
            let crit = det_thrifty_critical_states(&bp, &path).map_err(e)?;
            let seq = det_thrifty_pebbling(&bp, &path, &crit).map_err(e)?;
            seq.validate().map_err(|(t, r)| format!("invalid pebbling at {t}: {r}"))?;
            let tag = det_thrifty_tag(&bp, &inst, &path).map_err(e)?;
            ensure(det_thrifty_untag(&bp, &tag).map_err(e)? == inst, || "untag mismatch".into())?;
            tags.insert(tag);
        }
        ensure(tags.len() as u64 == space.len(), || format!("{} tags for {} inputs", tags.len(), space.len()))?;
        let c = bottleneck_census(&bp, Pipeline::DetThrifty, &b).map_err(e)?;
        ensure(c.max <= target && c.bound_holds(), || census_line(&c))?;
        notes.push(format!("({h},{k}) {}", census_line(&c)));
    }
    Ok(notes.join("; "))
}

fn ro_pipeline() -> Outcome {
    let b = budget();
    let bp = fixtures::bp_nd();
    let space = enumerate_instances(2, 2, &b).map_err(e)?;
    let mut tags = HashSet::new();
    for inst in space.iter() {
        let path = canonical_path(&bp, &inst).map_err(e)?;
        let seq = ro_thrifty_bw_pebbling(&bp, &path, ReadOnceMode::Syntactic).map_err(e)?;
        seq.validate().map_err(|(t, r)| format!("invalid pebbling at {t}: {r}"))?;
        let tag = semantic_ro_tag(&bp, &inst, &path).map_err(e)?;
        ensure(semantic_ro_untag(&bp, &tag).map_err(e)? == inst, || "untag mismatch".into())?;
        tags.insert(tag);
    }
    ensure(tags.len() == 64, || format!("{} distinct tags", tags.len()))?;
    pass(check_pebble_soundness(&bp, Pebbler::ReadOnce(ReadOnceMode::Syntactic), &b).map_err(e)?)?;
    let c = bottleneck_census(&bp, Pipeline::RoThrifty(ReadOnceMode::Syntactic), &b).map_err(e)?;
    ensure(c.bound_holds(), || format!("formula bound fails: {}", census_line(&c)))?;
    let detail = format!("pebblings valid, sound, 64 tags; {}", census_line(&c));
    if c.max <= RO_CENSUS_TARGET {
        Ok(detail)
    } else {
        Err(format!("max bucket {} > {RO_CENSUS_TARGET} (64/k^(ceil(h/2)+1) is 16); {detail}", c.max))
    }
}

fn algorithm1_pipeline() -> Outcome {
    let b = budget();
    let t = Instant::now();
    let mut notes = Vec::new();
    for (h, k) in [(2u32, 2u32), (3, 2)] {
        let bp = fixtures::compiled_det(h, k);
        let shape = bp.shape();
        for inst in enumerate_instances(h, k, &b).map_err(e)?.iter() {
            let path = run_deterministic(&bp, &inst).map_err(e)?;
            let tr = algorithm1_trace(&bp, &path).map_err(e)?;
            let bad = tr.violations(&inst);
            ensure(bad.is_empty(), || format!("{:?}: {bad:?}", inst.slots()))?;
            ensure(check_efficient(&tr), || format!("{:?} inefficient at {:?}", inst.slots(), tr.inefficiency()))?;
            strip_grey(&tr, shape)
                .map_err(e)?
                .validate()
                .map_err(|(t, r)| format!("{:?}: stripped sequence invalid at {t}: {r}", inst.slots()))?;
            ro_det_supercritical(&tr).map_err(e)?;
        }
        let c = bottleneck_census(&bp, Pipeline::Algorithm1, &b).map_err(e)?;
        ensure(c.bound_holds(), || census_line(&c))?;
        notes.push(format!("({h},{k}) {}", census_line(&c)));
    }
    let pairs = check_ident_config(&fixtures::bp_det(), &b).map_err(e)?;
    let took = t.elapsed();
    ensure(took < ALGORITHM1_LIMIT, || format!("took {took:?}"))?;
    Ok(format!("{}; identical configurations on {pairs} pairs; {took:.2?}", notes.join("; ")))
}

/// Schedules on every path of `bp`, checked against the state values.
fn schedules(bp: &BranchingProgram, variant: Variant, b: &Budget) -> Result<u128, String> {
    let profile = reach_sets(bp, b).map_err(e)?;
    let (paths, _) = map_reduce_paths(
        bp,
        b,
        || 0u128,
        |_, path, _| {
            let seq = independent_schedule(bp, &profile, path, variant)?;
            seq.validate().map_err(|(t, r)| tep_core::Error::Counterexample(format!("schedule invalid at {t}: {r}")))?;
            for (pos, cfg) in seq.marked() {
                if *cfg != configuration_at(&profile, path.states[pos]) {
                    return Err(tep_core::Error::Counterexample(format!("position {pos} differs from state values")));
                }
            }
            Ok(1)
        },
        |a, b| a + b,
    )
    .map_err(e)?;
    Ok(paths)
}

fn independence_machinery() -> Outcome {
    let b = budget();
    for bp in [fixtures::bp_det(), fixtures::bp_nd()] {
        let profile = reach_sets(&bp, &b).map_err(e)?;
        let bad: Vec<usize> = (0..bp.len()).filter(|&s| !profile.count_bound_holds(s)).collect();
        ensure(bad.is_empty(), || format!("count bound fails at states {bad:?}"))?;
    }
    let det = fixtures::bp_det();
    pass(check_node_independent(&det, &b).map_err(e)?)?;
    for k in [2, 4] {
        pass(check_bitwise_independent(&fixtures::compiled_det(2, k), &b).map_err(e)?)?;
    }
    let mut paths = 0;
    for k in [2, 4] {
        paths += schedules(&fixtures::compiled_det(2, k), Variant::BitwiseThrifty, &b)?;
    }
    let profile = reach_sets(&det, &b).map_err(e)?;
    let mut report = PropReport::default();
    for inst in enumerate_instances(2, 2, &b).map_err(e)?.iter() {
        let path = run_deterministic(&det, &inst).map_err(e)?;
        report = report.merge(check_props(&det, &profile, &inst, &path).map_err(e)?);
    }
    for p in ["bi_black", "bi_white"] {
        ensure(report.holds(p), || format!("{p}: {:?}", report.get(p)))?;
    }
    Ok(format!(
        "count bound at every state; independent at k=2,4; schedules valid and exact on {paths} paths; {}, {}",
        tally_note(&report, "bi_black"),
        tally_note(&report, "bi_white"),
    ))
}

fn tally_note(report: &PropReport, p: &str) -> String {
    let tally = report.get(p);
    if tally.is_vacuous() {
        format!("{p} vacuous ({} checked)", tally.checked)
    } else {
        format!("{p} {}/{} nontrivial", tally.nontrivial, tally.checked)
    }
}

fn read_once_independent() -> Outcome {
    let b = budget();
    let mut notes = Vec::new();
    for (h, k) in [(2u32, 2u32), (3, 2)] {
        let bp = fixtures::compiled_det(h, k);
        let profile = reach_sets(&bp, &b).map_err(e)?;
        let mut report = PropReport::default();
        for inst in enumerate_instances(h, k, &b).map_err(e)?.iter() {
            let path = run_deterministic(&bp, &inst).map_err(e)?;
            report = report.merge(check_props(&bp, &profile, &inst, &path).map_err(e)?);
            let sc = independent_supercritical(&bp, &profile, &inst, &path, Variant::NodeIndependentRo).map_err(e)?;
            ensure(sc.effective_approx >= h as f64 / 2.0 + 1.0 - 1e-9, || format!("{sc:?}"))?;
        }
        let mut props = Vec::new();
        for p in ["niro_mix", "niro_white", "niro_glue", "niro_children"] {
            ensure(report.holds(p), || format!("({h},{k}) {p}: {:?}", report.get(p)))?;
            props.push(tally_note(&report, p));
        }
        schedules(&bp, Variant::NodeIndependentRo, &b)?;
        let c = bottleneck_census(&bp, Pipeline::NodeIndependentRo, &b).map_err(e)?;
        ensure(c.bound_holds(), || census_line(&c))?;
        notes.push(format!("({h},{k}) {}; {}", props.join(", "), census_line(&c)));
    }
    Ok(notes.join("; "))
}

fn census_floors() -> Outcome {
    let b = budget();
    let runs = [
        (fixtures::compiled_det(2, 2), Pipeline::DetThrifty),
        (fixtures::compiled_det(3, 2), Pipeline::DetThrifty),
        (fixtures::bp_nd(), Pipeline::RoThrifty(ReadOnceMode::Syntactic)),
        (fixtures::compiled_det(2, 2), Pipeline::Algorithm1),
        (fixtures::compiled_det(3, 2), Pipeline::Algorithm1),
        (fixtures::compiled_det(2, 2), Pipeline::Bitwise),
        (fixtures::compiled_det(2, 4), Pipeline::Bitwise),
        (fixtures::compiled_det(2, 2), Pipeline::NodeIndependentRo),
    ];
    let mut notes = Vec::new();
    for (bp, pipeline) in runs {
        let c = bottleneck_census(&bp, pipeline, &b).map_err(e)?;
        ensure(c.floor_holds(), || format!("{pipeline} (h={},k={}): {}", c.h, c.k, census_line(&c)))?;
        notes.push(format!("{pipeline}({},{}) {} >= {}", c.h, c.k, c.distinct(), c.floor()));
    }
    Ok(notes.join(", "))
}

fn negative_witnesses() -> Outcome {
    let b = budget();
    let nd = fixtures::bp_nd();
    let forgetful = fixtures::forgetful_requery();
    let cases: Vec<(&str, BranchingProgram, Verdict)> = vec![
        ("duplicate label", fixtures::duplicate_label(), computes_tep(&fixtures::duplicate_label(), &b).map_err(e)?),
        ("two-cycle", fixtures::two_cycle(), computes_tep(&fixtures::two_cycle(), &b).map_err(e)?),
        ("retargeted output", fixtures::retargeted_output(), computes_tep(&fixtures::retargeted_output(), &b).map_err(e)?),
        ("trap state", fixtures::trap_state(), computes_tep(&fixtures::trap_state(), &b).map_err(e)?),
        ("null path", forgetful.clone(), check_null_path_free(&forgetful, &b).map_err(e)?),
        ("syntactic re-query", forgetful.clone(), check_syntactic_read_once(&forgetful).map_err(e)?),
        ("semantic re-query", forgetful.clone(), check_semantic_read_once(&forgetful, &b).map_err(e)?),
        (
            "unsound pebble",
            forgetful.clone(),
            check_pebble_soundness(&forgetful, Pebbler::ReadOnce(ReadOnceMode::NullPathFree), &b).map_err(e)?,
        ),
        ("unconditional query", fixtures::unconditional_query(), check_thrifty(&fixtures::unconditional_query(), &b).map_err(e)?),
        ("guess-verify independence", nd.clone(), check_node_independent(&nd, &b).map_err(e)?),
        ("split range", fixtures::split_range(), check_bitwise_independent(&fixtures::split_range(), &b).map_err(e)?),
    ];
    for (name, bp, v) in &cases {
        ensure(!v.pass, || format!("{name}: checker passed"))?;
        ensure(v.reproduces(bp), || format!("{name}: witness does not reproduce: {:?}", v.witness))?;
    }
    let structural = |v: &Verdict, want: fn(&Defect) -> bool| {
        matches!(&v.witness, Some(Witness::Structural { defects }) if defects.iter().any(want))
    };
    ensure(structural(&cases[0].2, |d| matches!(d, Defect::NotDeterministic { .. })), || {
        format!("duplicate label: expected a determinism defect, got {:?}", cases[0].2.witness)
    })?;
    ensure(structural(&cases[1].2, |d| matches!(d, Defect::Cycle { .. })), || {
        format!("two-cycle: expected a cycle defect, got {:?}", cases[1].2.witness)
    })?;
    Ok(format!("{} failing verdicts, all witnesses reproduce", cases.len()))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "pebble numbers", pebble_numbers),
        (2, "compiled upper bounds", upper_bounds),
        (3, "thrifty deterministic pipeline", thrifty_pipeline),
        (4, "guess-and-verify read-once pipeline", ro_pipeline),
        (5, "grey/black algorithm pipeline", algorithm1_pipeline),
        (6, "state pebble values and schedules", independence_machinery),
        (7, "read-once node-independent schedules", read_once_independent),
        (8, "census floors", census_floors),
        (9, "negative witnesses", negative_witnesses),
    ];
    let mut unexpected = 0;
    for (n, name, run) in criteria {
        let t = Instant::now();
        let out = run();
        let took = t.elapsed();
        match &out {
            Ok(detail) => println!("criterion {n} PASS [{name}] {detail} ({took:.1?})"),
            Err(detail) if KNOWN_RED.contains(&n) => {
                println!("criterion {n} FAIL (known) [{name}] {detail} ({took:.1?})")
            }
            Err(detail) => {
                unexpected += 1;
                println!("criterion {n} FAIL [{name}] {detail} ({took:.1?})")
            }
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
