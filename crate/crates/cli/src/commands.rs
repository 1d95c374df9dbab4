use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;
use tep_core::analysis::{
    algorithm1_trace, bottleneck_census, check_pebble_soundness, det_thrifty_critical_states, det_thrifty_pebbling,
    det_thrifty_tag, independent_schedule, independent_supercritical, ro_thrifty_bw_pebbling, semantic_ro_tag,
    strip_grey, Census, Pebbler, Pipeline, ReadOnceMode, Variant,
};
use tep_core::bp::{
    canonical_path, check_bitwise_independent, check_node_independent, check_null_path_free,
    check_semantic_read_once, check_syntactic_read_once, check_thrifty, computes_tep, reach_sets, run_deterministic,
    to_dot, BranchingProgram, ComputationPath, StructuralReport, Verdict,
};
use tep_core::pebbling::{min_pebble_number, Game, PebbleSequence, SequenceJson};
use tep_core::space::sample_instance;
use tep_core::synthesis::{compile_black, compile_bw};
use tep_core::tep::TepInstance;

use crate::config::{Format, RunConfig};
use crate::output::{emit, json, read};

/// Outcome of a command: pass (exit 0) or a failure backed by a witness
/// already written to the report (exit 1).
pub enum Status {
    Pass,
    Fail,
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn load_bp(path: &Path) -> anyhow::Result<BranchingProgram> {
    BranchingProgram::from_json(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn load_instance(path: &Path) -> anyhow::Result<TepInstance> {
    serde_json::from_str(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn path_of(bp: &BranchingProgram, inst: &TepInstance) -> tep_core::Result<ComputationPath> {
    if bp.is_deterministic() {
        run_deterministic(bp, inst)
    } else {
        canonical_path(bp, inst)
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub h: u32,
    #[arg(long)]
    pub k: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn gen(args: &GenArgs) -> anyhow::Result<Status> {
    let inst = sample_instance(args.h, args.k, args.seed)?;
    emit(args.output.as_deref(), &json(&inst))?;
    Ok(Status::Pass)
}

#[derive(Debug, Args)]
pub struct PebbleArgs {
    #[arg(long, value_parser = parse_game)]
    pub game: Game,
    #[arg(long)]
    pub h: u32,
    /// Pebble values move in steps of 1/d (fractional game only).
    #[arg(long, default_value_t = 1)]
    pub d: u32,
    /// Where to write the optimal sequence.
    #[arg(long)]
    pub witness: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_game(s: &str) -> Result<Game, String> {
    s.parse().map_err(|e: tep_core::Error| e.to_string())
}

pub fn pebble(args: &PebbleArgs, cfg: &RunConfig) -> anyhow::Result<Status> {
    if args.d == 0 {
        bail!("d must be positive");
    }
    let out = min_pebble_number(args.game, args.h, args.d, cfg.budget.search_cap)?;
    let valid = out.witness.validate().is_ok();
    let min = tep_core::amount::format_rational(&out.min);
    if let Some(path) = &args.witness {
        emit(Some(path), &(out.witness.to_json(args.d) + "\n"))?;
    }
    let report = match cfg.format {
        Format::Json => json(&json!({
            "game": args.game,
            "h": args.h,
            "d": args.d,
            "min": min,
            "witness_valid": valid,
            "moves": out.witness.moves.len(),
            "budgets": out.stats.budgets,
            "visited": out.stats.visited,
        })),
        Format::Text => format!(
            "game={} h={} d={} min={min} witness={} moves={} visited={}\n",
            args.game.name(),
            args.h,
            args.d,
            if valid { "valid" } else { "invalid" },
            out.witness.moves.len(),
            out.stats.visited
        ),
    };
    emit(args.output.as_deref(), &report)?;
    Ok(status(valid))
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Pebbling sequence JSON (black or whole black-white).
    pub witness: PathBuf,
    #[arg(long)]
    pub k: u32,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn compile(args: &CompileArgs) -> anyhow::Result<Status> {
    let parsed: SequenceJson = serde_json::from_str(&read(&args.witness)?)
        .with_context(|| format!("loading {}", args.witness.display()))?;
    let seq = parsed.to_sequence()?;
    let bp = match seq.game {
        Game::Black => compile_black(&seq, args.k)?,
        Game::Whole => compile_bw(&seq, args.k)?,
        Game::Fractional => bail!("fractional pebblings do not compile to programs"),
    };
    emit(args.output.as_deref(), &(bp.to_json() + "\n"))?;
    Ok(Status::Pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SoundnessPebbler {
    DetThrifty,
    Ro,
    RoNpf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub bp: PathBuf,
    #[arg(long)]
    pub computes: bool,
    #[arg(long)]
    pub thrifty: bool,
    #[arg(long)]
    pub syntactic_ro: bool,
    #[arg(long)]
    pub null_path_free: bool,
    #[arg(long)]
    pub semantic_ro: bool,
    #[arg(long)]
    pub node_independent: bool,
    #[arg(long)]
    pub bitwise: bool,
    /// Checks that the pebbles of this pebbler only mark known values.
    #[arg(long, value_enum)]
    pub soundness: Option<SoundnessPebbler>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Serialize)]
struct CheckReport {
    structure: StructuralReport,
    verdicts: Vec<Verdict>,
    pass: bool,
}

pub fn check(args: &CheckArgs, cfg: &RunConfig) -> anyhow::Result<Status> {
    let bp = load_bp(&args.bp)?;
    let b = &cfg.budget;
    let any = args.computes
        || args.thrifty
        || args.syntactic_ro
        || args.null_path_free
        || args.semantic_ro
        || args.node_independent
        || args.bitwise
        || args.soundness.is_some();
    let want = |flag: bool| flag || !any;
    let mut verdicts = Vec::new();
    if want(args.computes) {
        verdicts.push(computes_tep(&bp, b)?);
    }
    if want(args.thrifty) {
        verdicts.push(check_thrifty(&bp, b)?);
    }
    if want(args.syntactic_ro) {
        verdicts.push(check_syntactic_read_once(&bp)?);
    }
    if want(args.null_path_free) {
        verdicts.push(check_null_path_free(&bp, b)?);
    }
    if want(args.semantic_ro) {
        verdicts.push(check_semantic_read_once(&bp, b)?);
    }
    if want(args.node_independent) {
        verdicts.push(check_node_independent(&bp, b)?);
    }
    if args.bitwise || (!any && bp.k().is_power_of_two()) {
        verdicts.push(check_bitwise_independent(&bp, b)?);
    }
    if let Some(p) = args.soundness {
        let pebbler = match p {
            SoundnessPebbler::DetThrifty => Pebbler::DetThrifty,
            SoundnessPebbler::Ro => Pebbler::ReadOnce(ReadOnceMode::Syntactic),
            SoundnessPebbler::RoNpf => Pebbler::ReadOnce(ReadOnceMode::NullPathFree),
        };
        verdicts.push(check_pebble_soundness(&bp, pebbler, b)?);
    }
    let structure = bp.validate();
    let pass = structure.is_valid() && verdicts.iter().all(|v| v.pass);
    let report = CheckReport { structure, verdicts, pass };
    let text = match cfg.format {
        Format::Json => json(&report),
        Format::Text => {
            let mut s = String::new();
            let st = &report.structure;
            writeln!(s, "structure {} ({} states, deterministic={})", pass_word(st.is_valid()), st.states, st.deterministic)?;
            for d in &st.defects {
                writeln!(s, "  defect: {d}")?;
            }
            for v in &report.verdicts {
                writeln!(s, "{} {} ({})", v.property.name(), pass_word(v.pass), serde_json::to_string(&v.coverage)?)?;
                if let Some(w) = &v.witness {
                    writeln!(s, "  witness: {}", serde_json::to_string(w)?)?;
                }
                if let Some(n) = &v.note {
                    writeln!(s, "  note: {n}")?;
                }
            }
            s
        }
    };
    emit(args.output.as_deref(), &text)?;
    Ok(status(pass))
}

fn pass_word(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    pub bp: PathBuf,
    /// det-thrifty, ro-thrifty, ro-thrifty-npf, algorithm1, bitwise or niro.
    #[arg(long, value_parser = parse_pipeline)]
    pub pipeline: Pipeline,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_pipeline(s: &str) -> Result<Pipeline, String> {
    s.parse().map_err(|e: tep_core::Error| e.to_string())
}

pub fn census(args: &CensusArgs, cfg: &RunConfig) -> anyhow::Result<Status> {
    let bp = load_bp(&args.bp)?;
    let c = bottleneck_census(&bp, args.pipeline, &cfg.budget)?;
    emit(args.output.as_deref(), &census_report(&c, cfg.format))?;
    Ok(status(c.bound_holds()))
}

fn census_report(c: &Census, format: Format) -> String {
    match format {
        Format::Json => json(&c.to_json()),
        Format::Text => {
            let mut s = format!(
                "pipeline={} h={} k={} m={} instances={} distinct={} max={} bound={} verdict={}\n",
                c.pipeline,
                c.h,
                c.k,
                c.m,
                c.instances,
                c.distinct(),
                c.max,
                c.bound(),
                c.verdict()
            );
            for (state, count) in &c.counts {
                let _ = writeln!(s, "  state {state}: {count}");
            }
            s
        }
    }
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    pub bp: PathBuf,
    #[arg(long, value_parser = parse_pipeline)]
    pub pipeline: Pipeline,
    /// Instance JSON to trace.
    #[arg(long, conflicts_with = "all", required_unless_present = "all")]
    pub instance: Option<PathBuf>,
    /// Run the census over every input instead of tracing one.
    #[arg(long)]
    pub all: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn analyze(args: &AnalyzeArgs, cfg: &RunConfig) -> anyhow::Result<Status> {
    let Some(inst_path) = &args.instance else {
        return census(&CensusArgs { bp: args.bp.clone(), pipeline: args.pipeline, output: args.output.clone() }, cfg);
    };
    let bp = load_bp(&args.bp)?;
    let inst = load_instance(inst_path)?;
    let path = path_of(&bp, &inst)?;
    let mut report = json!({
        "pipeline": args.pipeline.name(),
        "instance": inst,
        "path": path,
    });
    let mut ok = true;
    let d = |seq: &PebbleSequence<_>| serde_json::to_value(SequenceJson::from_sequence(seq, 1));
    match args.pipeline {
        Pipeline::DetThrifty => {
            let crit = det_thrifty_critical_states(&bp, &path)?;
            let seq = det_thrifty_pebbling(&bp, &path, &crit)?;
            report["critical"] = serde_json::to_value(&crit)?;
            report["sequence"] = d(&seq)?;
            report["tag"] = serde_json::to_value(det_thrifty_tag(&bp, &inst, &path)?)?;
        }
        Pipeline::RoThrifty(mode) => {
            let seq = ro_thrifty_bw_pebbling(&bp, &path, mode)?;
            report["sequence"] = d(&seq)?;
            report["tag"] = serde_json::to_value(semantic_ro_tag(&bp, &inst, &path)?)?;
        }
        Pipeline::Algorithm1 => {
            let trace = algorithm1_trace(&bp, &path)?;
            let violations = trace.violations(&inst);
            ok = violations.is_empty();
            report["violations"] = serde_json::to_value(&violations)?;
            report["inefficiency"] = serde_json::to_value(trace.inefficiency())?;
            report["stripped"] = d(&strip_grey(&trace, bp.shape())?)?;
            report["trace"] = serde_json::to_value(&trace)?;
        }
        Pipeline::Bitwise | Pipeline::NodeIndependentRo => {
            let variant =
                if args.pipeline == Pipeline::Bitwise { Variant::BitwiseThrifty } else { Variant::NodeIndependentRo };
            let profile = reach_sets(&bp, &cfg.budget)?;
            let seq = independent_schedule(&bp, &profile, &path, variant)?;
            report["sequence"] = serde_json::to_value(SequenceJson::from_sequence(&seq, 1))?;
            report["supercritical_detail"] =
                serde_json::to_value(independent_supercritical(&bp, &profile, &inst, &path, variant)?)?;
        }
    }
    let profile = match args.pipeline {
        Pipeline::Bitwise | Pipeline::NodeIndependentRo => Some(reach_sets(&bp, &cfg.budget)?),
        _ => None,
    };
    let t = args.pipeline.supercritical(&bp, profile.as_ref(), &inst, &path)?;
    report["supercritical"] = json!({ "position": t, "state": path.states[t] });
    let text = match cfg.format {
        Format::Json => json(&report),
        Format::Text => format!(
            "pipeline={} path={:?} supercritical position={t} state={}{}\n",
            args.pipeline,
            path.states,
            path.states[t],
            if ok { "" } else { " invariants=violated" }
        ),
    };
    emit(args.output.as_deref(), &text)?;
    Ok(status(ok))
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// A program JSON or a pebbling sequence JSON.
    pub input: PathBuf,
    /// Highlights the computation path of this instance (programs only).
    #[arg(long)]
    pub instance: Option<PathBuf>,
    /// Configuration to draw (sequences only); defaults to the costliest.
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn export(args: &ExportArgs) -> anyhow::Result<Status> {
    let text = read(&args.input)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.input.display()))?;
    let dot = if value.get("configs").is_some() {
        let seq = serde_json::from_value::<SequenceJson>(value)?.to_sequence()?;
        sequence_dot(&seq, args.step)?
    } else {
        let bp = load_bp(&args.input)?;
        let highlight = match &args.instance {
            Some(p) => path_of(&bp, &load_instance(p)?)?.states,
            None => Vec::new(),
        };
        to_dot(&bp, &highlight)
    };
    emit(args.output.as_deref(), &dot)?;
    Ok(Status::Pass)
}

/// The tree with the pebbles of one configuration.
fn sequence_dot(seq: &PebbleSequence<tep_core::amount::Rational>, step: Option<usize>) -> anyhow::Result<String> {
    let t = match step {
        Some(t) if t < seq.configs.len() => t,
        Some(t) => bail!("step {t} out of range (sequence has {} configurations)", seq.configs.len()),
        None => (0..seq.configs.len()).max_by_key(|&t| (seq.configs[t].cost(), std::cmp::Reverse(t))).unwrap_or(0),
    };
    let cfg = &seq.configs[t];
    let mut out = format!("digraph pebbling {{\n  label=\"{} pebbling, h={}, configuration {t}\";\n", seq.game.name(), seq.shape.height());
    for i in seq.shape.nodes() {
        let (b, w) = (&cfg.b[i], &cfg.w[i]);
        let fill = match (b.numer() != &0, w.numer() != &0) {
            (true, false) => "black",
            (false, true) => "white",
            (true, true) => "grey",
            (false, false) => "none",
        };
        let font = if fill == "black" || fill == "grey" { ", fontcolor=white" } else { "" };
        let style = if fill == "none" { String::new() } else { format!(", style=filled, fillcolor={fill}{font}") };
        writeln!(out, "  n{i} [label=\"{i}\\nb={b} w={w}\"{style}];")?;
        if let Some((l, r)) = seq.shape.children(i) {
            writeln!(out, "  n{i} -> n{l};\n  n{i} -> n{r};")?;
        }
    }
    out.push_str("}\n");
    Ok(out)
}
