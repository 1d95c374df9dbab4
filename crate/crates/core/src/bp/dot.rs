use std::fmt::Write;

use super::{BranchingProgram, Label};

/// Graphviz rendering: states labelled with their queries, edges with
/// answers. `highlight` states (e.g. a path) are drawn bold.
pub fn to_dot(bp: &BranchingProgram, highlight: &[usize]) -> String {
    let mut out = String::new();
    writeln!(out, "digraph bp {{").unwrap();
    writeln!(out, "  rankdir=TB;").unwrap();
    for (id, label) in bp.labels().iter().enumerate() {
        let (text, shape) = match label {
            Label::Query(q) => (q.to_string(), "ellipse"),
            Label::Output(v) => (format!("out {v}"), "box"),
        };
        let mut attrs = format!("label=\"{id}: {text}\", shape={shape}");
        if id == bp.start() {
            attrs.push_str(", peripheries=2");
        }
        if highlight.contains(&id) {
            attrs.push_str(", style=bold, color=red");
        }
        writeln!(out, "  s{id} [{attrs}];").unwrap();
    }
    for e in bp.edges() {
        writeln!(out, "  s{} -> s{} [label=\"{}\"];", e.from, e.to, e.label).unwrap();
    }
    out.push_str("}\n");
    out
}
