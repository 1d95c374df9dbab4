use std::fmt;

use serde::Serialize;

use super::{BranchingProgram, Label, StateId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "defect", rename_all = "snake_case")]
pub enum Defect {
    Cycle { states: Vec<StateId> },
    ExtraSource { state: StateId },
    StartHasInEdge { state: StateId },
    MissingOutput { value: u8 },
    DuplicateOutput { value: u8, states: Vec<StateId> },
    OutputHasOutEdge { state: StateId },
    /// Only a defect when the program claims to be deterministic.
    NotDeterministic { state: StateId, labels: Vec<u8> },
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::Cycle { states } => write!(f, "cycle through states {states:?}"),
            Defect::ExtraSource { state } => write!(f, "state {state} is a second source"),
            Defect::StartHasInEdge { state } => write!(f, "start state {state} has an in-edge"),
            Defect::MissingOutput { value } => write!(f, "no output state for value {value}"),
            Defect::DuplicateOutput { value, states } => {
                write!(f, "several output states {states:?} for value {value}")
            }
            Defect::OutputHasOutEdge { state } => write!(f, "output state {state} has out-edges"),
            Defect::NotDeterministic { state, labels } => {
                write!(f, "state {state} has out-edge labels {labels:?}")
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StructuralReport {
    pub states: usize,
    pub edges: usize,
    pub acyclic: bool,
    pub single_source: bool,
    pub outputs_ok: bool,
    pub deterministic: bool,
    pub claimed_deterministic: Option<bool>,
    pub defects: Vec<Defect>,
}

impl StructuralReport {
    pub fn is_valid(&self) -> bool {
        self.defects.is_empty()
    }
}

impl BranchingProgram {
    /// Structural validation: acyclicity, a single source equal to the start
    /// state, exactly one output per value and, when claimed, determinism.
    /// Label well-formedness is enforced at construction.
    pub fn validate(&self) -> StructuralReport {
        let n = self.len();
        let mut defects = Vec::new();

        let acyclic = match self.topological_order() {
            Some(_) => true,
            None => {
                defects.push(Defect::Cycle { states: self.find_cycle() });
                false
            }
        };

        let mut indeg = vec![0usize; n];
        for e in self.edges() {
            indeg[e.to] += 1;
        }
        if indeg[self.start()] > 0 {
            defects.push(Defect::StartHasInEdge { state: self.start() });
        }
        for s in (0..n).filter(|&s| s != self.start() && indeg[s] == 0) {
            defects.push(Defect::ExtraSource { state: s });
        }
        let single_source = !defects
            .iter()
            .any(|d| matches!(d, Defect::StartHasInEdge { .. } | Defect::ExtraSource { .. }));

        let before = defects.len();
        for value in 1..=self.k() as u8 {
            let states: Vec<_> = (0..n).filter(|&s| self.label(s) == Label::Output(value)).collect();
            match states.len() {
                0 => defects.push(Defect::MissingOutput { value }),
                1 => {}
                _ => defects.push(Defect::DuplicateOutput { value, states }),
            }
        }
        for s in (0..n).filter(|&s| self.output_value(s).is_some()) {
            if !self.out_edges(s).is_empty() {
                defects.push(Defect::OutputHasOutEdge { state: s });
            }
        }
        let outputs_ok = defects.len() == before;

        let deterministic = self.is_deterministic();
        if self.claims_deterministic() == Some(true) {
            for s in (0..n).filter(|&s| !self.deterministic_at(s)) {
                let labels = self.out_edges(s).iter().map(|&(l, _)| l).collect();
                defects.push(Defect::NotDeterministic { state: s, labels });
            }
        }

        StructuralReport {
            states: n,
            edges: self.edges().len(),
            acyclic,
            single_source,
            outputs_ok,
            deterministic,
            claimed_deterministic: self.claims_deterministic(),
            defects,
        }
    }

    fn find_cycle(&self) -> Vec<StateId> {
        // 0 = unseen, 1 = on stack, 2 = done
        let n = self.len();
        let mut mark = vec![0u8; n];
        let mut stack: Vec<StateId> = Vec::new();
        for root in 0..n {
            if mark[root] != 0 {
                continue;
            }
            let mut frames = vec![(root, 0usize)];
            mark[root] = 1;
            stack.push(root);
            while let Some(&mut (s, ref mut next)) = frames.last_mut() {
                if let Some(&(_, t)) = self.out_edges(s).get(*next) {
                    *next += 1;
                    match mark[t] {
                        0 => {
                            mark[t] = 1;
                            stack.push(t);
                            frames.push((t, 0));
                        }
                        1 => {
                            let pos = stack.iter().position(|&x| x == t).unwrap();
                            return stack[pos..].to_vec();
                        }
                        _ => {}
                    }
                } else {
                    mark[s] = 2;
                    stack.pop();
                    frames.pop();
                }
            }
        }
        Vec::new()
    }
}
