use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{BranchingProgram, Edge, Label, LayerInfo, StateId};
use crate::tep::{QueryId, Value};

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum QueryRepr {
    Leaf { node: usize },
    Func { node: usize, x: Value, y: Value },
    Output { value: Value },
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    id: StateId,
    query: QueryRepr,
}

#[derive(Serialize, Deserialize)]
struct EdgeRepr {
    from: StateId,
    label: Value,
    to: StateId,
}

#[derive(Serialize, Deserialize)]
struct ProgramRepr {
    k: u32,
    h: u32,
    start: StateId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deterministic: Option<bool>,
    states: Vec<StateRepr>,
    edges: Vec<EdgeRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layers: Option<Vec<LayerInfo>>,
}

impl Serialize for BranchingProgram {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let states = self
            .labels()
            .iter()
            .enumerate()
            .map(|(id, label)| StateRepr {
                id,
                query: match *label {
                    Label::Query(QueryId::Leaf(node)) => QueryRepr::Leaf { node },
                    Label::Query(QueryId::Func(node, x, y)) => QueryRepr::Func { node, x, y },
                    Label::Output(value) => QueryRepr::Output { value },
                },
            })
            .collect();
        let edges = self
            .edges()
            .iter()
            .map(|e| EdgeRepr { from: e.from, label: e.label, to: e.to })
            .collect();
        ProgramRepr {
            k: self.k(),
            h: self.height(),
            start: self.start(),
            deterministic: self.claims_deterministic(),
            states,
            edges,
            layers: self.layers().map(<[LayerInfo]>::to_vec),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BranchingProgram {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = ProgramRepr::deserialize(deserializer)?;
        let n = repr.states.len();
        let mut labels: Vec<Option<Label>> = vec![None; n];
        for st in repr.states {
            let slot = labels
                .get_mut(st.id)
                .ok_or_else(|| D::Error::custom(format!("state id {} is not dense in 0..{n}", st.id)))?;
            if slot.is_some() {
                return Err(D::Error::custom(format!("state id {} appears twice", st.id)));
            }
            *slot = Some(match st.query {
                QueryRepr::Leaf { node } => Label::Query(QueryId::Leaf(node)),
                QueryRepr::Func { node, x, y } => Label::Query(QueryId::Func(node, x, y)),
                QueryRepr::Output { value } => Label::Output(value),
            });
        }
        let labels = labels.into_iter().map(|l| l.expect("ids are dense")).collect();
        let edges = repr.edges.into_iter().map(|e| Edge { from: e.from, label: e.label, to: e.to }).collect();
        BranchingProgram::new(repr.k, repr.h, repr.start, labels, edges)
            .map(|bp| bp.with_claim(repr.deterministic).with_layers(repr.layers))
            .map_err(D::Error::custom)
    }
}

impl BranchingProgram {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("programs serialize")
    }

    pub fn from_json(text: &str) -> crate::error::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
