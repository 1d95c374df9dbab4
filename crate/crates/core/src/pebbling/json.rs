use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Game, Move, PebbleConfig, PebbleSequence};
use crate::amount::{format_rational, parse_rational, Amount, Rational};
use crate::error::{Error, Result};
use crate::tep::TreeShape;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePebbles {
    pub b: String,
    pub w: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveJson {
    #[serde(rename = "move")]
    pub kind: String,
    pub node: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clear: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub child_dec: Vec<(usize, String)>,
}

/// Pebbling JSON: configurations list only nodes holding pebbles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceJson {
    pub game: Game,
    pub h: u32,
    pub d: u32,
    pub configs: Vec<BTreeMap<usize, NodePebbles>>,
    pub moves: Vec<MoveJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub markers: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<String>,
}

impl SequenceJson {
    pub fn from_sequence<A: Amount>(seq: &PebbleSequence<A>, d: u32) -> Self {
        let configs = seq
            .configs
            .iter()
            .map(|c| {
                (1..=c.nodes())
                    .filter(|&i| !c.total(i).is_zero())
                    .map(|i| (i, NodePebbles { b: c.b[i].to_string(), w: c.w[i].to_string() }))
                    .collect()
            })
            .collect();
        let moves = seq
            .moves
            .iter()
            .map(|mv| {
                let mut out = MoveJson {
                    kind: mv.name().into(),
                    node: mv.node(),
                    by: None,
                    clear: Vec::new(),
                    child_dec: Vec::new(),
                };
                match mv {
                    Move::PlaceBlackLeaf(_) | Move::Remove(_) => {}
                    Move::BlackSlide { clear, .. } => out.clear = clear.clone(),
                    Move::IncW { by, .. }
                    | Move::DecB { by, .. }
                    | Move::IncBLeaf { by, .. }
                    | Move::DecWLeaf { by, .. }
                    | Move::DecWInternal { by, .. } => out.by = Some(by.to_string()),
                    Move::IncBInternal { by, child_dec, .. } => {
                        out.by = Some(by.to_string());
                        out.child_dec = child_dec.iter().map(|(j, x)| (*j, x.to_string())).collect();
                    }
                }
                out
            })
            .collect();
        Self {
            game: seq.game,
            h: seq.shape.height(),
            d,
            configs,
            moves,
            markers: seq.markers.clone(),
            max: Some(seq.max_pebbles().to_string()),
        }
    }

    /// Rebuilds a rational sequence. Moves are replayed when present;
    /// otherwise they are inferred from the configurations.
    pub fn to_sequence(&self) -> Result<PebbleSequence<Rational>> {
        let shape = TreeShape::new(self.h)?;
        let num = |s: &str| {
            parse_rational(s).ok_or_else(|| Error::InvalidSequence(format!("bad pebble value {s:?}")))
        };
        let mut configs = Vec::with_capacity(self.configs.len());
        for raw in &self.configs {
            let mut c = PebbleConfig::empty(shape);
            for (&i, v) in raw {
                if !shape.contains(i) {
                    return Err(Error::InvalidSequence(format!("node {i} is not in the tree")));
                }
                c.b[i] = num(&v.b)?;
                c.w[i] = num(&v.w)?;
            }
            configs.push(c);
        }
        let unit = Rational::from_integer(1);
        if self.moves.is_empty() {
            return PebbleSequence::from_configs(shape, self.game, unit, &configs);
        }
        let mut moves = Vec::with_capacity(self.moves.len());
        for m in &self.moves {
            let by = || num(m.by.as_deref().unwrap_or("1"));
            let node = m.node;
            moves.push(match m.kind.as_str() {
                "place_black_leaf" => Move::PlaceBlackLeaf(node),
                "black_slide" => Move::BlackSlide { node, clear: m.clear.clone() },
                "remove" => Move::Remove(node),
                "inc_w" => Move::IncW { node, by: by()? },
                "dec_b" => Move::DecB { node, by: by()? },
                "inc_b_leaf" => Move::IncBLeaf { node, by: by()? },
                "dec_w_leaf" => Move::DecWLeaf { node, by: by()? },
                "dec_w_internal" => Move::DecWInternal { node, by: by()? },
                "inc_b_internal" => Move::IncBInternal {
                    node,
                    by: by()?,
                    child_dec: m
                        .child_dec
                        .iter()
                        .map(|(j, x)| Ok((*j, num(x)?)))
                        .collect::<Result<_>>()?,
                },
                other => return Err(Error::InvalidSequence(format!("unknown move {other:?}"))),
            });
        }
        Ok(PebbleSequence { shape, game: self.game, unit, configs, moves, markers: self.markers.clone() })
    }
}

impl PebbleSequence<Rational> {
    pub fn to_json(&self, d: u32) -> String {
        serde_json::to_string_pretty(&SequenceJson::from_sequence(self, d)).expect("serializable")
    }

    pub fn max_pebbles_text(&self) -> String {
        format_rational(&self.max_pebbles())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pebbling::optimal_black_sequence;

    #[test]
    fn roundtrip() {
        let seq = optimal_black_sequence(3).unwrap();
        let json = SequenceJson::from_sequence(&seq, 1);
        let text = serde_json::to_string(&json).unwrap();
        let back: SequenceJson = serde_json::from_str(&text).unwrap();
        let rebuilt = back.to_sequence().unwrap();
        assert_eq!(rebuilt.configs, seq.configs);
        assert_eq!(rebuilt.moves, seq.moves);
        assert!(rebuilt.validate().is_ok());
    }

    #[test]
    fn configs_only() {
        let text = r#"{"game":"whole","h":2,"d":1,"configs":[{},{"3":{"b":"0","w":"1"}},
            {"2":{"b":"1","w":"0"},"3":{"b":"0","w":"1"}},{"1":{"b":"1","w":"0"},"3":{"b":"0","w":"1"}},
            {"1":{"b":"1","w":"0"}},{}],"moves":[]}"#;
        let seq: SequenceJson = serde_json::from_str(text).unwrap();
        let seq = seq.to_sequence().unwrap();
        assert!(seq.validate().is_ok());
    }
}
