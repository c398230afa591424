//! Ordered edge rules: `bit k rising -> label`. The deterministic classifier,
//! and the mapping the scenario generator inverts.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::taxonomy::{ActivityLabel, LabelTaxonomy, Phase};
use crate::ingest::SensorRegistry;
use crate::state::StateChange;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Rising,
    Falling,
}

impl Edge {
    pub fn as_str(self) -> &'static str {
        match self {
            Edge::Rising => "rising",
            Edge::Falling => "falling",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub order: u32,
    pub bit_position: usize,
    pub edge: Edge,
    pub label: ActivityLabel,
}

impl Rule {
    pub fn matches(&self, change: &StateChange) -> bool {
        match self.edge {
            Edge::Rising => change.rose(self.bit_position),
            Edge::Falling => change.fell(self.bit_position),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("rule file: {0}")]
    Csv(#[from] csv::Error),
    #[error("expected header `order,bit_position,edge,label`, found `{0}`")]
    Header(String),
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("line {line}: bit position {position} outside registry of {width} sensors")]
    UnknownBit { line: u64, position: usize, width: usize },
    #[error("line {line}: label {label:?} not in the {source_name} taxonomy")]
    UnknownLabel {
        line: u64,
        label: String,
        source_name: String,
    },
}

/// Rules sorted by `order`; the first match wins.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(mut rules: Vec<Rule>) -> Self {
        rules.sort_by_key(|r| r.order);
        RuleSet { rules }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn from_reader<R: Read>(
        reader: R,
        registry: &SensorRegistry,
        taxonomy: &LabelTaxonomy,
    ) -> Result<Self, RuleError> {
        let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header != ["order", "bit_position", "edge", "label"] {
            return Err(RuleError::Header(header.join(",")));
        }
        let mut rules = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let bad = |message: String| RuleError::Line { line, message };
            if rec.len() != 4 {
                return Err(bad(format!("expected 4 fields, found {}", rec.len())));
            }
            let order: u32 = rec[0]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad order {:?}", &rec[0])))?;
            let bit_position: usize = rec[1]
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad bit position {:?}", &rec[1])))?;
            if bit_position >= registry.len() {
                return Err(RuleError::UnknownBit {
                    line,
                    position: bit_position,
                    width: registry.len(),
                });
            }
            let edge = match rec[2].trim() {
                "rising" => Edge::Rising,
                "falling" => Edge::Falling,
                other => return Err(bad(format!("bad edge {other:?}"))),
            };
            let label = taxonomy
                .lookup(&rec[3])
                .cloned()
                .ok_or_else(|| RuleError::UnknownLabel {
                    line,
                    label: rec[3].trim().to_string(),
                    source_name: taxonomy.source().to_string(),
                })?;
            rules.push(Rule {
                order,
                bit_position,
                edge,
                label,
            });
        }
        Ok(Self::new(rules))
    }

    pub fn load(
        path: impl AsRef<Path>,
        registry: &SensorRegistry,
        taxonomy: &LabelTaxonomy,
    ) -> Result<Self, RuleError> {
        Self::from_reader(File::open(path)?, registry, taxonomy)
    }

    /// For channel registries whose sensor ids are activity names: each
    /// channel rising starts its activity, falling ends it.
    pub fn lifecycle(registry: &SensorRegistry, taxonomy: &LabelTaxonomy) -> Self {
        let mut rules = Vec::new();
        let mut order = 0;
        for s in registry.sensors() {
            if !taxonomy.has_activity(&s.id) {
                continue;
            }
            for (edge, phase) in [(Edge::Rising, Phase::Start), (Edge::Falling, Phase::End)] {
                order += 1;
                rules.push(Rule {
                    order,
                    bit_position: s.bit_position,
                    edge,
                    label: ActivityLabel::new(s.id.clone(), phase),
                });
            }
        }
        Self::new(rules)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), RuleError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["order", "bit_position", "edge", "label"])?;
        for r in &self.rules {
            w.write_record([
                r.order.to_string(),
                r.bit_position.to_string(),
                r.edge.as_str().to_string(),
                r.label.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// The bit whose rising edge starts `activity`, if one exists and that bit's
    /// falling edge ends it.
    pub fn trigger_bit(&self, activity: &str) -> Option<usize> {
        let start = ActivityLabel::new(activity, Phase::Start);
        let end = ActivityLabel::new(activity, Phase::End);
        self.rules
            .iter()
            .filter(|r| r.edge == Edge::Rising && r.label == start)
            .map(|r| r.bit_position)
            .find(|&bit| {
                self.rules
                    .iter()
                    .any(|r| r.edge == Edge::Falling && r.bit_position == bit && r.label == end)
            })
    }

    /// Bits touched by at least one rule.
    pub fn covered_bits(&self) -> Vec<usize> {
        let mut bits: Vec<usize> = self.rules.iter().map(|r| r.bit_position).collect();
        bits.sort_unstable();
        bits.dedup();
        bits
    }

    /// `bit -> activity` for bits that carry a full start/end pair.
    pub fn activity_bits(&self) -> BTreeMap<usize, String> {
        let mut out = BTreeMap::new();
        for r in &self.rules {
            if let Some(name) = r.label.activity() {
                if self.trigger_bit(name) == Some(r.bit_position) {
                    out.insert(r.bit_position, name.to_string());
                }
            }
        }
        out
    }

    /// Index of the first rule matching `change`.
    pub fn first_match(&self, change: &StateChange) -> Option<&Rule> {
        self.rules.iter().find(|r| r.matches(change))
    }
}

/// First matching rule's label, else `None`.
pub fn rule_classify(change: &StateChange, rules: &RuleSet) -> ActivityLabel {
    rules
        .first_match(change)
        .map(|r| r.label.clone())
        .unwrap_or(ActivityLabel::None)
}
