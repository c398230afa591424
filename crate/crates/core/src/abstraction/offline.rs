//! A local stand-in for a chat model. It reads the same prompts a remote
//! model would get and answers in the requested format, deciding labels with
//! the rule set whose channel description appears in the prompt and building
//! integration rows with the native integrator. Used to record replay
//! fixtures and to exercise the prompt paths without a network.

use std::sync::atomic::{AtomicU64, Ordering};

use chrono::NaiveDateTime;

use super::llm::{Completer, CompletionError};
use super::rules::{rule_classify, RuleSet};
use super::taxonomy::LabelTaxonomy;
use crate::ingest::SensorRegistry;
use crate::integrate::format_row;
use crate::integrate::llm::{native_day, read_integration_query, DATE_LINE, NO_ROWS_ANSWER};
use crate::state::{decode_state, StateChange};

const PREVIOUS: &str = "Previous state:";
const CURRENT: &str = "Current state:";

struct Channel {
    explanations: String,
    registry: SensorRegistry,
    rules: RuleSet,
}

pub struct OfflineModel {
    channels: Vec<Channel>,
    taxonomies: Vec<LabelTaxonomy>,
    calls: AtomicU64,
}

impl OfflineModel {
    pub fn new(taxonomies: Vec<LabelTaxonomy>) -> Self {
        OfflineModel {
            channels: Vec::new(),
            taxonomies,
            calls: AtomicU64::new(0),
        }
    }

    /// Answers classification prompts that describe `registry`.
    pub fn with_classifier(mut self, registry: SensorRegistry, rules: RuleSet) -> Self {
        self.channels.push(Channel {
            explanations: registry.explanations(),
            registry,
            rules,
        });
        self
    }

    fn classify(&self, prompt: &str) -> Result<String, CompletionError> {
        let channel = self
            .channels
            .iter()
            .filter(|c| prompt.contains(&c.explanations))
            .max_by_key(|c| c.explanations.len())
            .ok_or_else(|| rejected("prompt describes no known channel set"))?;
        let previous = states_after(prompt, PREVIOUS).ok_or_else(|| rejected("no previous state"))?;
        let current = states_after(prompt, CURRENT).ok_or_else(|| rejected("no current state"))?;
        if previous.len() != current.len() {
            return Err(rejected("previous and current state lists differ in length"));
        }
        let batch = previous.len() > 1 || prompt.lines().any(|l| l.trim() == PREVIOUS);
        let mut out = Vec::new();
        for (k, (p, c)) in previous.iter().zip(&current).enumerate() {
            let ts = NaiveDateTime::default();
            let prev = decode_state(p, ts).map_err(|e| rejected(&e.to_string()))?;
            let cur = decode_state(c, ts).map_err(|e| rejected(&e.to_string()))?;
            let (reasoning, label) = match StateChange::between(&prev, &cur) {
                Some(change) => (
                    describe(&change, &channel.registry),
                    rule_classify(&change, &channel.rules),
                ),
                None => ("Nothing changed.".to_string(), super::taxonomy::ActivityLabel::None),
            };
            if batch {
                out.push(format!("Change {}: {reasoning}\nLABEL: {label}", k + 1));
            } else {
                out.push(format!("{reasoning}\nLABEL: {label}"));
            }
        }
        Ok(out.join("\n\n"))
    }

    fn integrate(&self, prompt: &str) -> Result<String, CompletionError> {
        let (date, day, next) =
            read_integration_query(prompt, &self.taxonomies).ok_or_else(|| rejected("unreadable integration query"))?;
        let rows = native_day(date, &day, &next, &self.taxonomies);
        if rows.is_empty() {
            return Ok(NO_ROWS_ANSWER.to_string());
        }
        let style = if prompt.contains(&format!("{DATE_LINE} {}", date.format("%Y-%m-%d"))) {
            crate::source::DateStyle::Iso
        } else {
            crate::source::DateStyle::Table
        };
        Ok(rows.iter().map(|r| format_row(r, style)).collect::<Vec<_>>().join("\n"))
    }
}

impl Completer for OfflineModel {
    fn backend_id(&self) -> &str {
        "offline"
    }

    fn complete(&self, prompt: &str) -> Result<String, CompletionError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        if prompt.lines().any(|l| l.trim_start().starts_with(DATE_LINE)) {
            self.integrate(prompt)
        } else if prompt.contains(PREVIOUS) {
            self.classify(prompt)
        } else {
            Err(rejected("unrecognised prompt"))
        }
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

fn rejected(reason: &str) -> CompletionError {
    CompletionError::Rejected {
        status: 400,
        body: reason.to_string(),
    }
}

/// States following the last `marker` line: either inline, or a numbered
/// `[k] bits` list on the lines below.
fn states_after(prompt: &str, marker: &str) -> Option<Vec<String>> {
    let lines: Vec<&str> = prompt.lines().collect();
    let idx = lines.iter().rposition(|l| l.trim_start().starts_with(marker))?;
    let inline = lines[idx].trim_start()[marker.len()..].trim();
    if !inline.is_empty() {
        return Some(vec![inline.to_string()]);
    }
    let list: Vec<String> = lines[idx + 1..]
        .iter()
        .map_while(|l| {
            let t = l.trim();
            let rest = t.strip_prefix('[')?;
            let (_, bits) = rest.split_once(']')?;
            Some(bits.trim().to_string())
        })
        .collect();
    (!list.is_empty()).then_some(list)
}

fn describe(change: &StateChange, registry: &SensorRegistry) -> String {
    let parts: Vec<String> = change
        .changed_positions
        .iter()
        .map(|&p| {
            let name = registry.at(p).map_or("?", |s| s.id.as_str());
            let dir = if change.rose(p) { "0 to 1" } else { "1 to 0" };
            format!("digit {p} ({name}) went from {dir}")
        })
        .collect();
    format!("Changed: {}.", parts.join("; "))
}
