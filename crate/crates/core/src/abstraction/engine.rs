//! Classifier back-ends and the single/batched classification drivers.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::llm::{Completer, CompletionError};
use super::prompt::{build_batch_prompt, build_classification_prompt, PromptError, PromptTemplate};
use super::rules::{rule_classify, RuleSet};
use super::taxonomy::LabelTaxonomy;
use super::tokens::{enforce_ceiling, OversizedPrompt};
use super::verdict::{parse_batch_verdicts, parse_verdict, ClassifierVerdict, VerdictParseError};
use crate::state::{encode_state, StateChange};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Parse(#[from] VerdictParseError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Oversized(#[from] OversizedPrompt),
    #[error("batch size must be at least 1")]
    BatchSize,
}

/// What to do when a response cannot be parsed into a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    /// Label the change `None` and keep the failure as a diagnostic.
    #[default]
    FallbackNone,
    Strict,
}

pub trait ChangeClassifier: Send + Sync {
    fn backend_id(&self) -> &str;

    fn classify(&self, change: &StateChange) -> Result<ClassifierVerdict, ClassifyError>;

    /// Classifies several changes in one request where the back-end supports it.
    fn classify_group(&self, changes: &[StateChange]) -> Result<Vec<ClassifierVerdict>, ClassifyError> {
        changes.iter().map(|c| self.classify(c)).collect()
    }

    /// Requests issued to an external model so far.
    fn requests(&self) -> u64 {
        0
    }
}

/// Deterministic classifier over an ordered rule set.
#[derive(Debug, Clone)]
pub struct RuleBackend {
    rules: RuleSet,
}

impl RuleBackend {
    pub fn new(rules: RuleSet) -> Self {
        RuleBackend { rules }
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }
}

impl ChangeClassifier for RuleBackend {
    fn backend_id(&self) -> &str {
        "rules"
    }

    fn classify(&self, change: &StateChange) -> Result<ClassifierVerdict, ClassifyError> {
        let label = rule_classify(change, &self.rules);
        let reasoning = match self.rules.first_match(change) {
            Some(r) => format!("rule {}: bit {} {}", r.order, r.bit_position, r.edge.as_str()),
            None => "no rule matched".to_string(),
        };
        Ok(ClassifierVerdict {
            raw_response: format!(
                "{} -> {}\nLABEL: {label}",
                encode_state(&change.previous),
                encode_state(&change.current)
            ),
            label,
            reasoning,
            backend_id: self.backend_id().to_string(),
            diagnostic: None,
        })
    }
}

/// Prompt-driven classifier: renders the template, asks the completer, parses
/// the terminal `LABEL:` line.
pub struct PromptBackend {
    completer: Arc<dyn Completer>,
    template: PromptTemplate,
    taxonomy: LabelTaxonomy,
    token_ceiling: Option<usize>,
}

impl PromptBackend {
    pub fn new(
        completer: Arc<dyn Completer>,
        template: PromptTemplate,
        taxonomy: LabelTaxonomy,
    ) -> Result<Self, PromptError> {
        template.validate(&taxonomy)?;
        Ok(PromptBackend {
            completer,
            template,
            taxonomy,
            token_ceiling: None,
        })
    }

    pub fn with_token_ceiling(mut self, ceiling: Option<usize>) -> Self {
        self.token_ceiling = ceiling;
        self
    }

    pub fn taxonomy(&self) -> &LabelTaxonomy {
        &self.taxonomy
    }

    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    fn ask(&self, prompt: &str) -> Result<String, ClassifyError> {
        enforce_ceiling(prompt, self.token_ceiling)?;
        Ok(self.completer.complete(prompt)?)
    }
}

impl ChangeClassifier for PromptBackend {
    fn backend_id(&self) -> &str {
        self.completer.backend_id()
    }

    fn classify(&self, change: &StateChange) -> Result<ClassifierVerdict, ClassifyError> {
        let prompt = build_classification_prompt(change, &self.template, &self.taxonomy)?;
        let raw = self.ask(&prompt)?;
        let mut v = parse_verdict(&raw, &self.taxonomy)?;
        v.backend_id = self.backend_id().to_string();
        Ok(v)
    }

    fn classify_group(&self, changes: &[StateChange]) -> Result<Vec<ClassifierVerdict>, ClassifyError> {
        let prompt = build_batch_prompt(changes, &self.template, &self.taxonomy)?;
        let raw = self.ask(&prompt)?;
        let mut out = parse_batch_verdicts(&raw, changes.len(), &self.taxonomy)?;
        for v in &mut out {
            v.backend_id = self.backend_id().to_string();
        }
        Ok(out)
    }

    fn requests(&self) -> u64 {
        self.completer.calls()
    }
}

/// Classifies one change, applying `policy` to parse failures. Transport and
/// prompt errors always propagate.
pub fn classify_change(
    change: &StateChange,
    backend: &dyn ChangeClassifier,
    policy: FailurePolicy,
) -> Result<ClassifierVerdict, ClassifyError> {
    match backend.classify(change) {
        Err(ClassifyError::Parse(e)) if policy == FailurePolicy::FallbackNone => Ok(ClassifierVerdict::fallback(
            backend.backend_id(),
            e.raw().to_string(),
            e.to_string(),
        )),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BatchOptions {
    pub batch_size: usize,
    /// Requests in flight at once.
    pub parallelism: usize,
    pub policy: FailurePolicy,
    /// Re-ask item by item when a batch answer cannot be split.
    pub per_item_fallback: bool,
}

impl Default for BatchOptions {
    fn default() -> Self {
        BatchOptions {
            batch_size: 1,
            parallelism: 1,
            policy: FailurePolicy::FallbackNone,
            per_item_fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchOutcome {
    /// In input order.
    pub verdicts: Vec<ClassifierVerdict>,
    /// Batches that were re-asked item by item.
    pub batch_fallbacks: usize,
}

impl BatchOutcome {
    pub fn parse_failures(&self) -> usize {
        self.verdicts.iter().filter(|v| v.diagnostic.is_some()).count()
    }
}

/// Groups `changes` into requests of up to `batch_size` items. Output order
/// equals input order regardless of grouping or parallelism.
pub fn classify_batch(
    changes: &[StateChange],
    backend: &dyn ChangeClassifier,
    opts: &BatchOptions,
) -> Result<BatchOutcome, ClassifyError> {
    if opts.batch_size == 0 {
        return Err(ClassifyError::BatchSize);
    }
    let fallbacks = AtomicUsize::new(0);
    let run_chunk = |chunk: &[StateChange]| -> Result<Vec<ClassifierVerdict>, ClassifyError> {
        if chunk.len() == 1 {
            return Ok(vec![classify_change(&chunk[0], backend, opts.policy)?]);
        }
        match backend.classify_group(chunk) {
            Ok(v) => Ok(v),
            Err(ClassifyError::Parse(e)) => {
                if opts.per_item_fallback {
                    fallbacks.fetch_add(1, Ordering::Relaxed);
                    chunk.iter().map(|c| classify_change(c, backend, opts.policy)).collect()
                } else if opts.policy == FailurePolicy::FallbackNone {
                    Ok(chunk
                        .iter()
                        .map(|_| ClassifierVerdict::fallback(backend.backend_id(), e.raw().to_string(), e.to_string()))
                        .collect())
                } else {
                    Err(ClassifyError::Parse(e))
                }
            }
            Err(other) => Err(other),
        }
    };
    let chunks: Vec<&[StateChange]> = changes.chunks(opts.batch_size).collect();
    let grouped: Vec<Vec<ClassifierVerdict>> = if opts.parallelism > 1 && chunks.len() > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.parallelism)
            .build()
            .expect("thread pool");
        pool.install(|| chunks.par_iter().map(|c| run_chunk(c)).collect::<Result<_, _>>())?
    } else {
        chunks.iter().map(|c| run_chunk(c)).collect::<Result<_, _>>()?
    };
    Ok(BatchOutcome {
        verdicts: grouped.into_iter().flatten().collect(),
        batch_fallbacks: fallbacks.into_inner(),
    })
}
