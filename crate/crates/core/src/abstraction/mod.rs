//! Change classification: taxonomies, rules, prompts, completion back-ends
//! and the batch driver.

pub mod cache;
pub mod engine;
pub mod labels;
pub mod llm;
pub mod offline;
pub mod prompt;
pub mod rules;
pub mod taxonomy;
pub mod tokens;
pub mod verdict;

pub use cache::{fingerprint, load_cache, record_cache, RecordingCompleter, ReplayCache, ReplayCompleter};
pub use engine::{
    classify_batch, classify_change, BatchOptions, BatchOutcome, ChangeClassifier, ClassifyError, FailurePolicy,
    PromptBackend, RuleBackend,
};
pub use labels::{read_labels, write_labels, LabeledEvent};
pub use llm::{ChatClient, Completer, CompletionError, LlmParams, RetryPolicy};
pub use offline::OfflineModel;
pub use prompt::{build_batch_prompt, build_classification_prompt, FewShotExample, PromptTemplate};
pub use rules::{rule_classify, Edge, Rule, RuleSet};
pub use taxonomy::{ActivityLabel, LabelTaxonomy, Phase, TaxonomySet};
pub use tokens::estimate_tokens;
pub use verdict::{parse_batch_verdicts, parse_verdict, ClassifierVerdict};
