//! Classifies a few changes against a live chat-completions endpoint.
//! Reads `LLM_ENDPOINT`, `LLM_API_KEY` and optionally `LLM_MODEL`.
//!
//! ```bash
//! LLM_ENDPOINT=https://api.openai.com/v1 LLM_API_KEY=... cargo run --example live_llm
//! ```

use std::sync::Arc;

use iotlog_forge::abstraction::{
    classify_batch, BatchOptions, ChatClient, Completer, LlmParams, PromptBackend, PromptTemplate, RetryPolicy,
};
use iotlog_forge::reference;
use iotlog_forge::state::{track_changes, StateSnapshot};
use iotlog_forge::synth::{generate_scenario, RoutineSpec};
use iotlog_forge::Source;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut params = LlmParams::default();
    if let Ok(model) = std::env::var("LLM_MODEL") {
        params.model = model;
    }
    let client = match ChatClient::from_env(params, RetryPolicy::default()) {
        Ok(c) => Arc::new(c),
        Err(e) => {
            eprintln!("{e}; nothing to do");
            return Ok(());
        }
    };
    let registry = reference::ambient_registry();
    let rules = reference::ambient_rules();
    let bundle = generate_scenario(1, 1, &RoutineSpec::default())?;
    let initial = StateSnapshot::zeros(registry.len(), bundle.ambient[0].timestamp);
    let changes = track_changes(&bundle.ambient, &registry, &initial)?;
    let truth = bundle.truth_for(Source::Ambient);

    let template = PromptTemplate::standard(&registry, &rules)?;
    let backend = PromptBackend::new(client.clone(), template, reference::taxonomy(Source::Ambient))?;
    let sample = &changes[..changes.len().min(10)];
    let out = classify_batch(sample, &backend, &BatchOptions::default())?;
    for ((c, v), t) in sample.iter().zip(&out.verdicts).zip(truth) {
        println!("{}  model {:<18} truth {}", c.timestamp, v.label, t.label);
    }
    println!("{} requests to {}", client.calls(), client.url());
    Ok(())
}
