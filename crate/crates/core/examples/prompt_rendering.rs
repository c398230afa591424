//! Renders the classification prompt for one change and for a batch, with
//! a rough token count for each.
//!
//! ```bash
//! cargo run --example prompt_rendering
//! ```

use chrono::NaiveDate;
use iotlog_forge::abstraction::{build_batch_prompt, build_classification_prompt, estimate_tokens, PromptTemplate};
use iotlog_forge::reference;
use iotlog_forge::state::{StateChange, StateSnapshot};
use iotlog_forge::Source;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = reference::ambient_registry();
    let taxonomy = reference::taxonomy(Source::Ambient);
    let template = PromptTemplate::standard(&registry, &reference::ambient_rules())?;

    let t = NaiveDate::from_ymd_opt(2020, 1, 8)
        .unwrap()
        .and_hms_opt(12, 0, 0)
        .unwrap();
    let idle = StateSnapshot::zeros(registry.len(), t);
    let mut cooking = idle.clone();
    cooking.bits[registry.position("stove_gas").unwrap()] = true;
    let mut done = cooking.clone();
    done.bits[registry.position("stove_gas").unwrap()] = false;
    let on = StateChange::between(&idle, &cooking).unwrap();
    let off = StateChange::between(&cooking, &done).unwrap();

    let single = build_classification_prompt(&on, &template, &taxonomy)?;
    println!("{single}");
    println!(
        "--- ~{} tokens, {} few-shot examples",
        estimate_tokens(&single),
        template.examples().len()
    );

    let batch = build_batch_prompt(&[on, off], &template, &taxonomy)?;
    let tail: Vec<&str> = batch.lines().rev().take(8).collect();
    println!("\nbatch prompt, last lines:");
    for line in tail.into_iter().rev() {
        println!("{line}");
    }
    println!("--- ~{} tokens", estimate_tokens(&batch));
    Ok(())
}
