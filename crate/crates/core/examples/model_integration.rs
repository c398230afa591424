//! Builds the per-date integration prompt and lets a model turn the labels
//! into event-log rows. The offline stand-in model is used here; swap in a
//! `ChatClient` to use a real endpoint.
//!
//! ```bash
//! cargo run --example model_integration
//! ```

use std::sync::Arc;

use iotlog_forge::abstraction::{Completer, OfflineModel};
use iotlog_forge::integrate::llm::{events_by_date, IntegrationTemplate, ModelIntegrator};
use iotlog_forge::reference;
use iotlog_forge::synth::{generate_scenario, RoutineSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = generate_scenario(5, 3, &RoutineSpec::default())?;
    let taxonomies = reference::taxonomies();
    let model = Arc::new(OfflineModel::new(taxonomies.clone()));
    let integrator = ModelIntegrator::new(model.clone(), IntegrationTemplate::standard(&taxonomies), taxonomies);

    let by_date = events_by_date(&bundle.truth_labels);
    let prompt = integrator.prompt_for(bundle.start_date, &by_date)?;
    println!("prompt for {}: {} lines", bundle.start_date, prompt.lines().count());

    let out = integrator.integrate(&bundle.truth_labels)?;
    println!(
        "{} requests, {} rows, {} rejected, equals truth: {}",
        model.calls(),
        out.log.len(),
        out.rejects.len(),
        out.log == bundle.truth_log
    );
    Ok(())
}
