//! Records model answers into a replay cache, saves it, and labels the same
//! changes again from the cache alone.
//!
//! ```bash
//! cargo run --example record_and_replay
//! ```

use std::sync::{Arc, Mutex};

use iotlog_forge::abstraction::{
    classify_batch, load_cache, BatchOptions, Completer, OfflineModel, PromptBackend, PromptTemplate,
    RecordingCompleter, ReplayCache, ReplayCompleter,
};
use iotlog_forge::reference;
use iotlog_forge::state::{track_changes, StateSnapshot};
use iotlog_forge::synth::{generate_scenario, RoutineSpec};
use iotlog_forge::Source;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = reference::ambient_registry();
    let rules = reference::ambient_rules();
    let bundle = generate_scenario(11, 1, &RoutineSpec::default())?;
    let initial = StateSnapshot::zeros(registry.len(), bundle.ambient[0].timestamp);
    let changes = track_changes(&bundle.ambient, &registry, &initial)?;
    let template = PromptTemplate::standard(&registry, &rules)?;
    let taxonomy = reference::taxonomy(Source::Ambient);
    let opts = BatchOptions {
        batch_size: 8,
        ..BatchOptions::default()
    };

    let model = Arc::new(OfflineModel::new(reference::taxonomies()).with_classifier(registry, rules));
    let cache = Arc::new(Mutex::new(ReplayCache::new()));
    let recorder = Arc::new(RecordingCompleter::new(model, Arc::clone(&cache)));
    let live = PromptBackend::new(recorder.clone(), template.clone(), taxonomy.clone())?;
    let first = classify_batch(&changes, &live, &opts)?;
    println!("{} changes, {} requests recorded", changes.len(), recorder.calls());

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("cache.txt");
    cache.lock().unwrap().save(&path)?;

    let replay = Arc::new(ReplayCompleter::new(load_cache(&path)?));
    let offline = PromptBackend::new(replay.clone(), template, taxonomy)?;
    let second = classify_batch(&changes, &offline, &opts)?;
    let same = first
        .verdicts
        .iter()
        .zip(&second.verdicts)
        .all(|(a, b)| a.label == b.label);
    println!(
        "replay: {} hits, {} misses, identical labels: {same}",
        replay.hits(),
        replay.misses()
    );
    Ok(())
}
