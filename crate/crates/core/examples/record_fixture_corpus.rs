//! Regenerates the replay corpus under `tests/fixtures/corpus`.
//!
//! A short synthetic scenario is written, then the prompt back-end and the
//! model integrator are run once against the local offline model with
//! recording on. The recorded cache lets the corpus `pipeline.toml` run with
//! `--backend replay` and no network. The recorded run's `events.csv` is kept
//! as `golden_events.csv`.
//!
//! ```bash
//! cargo run --example record_fixture_corpus
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use iotlog_forge::abstraction::OfflineModel;
use iotlog_forge::pipeline::{BackendKind, IntegratorKind, Pipeline, PipelineConfig, EVENTS_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    if corpus.exists() {
        std::fs::remove_dir_all(&corpus)?;
    }

    let mut cfg = PipelineConfig::from_toml("", &corpus)?;
    cfg.synth.seed = 7;
    cfg.synth.days = 3;
    cfg.synth.noise_rate = 0.2;
    cfg.synth.output_dir = Some(PathBuf::from("."));
    Pipeline::new(cfg)?.synth()?;

    let mut replay = PipelineConfig::load(corpus.join("pipeline.toml"))?;
    replay.backend.kind = BackendKind::Replay;
    replay.backend.integrator = IntegratorKind::Model;
    replay.paths.cache = Some(PathBuf::from("cache.txt"));
    replay.abstraction.batch_size = 4;
    std::fs::write(corpus.join("pipeline.toml"), replay.to_toml())?;

    let scratch = tempfile::tempdir()?;
    let mut record = replay.clone();
    record.backend.kind = BackendKind::Llm;
    record.paths.output_dir = Some(scratch.path().to_path_buf());
    let probe = Pipeline::new(record.clone())?;
    let tables = probe.tables()?;
    let streams = probe.streams(&tables, &probe.load_inputs(&tables)?)?;
    let model = streams
        .into_iter()
        .fold(OfflineModel::new(tables.taxonomies.clone()), |m, s| {
            m.with_classifier(s.registry, s.rules)
        });
    let model = Arc::new(model);
    let run = Pipeline::new(record)?.with_completer(model.clone()).run()?;
    println!(
        "recorded {} responses: {} changes labelled, {} intervals",
        iotlog_forge::abstraction::Completer::calls(model.as_ref()),
        run.abstraction.labels.len(),
        run.integration.log.len()
    );
    std::fs::copy(scratch.path().join(EVENTS_FILE), corpus.join("golden_events.csv"))?;

    let mut check = replay;
    check.paths.output_dir = Some(scratch.path().join("replay"));
    Pipeline::new(check)?.run()?;
    let replayed = std::fs::read(scratch.path().join("replay").join(EVENTS_FILE))?;
    assert_eq!(replayed, std::fs::read(corpus.join("golden_events.csv"))?);
    println!("replay reproduces the recorded log; corpus in {}", corpus.display());
    Ok(())
}
