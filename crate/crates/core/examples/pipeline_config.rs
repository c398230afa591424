//! Drives the full pipeline from a TOML configuration, the way the
//! `iotlog-forge` executable does.
//!
//! ```bash
//! cargo run --example pipeline_config
//! ```

use iotlog_forge::pipeline::{Pipeline, PipelineConfig};

const CONFIG: &str = r#"
[synth]
seed = 9
days = 5
noise_rate = 0.1
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let generator = PipelineConfig::from_toml(CONFIG, dir.path())?;
    let paths = Pipeline::new(generator)?.synth()?;
    println!("scenario in {}", paths.truth_log.parent().unwrap().display());

    let mut config = PipelineConfig::load(dir.path().join("synth/pipeline.toml"))?;
    config.abstraction.batch_size = 16;
    config.integration.self_loop_gap_secs = Some(5);
    println!("generated configuration:\n{}", config.to_toml());
    let run = Pipeline::new(config)?.run()?;
    println!(
        "{} labels, {} intervals, manifest at {}",
        run.abstraction.labels.len(),
        run.integration.log.len(),
        run.manifest.display()
    );
    if let Some(e) = run.evaluation {
        print!("{}", e.summary);
    }
    Ok(())
}
