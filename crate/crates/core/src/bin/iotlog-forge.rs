use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use iotlog_forge::pipeline::{BackendKind, EvaluateOutcome, Pipeline, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(
    name = "iotlog-forge",
    version,
    about = "Sensor logs to daily process-mining event logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fail on the first malformed input line or unparseable label.
    #[arg(long, global = true)]
    strict: bool,
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// Scenario seed for `synth`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Parse the input logs and write their state changes.
    Ingest,
    /// Label every state change.
    Abstract,
    /// Pair labels into the unified daily log.
    Integrate,
    /// Score the unified log against ground truth.
    Evaluate,
    /// Generate a synthetic scenario with ground truth.
    Synth,
    /// Write the unified log as XES.
    Export,
    /// Abstract, integrate, export and evaluate in one go.
    Run,
}

#[derive(ValueEnum, Clone, Copy)]
enum Backend {
    Llm,
    Rules,
    Replay,
}

impl From<Backend> for BackendKind {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Llm => BackendKind::Llm,
            Backend::Rules => BackendKind::Rules,
            Backend::Replay => BackendKind::Replay,
        }
    }
}

fn report_evaluation(e: &EvaluateOutcome) -> ExitCode {
    print!("{}", e.summary);
    if e.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn execute(cli: &Cli) -> Result<ExitCode, PipelineError> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::from_toml("", std::env::current_dir().unwrap_or_default())?,
    };
    if cli.strict {
        config.make_strict();
    }
    if let Some(b) = cli.backend {
        config.backend.kind = b.into();
    }
    if let Some(seed) = cli.seed {
        config.synth.seed = seed;
    }
    let pipeline = Pipeline::new(config)?;
    let out = pipeline.config().output_dir();
    match cli.command {
        Command::Ingest => {
            for s in pipeline.ingest()? {
                println!("{:<11} {} changes", s.source.as_str(), s.changes.len());
            }
            println!("wrote {}", out.join("changes.csv").display());
        }
        Command::Abstract => {
            let a = pipeline.abstract_labels()?;
            for c in &a.per_source {
                println!(
                    "{:<11} {} changes, {} parse failures, {} batch fallbacks",
                    c.source.as_str(),
                    c.changes,
                    c.parse_failures,
                    c.batch_fallbacks
                );
            }
            println!(
                "backend {}: {} requests, {} skipped input lines",
                a.backend, a.requests, a.skipped_lines
            );
        }
        Command::Integrate => {
            let i = pipeline.integrate()?;
            println!("{} intervals over {} dates", i.log.len(), i.log.dates().len());
            if let Some(p) = &i.pairing {
                for (source, (starts, ends)) in p.counts() {
                    if starts + ends > 0 {
                        println!(
                            "{:<11} {starts} unmatched starts, {ends} unmatched ends",
                            source.as_str()
                        );
                    }
                }
            }
            if i.rejected_rows > 0 {
                println!("{} model rows rejected", i.rejected_rows);
            }
        }
        Command::Evaluate => return Ok(report_evaluation(&pipeline.evaluate()?)),
        Command::Synth => {
            let paths = pipeline.synth()?;
            println!(
                "wrote scenario to {}",
                paths.truth_log.parent().unwrap_or(&out).display()
            );
        }
        Command::Export => println!("wrote {}", pipeline.export()?.display()),
        Command::Run => {
            let r = pipeline.run()?;
            println!(
                "{} changes labelled by {}, {} intervals",
                r.abstraction.labels.len(),
                r.abstraction.backend,
                r.integration.log.len()
            );
            println!("manifest {}", r.manifest.display());
            if let Some(e) = &r.evaluation {
                return Ok(report_evaluation(e));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
