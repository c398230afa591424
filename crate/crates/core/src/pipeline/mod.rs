//! Configuration and the commands behind the `iotlog-forge` executable.
//!
//! Every command reads its inputs from the paths in a [`PipelineConfig`] and
//! writes its outputs atomically into the output directory:
//!
//! | command | writes |
//! |---|---|
//! | ingest | `changes.csv` |
//! | abstract | `labels.csv` |
//! | integrate | `events.csv` |
//! | export | `events.xes` |
//! | evaluate | `accuracy.csv`, `alignment.csv`, `summary.txt` |
//! | run | all of the above plus `manifest.json` |
//! | synth | a scenario bundle and a `pipeline.toml` that processes it |

mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::Serialize;

pub use config::{
    AbstractionConfig, BackendConfig, BackendKind, Credentials, EvaluationConfig, IngestConfig, IntegrationConfig,
    IntegratorKind, PathsConfig, PipelineConfig, SynthConfig,
};

use crate::abstraction::cache::CacheError;
use crate::abstraction::labels::{read_labels, write_labels, LabelFileError, LabeledEvent};
use crate::abstraction::llm::{API_KEY_VAR, ENDPOINT_VAR};
use crate::abstraction::prompt::{read_examples, PromptError};
use crate::abstraction::rules::RuleError;
use crate::abstraction::taxonomy::{ActivityLabel, LabelTaxonomy, TaxonomyError, TaxonomySet};
use crate::abstraction::{
    classify_batch, load_cache, ChangeClassifier, ChatClient, ClassifyError, Completer, CompletionError, PromptBackend,
    PromptTemplate, RecordingCompleter, ReplayCache, ReplayCompleter, RuleBackend, RuleSet,
};
use crate::eval::{
    check_floors, label_accuracy, per_date_alignment, render_summary, write_accuracy_csv, write_alignment_csv,
    AccuracyReport, AlignmentReport, EvalError, FloorViolation,
};
use crate::fsio::{sha256_file, write_atomic};
use crate::ingest::{
    app_usage_readings, distinct_labels, parse_ambient_log, parse_smartphone_log, parse_wristband_log, sleep_readings,
    AppUsageRecord, IngestError, PrivacyMap, SensorReading, SensorRegistry, SkippedLine, SleepRecord, Strictness,
};
use crate::integrate::llm::{IntegrationError, IntegrationTemplate, ModelIntegrator, DEFAULT_INTEGRATION_TEMPLATE};
use crate::integrate::{
    aggregate_self_loops, integrate_native, read_event_log, write_event_log, EventLogFormat, IntegrateError,
    LogIoError, PairingReport, UnifiedEventLog,
};
use crate::reference;
use crate::source::{format_timestamp, Source};
use crate::state::{decode_state, encode_state, track_changes, StateChange, StateError, StateSnapshot};
use crate::synth::{generate_scenario, inject_noise, write_bundle, BundlePaths, RoutineSpec, SynthError};
use crate::xes::{write_xes, XesError};

pub const CHANGES_FILE: &str = "changes.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const XES_FILE: &str = "events.xes";
pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const ALIGNMENT_FILE: &str = "alignment.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Ingest {
        path: PathBuf,
        #[source]
        source: IngestError,
    },
    #[error("{}: {source}", path.display())]
    Labels {
        path: PathBuf,
        #[source]
        source: LabelFileError,
    },
    #[error("{}: {source}", path.display())]
    EventLog {
        path: PathBuf,
        #[source]
        source: LogIoError,
    },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Completion(#[from] CompletionError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Xes(#[from] XesError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

impl PipelineError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| PipelineError::io(path, e))
}

fn save(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).map_err(|e| PipelineError::io(path, e))
}

/// Registries, rules and taxonomies for all three sources.
#[derive(Debug, Clone)]
pub struct Tables {
    pub taxonomies: Vec<LabelTaxonomy>,
    pub registry: SensorRegistry,
    pub ambient_rules: RuleSet,
    pub wristband_registry: SensorRegistry,
    pub wristband_rules: RuleSet,
    pub privacy_map: PrivacyMap,
}

impl Tables {
    pub fn taxonomy(&self, source: Source) -> &LabelTaxonomy {
        self.taxonomies
            .iter()
            .find(|t| t.source() == source)
            .expect("one taxonomy per source")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub ambient: Vec<SensorReading>,
    pub smartphone: Vec<AppUsageRecord>,
    pub wristband: Vec<SleepRecord>,
    pub skipped: Vec<(Source, SkippedLine)>,
}

/// The state changes of one source with what is needed to classify them.
#[derive(Debug, Clone)]
pub struct SourceStream {
    pub source: Source,
    pub registry: SensorRegistry,
    pub rules: RuleSet,
    pub changes: Vec<StateChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceCounts {
    pub source: Source,
    pub changes: usize,
    pub parse_failures: usize,
    pub batch_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractOutcome {
    pub backend: String,
    pub labels: Vec<LabeledEvent>,
    pub per_source: Vec<SourceCounts>,
    pub requests: u64,
    pub skipped_lines: usize,
}

impl AbstractOutcome {
    pub fn parse_failures(&self) -> usize {
        self.per_source.iter().map(|c| c.parse_failures).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOutcome {
    pub log: UnifiedEventLog,
    /// Native integrator only.
    pub pairing: Option<PairingReport>,
    /// Model integrator only: rows that could not be read.
    pub rejected_rows: usize,
    pub requests: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutcome {
    pub accuracy: Vec<AccuracyReport>,
    pub alignment: Vec<AlignmentReport>,
    pub violations: Vec<FloorViolation>,
    /// Truth label instants without a predicted label; scored as `None`.
    pub unlabeled_truth: usize,
    pub summary: String,
}

impl EvaluateOutcome {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub abstraction: AbstractOutcome,
    pub integration: IntegrateOutcome,
    pub evaluation: Option<EvaluateOutcome>,
    pub manifest: PathBuf,
}

/// A configured pipeline. Completion back-ends are built on first use and
/// shared by classification and integration.
pub struct Pipeline {
    config: PipelineConfig,
    injected: Option<Arc<dyn Completer>>,
    session: Mutex<Option<Session>>,
}

#[derive(Clone)]
struct Session {
    completer: Arc<dyn Completer>,
    recording: Option<Arc<Mutex<ReplayCache>>>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline {
            config,
            injected: None,
            session: Mutex::new(None),
        })
    }

    /// Uses `completer` in place of the HTTP client for the `llm` back-end.
    /// Responses are still recorded to the cache when one is configured.
    pub fn with_completer(mut self, completer: Arc<dyn Completer>) -> Self {
        self.injected = Some(completer);
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn tables(&self) -> Result<Tables> {
        let c = &self.config;
        let set = match c.resolved(&c.paths.taxonomies) {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
                toml::from_str::<TaxonomySet>(&text)
                    .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?
            }
            None => TaxonomySet::reference(),
        };
        let taxonomies = Source::ALL
            .into_iter()
            .map(|s| set.taxonomy(s))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let find = |s: Source| {
            taxonomies
                .iter()
                .find(|t| t.source() == s)
                .expect("all sources")
                .clone()
        };
        let registry = match c.resolved(&c.paths.registry) {
            Some(p) => {
                SensorRegistry::from_reader(open(&p)?).map_err(|source| PipelineError::Ingest { path: p, source })?
            }
            None => reference::ambient_registry(),
        };
        let ambient_rules = match c.resolved(&c.paths.ambient_rules) {
            Some(p) => RuleSet::load(&p, &registry, &find(Source::Ambient))?,
            None => RuleSet::from_reader(
                reference::AMBIENT_RULES_CSV.as_bytes(),
                &registry,
                &find(Source::Ambient),
            )?,
        };
        let wristband_registry = reference::wristband_registry();
        let wristband_rules = match c.resolved(&c.paths.wristband_rules) {
            Some(p) => RuleSet::load(&p, &wristband_registry, &find(Source::Wristband))?,
            None => RuleSet::from_reader(
                reference::WRISTBAND_RULES_CSV.as_bytes(),
                &wristband_registry,
                &find(Source::Wristband),
            )?,
        };
        let privacy_map = match c.resolved(&c.paths.privacy_map) {
            Some(p) => PrivacyMap::load(&p).map_err(|source| PipelineError::Ingest { path: p, source })?,
            None => reference::privacy_map(),
        };
        let privacy_map = match &c.ingest.unmapped_app_label {
            Some(label) => privacy_map.with_default(label.clone()),
            None => privacy_map,
        };
        Ok(Tables {
            taxonomies,
            registry,
            ambient_rules,
            wristband_registry,
            wristband_rules,
            privacy_map,
        })
    }

    fn strictness(&self) -> Strictness {
        if self.config.ingest.strict {
            Strictness::FailFast
        } else {
            Strictness::Permissive
        }
    }

    pub fn load_inputs(&self, tables: &Tables) -> Result<Ingested> {
        let c = &self.config;
        let strict = self.strictness();
        let mut out = Ingested::default();
        if let Some(p) = c.resolved(&c.paths.ambient_log) {
            let parsed =
                parse_ambient_log(open(&p)?, &tables.registry, strict).map_err(|source| PipelineError::Ingest {
                    path: p.clone(),
                    source,
                })?;
            out.ambient = parsed.records;
            out.skipped
                .extend(parsed.skipped.into_iter().map(|s| (Source::Ambient, s)));
        }
        if let Some(p) = c.resolved(&c.paths.smartphone_log) {
            let parsed = parse_smartphone_log(open(&p)?, &tables.privacy_map, c.ingest.smartphone_schema, strict)
                .map_err(|source| PipelineError::Ingest {
                    path: p.clone(),
                    source,
                })?;
            out.smartphone = parsed.records;
            out.skipped
                .extend(parsed.skipped.into_iter().map(|s| (Source::Smartphone, s)));
        }
        if let Some(p) = c.resolved(&c.paths.wristband_log) {
            let parsed = parse_wristband_log(open(&p)?, strict).map_err(|source| PipelineError::Ingest {
                path: p.clone(),
                source,
            })?;
            out.wristband = parsed.records;
            out.skipped
                .extend(parsed.skipped.into_iter().map(|s| (Source::Wristband, s)));
        }
        Ok(out)
    }

    /// Per-source state changes, each source starting from all channels off.
    pub fn streams(&self, tables: &Tables, inputs: &Ingested) -> Result<Vec<SourceStream>> {
        let phone_taxonomy = tables.taxonomy(Source::Smartphone);
        let phone_registry = reference::smartphone_registry(phone_taxonomy, &distinct_labels(&inputs.smartphone));
        let phone_rules = reference::smartphone_rules(&phone_registry, phone_taxonomy);
        let sources = [
            (
                Source::Ambient,
                tables.registry.clone(),
                tables.ambient_rules.clone(),
                inputs.ambient.clone(),
            ),
            (
                Source::Smartphone,
                phone_registry,
                phone_rules,
                app_usage_readings(&inputs.smartphone),
            ),
            (
                Source::Wristband,
                tables.wristband_registry.clone(),
                tables.wristband_rules.clone(),
                sleep_readings(&inputs.wristband),
            ),
        ];
        let mut out = Vec::new();
        for (source, registry, rules, readings) in sources {
            let changes = match readings.first() {
                Some(first) => {
                    let initial = match (&self.config.ingest.initial_state, source) {
                        (Some(bits), Source::Ambient) => decode_state(bits.trim(), first.timestamp)?,
                        _ => StateSnapshot::zeros(registry.len(), first.timestamp),
                    };
                    track_changes(&readings, &registry, &initial)?
                }
                None => Vec::new(),
            };
            out.push(SourceStream {
                source,
                registry,
                rules,
                changes,
            });
        }
        Ok(out)
    }

    fn session(&self) -> Result<Session> {
        let mut slot = self.session.lock().expect("session lock");
        if let Some(s) = slot.as_ref() {
            return Ok(s.clone());
        }
        let c = &self.config;
        let session = match c.backend.kind {
            BackendKind::Rules => {
                return Err(PipelineError::Config(
                    "the rules back-end has no completion model".into(),
                ));
            }
            BackendKind::Replay => {
                let path = c.resolved(&c.paths.cache).expect("validated");
                Session {
                    completer: Arc::new(ReplayCompleter::new(load_cache(&path)?)),
                    recording: None,
                }
            }
            BackendKind::Llm => {
                let inner: Arc<dyn Completer> = match &self.injected {
                    Some(c) => Arc::clone(c),
                    None => Arc::new(self.chat_client()?),
                };
                let cache = match c.resolved(&c.paths.cache) {
                    Some(p) if p.exists() => load_cache(&p)?,
                    _ => ReplayCache::new(),
                };
                let cache = Arc::new(Mutex::new(cache));
                Session {
                    completer: Arc::new(RecordingCompleter::new(inner, Arc::clone(&cache))),
                    recording: Some(cache),
                }
            }
        };
        *slot = Some(session.clone());
        Ok(session)
    }

    fn chat_client(&self) -> Result<ChatClient> {
        let creds = &self.config.credentials;
        let endpoint = std::env::var(ENDPOINT_VAR)
            .ok()
            .or_else(|| creds.endpoint.clone())
            .ok_or_else(|| PipelineError::Config(format!("{ENDPOINT_VAR} is not set")))?;
        let key = std::env::var(API_KEY_VAR)
            .ok()
            .or_else(|| creds.api_key.clone())
            .ok_or_else(|| PipelineError::Config(format!("{API_KEY_VAR} is not set")))?;
        Ok(ChatClient::new(
            &endpoint,
            key,
            self.config.llm.clone(),
            self.config.retry.clone(),
        )?)
    }

    fn save_recording(&self) -> Result<()> {
        let slot = self.session.lock().expect("session lock");
        if let (
            Some(Session {
                recording: Some(cache), ..
            }),
            Some(path),
        ) = (slot.as_ref(), self.config.resolved(&self.config.paths.cache))
        {
            cache.lock().expect("cache lock").save(&path)?;
        }
        Ok(())
    }

    fn classifier(&self, stream: &SourceStream, taxonomy: &LabelTaxonomy) -> Result<Box<dyn ChangeClassifier>> {
        let c = &self.config;
        if c.backend.kind == BackendKind::Rules {
            return Ok(Box::new(RuleBackend::new(stream.rules.clone())));
        }
        let template = match c.resolved(&c.paths.classification_template) {
            Some(path) => {
                let examples = match c.resolved(&c.paths.few_shot) {
                    Some(p) if stream.source == Source::Ambient => read_examples(open(&p)?)?,
                    _ => crate::abstraction::prompt::derived_examples(&stream.registry, &stream.rules),
                };
                PromptTemplate::load(path, &stream.registry, examples)?
            }
            None => PromptTemplate::standard(&stream.registry, &stream.rules)?,
        };
        let backend = PromptBackend::new(self.session()?.completer, template, taxonomy.clone())?
            .with_token_ceiling(c.abstraction.token_ceiling);
        Ok(Box::new(backend))
    }

    /// Writes `changes.csv` (`timestamp,source,previous,current`).
    pub fn ingest(&self) -> Result<Vec<SourceStream>> {
        let tables = self.tables()?;
        let inputs = self.load_inputs(&tables)?;
        let streams = self.streams(&tables, &inputs)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| PipelineError::io(&self.config.output(CHANGES_FILE), e.into());
        w.write_record(["timestamp", "source", "previous", "current"])
            .map_err(csv_err)?;
        for s in &streams {
            for ch in &s.changes {
                w.write_record([
                    format_timestamp(ch.timestamp),
                    s.source.to_string(),
                    encode_state(&ch.previous),
                    encode_state(&ch.current),
                ])
                .map_err(csv_err)?;
            }
        }
        let bytes = w
            .into_inner()
            .map_err(|e| PipelineError::io(&self.config.output(CHANGES_FILE), e.into_error()))?;
        save(&self.config.output(CHANGES_FILE), &bytes)?;
        Ok(streams)
    }

    /// Classifies every change and writes `labels.csv`.
    pub fn abstract_labels(&self) -> Result<AbstractOutcome> {
        let tables = self.tables()?;
        let inputs = self.load_inputs(&tables)?;
        let streams = self.streams(&tables, &inputs)?;
        let opts = self.config.abstraction.batch_options();
        let mut labels = Vec::new();
        let mut per_source = Vec::new();
        let mut backend_name = self.config.backend.kind.to_string();
        for stream in &streams {
            let taxonomy = tables.taxonomy(stream.source);
            let backend = self.classifier(stream, taxonomy)?;
            backend_name = backend.backend_id().to_string();
            let outcome = classify_batch(&stream.changes, backend.as_ref(), &opts)?;
            per_source.push(SourceCounts {
                source: stream.source,
                changes: stream.changes.len(),
                parse_failures: outcome.parse_failures(),
                batch_fallbacks: outcome.batch_fallbacks,
            });
            labels.extend(stream.changes.iter().zip(outcome.verdicts).map(|(ch, v)| LabeledEvent {
                timestamp: ch.timestamp,
                source: stream.source,
                label: v.label,
                backend: v.backend_id,
            }));
        }
        let requests = match self.config.backend.kind {
            BackendKind::Rules => 0,
            _ => self.session()?.completer.calls(),
        };
        self.save_recording()?;
        let path = self.config.output(LABELS_FILE);
        let mut buf = Vec::new();
        write_labels(&mut buf, &labels).map_err(|source| PipelineError::Labels {
            path: path.clone(),
            source,
        })?;
        save(&path, &buf)?;
        Ok(AbstractOutcome {
            backend: backend_name,
            labels,
            per_source,
            requests,
            skipped_lines: inputs.skipped.len(),
        })
    }

    fn read_label_file(&self, path: &Path, taxonomies: &[LabelTaxonomy]) -> Result<Vec<LabeledEvent>> {
        read_labels(open(path)?, taxonomies).map_err(|source| PipelineError::Labels {
            path: path.to_path_buf(),
            source,
        })
    }

    fn read_log(&self, path: &Path) -> Result<UnifiedEventLog> {
        read_event_log(open(path)?).map_err(|source| PipelineError::EventLog {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Builds the unified log from `labels.csv` and writes `events.csv`.
    pub fn integrate(&self) -> Result<IntegrateOutcome> {
        let c = &self.config;
        let tables = self.tables()?;
        let labels = self.read_label_file(&c.output(LABELS_FILE), &tables.taxonomies)?;
        let mut outcome = match c.backend.integrator {
            IntegratorKind::Native => {
                let (log, report) = integrate_native(&labels, &tables.taxonomies)?;
                IntegrateOutcome {
                    log,
                    pairing: Some(report),
                    rejected_rows: 0,
                    requests: 0,
                }
            }
            IntegratorKind::Model => {
                if c.backend.kind == BackendKind::Rules {
                    return Err(PipelineError::Config(
                        "the model integrator needs the llm or replay back-end".into(),
                    ));
                }
                let template = match c.resolved(&c.paths.integration_template) {
                    Some(p) => {
                        let body = std::fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
                        let standard = IntegrationTemplate::standard(&tables.taxonomies);
                        IntegrationTemplate::new(body, standard.examples().to_vec())?
                    }
                    None => IntegrationTemplate::new(
                        DEFAULT_INTEGRATION_TEMPLATE,
                        IntegrationTemplate::standard(&tables.taxonomies).examples().to_vec(),
                    )?,
                }
                .with_date_style(c.integration.date_style);
                let integrator = ModelIntegrator::new(self.session()?.completer, template, tables.taxonomies.clone())
                    .with_token_ceiling(c.abstraction.token_ceiling)
                    .with_parallelism(c.integration.parallelism);
                let result = integrator.integrate(&labels)?;
                self.save_recording()?;
                IntegrateOutcome {
                    log: result.log,
                    pairing: None,
                    rejected_rows: result.rejects.len(),
                    requests: result.requests,
                }
            }
        };
        if let Some(gap) = c.integration.self_loop_gap_secs {
            outcome.log = aggregate_self_loops(&outcome.log, gap);
        }
        let path = c.output(EVENTS_FILE);
        let mut buf = Vec::new();
        let format = EventLogFormat {
            header: c.integration.header,
            date_style: c.integration.date_style,
        };
        write_event_log(&mut buf, &outcome.log, format).map_err(|source| PipelineError::EventLog {
            path: path.clone(),
            source,
        })?;
        save(&path, &buf)?;
        Ok(outcome)
    }

    /// Writes `events.xes` from `events.csv`.
    pub fn export(&self) -> Result<PathBuf> {
        let log = self.read_log(&self.config.output(EVENTS_FILE))?;
        let mut buf = Vec::new();
        write_xes(&mut buf, &log)?;
        let path = self.config.output(XES_FILE);
        save(&path, &buf)?;
        Ok(path)
    }

    /// Scores `events.csv` (and `labels.csv`, when truth labels are
    /// configured) against the truth files.
    pub fn evaluate(&self) -> Result<EvaluateOutcome> {
        let c = &self.config;
        let truth_path = c
            .resolved(&c.paths.truth_log)
            .ok_or_else(|| PipelineError::Config("evaluate needs paths.truth_log".into()))?;
        let truth = self.read_log(&truth_path)?;
        let generated = self.read_log(&c.output(EVENTS_FILE))?;
        let tables = self.tables()?;

        let mut accuracy = Vec::new();
        let mut unlabeled_truth = 0;
        if let Some(p) = c.resolved(&c.paths.truth_labels) {
            let truth_labels = self.read_label_file(&p, &tables.taxonomies)?;
            let predicted = self.read_label_file(&c.output(LABELS_FILE), &tables.taxonomies)?;
            let lookup: BTreeMap<_, _> = predicted.iter().map(|e| ((e.source, e.timestamp), &e.label)).collect();
            for source in Source::ALL {
                let t: Vec<ActivityLabel> = truth_labels
                    .iter()
                    .filter(|e| e.source == source)
                    .map(|e| e.label.clone())
                    .collect();
                if t.is_empty() {
                    continue;
                }
                let pred: Vec<ActivityLabel> = truth_labels
                    .iter()
                    .filter(|e| e.source == source)
                    .map(|e| match lookup.get(&(source, e.timestamp)) {
                        Some(l) => (*l).clone(),
                        None => {
                            unlabeled_truth += 1;
                            ActivityLabel::None
                        }
                    })
                    .collect();
                accuracy.push(label_accuracy(
                    &pred,
                    &t,
                    tables.taxonomy(source),
                    c.evaluation.min_support,
                )?);
            }
        }
        let tol = c.evaluation.tolerance_secs;
        let alignment = vec![
            per_date_alignment(&generated, &truth, false, tol),
            per_date_alignment(&generated, &truth, true, tol),
        ];
        let violations = check_floors(&c.evaluation.floors, &accuracy, &alignment);
        let mut summary = render_summary(&accuracy, &alignment, &violations);
        if unlabeled_truth > 0 {
            summary.push_str(&format!(
                "warning: {unlabeled_truth} truth labels had no predicted counterpart\n"
            ));
        }

        if !accuracy.is_empty() {
            let path = c.output(ACCURACY_FILE);
            let mut buf = Vec::new();
            write_accuracy_csv(&mut buf, &accuracy).map_err(|e| PipelineError::io(&path, e.into()))?;
            save(&path, &buf)?;
        }
        let path = c.output(ALIGNMENT_FILE);
        let mut buf = Vec::new();
        write_alignment_csv(&mut buf, &alignment).map_err(|e| PipelineError::io(&path, e.into()))?;
        save(&path, &buf)?;
        save(&c.output(SUMMARY_FILE), summary.as_bytes())?;
        Ok(EvaluateOutcome {
            accuracy,
            alignment,
            violations,
            unlabeled_truth,
            summary,
        })
    }

    /// Abstract, integrate, export and, when a truth log is configured,
    /// evaluate; then write `manifest.json`.
    pub fn run(&self) -> Result<RunOutcome> {
        self.ingest()?;
        let abstraction = self.abstract_labels()?;
        let integration = self.integrate()?;
        self.export()?;
        let evaluation = match self.config.paths.truth_log {
            Some(_) => Some(self.evaluate()?),
            None => None,
        };
        let manifest = self.write_manifest(&abstraction, &integration, evaluation.as_ref())?;
        Ok(RunOutcome {
            abstraction,
            integration,
            evaluation,
            manifest,
        })
    }

    fn write_manifest(
        &self,
        abstraction: &AbstractOutcome,
        integration: &IntegrateOutcome,
        evaluation: Option<&EvaluateOutcome>,
    ) -> Result<PathBuf> {
        let c = &self.config;
        let p = &c.paths;
        let mut inputs = BTreeMap::new();
        for (name, path) in [
            ("registry", &p.registry),
            ("ambient_rules", &p.ambient_rules),
            ("wristband_rules", &p.wristband_rules),
            ("privacy_map", &p.privacy_map),
            ("taxonomies", &p.taxonomies),
            ("classification_template", &p.classification_template),
            ("few_shot", &p.few_shot),
            ("integration_template", &p.integration_template),
            ("ambient_log", &p.ambient_log),
            ("smartphone_log", &p.smartphone_log),
            ("wristband_log", &p.wristband_log),
            ("cache", &p.cache),
            ("truth_log", &p.truth_log),
            ("truth_labels", &p.truth_labels),
        ] {
            if let Some(path) = c.resolved(path).filter(|p| p.exists()) {
                let hash = sha256_file(&path).map_err(|e| PipelineError::io(&path, e))?;
                inputs.insert(
                    name,
                    serde_json::json!({ "path": path.display().to_string(), "sha256": hash }),
                );
            }
        }
        let mut outputs = BTreeMap::new();
        for name in [
            CHANGES_FILE,
            LABELS_FILE,
            EVENTS_FILE,
            XES_FILE,
            ACCURACY_FILE,
            ALIGNMENT_FILE,
            SUMMARY_FILE,
        ] {
            let path = c.output(name);
            if path.exists() {
                outputs.insert(name, sha256_file(&path).map_err(|e| PipelineError::io(&path, e))?);
            }
        }
        let manifest = serde_json::json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "created_at": chrono::Utc::now().to_rfc3339(),
            "backend": c.backend.kind.as_str(),
            "integrator": match c.backend.integrator { IntegratorKind::Native => "native", IntegratorKind::Model => "model" },
            "model": (c.backend.kind != BackendKind::Rules).then(|| c.llm.model.clone()),
            "seed": c.synth.seed,
            "batch_size": c.abstraction.batch_size,
            "self_loop_gap_secs": c.integration.self_loop_gap_secs,
            "inputs": inputs,
            "outputs": outputs,
            "counts": {
                "changes": abstraction.per_source,
                "requests": abstraction.requests + integration.requests as u64,
                "parse_failures": abstraction.parse_failures(),
                "intervals": integration.log.len(),
                "rejected_rows": integration.rejected_rows,
            },
            "floors_met": evaluation.map(EvaluateOutcome::passed),
        });
        let path = c.output(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        save(&path, text.as_bytes())?;
        Ok(path)
    }

    /// Generates a scenario, writes it to the synth directory together with a
    /// `pipeline.toml` that runs the rule back-end over it.
    pub fn synth(&self) -> Result<BundlePaths> {
        let c = &self.config;
        let routine = match c.resolved(&c.synth.routine) {
            Some(p) => {
                let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
                toml::from_str::<RoutineSpec>(&text)
                    .map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))?
            }
            None => RoutineSpec::default(),
        };
        let mut bundle = generate_scenario(c.synth.seed, c.synth.days, &routine)?;
        let rate = if c.synth.noise_rate > 0.0 {
            c.synth.noise_rate
        } else {
            routine.noise_rate
        };
        if rate > 0.0 {
            bundle = inject_noise(
                &bundle,
                rate,
                c.synth.noise_seed.unwrap_or(c.synth.seed.wrapping_add(1)),
            )?;
        }
        let dir = c.synth_dir();
        let paths = write_bundle(&bundle, &dir, &routine).map_err(|e| PipelineError::io(&dir, e))?;
        let file_name = |p: &Path| PathBuf::from(p.file_name().expect("bundle file"));
        let mut run = PipelineConfig {
            paths: PathsConfig {
                registry: Some(file_name(&paths.registry)),
                ambient_rules: Some(file_name(&paths.ambient_rules)),
                wristband_rules: Some(file_name(&paths.wristband_rules)),
                privacy_map: Some(file_name(&paths.privacy_map)),
                ambient_log: Some(file_name(&paths.ambient)),
                smartphone_log: Some(file_name(&paths.smartphone)),
                wristband_log: Some(file_name(&paths.wristband)),
                truth_log: Some(file_name(&paths.truth_log)),
                truth_labels: Some(file_name(&paths.truth_labels)),
                output_dir: Some(PathBuf::from("out")),
                ..PathsConfig::default()
            },
            ..PipelineConfig::default()
        };
        run.synth.seed = c.synth.seed;
        run.synth.days = c.synth.days;
        save(&dir.join("pipeline.toml"), run.to_toml().as_bytes())?;
        Ok(paths)
    }
}

pub fn cmd_ingest(config: PipelineConfig) -> Result<Vec<SourceStream>> {
    Pipeline::new(config)?.ingest()
}

pub fn cmd_abstract(config: PipelineConfig) -> Result<AbstractOutcome> {
    Pipeline::new(config)?.abstract_labels()
}

pub fn cmd_integrate(config: PipelineConfig) -> Result<IntegrateOutcome> {
    Pipeline::new(config)?.integrate()
}

pub fn cmd_evaluate(config: PipelineConfig) -> Result<EvaluateOutcome> {
    Pipeline::new(config)?.evaluate()
}

pub fn cmd_export(config: PipelineConfig) -> Result<PathBuf> {
    Pipeline::new(config)?.export()
}

pub fn cmd_run(config: PipelineConfig) -> Result<RunOutcome> {
    Pipeline::new(config)?.run()
}

pub fn cmd_synth(config: PipelineConfig) -> Result<BundlePaths> {
    Pipeline::new(config)?.synth()
}
