use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::abstraction::{BatchOptions, FailurePolicy, LlmParams, RetryPolicy};
use crate::eval::{MetricFloors, DEFAULT_MIN_SUPPORT};
use crate::ingest::SmartphoneSchema;
use crate::source::DateStyle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Llm,
    #[default]
    Rules,
    Replay,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Llm => "llm",
            BackendKind::Rules => "rules",
            BackendKind::Replay => "replay",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "llm" => Ok(BackendKind::Llm),
            "rules" => Ok(BackendKind::Rules),
            "replay" => Ok(BackendKind::Replay),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

/// How labelled changes become intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorKind {
    /// Lifecycle pairing and midnight trimming in code.
    #[default]
    Native,
    /// One prompt per case date, answered by the configured completion back-end.
    Model,
}

/// Locations are relative to the configuration file. Unset tables fall back
/// to the bundled household.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub registry: Option<PathBuf>,
    pub ambient_rules: Option<PathBuf>,
    pub wristband_rules: Option<PathBuf>,
    pub privacy_map: Option<PathBuf>,
    pub taxonomies: Option<PathBuf>,
    pub classification_template: Option<PathBuf>,
    pub few_shot: Option<PathBuf>,
    pub integration_template: Option<PathBuf>,
    pub ambient_log: Option<PathBuf>,
    pub smartphone_log: Option<PathBuf>,
    pub wristband_log: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub truth_log: Option<PathBuf>,
    pub truth_labels: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub integrator: IntegratorKind,
}

/// Endpoint and key. `LLM_ENDPOINT` and `LLM_API_KEY` take precedence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Credentials {
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub strict: bool,
    pub smartphone_schema: SmartphoneSchema,
    /// Ambient state before the first reading as a 0/1 string in registry
    /// order. All zeros when absent.
    pub initial_state: Option<String>,
    /// Label for apps missing from the privacy map, e.g. "Using Smartphone".
    /// Unmapped apps are an error when absent.
    pub unmapped_app_label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbstractionConfig {
    pub batch_size: usize,
    pub parallelism: usize,
    pub failure_policy: FailurePolicy,
    pub per_item_fallback: bool,
    pub token_ceiling: Option<usize>,
}

impl Default for AbstractionConfig {
    fn default() -> Self {
        let b = BatchOptions::default();
        AbstractionConfig {
            batch_size: b.batch_size,
            parallelism: b.parallelism,
            failure_policy: b.policy,
            per_item_fallback: b.per_item_fallback,
            token_ceiling: Some(8192),
        }
    }
}

impl AbstractionConfig {
    pub fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            batch_size: self.batch_size,
            parallelism: self.parallelism,
            policy: self.failure_policy,
            per_item_fallback: self.per_item_fallback,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationConfig {
    /// Merge consecutive same-activity intervals of one source separated by
    /// at most this many seconds. Off when absent; 60 is a reasonable value.
    pub self_loop_gap_secs: Option<u32>,
    pub date_style: DateStyle,
    pub header: bool,
    pub parallelism: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            self_loop_gap_secs: None,
            date_style: DateStyle::Table,
            header: true,
            parallelism: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub tolerance_secs: u32,
    pub min_support: usize,
    pub floors: MetricFloors,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            tolerance_secs: 0,
            min_support: DEFAULT_MIN_SUPPORT,
            floors: MetricFloors::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub days: u32,
    /// Routine description; the built-in routine when unset.
    pub routine: Option<PathBuf>,
    pub noise_rate: f64,
    pub noise_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            days: 30,
            routine: None,
            noise_rate: 0.0,
            noise_seed: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    pub paths: PathsConfig,
    pub backend: BackendConfig,
    pub credentials: Credentials,
    pub llm: LlmParams,
    pub retry: RetryPolicy,
    pub ingest: IngestConfig,
    pub abstraction: AbstractionConfig,
    pub integration: IntegrationConfig,
    pub evaluation: EvaluationConfig,
    pub synth: SynthConfig,
}

fn range_check<T: PartialOrd + fmt::Display>(name: &str, v: T, lo: T, hi: T) -> Result<(), PipelineError> {
    if v < lo || v > hi {
        return Err(PipelineError::Config(format!("{name} = {v} is outside {lo}..={hi}")));
    }
    Ok(())
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn resolved(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        p.as_deref().map(|p| self.resolve(p))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(self.paths.output_dir.as_deref().unwrap_or(Path::new("out")))
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.output_dir().join(name)
    }

    pub fn synth_dir(&self) -> PathBuf {
        self.resolve(self.synth.output_dir.as_deref().unwrap_or(Path::new("synth")))
    }

    /// `--strict` turns on fail-fast ingestion and strict label parsing.
    pub fn make_strict(&mut self) {
        self.ingest.strict = true;
        self.abstraction.failure_policy = FailurePolicy::Strict;
    }

    /// Every input path that is set must exist; numeric settings must be in
    /// range.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let p = &self.paths;
        let inputs = [
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
            ("truth_log", &p.truth_log),
            ("truth_labels", &p.truth_labels),
            ("synth.routine", &self.synth.routine),
        ];
        for (name, path) in inputs {
            if let Some(path) = self.resolved(path) {
                if !path.exists() {
                    return Err(PipelineError::Config(format!(
                        "{name}: {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        if self.backend.kind == BackendKind::Replay {
            match self.resolved(&p.cache) {
                None => return Err(PipelineError::Config("replay backend needs paths.cache".into())),
                Some(c) if !c.exists() => {
                    return Err(PipelineError::Config(format!("cache: {} does not exist", c.display())))
                }
                Some(_) => {}
            }
        }
        let a = &self.abstraction;
        range_check("abstraction.batch_size", a.batch_size, 1, 256)?;
        range_check("abstraction.parallelism", a.parallelism, 1, 64)?;
        if let Some(c) = a.token_ceiling {
            range_check("abstraction.token_ceiling", c, 64, 1_000_000)?;
        }
        range_check("integration.parallelism", self.integration.parallelism, 1, 64)?;
        if let Some(g) = self.integration.self_loop_gap_secs {
            range_check("integration.self_loop_gap_secs", g, 0, 86_400)?;
        }
        range_check("evaluation.tolerance_secs", self.evaluation.tolerance_secs, 0, 86_400)?;
        range_check("llm.temperature", self.llm.temperature, 0.0, 2.0)?;
        range_check("llm.max_tokens", self.llm.max_tokens, 1, 128_000)?;
        range_check("llm.timeout_secs", self.llm.timeout_secs, 1, 3600)?;
        range_check("retry.max_retries", self.retry.max_retries, 0, 20)?;
        range_check("synth.days", self.synth.days, 1, 3650)?;
        if !(self.synth.noise_rate >= 0.0 && self.synth.noise_rate.is_finite()) {
            return Err(PipelineError::Config(format!(
                "synth.noise_rate = {}",
                self.synth.noise_rate
            )));
        }
        let f = &self.evaluation.floors;
        for (name, v, hi) in [
            ("floors.min_accuracy", f.min_accuracy, 1.0),
            ("floors.min_mean_eda", f.min_mean_eda, 1.0),
            ("floors.min_aligned_pct", f.min_aligned_pct, 100.0),
        ] {
            if let Some(v) = v {
                range_check(name, v, 0.0, hi)?;
            }
        }
        Ok(())
    }
}
