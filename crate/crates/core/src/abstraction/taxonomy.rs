use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::source::Source;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Start,
    Continue,
    End,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Start => "start",
            Phase::Continue => "continue",
            Phase::End => "end",
        }
    }
}

pub const NONE_LABEL: &str = "None";

/// A classifier output: an activity in a lifecycle phase, or the blank class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActivityLabel {
    None,
    Activity { name: String, phase: Phase },
}

impl ActivityLabel {
    pub fn new(name: impl Into<String>, phase: Phase) -> Self {
        ActivityLabel::Activity {
            name: name.into(),
            phase,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ActivityLabel::None)
    }

    pub fn activity(&self) -> Option<&str> {
        match self {
            ActivityLabel::None => None,
            ActivityLabel::Activity { name, .. } => Some(name),
        }
    }

    pub fn phase(&self) -> Option<Phase> {
        match self {
            ActivityLabel::None => None,
            ActivityLabel::Activity { phase, .. } => Some(*phase),
        }
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivityLabel::None => f.write_str(NONE_LABEL),
            ActivityLabel::Activity { name, phase } => write!(f, "{name}_{}", phase.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaxonomyError {
    #[error("taxonomy for {0} has no activities")]
    Empty(Source),
    #[error("taxonomy for {0} has no lifecycle phases")]
    NoPhases(Source),
    #[error("label {0:?} is not unique")]
    DuplicateLabel(String),
    #[error("activity name {0:?} is reserved or empty")]
    BadActivity(String),
}

/// Serialized form, as it appears in the pipeline configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyConfig {
    pub activities: Vec<String>,
    pub phases: Vec<Phase>,
    #[serde(default = "yes")]
    pub include_none: bool,
}

fn yes() -> bool {
    true
}

/// The label set of one source: activities crossed with lifecycle phases,
/// optionally plus `None`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTaxonomy {
    source: Source,
    activities: Vec<String>,
    phases: Vec<Phase>,
    includes_none: bool,
    labels: Vec<ActivityLabel>,
    rendered: Vec<String>,
}

impl LabelTaxonomy {
    pub fn new(
        source: Source,
        activities: Vec<String>,
        mut phases: Vec<Phase>,
        includes_none: bool,
    ) -> Result<Self, TaxonomyError> {
        if activities.is_empty() {
            return Err(TaxonomyError::Empty(source));
        }
        phases.sort();
        phases.dedup();
        if phases.is_empty() {
            return Err(TaxonomyError::NoPhases(source));
        }
        let mut labels = Vec::new();
        for a in &activities {
            if a.trim().is_empty() || a.eq_ignore_ascii_case(NONE_LABEL) {
                return Err(TaxonomyError::BadActivity(a.clone()));
            }
            for &p in &phases {
                labels.push(ActivityLabel::new(a.clone(), p));
            }
        }
        if includes_none {
            labels.push(ActivityLabel::None);
        }
        let rendered: Vec<String> = labels.iter().map(ToString::to_string).collect();
        let mut seen = HashSet::new();
        for r in &rendered {
            if !seen.insert(r.to_ascii_lowercase()) {
                return Err(TaxonomyError::DuplicateLabel(r.clone()));
            }
        }
        Ok(LabelTaxonomy {
            source,
            activities,
            phases,
            includes_none,
            labels,
            rendered,
        })
    }

    pub fn from_config(source: Source, cfg: &TaxonomyConfig) -> Result<Self, TaxonomyError> {
        Self::new(source, cfg.activities.clone(), cfg.phases.clone(), cfg.include_none)
    }

    pub fn to_config(&self) -> TaxonomyConfig {
        TaxonomyConfig {
            activities: self.activities.clone(),
            phases: self.phases.clone(),
            include_none: self.includes_none,
        }
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn includes_none(&self) -> bool {
        self.includes_none
    }

    pub fn labels(&self) -> &[ActivityLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, label: &ActivityLabel) -> bool {
        self.labels.contains(label)
    }

    /// Case-insensitive match against the rendered label strings.
    pub fn lookup(&self, text: &str) -> Option<&ActivityLabel> {
        let text = text.trim();
        self.rendered
            .iter()
            .position(|r| r.eq_ignore_ascii_case(text))
            .map(|i| &self.labels[i])
    }

    pub fn has_activity(&self, name: &str) -> bool {
        self.activities.iter().any(|a| a == name)
    }

    /// One label per line, as listed in prompts.
    pub fn label_list(&self) -> String {
        self.rendered
            .iter()
            .map(|r| format!("- {r}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// The three per-source taxonomies of one deployment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomySet {
    pub ambient: TaxonomyConfig,
    pub smartphone: TaxonomyConfig,
    pub wristband: TaxonomyConfig,
}

const REFERENCE_TAXONOMIES: &str = include_str!("../../assets/taxonomies.toml");

impl TaxonomySet {
    /// Ten ambient activities with start/end, four app labels with
    /// start/continue/end, one sleep activity with start/end; each plus `None`.
    pub fn reference() -> Self {
        toml::from_str(REFERENCE_TAXONOMIES).expect("bundled taxonomies parse")
    }

    pub fn config(&self, source: Source) -> &TaxonomyConfig {
        match source {
            Source::Ambient => &self.ambient,
            Source::Smartphone => &self.smartphone,
            Source::Wristband => &self.wristband,
        }
    }

    pub fn taxonomy(&self, source: Source) -> Result<LabelTaxonomy, TaxonomyError> {
        LabelTaxonomy::from_config(source, self.config(source))
    }
}
