//! Classification prompts: a plain-text template with named placeholders,
//! filled with the channel explanations, the label list, worked examples and
//! the previous/current encoded states.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use super::rules::RuleSet;
use super::taxonomy::{ActivityLabel, LabelTaxonomy, Phase};
use crate::ingest::SensorRegistry;
use crate::state::{encode_state, StateChange};

pub const CLASSIFICATION_PLACEHOLDERS: [&str; 6] = [
    "labels",
    "sensor_explanations",
    "examples",
    "previous_state",
    "current_state",
    "output_format",
];

pub const DEFAULT_CLASSIFICATION_TEMPLATE: &str = include_str!("../../assets/classification_prompt.txt");

const OUTPUT_FORMAT: &str = "Answer format: first explain which digits changed and what that means. \
Then finish with a final line of the form\nLABEL: <label>\nwhere <label> is exactly one of the labels listed above.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("template is missing placeholder {{{{{0}}}}}")]
    MissingPlaceholder(String),
    #[error("template uses unknown placeholder {{{{{0}}}}}")]
    UnknownPlaceholder(String),
    #[error("template has an unterminated placeholder")]
    Unterminated,
    #[error("example {index} uses label {label:?} which is not in the {source_name} taxonomy")]
    ExampleLabel {
        index: usize,
        label: String,
        source_name: String,
    },
    #[error("state has {found} digits, template describes {expected} channels")]
    StateWidth { expected: usize, found: usize },
    #[error("template needs at least one worked example")]
    NoExamples,
    #[error("examples file: {0}")]
    Examples(String),
}

/// Fills `{{name}}` placeholders in one pass; substituted text is not rescanned.
pub fn render(template: &str, values: &HashMap<&str, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after.find("}}").ok_or(PromptError::Unterminated)?;
        let name = after[..close].trim();
        let value = values
            .get(name)
            .ok_or_else(|| PromptError::UnknownPlaceholder(name.to_string()))?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Names of all placeholders used by `template`.
pub fn placeholders(template: &str) -> Result<Vec<String>, PromptError> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        let close = after.find("}}").ok_or(PromptError::Unterminated)?;
        names.push(after[..close].trim().to_string());
        rest = &after[close + 2..];
    }
    Ok(names)
}

pub(crate) fn check_placeholders(template: &str, allowed: &[&str]) -> Result<(), PromptError> {
    let used = placeholders(template)?;
    if let Some(unknown) = used.iter().find(|u| !allowed.contains(&u.as_str())) {
        return Err(PromptError::UnknownPlaceholder(unknown.clone()));
    }
    if let Some(missing) = allowed.iter().find(|a| !used.iter().any(|u| u == *a)) {
        return Err(PromptError::MissingPlaceholder(missing.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotExample {
    pub previous_state: String,
    pub current_state: String,
    pub reasoning: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    body: String,
    sensor_explanations: String,
    few_shot: Vec<FewShotExample>,
    output_format: String,
    state_width: usize,
}

impl PromptTemplate {
    pub fn new(
        body: impl Into<String>,
        registry: &SensorRegistry,
        few_shot: Vec<FewShotExample>,
    ) -> Result<Self, PromptError> {
        let body = body.into();
        check_placeholders(&body, &CLASSIFICATION_PLACEHOLDERS)?;
        if few_shot.is_empty() {
            return Err(PromptError::NoExamples);
        }
        let state_width = registry.len();
        for ex in &few_shot {
            for s in [&ex.previous_state, &ex.current_state] {
                if s.chars().count() != state_width {
                    return Err(PromptError::StateWidth {
                        expected: state_width,
                        found: s.chars().count(),
                    });
                }
            }
        }
        Ok(PromptTemplate {
            body,
            sensor_explanations: registry.explanations(),
            few_shot,
            output_format: OUTPUT_FORMAT.to_string(),
            state_width,
        })
    }

    /// The bundled template with examples derived from `rules`.
    pub fn standard(registry: &SensorRegistry, rules: &RuleSet) -> Result<Self, PromptError> {
        Self::new(
            DEFAULT_CLASSIFICATION_TEMPLATE,
            registry,
            derived_examples(registry, rules),
        )
    }

    pub fn load(
        path: impl AsRef<Path>,
        registry: &SensorRegistry,
        few_shot: Vec<FewShotExample>,
    ) -> Result<Self, PromptError> {
        let body = fs::read_to_string(path).map_err(|e| PromptError::Examples(e.to_string()))?;
        Self::new(body, registry, few_shot)
    }

    pub fn with_output_format(mut self, text: impl Into<String>) -> Self {
        self.output_format = text.into();
        self
    }

    pub fn examples(&self) -> &[FewShotExample] {
        &self.few_shot
    }

    pub fn state_width(&self) -> usize {
        self.state_width
    }

    /// Every example label must exist in `taxonomy`.
    pub fn validate(&self, taxonomy: &LabelTaxonomy) -> Result<(), PromptError> {
        for (i, ex) in self.few_shot.iter().enumerate() {
            if taxonomy.lookup(&ex.label).is_none() {
                return Err(PromptError::ExampleLabel {
                    index: i + 1,
                    label: ex.label.clone(),
                    source_name: taxonomy.source().to_string(),
                });
            }
        }
        Ok(())
    }

    fn render_examples(&self) -> String {
        self.few_shot
            .iter()
            .enumerate()
            .map(|(i, ex)| {
                format!(
                    "Example {}\nPrevious state: {}\nCurrent state: {}\nReasoning: {}\nLABEL: {}",
                    i + 1,
                    ex.previous_state,
                    ex.current_state,
                    ex.reasoning,
                    ex.label
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }

    fn fill(
        &self,
        taxonomy: &LabelTaxonomy,
        previous: String,
        current: String,
        output_format: String,
    ) -> Result<String, PromptError> {
        let values = HashMap::from([
            ("labels", taxonomy.label_list()),
            ("sensor_explanations", self.sensor_explanations.clone()),
            ("examples", self.render_examples()),
            ("previous_state", previous),
            ("current_state", current),
            ("output_format", output_format),
        ]);
        render(&self.body, &values)
    }

    fn check_width(&self, change: &StateChange) -> Result<(), PromptError> {
        for s in [&change.previous, &change.current] {
            if s.len() != self.state_width {
                return Err(PromptError::StateWidth {
                    expected: self.state_width,
                    found: s.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn build_classification_prompt(
    change: &StateChange,
    template: &PromptTemplate,
    taxonomy: &LabelTaxonomy,
) -> Result<String, PromptError> {
    template.validate(taxonomy)?;
    template.check_width(change)?;
    template.fill(
        taxonomy,
        encode_state(&change.previous),
        encode_state(&change.current),
        template.output_format.clone(),
    )
}

/// Several changes in one prompt. The state placeholders receive numbered
/// lists and the answer must carry one `LABEL:` line per change, in order.
pub fn build_batch_prompt(
    changes: &[StateChange],
    template: &PromptTemplate,
    taxonomy: &LabelTaxonomy,
) -> Result<String, PromptError> {
    template.validate(taxonomy)?;
    for c in changes {
        template.check_width(c)?;
    }
    let numbered = |pick: fn(&StateChange) -> String| {
        changes
            .iter()
            .enumerate()
            .map(|(i, c)| format!("\n[{}] {}", i + 1, pick(c)))
            .collect::<String>()
    };
    let n = changes.len();
    let format = format!(
        "Answer format: there are {n} numbered changes; previous state [k] pairs with current state [k]. \
Handle them in order. For each change briefly explain which digits changed, then write a line of the form\n\
LABEL: <label>\nwhere <label> is exactly one of the labels listed above. \
Your answer must contain exactly {n} LABEL lines, one per change, in order."
    );
    template.fill(
        taxonomy,
        numbered(|c| encode_state(&c.previous)),
        numbered(|c| encode_state(&c.current)),
        format,
    )
}

/// Reads examples from CSV `previous_state,current_state,reasoning,label`.
pub fn read_examples<R: Read>(reader: R) -> Result<Vec<FewShotExample>, PromptError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| PromptError::Examples(e.to_string()))?;
        if rec.len() != 4 {
            return Err(PromptError::Examples(format!("expected 4 fields, found {}", rec.len())));
        }
        out.push(FewShotExample {
            previous_state: rec[0].trim().to_string(),
            current_state: rec[1].trim().to_string(),
            reasoning: rec[2].trim().to_string(),
            label: rec[3].trim().to_string(),
        });
    }
    Ok(out)
}

/// A start and an end example for the first two rule-backed activities, plus
/// a `None` example on a channel no rule covers (if any).
pub fn derived_examples(registry: &SensorRegistry, rules: &RuleSet) -> Vec<FewShotExample> {
    let width = registry.len();
    let zeros = "0".repeat(width);
    let with_bit = |bit: usize| -> String { (0..width).map(|i| if i == bit { '1' } else { '0' }).collect() };
    let describe = |bit: usize| -> String {
        registry
            .at(bit)
            .map(|s| {
                if s.explanation.is_empty() {
                    s.id.clone()
                } else {
                    format!("{} ({})", s.id, s.explanation)
                }
            })
            .unwrap_or_default()
    };
    let mut out = Vec::new();
    for (k, (bit, activity)) in rules.activity_bits().into_iter().take(2).enumerate() {
        let (prev, curr, phase, verb) = if k == 0 {
            (zeros.clone(), with_bit(bit), Phase::Start, "from 0 to 1")
        } else {
            (with_bit(bit), zeros.clone(), Phase::End, "from 1 to 0")
        };
        out.push(FewShotExample {
            previous_state: prev,
            current_state: curr,
            reasoning: format!(
                "Digit {} changed {verb}; it is {}. This marks the {} of {activity}.",
                bit + 1,
                describe(bit),
                phase.as_str()
            ),
            label: ActivityLabel::new(activity, phase).to_string(),
        });
    }
    let covered = rules.covered_bits();
    if let Some(bit) = (0..width).find(|b| !covered.contains(b)) {
        out.push(FewShotExample {
            previous_state: zeros.clone(),
            current_state: with_bit(bit),
            reasoning: format!(
                "Digit {} changed from 0 to 1; it is {}. On its own this does not indicate any listed activity.",
                bit + 1,
                describe(bit)
            ),
            label: ActivityLabel::None.to_string(),
        });
    }
    if out.is_empty() {
        // registry without rules: still show the answer shape
        out.push(FewShotExample {
            previous_state: zeros.clone(),
            current_state: zeros,
            reasoning: "Nothing changed.".into(),
            label: ActivityLabel::None.to_string(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::taxonomy::TaxonomySet;
    use crate::source::{parse_timestamp, Source};
    use crate::state::decode_state;

    fn registry3() -> SensorRegistry {
        SensorRegistry::from_channels(&["bed", "stove", "hall"], "pir").unwrap()
    }

    fn taxonomy() -> LabelTaxonomy {
        LabelTaxonomy::new(
            Source::Ambient,
            vec!["sleeping".into(), "cooking".into()],
            vec![Phase::Start, Phase::End],
            true,
        )
        .unwrap()
    }

    fn rules() -> RuleSet {
        let csv = "order,bit_position,edge,label\n1,0,rising,sleeping_start\n2,0,falling,sleeping_end\n\
                   3,1,rising,cooking_start\n4,1,falling,cooking_end\n";
        RuleSet::from_reader(csv.as_bytes(), &registry3(), &taxonomy()).unwrap()
    }

    fn change(prev: &str, curr: &str) -> StateChange {
        let t = parse_timestamp("2020-01-08T12:00:00").unwrap();
        StateChange::between(&decode_state(prev, t).unwrap(), &decode_state(curr, t).unwrap()).unwrap()
    }

    #[test]
    fn prompt_embeds_states_labels_and_format() {
        let template = PromptTemplate::standard(&registry3(), &rules()).unwrap();
        let prompt = build_classification_prompt(&change("000", "100"), &template, &taxonomy()).unwrap();
        assert!(prompt.contains("Previous state: 000\n"));
        assert!(prompt.contains("Current state: 100\n"));
        assert!(prompt.contains("LABEL: <label>"));
        assert!(prompt.contains("Example 1"));
        for label in ["sleeping_start", "sleeping_end", "cooking_start", "cooking_end", "None"] {
            assert!(prompt.contains(&format!("- {label}\n")), "{label}");
        }
        assert!(!prompt.contains("{{"));
    }

    #[test]
    fn reference_taxonomy_lists_21_labels() {
        let tax = TaxonomySet::reference().taxonomy(Source::Ambient).unwrap();
        let registry = SensorRegistry::from_channels(&["a", "b", "c"], "pir").unwrap();
        let examples = vec![FewShotExample {
            previous_state: "000".into(),
            current_state: "001".into(),
            reasoning: "noise".into(),
            label: "None".into(),
        }];
        let template = PromptTemplate::new(DEFAULT_CLASSIFICATION_TEMPLATE, &registry, examples).unwrap();
        let prompt = build_classification_prompt(&change("000", "100"), &template, &tax).unwrap();
        let block = prompt
            .split("Possible labels:\n")
            .nth(1)
            .unwrap()
            .split("\nUse None")
            .next()
            .unwrap();
        assert_eq!(block.lines().count(), 21);
        for label in tax.labels() {
            let needle = format!("- {label}");
            assert_eq!(block.lines().filter(|l| *l == needle).count(), 1, "{label}");
        }
    }

    #[test]
    fn example_with_unknown_label_is_rejected() {
        let examples = vec![FewShotExample {
            previous_state: "000".into(),
            current_state: "010".into(),
            reasoning: "?".into(),
            label: "flying_start".into(),
        }];
        let template = PromptTemplate::new(DEFAULT_CLASSIFICATION_TEMPLATE, &registry3(), examples).unwrap();
        let err = build_classification_prompt(&change("000", "100"), &template, &taxonomy()).unwrap_err();
        assert!(matches!(err, PromptError::ExampleLabel { index: 1, .. }));
    }

    #[test]
    fn placeholder_validation() {
        let err = PromptTemplate::new(
            "{{labels}} only",
            &registry3(),
            derived_examples(&registry3(), &rules()),
        )
        .unwrap_err();
        assert!(matches!(err, PromptError::MissingPlaceholder(_)));
        let body = format!("{DEFAULT_CLASSIFICATION_TEMPLATE}{{{{mystery}}}}");
        let err = PromptTemplate::new(body, &registry3(), derived_examples(&registry3(), &rules())).unwrap_err();
        assert_eq!(err, PromptError::UnknownPlaceholder("mystery".into()));
    }

    #[test]
    fn width_mismatch() {
        let template = PromptTemplate::standard(&registry3(), &rules()).unwrap();
        let err = build_classification_prompt(&change("0000", "1000"), &template, &taxonomy()).unwrap_err();
        assert_eq!(err, PromptError::StateWidth { expected: 3, found: 4 });
    }

    #[test]
    fn batch_prompt_numbers_changes() {
        let template = PromptTemplate::standard(&registry3(), &rules()).unwrap();
        let prompt = build_batch_prompt(&[change("000", "100"), change("100", "110")], &template, &taxonomy()).unwrap();
        assert!(prompt.contains("Previous state: \n[1] 000\n[2] 100\n"));
        assert!(prompt.contains("Current state: \n[1] 100\n[2] 110\n"));
        assert!(prompt.contains("exactly 2 LABEL lines"));
    }

    #[test]
    fn derived_examples_follow_rules() {
        let ex = derived_examples(&registry3(), &rules());
        assert_eq!(ex.len(), 3);
        assert_eq!(ex[0].label, "sleeping_start");
        assert_eq!(ex[1].label, "cooking_end");
        assert_eq!(ex[2].label, "None");
        assert_eq!(ex[2].current_state, "001");
    }

    #[test]
    fn examples_csv() {
        let csv = "previous_state,current_state,reasoning,label\n000,100,\"bed, occupied\",sleeping_start\n";
        let ex = read_examples(csv.as_bytes()).unwrap();
        assert_eq!(ex[0].reasoning, "bed, occupied");
    }
}
