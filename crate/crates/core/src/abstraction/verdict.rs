use serde::{Deserialize, Serialize};

use super::taxonomy::{ActivityLabel, LabelTaxonomy};

/// One classification outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub label: ActivityLabel,
    pub reasoning: String,
    pub raw_response: String,
    pub backend_id: String,
    /// Set when the label is a fallback rather than the back-end's answer.
    pub diagnostic: Option<String>,
}

impl ClassifierVerdict {
    pub fn fallback(backend_id: &str, raw: String, diagnostic: String) -> Self {
        ClassifierVerdict {
            label: ActivityLabel::None,
            reasoning: String::new(),
            raw_response: raw,
            backend_id: backend_id.to_string(),
            diagnostic: Some(diagnostic),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerdictParseError {
    #[error("response has no LABEL line")]
    NoLabelLine { raw: String },
    #[error("label {label:?} is outside the taxonomy")]
    OutOfTaxonomy { label: String, raw: String },
    #[error("batch response has {found} LABEL lines for {expected} changes")]
    CountMismatch { expected: usize, found: usize, raw: String },
}

impl VerdictParseError {
    pub fn raw(&self) -> &str {
        match self {
            VerdictParseError::NoLabelLine { raw }
            | VerdictParseError::OutOfTaxonomy { raw, .. }
            | VerdictParseError::CountMismatch { raw, .. } => raw,
        }
    }
}

/// The label text of a `LABEL: <label>` line, tolerating markdown emphasis,
/// quotes and a trailing period.
fn label_value(line: &str) -> Option<&str> {
    let t = line.trim().trim_matches(|c| c == '*' || c == '`').trim();
    if t.len() < 6 || !t.is_char_boundary(6) || !t[..6].eq_ignore_ascii_case("label:") {
        return None;
    }
    Some(
        t[6..]
            .trim_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '`' | '"' | '\''))
            .trim_end_matches('.')
            .trim_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '`' | '"' | '\'')),
    )
}

/// The last `LABEL:` line wins; everything before it is the reasoning.
pub fn parse_verdict(raw: &str, taxonomy: &LabelTaxonomy) -> Result<ClassifierVerdict, VerdictParseError> {
    let lines: Vec<&str> = raw.lines().collect();
    let (idx, value) = lines
        .iter()
        .enumerate()
        .rev()
        .find_map(|(i, l)| label_value(l).map(|v| (i, v)))
        .ok_or_else(|| VerdictParseError::NoLabelLine { raw: raw.to_string() })?;
    let label = taxonomy
        .lookup(value)
        .cloned()
        .ok_or_else(|| VerdictParseError::OutOfTaxonomy {
            label: value.to_string(),
            raw: raw.to_string(),
        })?;
    Ok(ClassifierVerdict {
        label,
        reasoning: lines[..idx].join("\n").trim().to_string(),
        raw_response: raw.to_string(),
        backend_id: String::new(),
        diagnostic: None,
    })
}

/// One `LABEL:` line per change, in order. Reasoning for item `k` is the text
/// between label lines `k-1` and `k`.
pub fn parse_batch_verdicts(
    raw: &str,
    expected: usize,
    taxonomy: &LabelTaxonomy,
) -> Result<Vec<ClassifierVerdict>, VerdictParseError> {
    let lines: Vec<&str> = raw.lines().collect();
    let marks: Vec<(usize, &str)> = lines
        .iter()
        .enumerate()
        .filter_map(|(i, l)| label_value(l).map(|v| (i, v)))
        .collect();
    if marks.len() != expected {
        return Err(VerdictParseError::CountMismatch {
            expected,
            found: marks.len(),
            raw: raw.to_string(),
        });
    }
    let mut out = Vec::with_capacity(expected);
    let mut from = 0;
    for (idx, value) in marks {
        let label = taxonomy
            .lookup(value)
            .cloned()
            .ok_or_else(|| VerdictParseError::OutOfTaxonomy {
                label: value.to_string(),
                raw: raw.to_string(),
            })?;
        out.push(ClassifierVerdict {
            label,
            reasoning: lines[from..idx].join("\n").trim().to_string(),
            raw_response: raw.to_string(),
            backend_id: String::new(),
            diagnostic: None,
        });
        from = idx + 1;
    }
    Ok(out)
}
