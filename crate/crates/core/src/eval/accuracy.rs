use serde::Serialize;

use super::EvalError;
use crate::abstraction::taxonomy::{ActivityLabel, LabelTaxonomy};
use crate::source::Source;

/// Labels seen fewer times than this in the truth are left out of the table.
pub const DEFAULT_MIN_SUPPORT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelScore {
    pub label: String,
    /// Occurrences in the truth.
    pub support: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub source: Source,
    pub min_support: usize,
    /// Taxonomy order, supported labels only.
    pub per_label: Vec<LabelScore>,
    /// Labels below `min_support`, including those never seen.
    pub excluded: Vec<LabelScore>,
    pub scored: usize,
    pub correct: usize,
    /// Over scored positions; 0 when nothing is scored.
    pub overall_accuracy: f64,
}

/// Positional comparison of predictions with truth, per truth label.
pub fn label_accuracy(
    predicted: &[ActivityLabel],
    truth: &[ActivityLabel],
    taxonomy: &LabelTaxonomy,
    min_support: usize,
) -> Result<AccuracyReport, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    let labels = taxonomy.labels();
    let mut support = vec![0usize; labels.len()];
    let mut correct = vec![0usize; labels.len()];
    for (p, t) in predicted.iter().zip(truth) {
        let idx = labels
            .iter()
            .position(|l| l == t)
            .ok_or_else(|| EvalError::UnknownTruthLabel(t.to_string()))?;
        support[idx] += 1;
        if p == t {
            correct[idx] += 1;
        }
    }
    let mut per_label = Vec::new();
    let mut excluded = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        let score = LabelScore {
            label: l.to_string(),
            support: support[i],
            correct: correct[i],
            accuracy: if support[i] == 0 {
                0.0
            } else {
                correct[i] as f64 / support[i] as f64
            },
        };
        if support[i] >= min_support && support[i] > 0 {
            per_label.push(score);
        } else {
            excluded.push(score);
        }
    }
    let scored: usize = per_label.iter().map(|s| s.support).sum();
    let hits: usize = per_label.iter().map(|s| s.correct).sum();
    Ok(AccuracyReport {
        source: taxonomy.source(),
        min_support,
        per_label,
        excluded,
        scored,
        correct: hits,
        overall_accuracy: if scored == 0 { 0.0 } else { hits as f64 / scored as f64 },
    })
}
