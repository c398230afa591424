use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{AccuracyReport, AlignmentReport};
use crate::source::{format_date, DateStyle};

/// Lower bounds a run must meet. Unset floors are not checked.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricFloors {
    pub min_accuracy: Option<f64>,
    pub min_mean_eda: Option<f64>,
    pub min_aligned_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloorViolation {
    pub metric: &'static str,
    pub scope: String,
    pub value: f64,
    pub floor: f64,
}

fn variant(r: &AlignmentReport) -> &'static str {
    if r.self_loops_removed {
        "without_self_loops"
    } else {
        "all_events"
    }
}

/// Sources with no scored change are not held to the accuracy floor.
pub fn check_floors(
    floors: &MetricFloors,
    accuracy: &[AccuracyReport],
    alignment: &[AlignmentReport],
) -> Vec<FloorViolation> {
    let mut out = Vec::new();
    if let Some(floor) = floors.min_accuracy {
        for r in accuracy.iter().filter(|r| r.scored > 0 && r.overall_accuracy < floor) {
            out.push(FloorViolation {
                metric: "accuracy",
                scope: r.source.to_string(),
                value: r.overall_accuracy,
                floor,
            });
        }
    }
    for r in alignment {
        if let Some(floor) = floors.min_mean_eda.filter(|f| r.mean_eda < *f) {
            out.push(FloorViolation {
                metric: "mean_eda",
                scope: variant(r).into(),
                value: r.mean_eda,
                floor,
            });
        }
        if let Some(floor) = floors.min_aligned_pct.filter(|f| r.perfectly_aligned_dates_pct < *f) {
            out.push(FloorViolation {
                metric: "aligned_pct",
                scope: variant(r).into(),
                value: r.perfectly_aligned_dates_pct,
                floor,
            });
        }
    }
    out
}

/// `source,label,support,correct,accuracy,included`
pub fn write_accuracy_csv<W: Write>(writer: W, reports: &[AccuracyReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "label", "support", "correct", "accuracy", "included"])?;
    for r in reports {
        let rows = r
            .per_label
            .iter()
            .map(|s| (s, true))
            .chain(r.excluded.iter().map(|s| (s, false)));
        for (s, included) in rows {
            w.write_record([
                r.source.to_string(),
                s.label.clone(),
                s.support.to_string(),
                s.correct.to_string(),
                format!("{:.4}", s.accuracy),
                included.to_string(),
            ])?;
        }
        w.write_record([
            r.source.to_string(),
            "overall".into(),
            r.scored.to_string(),
            r.correct.to_string(),
            format!("{:.4}", r.overall_accuracy),
            "true".into(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `variant,date,eda,aligned`
pub fn write_alignment_csv<W: Write>(writer: W, reports: &[AlignmentReport]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["variant", "date", "eda", "aligned"])?;
    for r in reports {
        for (d, eda) in &r.per_date {
            w.write_record([
                variant(r).to_string(),
                format_date(*d, DateStyle::Iso),
                format!("{eda:.4}"),
                r.aligned_dates.contains(d).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn render_summary(
    accuracy: &[AccuracyReport],
    alignment: &[AlignmentReport],
    violations: &[FloorViolation],
) -> String {
    let mut s = String::new();
    if !accuracy.is_empty() {
        s.push_str("Label accuracy\n");
        for r in accuracy {
            let value = if r.scored == 0 {
                "n/a   ".to_string()
            } else {
                format!("{:.4}", r.overall_accuracy)
            };
            let _ = writeln!(
                s,
                "  {:<11} {value}  ({} of {} scored changes, {} labels with support >= {})",
                r.source.as_str(),
                r.correct,
                r.scored,
                r.per_label.len(),
                r.min_support
            );
        }
    }
    for r in alignment {
        let c = r.counts;
        let _ = writeln!(
            s,
            "Alignment ({})\n  mean EDA {:.4}, perfectly aligned dates {:.1}% of {}\n  events: generated {}, truth {}, correct {}, matching start and end {}",
            variant(r).replace('_', " "),
            r.mean_eda,
            r.perfectly_aligned_dates_pct,
            r.per_date.len(),
            c.generated_events,
            c.truth_events,
            c.correct_events,
            c.matched_start_end
        );
        if !r.extra_dates.is_empty() {
            let _ = writeln!(
                s,
                "  warning: {} generated dates have no truth counterpart",
                r.extra_dates.len()
            );
        }
    }
    for v in violations {
        let _ = writeln!(
            s,
            "FLOOR VIOLATED: {} for {} is {:.4}, floor {:.4}",
            v.metric, v.scope, v.value, v.floor
        );
    }
    s
}
