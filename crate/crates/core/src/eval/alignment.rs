use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;

use super::matching::match_events;
use crate::integrate::UnifiedEventLog;

/// Collapses runs of equal adjacent items.
pub fn remove_self_loops<T: PartialEq + Clone>(trace: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(trace.len());
    for x in trace {
        if out.last() != Some(x) {
            out.push(x.clone());
        }
    }
    out
}

/// Unit-cost insert/delete/substitute distance, two rolling rows.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - levenshtein / max(|a|, |b|)`; two empty traces are identical.
pub fn edit_distance_alignment<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Interval counts; the same whether or not self-loops are removed from the
/// traces, since matching works on intervals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EventCounts {
    pub generated_events: usize,
    pub truth_events: usize,
    pub correct_events: usize,
    pub matched_start_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentReport {
    pub self_loops_removed: bool,
    /// Over dates present in the truth.
    pub mean_eda: f64,
    pub perfectly_aligned_dates_pct: f64,
    pub per_date: BTreeMap<NaiveDate, f64>,
    pub aligned_dates: Vec<NaiveDate>,
    /// Generated dates with no truth counterpart; not scored.
    pub extra_dates: Vec<NaiveDate>,
    pub counts: EventCounts,
}

/// Compares each truth date's activity sequence with the generated one. A
/// date missing from the generated log scores 0 unless its truth trace is
/// empty as well.
pub fn per_date_alignment(
    generated: &UnifiedEventLog,
    truth: &UnifiedEventLog,
    remove_loops: bool,
    tolerance_secs: u32,
) -> AlignmentReport {
    let trace = |log: &UnifiedEventLog, d: NaiveDate| -> Vec<String> {
        let t: Vec<String> = log.trace(d).into_iter().map(str::to_string).collect();
        if remove_loops {
            remove_self_loops(&t)
        } else {
            t
        }
    };
    let truth_dates = truth.dates();
    let mut per_date = BTreeMap::new();
    let mut aligned_dates = Vec::new();
    let mut counts = EventCounts::default();
    for &d in &truth_dates {
        let (g, t) = (trace(generated, d), trace(truth, d));
        per_date.insert(d, edit_distance_alignment(&g, &t));
        if g == t {
            aligned_dates.push(d);
        }
    }
    counts.generated_events = generated.len();
    counts.truth_events = truth.len();
    let m = match_events(generated, truth, tolerance_secs);
    counts.correct_events = m.correct_events;
    counts.matched_start_end = m.matched_start_end;
    let extra_dates = generated
        .dates()
        .into_iter()
        .filter(|d| truth_dates.binary_search(d).is_err())
        .collect();
    let (mean_eda, pct) = if truth_dates.is_empty() {
        let same = generated.is_empty();
        (f64::from(u8::from(same)), if same { 100.0 } else { 0.0 })
    } else {
        let n = truth_dates.len() as f64;
        (
            per_date.values().sum::<f64>() / n,
            100.0 * aligned_dates.len() as f64 / n,
        )
    };
    AlignmentReport {
        self_loops_removed: remove_loops,
        mean_eda,
        perfectly_aligned_dates_pct: pct,
        per_date,
        aligned_dates,
        extra_dates,
        counts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loop_removal() {
        assert_eq!(remove_self_loops(&["A", "A", "B", "A"]), vec!["A", "B", "A"]);
        assert!(remove_self_loops::<&str>(&[]).is_empty());
    }

    #[test]
    fn eda_extremes() {
        assert_eq!(edit_distance_alignment(&["A", "B"], &["A", "B"]), 1.0);
        assert_eq!(edit_distance_alignment(&["A", "B", "C"], &["X", "Y", "Z"]), 0.0);
        assert_eq!(edit_distance_alignment::<u8>(&[], &[]), 1.0);
        assert_eq!(edit_distance_alignment(&["A"], &[]), 0.0);
    }

    fn rle_heads(v: &[u8]) -> Vec<u8> {
        let mut heads = Vec::new();
        let mut i = 0;
        while i < v.len() {
            heads.push(v[i]);
            let mut j = i;
            while j < v.len() && v[j] == v[i] {
                j += 1;
            }
            i = j;
        }
        heads
    }

    proptest! {
        #[test]
        fn loops_match_run_length_heads(v in prop::collection::vec(0u8..4, 0..30)) {
            let once = remove_self_loops(&v);
            prop_assert_eq!(&once, &rle_heads(&v));
            prop_assert_eq!(remove_self_loops(&once), once);
        }

        #[test]
        fn eda_symmetric_and_relabel_invariant(
            a in prop::collection::vec(0u8..6, 0..12),
            b in prop::collection::vec(0u8..6, 0..12),
            shift in 1u8..50,
        ) {
            let ab = edit_distance_alignment(&a, &b);
            prop_assert_eq!(ab, edit_distance_alignment(&b, &a));
            prop_assert_eq!(ab == 1.0, a == b);
            let ra: Vec<u8> = a.iter().map(|x| x + shift).collect();
            let rb: Vec<u8> = b.iter().map(|x| x + shift).collect();
            prop_assert_eq!(ab, edit_distance_alignment(&ra, &rb));
        }
    }
}
