use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::Serialize;

use crate::integrate::{ActivityInterval, UnifiedEventLog};
use crate::source::Source;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MatchCounts {
    /// Same case, source and activity with start within tolerance.
    pub correct_events: usize,
    /// As above with the end also within tolerance.
    pub matched_start_end: usize,
}

type Group<'a> = BTreeMap<(NaiveDate, Source, &'a str), Vec<&'a ActivityInterval>>;

fn group(log: &UnifiedEventLog) -> Group<'_> {
    let mut g: Group<'_> = BTreeMap::new();
    for iv in log.intervals() {
        g.entry((iv.case_id, iv.source, iv.activity.as_str()))
            .or_default()
            .push(iv);
    }
    g
}

/// One-to-one matching of generated against truth intervals. Counting by
/// start is a time-ordered sweep; counting by start and end uses a maximum
/// bipartite matching since end windows can cross.
pub fn match_events(generated: &UnifiedEventLog, truth: &UnifiedEventLog, tolerance_secs: u32) -> MatchCounts {
    let tol = tolerance_secs as i64;
    let gen = group(generated);
    let tru = group(truth);
    let mut counts = MatchCounts::default();
    for (key, g) in &gen {
        let Some(t) = tru.get(key) else { continue };
        counts.correct_events += sweep(g, t, tol);
        counts.matched_start_end += max_matching(g, t, |a, b| {
            (a.start_secs() - b.start_secs()).abs() <= tol
                && matches!((a.end_secs(), b.end_secs()), (Some(x), Some(y)) if (x - y).abs() <= tol)
        });
    }
    counts
}

fn sweep(gen: &[&ActivityInterval], truth: &[&ActivityInterval], tol: i64) -> usize {
    let mut g: Vec<i64> = gen.iter().map(|i| i.start_secs()).collect();
    let mut t: Vec<i64> = truth.iter().map(|i| i.start_secs()).collect();
    g.sort_unstable();
    t.sort_unstable();
    let mut j = 0;
    let mut hits = 0;
    for x in g {
        while j < t.len() && t[j] < x - tol {
            j += 1;
        }
        if j < t.len() && t[j] <= x + tol {
            hits += 1;
            j += 1;
        }
    }
    hits
}

fn max_matching<F>(gen: &[&ActivityInterval], truth: &[&ActivityInterval], compatible: F) -> usize
where
    F: Fn(&ActivityInterval, &ActivityInterval) -> bool,
{
    let adj: Vec<Vec<usize>> = gen
        .iter()
        .map(|g| (0..truth.len()).filter(|&j| compatible(g, truth[j])).collect())
        .collect();
    let mut owner: Vec<Option<usize>> = vec![None; truth.len()];
    let mut total = 0;
    for u in 0..gen.len() {
        let mut seen = vec![false; truth.len()];
        if augment(u, &adj, &mut owner, &mut seen) {
            total += 1;
        }
    }
    total
}

fn augment(u: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &v in &adj[u] {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        if owner[v].is_none_or(|w| augment(w, adj, owner, seen)) {
            owner[v] = Some(u);
            return true;
        }
    }
    false
}
