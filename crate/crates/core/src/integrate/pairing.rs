use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::abstraction::taxonomy::{ActivityLabel, LabelTaxonomy, Phase};
use crate::source::Source;

/// A paired activity instance with absolute times, before case assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbsoluteInterval {
    pub source: Source,
    pub activity: String,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    /// Labeled events absorbed: the start, any continues, the end.
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedEvent {
    pub source: Source,
    pub label: String,
    pub timestamp: NaiveDateTime,
}

/// Everything pairing could not turn into an interval.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingReport {
    pub unmatched_starts: Vec<UnmatchedEvent>,
    pub unmatched_ends: Vec<UnmatchedEvent>,
    /// `continue` labels with no open instance.
    pub orphan_continues: Vec<UnmatchedEvent>,
    /// Labels outside the taxonomy.
    pub foreign: Vec<UnmatchedEvent>,
    pub skipped_none: usize,
}

impl PairingReport {
    pub fn absorb(&mut self, other: PairingReport) {
        self.unmatched_starts.extend(other.unmatched_starts);
        self.unmatched_ends.extend(other.unmatched_ends);
        self.orphan_continues.extend(other.orphan_continues);
        self.foreign.extend(other.foreign);
        self.skipped_none += other.skipped_none;
    }

    /// Events not absorbed by any interval.
    pub fn leftover(&self) -> usize {
        self.unmatched_starts.len()
            + self.unmatched_ends.len()
            + self.orphan_continues.len()
            + self.foreign.len()
            + self.skipped_none
    }

    /// `(unmatched starts, unmatched ends)` per source.
    pub fn counts(&self) -> BTreeMap<Source, (usize, usize)> {
        let mut out = BTreeMap::new();
        for e in &self.unmatched_starts {
            out.entry(e.source).or_insert((0, 0)).0 += 1;
        }
        for e in &self.unmatched_ends {
            out.entry(e.source).or_insert((0, 0)).1 += 1;
        }
        out
    }

    pub fn is_clean(&self) -> bool {
        self.unmatched_starts.is_empty()
            && self.unmatched_ends.is_empty()
            && self.orphan_continues.is_empty()
            && self.foreign.is_empty()
    }
}

/// Matches each start with the next end of the same activity. A start while
/// one is already open is surplus and goes to the report; `continue` labels
/// join the open instance.
pub fn pair_lifecycle_events(
    labeled: &[(NaiveDateTime, ActivityLabel)],
    taxonomy: &LabelTaxonomy,
) -> (Vec<AbsoluteInterval>, PairingReport) {
    let source = taxonomy.source();
    let mut ordered: Vec<&(NaiveDateTime, ActivityLabel)> = labeled.iter().collect();
    ordered.sort_by_key(|(t, _)| *t);

    let mut report = PairingReport::default();
    let mut open: HashMap<&str, (NaiveDateTime, usize)> = HashMap::new();
    let mut intervals = Vec::new();
    let unmatched = |label: &ActivityLabel, timestamp: NaiveDateTime| UnmatchedEvent {
        source,
        label: label.to_string(),
        timestamp,
    };

    for (ts, label) in ordered {
        let ActivityLabel::Activity { name, phase } = label else {
            report.skipped_none += 1;
            continue;
        };
        if !taxonomy.contains(label) {
            report.foreign.push(unmatched(label, *ts));
            continue;
        }
        match phase {
            Phase::Start => {
                if open.contains_key(name.as_str()) {
                    report.unmatched_starts.push(unmatched(label, *ts));
                } else {
                    open.insert(name, (*ts, 1));
                }
            }
            Phase::Continue => match open.get_mut(name.as_str()) {
                Some((_, n)) => *n += 1,
                None => report.orphan_continues.push(unmatched(label, *ts)),
            },
            Phase::End => match open.remove(name.as_str()) {
                Some((start, n)) => intervals.push(AbsoluteInterval {
                    source,
                    activity: name.clone(),
                    start,
                    end: *ts,
                    events: n + 1,
                }),
                None => report.unmatched_ends.push(unmatched(label, *ts)),
            },
        }
    }
    let mut dangling: Vec<(&str, NaiveDateTime)> = open.into_iter().map(|(name, (t, _))| (name, t)).collect();
    dangling.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
    for (name, t) in dangling {
        report
            .unmatched_starts
            .push(unmatched(&ActivityLabel::new(name, Phase::Start), t));
    }
    intervals.sort_by(|a, b| a.start.cmp(&b.start).then_with(|| a.activity.cmp(&b.activity)));
    (intervals, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::parse_timestamp;
    use proptest::prelude::*;

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn tax() -> LabelTaxonomy {
        LabelTaxonomy::new(
            Source::Ambient,
            vec!["sleeping".into(), "cooking".into(), "toilet".into()],
            vec![Phase::Start, Phase::Continue, Phase::End],
            true,
        )
        .unwrap()
    }

    fn l(name: &str, phase: Phase) -> ActivityLabel {
        ActivityLabel::new(name, phase)
    }

    #[test]
    fn cross_midnight_pair() {
        let (iv, rep) = pair_lifecycle_events(
            &[
                (ts("2022-11-23T22:00:00"), l("sleeping", Phase::Start)),
                (ts("2022-11-24T07:00:00"), l("sleeping", Phase::End)),
            ],
            &tax(),
        );
        assert!(rep.is_clean());
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].start, ts("2022-11-23T22:00:00"));
        assert_eq!(iv[0].end, ts("2022-11-24T07:00:00"));
    }

    #[test]
    fn surplus_start_is_reported() {
        let (iv, rep) = pair_lifecycle_events(
            &[
                (ts("2020-01-08T12:00:00"), l("cooking", Phase::Start)),
                (ts("2020-01-08T12:01:00"), l("cooking", Phase::Start)),
                (ts("2020-01-08T12:30:00"), l("cooking", Phase::End)),
            ],
            &tax(),
        );
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].start, ts("2020-01-08T12:00:00"));
        assert_eq!(rep.unmatched_starts.len(), 1);
        assert_eq!(rep.unmatched_starts[0].timestamp, ts("2020-01-08T12:01:00"));
        assert_eq!(rep.counts()[&Source::Ambient], (1, 0));
    }

    #[test]
    fn continues_extend_and_none_is_skipped() {
        let input = [
            (ts("2020-01-08T12:00:00"), l("cooking", Phase::Start)),
            (ts("2020-01-08T12:05:00"), ActivityLabel::None),
            (ts("2020-01-08T12:10:00"), l("cooking", Phase::Continue)),
            (ts("2020-01-08T12:20:00"), l("cooking", Phase::End)),
            (ts("2020-01-08T12:30:00"), l("toilet", Phase::Continue)),
            (ts("2020-01-08T12:40:00"), l("toilet", Phase::End)),
        ];
        let (iv, rep) = pair_lifecycle_events(&input, &tax());
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].events, 3);
        assert_eq!(rep.skipped_none, 1);
        assert_eq!(rep.orphan_continues.len(), 1);
        assert_eq!(rep.unmatched_ends.len(), 1);
        assert_eq!(iv.iter().map(|i| i.events).sum::<usize>() + rep.leftover(), input.len());
    }

    /// Independent matcher: per activity, a stack of open starts; an end pops
    /// the oldest open start only if the stack was empty before the newest
    /// start (first-open wins), mirroring the documented rule on clean input.
    fn stack_oracle(events: &[(i64, usize, bool)]) -> Vec<(usize, i64, i64)> {
        let mut stacks: Vec<Vec<i64>> = vec![Vec::new(); 3];
        let mut out = Vec::new();
        for &(t, act, is_start) in events {
            if is_start {
                stacks[act].push(t);
            } else if let Some(s) = stacks[act].pop() {
                out.push((act, s, t));
            }
        }
        out.sort();
        out
    }

    proptest! {
        #[test]
        fn well_formed_streams_match_stack_oracle(
            durations in prop::collection::vec((0usize..3, 1i64..500, 1i64..500), 1..30)
        ) {
            // Build non-overlapping instances per activity, then interleave by time.
            let names = ["sleeping", "cooking", "toilet"];
            let mut cursor = [0i64; 3];
            let mut events = Vec::new();
            for (act, gap, len) in durations {
                let s = cursor[act] + gap;
                let e = s + len;
                cursor[act] = e;
                events.push((s * 3 + act as i64, act, true));
                events.push((e * 3 + act as i64, act, false));
            }
            events.sort();
            let base = ts("2020-01-08T00:00:00");
            let labeled: Vec<_> = events.iter().map(|&(t, act, st)| (
                base + chrono::Duration::seconds(t),
                l(names[act], if st { Phase::Start } else { Phase::End }),
            )).collect();
            let (iv, rep) = pair_lifecycle_events(&labeled, &tax());
            prop_assert!(rep.is_clean());
            let mut got: Vec<(usize, i64, i64)> = iv.iter().map(|i| (
                names.iter().position(|n| *n == i.activity).unwrap(),
                (i.start - base).num_seconds(),
                (i.end - base).num_seconds(),
            )).collect();
            got.sort();
            prop_assert_eq!(got, stack_oracle(&events));
        }
    }
}
