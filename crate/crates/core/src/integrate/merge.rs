use chrono::{Duration, NaiveDateTime};

use super::{ActivityInterval, UnifiedEventLog};

pub fn merge_sources(
    ambient: Vec<ActivityInterval>,
    smartphone: Vec<ActivityInterval>,
    wristband: Vec<ActivityInterval>,
) -> UnifiedEventLog {
    let mut all = ambient;
    all.extend(smartphone);
    all.extend(wristband);
    UnifiedEventLog::new(all)
}

/// Merges runs of same-activity intervals within each (case, source) whose
/// gap to the running end is at most `max_gap_secs`. Intervals without an end
/// never merge.
pub fn aggregate_self_loops(log: &UnifiedEventLog, max_gap_secs: u32) -> UnifiedEventLog {
    let max_gap = Duration::seconds(max_gap_secs as i64);
    let intervals = log.intervals();
    let mut out: Vec<ActivityInterval> = Vec::with_capacity(intervals.len());
    // Index into `out` of the open run per (case, source), reset per case.
    let mut open: [Option<usize>; 3] = [None; 3];
    let mut case = None;
    for iv in intervals {
        if case != Some(iv.case_id) {
            case = Some(iv.case_id);
            open = [None; 3];
        }
        let slot = iv.source as usize;
        if let Some(idx) = open[slot] {
            let cur = &mut out[idx];
            if let (Some(cur_end), Some(next_end)) = (cur.end(), iv.end()) {
                if cur.activity == iv.activity && iv.start() - cur_end <= max_gap {
                    set_end(cur, cur_end.max(next_end));
                    continue;
                }
            }
        }
        open[slot] = Some(out.len());
        out.push(iv.clone());
    }
    UnifiedEventLog::new(out)
}

fn set_end(iv: &mut ActivityInterval, end: NaiveDateTime) {
    iv.next_date = end.date() > iv.case_id;
    iv.end_time = Some(end.time());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{parse_clock, parse_date, Source};
    use proptest::prelude::*;

    fn iv(source: Source, activity: &str, start: &str, end: &str) -> ActivityInterval {
        ActivityInterval {
            case_id: parse_date("1/8/2020").unwrap(),
            source,
            activity: activity.into(),
            start_time: parse_clock(start).unwrap(),
            end_time: parse_clock(end),
            next_date: false,
        }
    }

    #[test]
    fn messaging_sessions_merge() {
        let log = UnifiedEventLog::new(vec![
            iv(Source::Smartphone, "messaging", "23:17:28", "23:18:06"),
            iv(Source::Smartphone, "messaging", "23:18:09", "23:19:22"),
            iv(Source::Smartphone, "messaging", "23:19:23", "23:20:28"),
            iv(Source::Ambient, "toilet", "23:18:00", "23:19:00"),
        ]);
        let merged = aggregate_self_loops(&log, 5);
        let msgs: Vec<_> = merged
            .intervals()
            .iter()
            .filter(|i| i.activity == "messaging")
            .collect();
        assert_eq!(msgs.len(), 1);
        assert_eq!(msgs[0].start_time, parse_clock("23:17:28").unwrap());
        assert_eq!(msgs[0].end_time, parse_clock("23:20:28"));
        assert_eq!(merged.len(), 2);
    }

    #[test]
    fn zero_gap_threshold() {
        let log = UnifiedEventLog::new(vec![
            iv(Source::Smartphone, "call", "10:00:00", "10:01:00"),
            iv(Source::Smartphone, "call", "10:01:01", "10:02:00"),
        ]);
        assert_eq!(aggregate_self_loops(&log, 0).len(), 2);
        assert_eq!(aggregate_self_loops(&log, 1).len(), 1);
    }

    #[test]
    fn empty_source_is_identity_for_merge() {
        let a = vec![iv(Source::Ambient, "toilet", "01:00:00", "01:02:00")];
        let w = vec![iv(Source::Wristband, "sleep", "00:00:00", "07:00:00")];
        let merged = merge_sources(a.clone(), Vec::new(), w.clone());
        assert_eq!(merged, merge_sources(w, Vec::new(), a));
        assert_eq!(merged.intervals()[0].source, Source::Wristband);
    }

    fn arb_log() -> impl Strategy<Value = UnifiedEventLog> {
        prop::collection::vec((0usize..3, 0usize..3, 0u32..86_000, 0u32..4_000, any::<bool>()), 0..40).prop_map(|raw| {
            let names = ["a", "b", "c"];
            let sources = Source::ALL;
            UnifiedEventLog::new(
                raw.into_iter()
                    .map(|(s, a, start, len, open)| {
                        let st = chrono::NaiveTime::from_num_seconds_from_midnight_opt(start, 0).unwrap();
                        let end_abs = start + len;
                        ActivityInterval {
                            case_id: parse_date("1/8/2020").unwrap(),
                            source: sources[s],
                            activity: names[a].into(),
                            start_time: st,
                            end_time: (!open).then(|| {
                                chrono::NaiveTime::from_num_seconds_from_midnight_opt(end_abs % 86_400, 0).unwrap()
                            }),
                            next_date: !open && end_abs >= 86_400,
                        }
                    })
                    .collect(),
            )
        })
    }

    proptest! {
        #[test]
        fn idempotent_and_count_monotone(log in arb_log(), gap in 0u32..600) {
            let once = aggregate_self_loops(&log, gap);
            prop_assert!(once.len() <= log.len());
            prop_assert_eq!(aggregate_self_loops(&once, gap), once);
        }

        #[test]
        fn merge_is_permutation_invariant(log in arb_log(), seed in any::<u64>()) {
            let mut shuffled = log.intervals().to_vec();
            let n = shuffled.len();
            if n > 1 {
                for i in 0..n {
                    let j = (seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64) % n as u64) as usize;
                    shuffled.swap(i, j);
                }
            }
            let (a, rest): (Vec<_>, Vec<_>) = shuffled.into_iter().partition(|i| i.source == Source::Ambient);
            let (s, w): (Vec<_>, Vec<_>) = rest.into_iter().partition(|i| i.source == Source::Smartphone);
            prop_assert_eq!(merge_sources(w, a, s), log);
        }
    }
}
