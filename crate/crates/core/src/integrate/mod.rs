//! From labeled lifecycle events to a unified, per-day event log.
//!
//! The native path pairs start/end labels per source, assigns each activity
//! instance to the date it started on (the case), trims cross-midnight
//! instances, and merges the sources. [`llm`] drives the same step through a
//! completion back-end, one prompt per day.

mod io;
pub mod llm;
mod merge;
mod pairing;
mod trim;

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

pub use io::{format_row, parse_row, read_event_log, write_event_log, EventLogFormat, LogIoError, EVENT_LOG_HEADER};
pub use merge::{aggregate_self_loops, merge_sources};
pub use pairing::{pair_lifecycle_events, AbsoluteInterval, PairingReport, UnmatchedEvent};
pub use trim::{assign_and_trim, HorizonError, HORIZON_HOURS};

use crate::abstraction::labels::LabeledEvent;
use crate::abstraction::taxonomy::LabelTaxonomy;
use crate::source::Source;

/// One activity instance within a daily case.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivityInterval {
    pub case_id: NaiveDate,
    pub source: Source,
    pub activity: String,
    pub start_time: NaiveTime,
    pub end_time: Option<NaiveTime>,
    /// The instance ends on the day after `case_id`.
    pub next_date: bool,
}

impl ActivityInterval {
    pub fn start(&self) -> NaiveDateTime {
        self.case_id.and_time(self.start_time)
    }

    pub fn end(&self) -> Option<NaiveDateTime> {
        let end = self.case_id.and_time(self.end_time?);
        Some(if self.next_date { end + Duration::days(1) } else { end })
    }

    /// Seconds since midnight of the case date.
    pub fn start_secs(&self) -> i64 {
        self.start_time.num_seconds_from_midnight() as i64
    }

    pub fn end_secs(&self) -> Option<i64> {
        self.end_time
            .map(|t| t.num_seconds_from_midnight() as i64 + if self.next_date { 86_400 } else { 0 })
    }

    fn sort_key(&self) -> (NaiveDate, NaiveTime, Source, &str, bool, Option<NaiveTime>) {
        (
            self.case_id,
            self.start_time,
            self.source,
            self.activity.as_str(),
            self.next_date,
            self.end_time,
        )
    }
}

/// Intervals sorted by case, start time, source, activity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnifiedEventLog {
    intervals: Vec<ActivityInterval>,
}

impl UnifiedEventLog {
    pub fn new(mut intervals: Vec<ActivityInterval>) -> Self {
        intervals.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        UnifiedEventLog { intervals }
    }

    pub fn intervals(&self) -> &[ActivityInterval] {
        &self.intervals
    }

    pub fn into_intervals(self) -> Vec<ActivityInterval> {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Distinct case dates in order.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let mut d: Vec<NaiveDate> = self.intervals.iter().map(|i| i.case_id).collect();
        d.dedup();
        d
    }

    pub fn case(&self, date: NaiveDate) -> &[ActivityInterval] {
        let lo = self.intervals.partition_point(|i| i.case_id < date);
        let hi = self.intervals.partition_point(|i| i.case_id <= date);
        &self.intervals[lo..hi]
    }

    /// Activity names of one case in log order.
    pub fn trace(&self, date: NaiveDate) -> Vec<&str> {
        self.case(date).iter().map(|i| i.activity.as_str()).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IntegrateError {
    #[error(transparent)]
    Horizon(#[from] HorizonError),
    #[error("no taxonomy configured for {0}")]
    MissingTaxonomy(Source),
}

/// Deterministic integration of labeled events from any mix of sources.
pub fn integrate_native(
    events: &[LabeledEvent],
    taxonomies: &[LabelTaxonomy],
) -> Result<(UnifiedEventLog, PairingReport), IntegrateError> {
    let mut report = PairingReport::default();
    let mut per_source: [Vec<ActivityInterval>; 3] = Default::default();
    for (slot, source) in Source::ALL.into_iter().enumerate() {
        let stream: Vec<(NaiveDateTime, crate::abstraction::taxonomy::ActivityLabel)> = events
            .iter()
            .filter(|e| e.source == source)
            .map(|e| (e.timestamp, e.label.clone()))
            .collect();
        if stream.is_empty() {
            continue;
        }
        let taxonomy = taxonomies
            .iter()
            .find(|t| t.source() == source)
            .ok_or(IntegrateError::MissingTaxonomy(source))?;
        let (intervals, r) = pair_lifecycle_events(&stream, taxonomy);
        report.absorb(r);
        per_source[slot] = intervals.iter().map(assign_and_trim).collect::<Result<_, _>>()?;
    }
    let [a, s, w] = per_source;
    Ok((merge_sources(a, s, w), report))
}
