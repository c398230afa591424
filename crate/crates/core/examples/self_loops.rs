//! Merges back-to-back intervals of the same activity when the gap between
//! them is at most the given number of seconds.
//!
//! ```bash
//! cargo run --example self_loops
//! ```

use chrono::{NaiveDate, NaiveTime};
use iotlog_forge::eval::remove_self_loops;
use iotlog_forge::integrate::{aggregate_self_loops, ActivityInterval, UnifiedEventLog};
use iotlog_forge::Source;

fn session(activity: &str, start: &str, end: &str) -> ActivityInterval {
    ActivityInterval {
        case_id: NaiveDate::from_ymd_opt(2020, 1, 8).unwrap(),
        source: Source::Smartphone,
        activity: activity.into(),
        start_time: NaiveTime::parse_from_str(start, "%H:%M:%S").unwrap(),
        end_time: Some(NaiveTime::parse_from_str(end, "%H:%M:%S").unwrap()),
        next_date: false,
    }
}

fn main() {
    let log = UnifiedEventLog::new(vec![
        session("messaging", "23:17:28", "23:17:49"),
        session("messaging", "23:17:52", "23:18:31"),
        session("messaging", "23:18:32", "23:20:28"),
        session("call", "23:20:32", "23:20:45"),
        session("messaging", "23:20:50", "23:21:30"),
    ]);
    for gap in [0, 2, 5] {
        let merged = aggregate_self_loops(&log, gap);
        println!("gap {gap}s: {} intervals", merged.len());
        for iv in merged.intervals() {
            println!("  {:<10} {} - {}", iv.activity, iv.start_time, iv.end_time.unwrap());
        }
    }
    let day = log.dates()[0];
    println!("trace without self-loops: {:?}", remove_self_loops(&log.trace(day)));
}
