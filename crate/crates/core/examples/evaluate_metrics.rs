//! Scores a generated log against ground truth: label accuracy per label,
//! per-date edit-distance alignment, and time-tolerant event matching.
//!
//! ```bash
//! cargo run --example evaluate_metrics
//! ```

use chrono::{NaiveDate, NaiveTime};
use iotlog_forge::abstraction::{ActivityLabel, Phase};
use iotlog_forge::eval::{
    check_floors, label_accuracy, match_events, per_date_alignment, render_summary, MetricFloors,
};
use iotlog_forge::integrate::{ActivityInterval, UnifiedEventLog};
use iotlog_forge::reference;
use iotlog_forge::Source;

fn iv(day: u32, activity: &str, start: &str, end: &str) -> ActivityInterval {
    let t = |s: &str| NaiveTime::parse_from_str(s, "%H:%M").unwrap();
    ActivityInterval {
        case_id: NaiveDate::from_ymd_opt(2020, 1, day).unwrap(),
        source: Source::Ambient,
        activity: activity.into(),
        start_time: t(start),
        end_time: Some(t(end)),
        next_date: false,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = reference::taxonomy(Source::Ambient);
    let cook = |p| ActivityLabel::new("cooking", p);
    let truth = vec![
        cook(Phase::Start),
        cook(Phase::End),
        ActivityLabel::None,
        cook(Phase::Start),
    ];
    let predicted = vec![
        cook(Phase::Start),
        cook(Phase::End),
        cook(Phase::End),
        cook(Phase::Start),
    ];
    let accuracy = label_accuracy(&predicted, &truth, &taxonomy, 1)?;

    let truth_log = UnifiedEventLog::new(vec![
        iv(8, "toilet", "07:00", "07:05"),
        iv(8, "cooking", "12:00", "12:30"),
        iv(9, "toilet", "07:00", "07:05"),
        iv(9, "eating", "12:40", "13:00"),
    ]);
    let generated = UnifiedEventLog::new(vec![
        iv(8, "toilet", "07:00", "07:05"),
        iv(8, "cooking", "12:00", "12:30"),
        iv(9, "toilet", "07:01", "07:05"),
        iv(9, "resting", "12:40", "13:00"),
    ]);
    let alignment = per_date_alignment(&generated, &truth_log, false, 60);
    let matched = match_events(&generated, &truth_log, 60);
    println!("per date: {:?}", alignment.per_date);
    println!("matched: {matched:?}");

    let floors = MetricFloors::default();
    let (accuracy, alignment) = ([accuracy], [alignment]);
    let violations = check_floors(&floors, &accuracy, &alignment);
    print!("{}", render_summary(&accuracy, &alignment, &violations));
    Ok(())
}
