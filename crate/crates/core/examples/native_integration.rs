//! Pairs lifecycle labels from all three sources into one daily event log.
//! The night's sleep starts on one date and ends on the next.
//!
//! ```bash
//! cargo run --example native_integration
//! ```

use chrono::NaiveDateTime;
use iotlog_forge::abstraction::{ActivityLabel, LabeledEvent, Phase};
use iotlog_forge::integrate::{integrate_native, write_event_log, EventLogFormat};
use iotlog_forge::reference;
use iotlog_forge::Source;

fn event(ts: &str, source: Source, activity: &str, phase: Phase) -> LabeledEvent {
    LabeledEvent {
        timestamp: NaiveDateTime::parse_from_str(ts, "%Y-%m-%dT%H:%M:%S").unwrap(),
        source,
        label: ActivityLabel::new(activity, phase),
        backend: "example".into(),
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    use Phase::{End, Start};
    let events = vec![
        event("2020-01-08T12:00:05", Source::Ambient, "cooking", Start),
        event("2020-01-08T12:30:00", Source::Ambient, "cooking", End),
        event("2020-01-08T12:31:00", Source::Ambient, "cooking", End),
        event("2020-01-08T23:17:28", Source::Smartphone, "messaging", Start),
        event("2020-01-08T23:17:49", Source::Smartphone, "messaging", End),
        event("2020-01-08T23:40:00", Source::Wristband, "sleep", Start),
        event("2020-01-09T06:24:25", Source::Wristband, "sleep", End),
        event("2020-01-09T07:00:00", Source::Ambient, "toilet", Start),
    ];
    let (log, report) = integrate_native(&events, &reference::taxonomies())?;
    write_event_log(std::io::stdout(), &log, EventLogFormat::default())?;
    for (source, (starts, ends)) in report.counts() {
        if starts + ends > 0 {
            println!("{}: {starts} unmatched starts, {ends} unmatched ends", source.as_str());
        }
    }
    Ok(())
}
