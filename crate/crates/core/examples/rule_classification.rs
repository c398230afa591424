//! Labels state changes with the reference ambient rule set. Changes on
//! sensors without a rule come out as `None`.
//!
//! ```bash
//! cargo run --example rule_classification
//! ```

use chrono::NaiveDate;
use iotlog_forge::abstraction::{classify_batch, BatchOptions, RuleBackend};
use iotlog_forge::ingest::SensorReading;
use iotlog_forge::reference;
use iotlog_forge::state::{track_changes, StateSnapshot};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = reference::ambient_registry();
    let rules = reference::ambient_rules();
    let day = NaiveDate::from_ymd_opt(2020, 1, 8).unwrap();
    let script = [
        ("06:30:00", "bed_pir", false),
        ("06:31:00", "hall_pir", true),
        ("06:32:00", "toilet_pir", true),
        ("06:36:00", "toilet_pir", false),
        ("06:36:30", "hall_pir", false),
        ("06:40:00", "shower_pir", true),
        ("06:52:00", "shower_pir", false),
    ];
    let mut readings = vec![SensorReading {
        timestamp: day.and_hms_opt(0, 0, 0).unwrap(),
        sensor_id: "bed_pir".into(),
        value: true,
    }];
    for (clock, sensor, value) in script {
        readings.push(SensorReading {
            timestamp: day.and_time(clock.parse()?),
            sensor_id: sensor.into(),
            value,
        });
    }
    let initial = StateSnapshot::zeros(registry.len(), readings[0].timestamp);
    let changes = track_changes(&readings, &registry, &initial)?;

    let out = classify_batch(&changes, &RuleBackend::new(rules), &BatchOptions::default())?;
    for (c, v) in changes.iter().zip(&out.verdicts) {
        println!("{}  {:<16} {}", c.timestamp, v.label, v.reasoning);
    }
    Ok(())
}
