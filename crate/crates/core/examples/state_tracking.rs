//! Folds sensor readings into binary state vectors and lists the changes.
//! Two sensors flipping at the same instant yield a single change.
//!
//! ```bash
//! cargo run --example state_tracking
//! ```

use iotlog_forge::ingest::{parse_ambient_log, Strictness};
use iotlog_forge::reference;
use iotlog_forge::state::{encode_state, track_changes, StateSnapshot};

const READINGS: &str = "timestamp,sensor_id,value
2020-01-08T12:00:00,kitchen_pir,1
2020-01-08T12:00:05,stove_gas,1
2020-01-08T12:30:00,stove_gas,0
2020-01-08T12:30:00,kitchen_pir,0
2020-01-08T12:40:00,dining_pir,1
2020-01-08T12:40:00,dining_pir,1
2020-01-08T13:00:00,dining_pir,0
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = reference::ambient_registry();
    let readings = parse_ambient_log(READINGS.as_bytes(), &registry, Strictness::FailFast)?.records;
    let initial = StateSnapshot::zeros(registry.len(), readings[0].timestamp);
    let changes = track_changes(&readings, &registry, &initial)?;

    println!("{} readings, {} changes", readings.len(), changes.len());
    for c in &changes {
        let names: Vec<&str> = c
            .changed_positions
            .iter()
            .filter_map(|&p| registry.at(p).map(|s| s.id.as_str()))
            .collect();
        println!(
            "{}  {} -> {}  flipped {}",
            c.timestamp,
            encode_state(&c.previous),
            encode_state(&c.current),
            names.join("+")
        );
    }
    Ok(())
}
