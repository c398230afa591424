//! Parses the three input formats, once strictly and once permissively.
//!
//! ```bash
//! cargo run --example ingest_logs
//! ```

use iotlog_forge::ingest::{
    app_usage_readings, parse_ambient_log, parse_smartphone_log, parse_wristband_log, sleep_readings, SmartphoneSchema,
    Strictness,
};
use iotlog_forge::reference;

const AMBIENT: &str = "timestamp,sensor_id,value
2020-01-08T07:00:00,toilet_pir,1
2020-01-08T07:04:10,toilet_pir,0
2020-01-08T07:05:00,garage_pir,1
2020-01-08T07:06:00,stove_gas,2
2020-01-08T12:00:00,stove_gas,1
";

const SMARTPHONE: &str = "start,end,app_name
2020-01-08T23:17:28,2020-01-08T23:17:49,WhatsApp
2020-01-08T23:20:32,2020-01-08T23:20:45,Phone
2020-01-08T23:30:00,2020-01-08T23:45:00,SomeGame
";

const WRISTBAND: &str = "start,end,kind
2020-01-08T23:02:25,2020-01-09T06:24:25,night
2020-01-09T14:10:00,2020-01-09T14:40:00,day
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = reference::ambient_registry();

    match parse_ambient_log(AMBIENT.as_bytes(), &registry, Strictness::FailFast) {
        Ok(_) => println!("strict ambient parse unexpectedly succeeded"),
        Err(e) => println!("strict ambient parse: {e}"),
    }
    let ambient = parse_ambient_log(AMBIENT.as_bytes(), &registry, Strictness::Permissive)?;
    println!("ambient: {} readings kept", ambient.records.len());
    for s in &ambient.skipped {
        println!("  skipped line {}: {}", s.line, s.fault);
    }

    let privacy = reference::privacy_map();
    let phone = parse_smartphone_log(
        SMARTPHONE.as_bytes(),
        &privacy,
        SmartphoneSchema::Intervals,
        Strictness::Permissive,
    )?;
    for r in &phone.records {
        println!("smartphone: {} .. {} as {}", r.start, r.end, r.app_label);
    }
    println!("  as on/off readings: {}", app_usage_readings(&phone.records).len());

    let band = parse_wristband_log(WRISTBAND.as_bytes(), Strictness::FailFast)?;
    for r in &band.records {
        println!("wristband: {:?} {} .. {}", r.kind, r.start, r.end);
    }
    for r in sleep_readings(&band.records) {
        println!("  {} {} -> {}", r.timestamp, r.sensor_id, u8::from(r.value));
    }
    Ok(())
}
