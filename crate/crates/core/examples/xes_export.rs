//! Writes a unified log as XES and reads it back.
//!
//! ```bash
//! cargo run --example xes_export
//! ```

use iotlog_forge::synth::{generate_scenario, RoutineSpec};
use iotlog_forge::xes::{read_xes, xes_string};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = generate_scenario(3, 2, &RoutineSpec::default())?;
    let xml = xes_string(&bundle.truth_log);
    for line in xml.lines().take(30) {
        println!("{line}");
    }
    println!("... {} lines in total", xml.lines().count());
    let back = read_xes(xml.as_bytes())?;
    println!(
        "round trip: {} intervals, equal: {}",
        back.len(),
        back == bundle.truth_log
    );
    Ok(())
}
