//! Generates a synthetic household, adds sensor noise and writes the bundle
//! with a ready-to-run pipeline configuration.
//!
//! ```bash
//! cargo run --example synth_scenario
//! ```

use iotlog_forge::synth::{generate_scenario, inject_noise, write_bundle, RoutineSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = RoutineSpec::default();
    let clean = generate_scenario(42, 7, &spec)?;
    let noisy = inject_noise(&clean, 0.3, 43)?;
    println!(
        "{} days from {}: {} ambient readings ({} from noise), {} phone sessions, {} sleep records",
        noisy.days,
        noisy.start_date,
        noisy.ambient.len(),
        noisy.noise_timestamps.len(),
        noisy.smartphone.len(),
        noisy.wristband.len()
    );
    println!(
        "{} truth intervals, {} truth labels",
        noisy.truth_log.len(),
        noisy.truth_labels.len()
    );
    for (activity, nights) in &noisy.cross_midnight {
        println!("  {activity} crossed midnight {nights} times");
    }

    let dir = tempfile::tempdir()?;
    let paths = write_bundle(&noisy, dir.path(), &spec)?;
    println!("truth log written to {}", paths.truth_log.display());
    Ok(())
}
