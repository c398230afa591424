use std::collections::BTreeSet;

use chrono::{Duration, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{ambient_truth, Household, ScenarioBundle, SynthError};
use crate::abstraction::labels::LabeledEvent;
use crate::ingest::SensorReading;
use crate::source::Source;

/// Adds spurious flip pairs on channels no rule looks at. Each pair toggles a
/// bit away from its current value and back within twenty seconds, at instants
/// no other reading uses. `rate` is the expected number of pairs per channel
/// and hour; labels are recomputed so every new flip is `None`.
pub fn inject_noise(bundle: &ScenarioBundle, rate: f64, seed: u64) -> Result<ScenarioBundle, SynthError> {
    if rate.is_nan() || rate < 0.0 {
        return Err(SynthError::NegativeRate(rate));
    }
    if rate == 0.0 || bundle.ambient.is_empty() {
        return Ok(bundle.clone());
    }
    let household = Household {
        registry: bundle.registry.clone(),
        ..Household::reference()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = bundle.ambient[0].timestamp;
    let last = bundle.ambient[bundle.ambient.len() - 1].timestamp;
    let span = (last - first).num_seconds();
    let hours = span as f64 / 3600.0;
    let mut used: BTreeSet<NaiveDateTime> = bundle.ambient.iter().map(|r| r.timestamp).collect();
    let mut readings = bundle.ambient.clone();
    let mut noise = Vec::new();
    let poisson = Poisson::new(rate * hours).map_err(|e| SynthError::Infeasible(e.to_string()))?;

    for bit in household.unruled_bits() {
        let id = household.registry.at(bit).expect("bit in registry").id.clone();
        let mut own: BTreeSet<NaiveDateTime> = readings
            .iter()
            .filter(|r| r.sensor_id == id)
            .map(|r| r.timestamp)
            .collect();
        let pairs = poisson.sample(&mut rng) as usize;
        let mut placed = 0;
        let mut attempts = 0;
        while placed < pairs && attempts < pairs * 20 + 20 {
            attempts += 1;
            let t = first + Duration::seconds(rng.random_range(1..span.max(2)));
            let d = Duration::seconds(rng.random_range(1..=20));
            let back = t + d;
            if back >= last || used.contains(&t) || used.contains(&back) || own.range(t..=back).next().is_some() {
                continue;
            }
            let current = readings
                .iter()
                .rev()
                .find(|r| r.sensor_id == id && r.timestamp < t)
                .is_some_and(|r| r.value);
            for (at, value) in [(t, !current), (back, current)] {
                readings.push(SensorReading {
                    timestamp: at,
                    sensor_id: id.clone(),
                    value,
                });
                used.insert(at);
                own.insert(at);
                noise.push(at);
            }
            readings.sort_by_key(|r| r.timestamp);
            placed += 1;
        }
    }

    let mut out = bundle.clone();
    out.ambient = readings;
    noise.sort();
    out.noise_timestamps = noise;
    let mut labels: Vec<LabeledEvent> = ambient_truth(&out.ambient, &household);
    labels.extend(
        bundle
            .truth_labels
            .iter()
            .filter(|e| e.source != Source::Ambient)
            .cloned(),
    );
    out.truth_labels = labels;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::taxonomy::ActivityLabel;
    use crate::synth::{generate_scenario, RoutineSpec};

    #[test]
    fn zero_rate_is_identity_and_negative_rejected() {
        let b = generate_scenario(5, 2, &RoutineSpec::default()).unwrap();
        assert_eq!(inject_noise(&b, 0.0, 1).unwrap(), b);
        assert_eq!(inject_noise(&b, -1.0, 1), Err(SynthError::NegativeRate(-1.0)));
    }

    #[test]
    fn noise_adds_only_none_flips() {
        let b = generate_scenario(5, 3, &RoutineSpec::default()).unwrap();
        let n = inject_noise(&b, 0.5, 9).unwrap();
        assert!(!n.noise_timestamps.is_empty());
        assert_eq!(n.ambient.len(), b.ambient.len() + n.noise_timestamps.len());
        assert_eq!(n.truth_labels.len(), b.truth_labels.len() + n.noise_timestamps.len());
        let noise: BTreeSet<_> = n.noise_timestamps.iter().collect();
        for e in n.truth_for(Source::Ambient) {
            if noise.contains(&e.timestamp) {
                assert_eq!(e.label, ActivityLabel::None);
            }
        }
        assert_eq!(n.truth_log, b.truth_log);
        let mut seen = BTreeSet::new();
        assert!(n.ambient.iter().all(|r| seen.insert(r.timestamp)));
    }
}
