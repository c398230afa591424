//! Synthetic households with exact ground truth.
//!
//! The generator schedules activity instances from a [`RoutineSpec`] and turns
//! each into channel flips through the same rule files the rule classifier
//! reads, so running the rule classifier and the native integrator over a
//! noise-free bundle gives back its truth log.

mod noise;
mod spec;
mod write;

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use noise::inject_noise;
pub use spec::{ActivityRoutine, AppRoutine, RoutineSpec, SleepRoutine};
pub use write::{write_bundle, BundlePaths};

use crate::abstraction::labels::LabeledEvent;
use crate::abstraction::rules::{Edge, RuleSet};
use crate::abstraction::taxonomy::{ActivityLabel, LabelTaxonomy, Phase};
use crate::ingest::{AppUsageRecord, SensorReading, SensorRegistry, SleepKind, SleepRecord};
use crate::integrate::{ActivityInterval, UnifiedEventLog};
use crate::reference;
use crate::source::Source;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("infeasible routine: {0}")]
    Infeasible(String),
    #[error("days must be at least 1")]
    NoDays,
    #[error("activity {0:?} has no rising/falling rule pair to drive it")]
    NoTrigger(String),
    #[error("sensor {0:?} is not in the registry")]
    UnknownSensor(String),
    #[error("presence sensor {0:?} is covered by a rule")]
    RuledPresence(String),
    #[error("app label {0:?} is not a smartphone activity")]
    UnknownAppLabel(String),
    #[error("noise rate {0} is negative")]
    NegativeRate(f64),
}

/// Channels and rules the generator writes against.
#[derive(Debug, Clone)]
pub struct Household {
    pub registry: SensorRegistry,
    pub rules: RuleSet,
    pub wristband_registry: SensorRegistry,
    pub wristband_rules: RuleSet,
    pub smartphone_taxonomy: LabelTaxonomy,
}

impl Household {
    pub fn reference() -> Self {
        Household {
            registry: reference::ambient_registry(),
            rules: reference::ambient_rules(),
            wristband_registry: reference::wristband_registry(),
            wristband_rules: reference::wristband_rules(),
            smartphone_taxonomy: reference::taxonomy(Source::Smartphone),
        }
    }

    /// Ambient bits no rule looks at.
    pub fn unruled_bits(&self) -> Vec<usize> {
        let covered = self.rules.covered_bits();
        (0..self.registry.len()).filter(|b| !covered.contains(b)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBundle {
    pub seed: u64,
    pub days: u32,
    pub start_date: NaiveDate,
    pub registry: SensorRegistry,
    pub ambient: Vec<SensorReading>,
    pub smartphone: Vec<AppUsageRecord>,
    /// Raw application name per smartphone record.
    pub smartphone_apps: Vec<String>,
    pub wristband: Vec<SleepRecord>,
    pub truth_log: UnifiedEventLog,
    /// One entry per state change, grouped by source, in time order.
    pub truth_labels: Vec<LabeledEvent>,
    /// Timestamps of flips added by [`inject_noise`].
    pub noise_timestamps: Vec<NaiveDateTime>,
    /// Instances that end on the day after they start, per activity.
    pub cross_midnight: BTreeMap<String, usize>,
    /// Raw app name to label table for the emitted smartphone log.
    pub app_map: BTreeMap<String, String>,
}

impl ScenarioBundle {
    pub fn truth_for(&self, source: Source) -> Vec<&LabeledEvent> {
        self.truth_labels.iter().filter(|e| e.source == source).collect()
    }
}

pub fn generate_scenario(seed: u64, days: u32, spec: &RoutineSpec) -> Result<ScenarioBundle, SynthError> {
    generate_in(&Household::reference(), seed, days, spec)
}

fn clock_secs(t: NaiveTime) -> i64 {
    t.num_seconds_from_midnight() as i64
}

fn uniform_in(rng: &mut ChaCha8Rng, day: NaiveDate, from: NaiveTime, to: NaiveTime) -> NaiveDateTime {
    day.and_time(NaiveTime::MIN) + Duration::seconds(rng.random_range(clock_secs(from)..=clock_secs(to)))
}

fn duration(rng: &mut ChaCha8Rng, min: u32, max: u32) -> Duration {
    Duration::seconds(rng.random_range(min..=max) as i64)
}

/// Shifts `t` forward past taken instants and away from 00:00:00, so each
/// instant carries at most one flip and no instance ends exactly at midnight.
fn free(mut t: NaiveDateTime, used: &HashSet<NaiveDateTime>) -> NaiveDateTime {
    while used.contains(&t) || t.time() == NaiveTime::MIN {
        t += Duration::seconds(1);
    }
    t
}

struct Instance {
    source: Source,
    activity: String,
    start: NaiveDateTime,
    end: NaiveDateTime,
}

impl Instance {
    fn interval(&self) -> ActivityInterval {
        ActivityInterval {
            case_id: self.start.date(),
            source: self.source,
            activity: self.activity.clone(),
            start_time: self.start.time(),
            end_time: Some(self.end.time()),
            next_date: self.end.date() != self.start.date(),
        }
    }
}

pub fn generate_in(
    household: &Household,
    seed: u64,
    days: u32,
    spec: &RoutineSpec,
) -> Result<ScenarioBundle, SynthError> {
    if days == 0 {
        return Err(SynthError::NoDays);
    }
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ambient, mut instances) = ambient_stream(household, spec, days, &mut rng)?;
    let (smartphone, smartphone_apps, phone_instances) = phone_stream(household, spec, days, &mut rng)?;
    let (wristband, band_instances) = band_stream(household, spec, days, &mut rng)?;
    instances.extend(phone_instances);
    instances.extend(band_instances);

    let mut cross_midnight = BTreeMap::new();
    for i in &instances {
        if i.end.date() != i.start.date() {
            *cross_midnight.entry(i.activity.clone()).or_insert(0) += 1;
        }
    }
    let truth_log = UnifiedEventLog::new(instances.iter().map(Instance::interval).collect());

    let mut truth_labels = ambient_truth(&ambient, household);
    truth_labels.extend(interval_truth(
        Source::Smartphone,
        smartphone.iter().map(|r| (r.start, r.end, r.app_label.clone())),
    ));
    let band_activity = |kind: SleepKind| {
        channel_activity(
            &household.wristband_registry,
            &household.wristband_rules,
            kind.channel(),
        )
    };
    let mut band_labels = Vec::new();
    for r in &wristband {
        band_labels.push((r.start, r.end, band_activity(r.kind)?));
    }
    truth_labels.extend(interval_truth(Source::Wristband, band_labels.into_iter()));

    let app_map = spec
        .apps
        .iter()
        .flat_map(|a| a.app_names.iter().map(move |n| (n.clone(), a.label.clone())))
        .collect();

    Ok(ScenarioBundle {
        seed,
        days,
        start_date: spec.start_date,
        registry: household.registry.clone(),
        ambient,
        smartphone,
        smartphone_apps,
        wristband,
        truth_log,
        truth_labels,
        noise_timestamps: Vec::new(),
        cross_midnight,
        app_map,
    })
}

/// Activity whose lifecycle a wristband channel drives.
fn channel_activity(registry: &SensorRegistry, rules: &RuleSet, channel: &str) -> Result<String, SynthError> {
    let bit = registry
        .position(channel)
        .ok_or_else(|| SynthError::UnknownSensor(channel.to_string()))?;
    rules
        .rules()
        .iter()
        .filter(|r| r.bit_position == bit && r.edge == Edge::Rising)
        .find_map(|r| r.label.activity())
        .filter(|a| {
            rules.rules().iter().any(|r| {
                r.bit_position == bit && r.edge == Edge::Falling && r.label == ActivityLabel::new(*a, Phase::End)
            })
        })
        .map(str::to_string)
        .ok_or_else(|| SynthError::NoTrigger(channel.to_string()))
}

fn ambient_stream(
    household: &Household,
    spec: &RoutineSpec,
    days: u32,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<SensorReading>, Vec<Instance>), SynthError> {
    let registry = &household.registry;
    let covered = household.rules.covered_bits();
    let mut triggers: HashMap<&str, String> = HashMap::new();
    for a in &spec.activities {
        let bit = household
            .rules
            .trigger_bit(&a.name)
            .ok_or_else(|| SynthError::NoTrigger(a.name.clone()))?;
        triggers.insert(
            &a.name,
            registry.at(bit).expect("rule bits are in the registry").id.clone(),
        );
        for loc in &a.location_sensors {
            let pos = registry
                .position(loc)
                .ok_or_else(|| SynthError::UnknownSensor(loc.clone()))?;
            if covered.contains(&pos) {
                return Err(SynthError::RuledPresence(loc.clone()));
            }
        }
    }

    let mut used = HashSet::new();
    let mut readings = Vec::new();
    let mut instances = Vec::new();
    let mut last_end: HashMap<&str, NaiveDateTime> = HashMap::new();
    let reading = |t, id: &str, value| SensorReading {
        timestamp: t,
        sensor_id: id.to_string(),
        value,
    };
    for day in 0..days {
        let date = spec.start_date + Duration::days(day as i64);
        for a in &spec.activities {
            if !rng.random_bool(a.probability) {
                continue;
            }
            let start = free(uniform_in(rng, date, a.earliest_start, a.latest_start), &used);
            let end = free(start + duration(rng, a.min_duration_secs, a.max_duration_secs), &used);
            let leads: Vec<(i64, i64)> = a
                .location_sensors
                .iter()
                .map(|_| (rng.random_range(2..=30), rng.random_range(2..=30)))
                .collect();
            if last_end.get(a.name.as_str()).is_some_and(|le| start <= *le) {
                continue;
            }
            used.insert(start);
            used.insert(end);
            last_end.insert(&a.name, end);
            let id = &triggers[a.name.as_str()];
            readings.push(reading(start, id, true));
            readings.push(reading(end, id, false));
            for (loc, (lead, trail)) in a.location_sensors.iter().zip(leads) {
                let on = free(start - Duration::seconds(lead), &used);
                used.insert(on);
                let off = free(end + Duration::seconds(trail), &used);
                used.insert(off);
                readings.push(reading(on, loc, true));
                readings.push(reading(off, loc, false));
            }
            instances.push(Instance {
                source: Source::Ambient,
                activity: a.name.clone(),
                start,
                end,
            });
        }
    }
    readings.sort_by_key(|r| r.timestamp);
    Ok((readings, instances))
}

type PhoneStream = (Vec<AppUsageRecord>, Vec<String>, Vec<Instance>);

fn phone_stream(
    household: &Household,
    spec: &RoutineSpec,
    days: u32,
    rng: &mut ChaCha8Rng,
) -> Result<PhoneStream, SynthError> {
    for a in &spec.apps {
        if !household.smartphone_taxonomy.has_activity(&a.label) {
            return Err(SynthError::UnknownAppLabel(a.label.clone()));
        }
    }
    let mut records = Vec::new();
    let mut names = Vec::new();
    let mut instances = Vec::new();
    let mut last_end: Option<NaiveDateTime> = None;
    for day in 0..days {
        let date = spec.start_date + Duration::days(day as i64);
        // (start, end, routine index, app name)
        let mut candidates: Vec<(NaiveDateTime, NaiveDateTime, usize, String)> = Vec::new();
        for (idx, a) in spec.apps.iter().enumerate() {
            let n = rng.random_range(a.min_sessions..=a.max_sessions);
            for _ in 0..n {
                let name = a.app_names[rng.random_range(0..a.app_names.len())].clone();
                let mut start = uniform_in(rng, date, a.earliest_start, a.latest_start);
                let mut end = start + duration(rng, a.min_duration_secs, a.max_duration_secs);
                candidates.push((start, end, idx, name.clone()));
                let mut follow_ups = 0;
                while follow_ups < 3 && rng.random_bool(a.burst_probability) {
                    start = end + Duration::seconds(rng.random_range(1..=a.max_burst_gap_secs) as i64);
                    end = start + duration(rng, a.min_duration_secs, a.max_duration_secs);
                    candidates.push((start, end, idx, name.clone()));
                    follow_ups += 1;
                }
            }
        }
        candidates.sort_by(|x, y| x.0.cmp(&y.0).then(x.2.cmp(&y.2)));
        for (start, mut end, idx, name) in candidates {
            if end.time() == NaiveTime::MIN {
                end += Duration::seconds(1);
            }
            if start.time() == NaiveTime::MIN || last_end.is_some_and(|le| start <= le) {
                continue;
            }
            last_end = Some(end);
            let label = spec.apps[idx].label.clone();
            records.push(AppUsageRecord {
                start,
                end,
                app_label: label.clone(),
            });
            names.push(name);
            instances.push(Instance {
                source: Source::Smartphone,
                activity: label,
                start,
                end,
            });
        }
    }
    Ok((records, names, instances))
}

fn band_stream(
    household: &Household,
    spec: &RoutineSpec,
    days: u32,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<SleepRecord>, Vec<Instance>), SynthError> {
    let s = &spec.sleep;
    let mut records = Vec::new();
    let mut instances = Vec::new();
    let mut last_end: Option<NaiveDateTime> = None;
    let mut push = |kind: SleepKind, start: NaiveDateTime, end: NaiveDateTime| -> Result<(), SynthError> {
        if start.time() == NaiveTime::MIN || last_end.is_some_and(|le| start <= le) {
            return Ok(());
        }
        last_end = Some(end);
        records.push(SleepRecord { start, end, kind });
        instances.push(Instance {
            source: Source::Wristband,
            activity: channel_activity(
                &household.wristband_registry,
                &household.wristband_rules,
                kind.channel(),
            )?,
            start,
            end,
        });
        Ok(())
    };
    let not_midnight = |t: NaiveDateTime| {
        if t.time() == NaiveTime::MIN {
            t + Duration::seconds(1)
        } else {
            t
        }
    };
    for day in 0..days {
        let date = spec.start_date + Duration::days(day as i64);
        if rng.random_bool(s.nap_probability) {
            let start = uniform_in(rng, date, s.nap_earliest, s.nap_latest);
            let end = not_midnight(start + duration(rng, s.min_nap_secs, s.max_nap_secs));
            push(SleepKind::DaySleep, start, end)?;
        }
        let start = if rng.random_bool(s.cross_midnight_probability) {
            uniform_in(rng, date, s.night_earliest, s.night_latest)
        } else {
            uniform_in(
                rng,
                date + Duration::days(1),
                s.after_midnight_earliest,
                s.after_midnight_latest,
            )
        };
        let end = not_midnight(start + duration(rng, s.min_night_secs, s.max_night_secs));
        push(SleepKind::NightSleep, start, end)?;
    }
    Ok((records, instances))
}

/// Replays ambient readings over an all-off state; every flip gets the label
/// its rule pair implies, flips on unruled bits get `None`.
pub(crate) fn ambient_truth(readings: &[SensorReading], household: &Household) -> Vec<LabeledEvent> {
    let registry = &household.registry;
    let mut bits = vec![false; registry.len()];
    let mut out = Vec::new();
    for r in readings {
        let Some(pos) = registry.position(&r.sensor_id) else {
            continue;
        };
        if bits[pos] == r.value {
            continue;
        }
        bits[pos] = r.value;
        let edge = if r.value { Edge::Rising } else { Edge::Falling };
        let label = household
            .rules
            .rules()
            .iter()
            .find(|rule| rule.bit_position == pos && rule.edge == edge)
            .map_or(ActivityLabel::None, |rule| rule.label.clone());
        out.push(LabeledEvent {
            timestamp: r.timestamp,
            source: Source::Ambient,
            label,
            backend: String::new(),
        });
    }
    out
}

fn interval_truth(
    source: Source,
    intervals: impl Iterator<Item = (NaiveDateTime, NaiveDateTime, String)>,
) -> Vec<LabeledEvent> {
    let mut out = Vec::new();
    for (start, end, activity) in intervals {
        for (t, phase) in [(start, Phase::Start), (end, Phase::End)] {
            out.push(LabeledEvent {
                timestamp: t,
                source,
                label: ActivityLabel::new(activity.clone(), phase),
                backend: String::new(),
            });
        }
    }
    out.sort_by_key(|e| e.timestamp);
    out
}
