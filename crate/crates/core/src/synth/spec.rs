use chrono::{NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

use super::SynthError;

/// One slot in the daily routine. An activity may appear in several entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityRoutine {
    pub name: String,
    /// Presence channels that go on shortly before the activity and off after.
    #[serde(default)]
    pub location_sensors: Vec<String>,
    pub earliest_start: NaiveTime,
    pub latest_start: NaiveTime,
    pub min_duration_secs: u32,
    pub max_duration_secs: u32,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppRoutine {
    /// Taxonomy activity the sessions map to.
    pub label: String,
    /// Raw application names reported by the phone.
    pub app_names: Vec<String>,
    pub min_sessions: u32,
    pub max_sessions: u32,
    pub min_duration_secs: u32,
    pub max_duration_secs: u32,
    pub earliest_start: NaiveTime,
    pub latest_start: NaiveTime,
    /// Chance that a session is followed by another one after a short pause.
    #[serde(default)]
    pub burst_probability: f64,
    #[serde(default = "default_burst_gap")]
    pub max_burst_gap_secs: u32,
}

fn default_burst_gap() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SleepRoutine {
    pub night_earliest: NaiveTime,
    pub night_latest: NaiveTime,
    /// Start window on the following morning when the night does not cross midnight.
    pub after_midnight_earliest: NaiveTime,
    pub after_midnight_latest: NaiveTime,
    pub min_night_secs: u32,
    pub max_night_secs: u32,
    pub cross_midnight_probability: f64,
    pub nap_probability: f64,
    pub nap_earliest: NaiveTime,
    pub nap_latest: NaiveTime,
    pub min_nap_secs: u32,
    pub max_nap_secs: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutineSpec {
    pub start_date: NaiveDate,
    pub activities: Vec<ActivityRoutine>,
    pub apps: Vec<AppRoutine>,
    pub sleep: SleepRoutine,
    /// Spurious flip pairs per unruled sensor and hour, applied by the
    /// pipeline through [`super::inject_noise`].
    #[serde(default)]
    pub noise_rate: f64,
}

fn t(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).expect("valid clock")
}

fn act(name: &str, loc: &[&str], from: (u32, u32), to: (u32, u32), min_s: u32, max_s: u32, p: f64) -> ActivityRoutine {
    ActivityRoutine {
        name: name.into(),
        location_sensors: loc.iter().map(|s| s.to_string()).collect(),
        earliest_start: t(from.0, from.1),
        latest_start: t(to.0, to.1),
        min_duration_secs: min_s,
        max_duration_secs: max_s,
        probability: p,
    }
}

fn app(label: &str, names: &[&str], sessions: (u32, u32), dur: (u32, u32), burst: f64) -> AppRoutine {
    AppRoutine {
        label: label.into(),
        app_names: names.iter().map(|s| s.to_string()).collect(),
        min_sessions: sessions.0,
        max_sessions: sessions.1,
        min_duration_secs: dur.0,
        max_duration_secs: dur.1,
        earliest_start: t(7, 0),
        latest_start: t(23, 30),
        burst_probability: burst,
        max_burst_gap_secs: 5,
    }
}

impl Default for RoutineSpec {
    /// An older adult living alone: ten ambient activities, four app
    /// categories and a nightly sleep that crosses midnight.
    fn default() -> Self {
        const MIN: u32 = 60;
        const HOUR: u32 = 3600;
        RoutineSpec {
            start_date: NaiveDate::from_ymd_opt(2020, 1, 8).expect("valid date"),
            activities: vec![
                act("praying", &["living_pir"], (5, 20), (5, 50), 8 * MIN, 20 * MIN, 0.9),
                act(
                    "toilet",
                    &["bathroom_pir", "bathroom_door"],
                    (6, 30),
                    (7, 20),
                    2 * MIN,
                    6 * MIN,
                    0.95,
                ),
                act(
                    "showering",
                    &["bathroom_pir"],
                    (7, 40),
                    (8, 20),
                    10 * MIN,
                    25 * MIN,
                    0.7,
                ),
                act(
                    "taking_medication",
                    &["kitchen_pir"],
                    (8, 40),
                    (9, 0),
                    MIN,
                    3 * MIN,
                    0.95,
                ),
                act(
                    "dressing",
                    &["bedroom_pir", "bedroom_door"],
                    (9, 10),
                    (9, 40),
                    4 * MIN,
                    10 * MIN,
                    0.8,
                ),
                act("cooking", &["kitchen_pir"], (11, 20), (12, 0), 20 * MIN, 45 * MIN, 0.9),
                act("eating", &["kitchen_pir"], (12, 50), (13, 20), 15 * MIN, 30 * MIN, 0.9),
                act("toilet", &["bathroom_pir"], (13, 40), (14, 0), 2 * MIN, 5 * MIN, 0.8),
                act("resting", &["living_pir"], (14, 10), (14, 40), 20 * MIN, HOUR, 0.6),
                act("praying", &["living_pir"], (15, 40), (16, 10), 8 * MIN, 15 * MIN, 0.7),
                act("watching_tv", &["living_pir"], (16, 30), (17, 0), 30 * MIN, HOUR, 0.4),
                act("cooking", &["kitchen_pir"], (18, 0), (18, 30), 20 * MIN, 40 * MIN, 0.85),
                act("eating", &["kitchen_pir"], (19, 10), (19, 30), 15 * MIN, 30 * MIN, 0.85),
                act(
                    "taking_medication",
                    &["kitchen_pir"],
                    (19, 45),
                    (19, 55),
                    MIN,
                    3 * MIN,
                    0.95,
                ),
                act(
                    "watching_tv",
                    &["living_pir"],
                    (20, 0),
                    (20, 40),
                    30 * MIN,
                    80 * MIN,
                    0.8,
                ),
                act(
                    "toilet",
                    &["bathroom_pir", "bathroom_door"],
                    (22, 10),
                    (22, 30),
                    2 * MIN,
                    5 * MIN,
                    0.9,
                ),
                act(
                    "sleeping",
                    &["bedroom_pir"],
                    (22, 40),
                    (23, 40),
                    6 * HOUR,
                    9 * HOUR,
                    1.0,
                ),
            ],
            apps: vec![
                app("messaging", &["WhatsApp", "Telegram"], (3, 8), (20, 300), 0.3),
                app("call", &["Phone"], (0, 3), (30, 600), 0.0),
                app("social_media", &["Instagram", "Facebook"], (1, 5), (60, 900), 0.1),
                app("browsing", &["Chrome"], (1, 4), (60, 600), 0.0),
            ],
            sleep: SleepRoutine {
                night_earliest: t(22, 50),
                night_latest: t(23, 55),
                after_midnight_earliest: t(0, 10),
                after_midnight_latest: t(1, 30),
                min_night_secs: 6 * HOUR + 30 * MIN,
                max_night_secs: 8 * HOUR + 30 * MIN,
                cross_midnight_probability: 1.0,
                nap_probability: 0.3,
                nap_earliest: t(13, 30),
                nap_latest: t(15, 0),
                min_nap_secs: 20 * MIN,
                max_nap_secs: HOUR,
            },
            noise_rate: 0.0,
        }
    }
}

const TWO_DAYS: u32 = 2 * 86_400;

fn check_window(what: &str, from: NaiveTime, to: NaiveTime, min: u32, max: u32) -> Result<(), SynthError> {
    let bad = |reason: String| Err(SynthError::Infeasible(format!("{what}: {reason}")));
    if to < from {
        return bad(format!("start window {from}..{to} is empty"));
    }
    if min == 0 || min > max {
        return bad(format!("duration bounds {min}..{max} s"));
    }
    if to.num_seconds_from_midnight() + max >= TWO_DAYS {
        return bad("may run past the two-day horizon".into());
    }
    Ok(())
}

fn check_probability(what: &str, p: f64) -> Result<(), SynthError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(SynthError::Infeasible(format!(
            "{what}: probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

impl RoutineSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        for a in &self.activities {
            check_window(
                &a.name,
                a.earliest_start,
                a.latest_start,
                a.min_duration_secs,
                a.max_duration_secs,
            )?;
            check_probability(&a.name, a.probability)?;
        }
        for a in &self.apps {
            check_window(
                &a.label,
                a.earliest_start,
                a.latest_start,
                a.min_duration_secs,
                a.max_duration_secs,
            )?;
            check_probability(&a.label, a.burst_probability)?;
            if a.app_names.is_empty() {
                return Err(SynthError::Infeasible(format!("{}: no app names", a.label)));
            }
            if a.min_sessions > a.max_sessions {
                return Err(SynthError::Infeasible(format!("{}: session bounds", a.label)));
            }
            if a.max_burst_gap_secs == 0 {
                return Err(SynthError::Infeasible(format!(
                    "{}: burst gap must be positive",
                    a.label
                )));
            }
        }
        let s = &self.sleep;
        check_window(
            "night sleep",
            s.night_earliest,
            s.night_latest,
            s.min_night_secs,
            s.max_night_secs,
        )?;
        check_window(
            "night sleep after midnight",
            s.after_midnight_earliest,
            s.after_midnight_latest,
            s.min_night_secs,
            s.max_night_secs,
        )?;
        check_window("nap", s.nap_earliest, s.nap_latest, s.min_nap_secs, s.max_nap_secs)?;
        check_probability("night sleep", s.cross_midnight_probability)?;
        check_probability("nap", s.nap_probability)?;
        if self.noise_rate < 0.0 || !self.noise_rate.is_finite() {
            return Err(SynthError::Infeasible(format!("noise rate {}", self.noise_rate)));
        }
        Ok(())
    }
}
