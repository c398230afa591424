//! Parsing and validation of the raw per-source logs.
//!
//! Every source arrives as a headered CSV file. Ambient sensors report point
//! readings (`timestamp,sensor_id,value`), the smartphone and the wristband
//! report intervals. All parsers return their records sorted by time; ties keep
//! file order.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::source::{format_timestamp, parse_timestamp};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed csv: {message}")]
    Csv { line: u64, message: String },
    #[error("expected header `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("registry is empty")]
    EmptyRegistry,
    #[error("line {line}: duplicate sensor id {id:?}")]
    DuplicateSensor { line: u64, id: String },
    #[error("line {line}: empty sensor id")]
    EmptySensorId { line: u64 },
    #[error("line {line}: duplicate bit position {position}")]
    DuplicatePosition { line: u64, position: usize },
    #[error("gap at position {position}")]
    PositionGap { position: usize },
    #[error("line {line}: {reason}")]
    Line { line: u64, reason: LineFault },
    #[error("unmapped applications with no default label: {}", names.join(", "))]
    UnmappedApps { names: Vec<String> },
}

/// A defect confined to one input line. Under [`Strictness::Permissive`]
/// these are collected instead of aborting the parse.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LineFault {
    #[error("unknown sensor id {0:?}")]
    UnknownSensor(String),
    #[error("non-binary value {0:?}")]
    NonBinaryValue(String),
    #[error("unparseable timestamp {0:?}")]
    BadTimestamp(String),
    #[error("unparseable bit position {0:?}")]
    BadPosition(String),
    #[error("wrong field count: expected {expected}, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("empty sleep interval")]
    EmptySleepInterval,
    #[error("interval ends before it starts")]
    InvertedInterval,
    #[error("unknown sleep kind {0:?}")]
    BadSleepKind(String),
    #[error("unknown usage event {0:?}")]
    BadUsageEvent(String),
    #[error("unmapped application {0:?}")]
    UnmappedApp(String),
    #[error("{0} without matching counterpart")]
    Unpaired(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strictness {
    #[default]
    FailFast,
    /// Skip faulty lines and report them.
    Permissive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: u64,
    pub fault: LineFault,
}

/// Parser output: the accepted records plus any lines skipped in permissive mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub skipped: Vec<SkippedLine>,
}

impl<T> Parsed<T> {
    fn new() -> Self {
        Parsed {
            records: Vec::new(),
            skipped: Vec::new(),
        }
    }
}

// ----------------------------------------------------------------------------
// Sensor registry

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorDescriptor {
    pub id: String,
    pub bit_position: usize,
    pub location: String,
    pub kind: String,
    pub explanation: String,
}

/// Ordered sensor descriptors. The order defines the bit layout of every
/// state snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensorRegistry {
    sensors: Vec<SensorDescriptor>,
    index: HashMap<String, usize>,
}

impl SensorRegistry {
    /// Validates ids and positions, then orders the descriptors by bit position.
    pub fn new(mut sensors: Vec<SensorDescriptor>) -> Result<Self, IngestError> {
        if sensors.is_empty() {
            return Err(IngestError::EmptyRegistry);
        }
        let mut index = HashMap::new();
        let mut positions = BTreeSet::new();
        for (i, s) in sensors.iter().enumerate() {
            let line = i as u64 + 2;
            if s.id.trim().is_empty() {
                return Err(IngestError::EmptySensorId { line });
            }
            if index.insert(s.id.clone(), s.bit_position).is_some() {
                return Err(IngestError::DuplicateSensor { line, id: s.id.clone() });
            }
            if !positions.insert(s.bit_position) {
                return Err(IngestError::DuplicatePosition {
                    line,
                    position: s.bit_position,
                });
            }
        }
        if let Some(position) = (0..sensors.len()).find(|p| !positions.contains(p)) {
            return Err(IngestError::PositionGap { position });
        }
        sensors.sort_by_key(|s| s.bit_position);
        Ok(SensorRegistry { sensors, index })
    }

    /// One sensor per channel name, in the given order. Used for the
    /// smartphone (one channel per app label) and wristband (one per sleep kind).
    pub fn from_channels<S: AsRef<str>>(channels: &[S], kind: &str) -> Result<Self, IngestError> {
        let sensors = channels
            .iter()
            .enumerate()
            .map(|(i, c)| SensorDescriptor {
                id: c.as_ref().to_string(),
                bit_position: i,
                location: String::new(),
                kind: kind.to_string(),
                explanation: format!("{} {}", c.as_ref(), kind),
            })
            .collect();
        Self::new(sensors)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv_reader(reader);
        expect_header(
            &mut rdr,
            &["sensor_id", "bit_position", "location", "kind", "explanation"],
        )?;
        let mut sensors = Vec::new();
        let mut index: HashMap<String, u64> = HashMap::new();
        let mut positions: HashMap<usize, u64> = HashMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let line = line_of(&rec);
            if rec.len() != 5 {
                return Err(IngestError::Line {
                    line,
                    reason: LineFault::FieldCount {
                        expected: 5,
                        found: rec.len(),
                    },
                });
            }
            let id = rec[0].trim().to_string();
            if id.is_empty() {
                return Err(IngestError::EmptySensorId { line });
            }
            let bit_position: usize = rec[1].trim().parse().map_err(|_| IngestError::Line {
                line,
                reason: LineFault::BadPosition(rec[1].to_string()),
            })?;
            if index.insert(id.clone(), line).is_some() {
                return Err(IngestError::DuplicateSensor { line, id });
            }
            if positions.insert(bit_position, line).is_some() {
                return Err(IngestError::DuplicatePosition {
                    line,
                    position: bit_position,
                });
            }
            sensors.push(SensorDescriptor {
                id,
                bit_position,
                location: rec[2].trim().to_string(),
                kind: rec[3].trim().to_string(),
                explanation: rec[4].trim().to_string(),
            });
        }
        Self::new(sensors)
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn sensors(&self) -> &[SensorDescriptor] {
        &self.sensors
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&SensorDescriptor> {
        self.position(id).map(|p| &self.sensors[p])
    }

    pub fn at(&self, position: usize) -> Option<&SensorDescriptor> {
        self.sensors.get(position)
    }

    /// One line per sensor, in bit order, as embedded in classification prompts.
    pub fn explanations(&self) -> String {
        self.sensors
            .iter()
            .map(|s| {
                let mut line = format!("- digit {}: {}", s.bit_position + 1, s.id);
                let ctx: Vec<&str> = [s.location.as_str(), s.kind.as_str()]
                    .into_iter()
                    .filter(|v| !v.is_empty())
                    .collect();
                if !ctx.is_empty() {
                    line.push_str(&format!(" ({})", ctx.join(", ")));
                }
                if !s.explanation.is_empty() {
                    line.push_str(&format!(": {}", s.explanation));
                }
                line
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["sensor_id", "bit_position", "location", "kind", "explanation"])
            .map_err(csv_write_error)?;
        for s in &self.sensors {
            w.write_record([
                s.id.as_str(),
                &s.bit_position.to_string(),
                &s.location,
                &s.kind,
                &s.explanation,
            ])
            .map_err(csv_write_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_registry(path: impl AsRef<Path>) -> Result<SensorRegistry, IngestError> {
    SensorRegistry::from_reader(File::open(path)?)
}

// ----------------------------------------------------------------------------
// Ambient sensors

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorReading {
    pub timestamp: NaiveDateTime,
    pub sensor_id: String,
    pub value: bool,
}

pub fn parse_ambient_log<R: Read>(
    reader: R,
    registry: &SensorRegistry,
    strictness: Strictness,
) -> Result<Parsed<SensorReading>, IngestError> {
    let mut rdr = csv_reader(reader);
    expect_header(&mut rdr, &["timestamp", "sensor_id", "value"])?;
    let mut out = Parsed::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = line_of(&rec);
        match ambient_row(&rec, registry) {
            Ok(r) => out.records.push(r),
            Err(fault) => skip_or_fail(&mut out.skipped, line, fault, strictness)?,
        }
    }
    out.records.sort_by_key(|r| r.timestamp);
    Ok(out)
}

fn ambient_row(rec: &csv::StringRecord, registry: &SensorRegistry) -> Result<SensorReading, LineFault> {
    field_count(rec, 3)?;
    let timestamp = timestamp_field(&rec[0])?;
    let sensor_id = rec[1].trim();
    if registry.position(sensor_id).is_none() {
        return Err(LineFault::UnknownSensor(sensor_id.to_string()));
    }
    let value = match rec[2].trim() {
        "0" => false,
        "1" => true,
        other => return Err(LineFault::NonBinaryValue(other.to_string())),
    };
    Ok(SensorReading {
        timestamp,
        sensor_id: sensor_id.to_string(),
        value,
    })
}

pub fn write_ambient_log<W: Write>(writer: W, readings: &[SensorReading]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "sensor_id", "value"])
        .map_err(csv_write_error)?;
    for r in readings {
        w.write_record([
            format_timestamp(r.timestamp).as_str(),
            &r.sensor_id,
            if r.value { "1" } else { "0" },
        ])
        .map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

// ----------------------------------------------------------------------------
// Smartphone usage

/// Maps raw application names to the labels that leave the device.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrivacyMap {
    labels: HashMap<String, String>,
    default_label: Option<String>,
}

impl PrivacyMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default(mut self, label: impl Into<String>) -> Self {
        self.default_label = Some(label.into());
        self
    }

    pub fn insert(&mut self, app: impl Into<String>, label: impl Into<String>) {
        self.labels.insert(app.into(), label.into());
    }

    /// Every label maps to itself. Used to re-read already anonymised logs.
    pub fn identity<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut map = Self::new();
        for l in labels {
            map.insert(l.as_ref(), l.as_ref());
        }
        map
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv_reader(reader);
        expect_header(&mut rdr, &["app_name", "label"])?;
        let mut map = Self::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            field_count(&rec, 2).map_err(|reason| IngestError::Line {
                line: line_of(&rec),
                reason,
            })?;
            map.insert(rec[0].trim(), rec[1].trim());
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::from_reader(File::open(path)?)
    }

    pub fn label_for(&self, app: &str) -> Option<&str> {
        self.labels.get(app).or(self.default_label.as_ref()).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppUsageRecord {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub app_label: String,
}

/// Row layout of a smartphone log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmartphoneSchema {
    /// `start,end,app_name`, one session per row.
    #[default]
    Intervals,
    /// `timestamp,app_name,event` with `event` in `open|close`; consecutive
    /// open/close rows of one app are paired into a session.
    PointEvents,
}

pub fn parse_smartphone_log<R: Read>(
    reader: R,
    privacy: &PrivacyMap,
    schema: SmartphoneSchema,
    strictness: Strictness,
) -> Result<Parsed<AppUsageRecord>, IngestError> {
    let mut rdr = csv_reader(reader);
    let mut out = Parsed::new();
    let mut unmapped = BTreeSet::new();
    match schema {
        SmartphoneSchema::Intervals => {
            expect_header(&mut rdr, &["start", "end", "app_name"])?;
            for rec in rdr.records() {
                let rec = rec.map_err(csv_error)?;
                let line = line_of(&rec);
                let row = field_count(&rec, 3).and_then(|_| {
                    let start = timestamp_field(&rec[0])?;
                    let end = timestamp_field(&rec[1])?;
                    if end < start {
                        return Err(LineFault::InvertedInterval);
                    }
                    Ok((start, end, rec[2].trim().to_string()))
                });
                match row {
                    Ok((start, end, app)) => match privacy.label_for(&app) {
                        Some(label) => out.records.push(AppUsageRecord {
                            start,
                            end,
                            app_label: label.to_string(),
                        }),
                        None if strictness == Strictness::FailFast => {
                            unmapped.insert(app);
                        }
                        None => out.skipped.push(SkippedLine {
                            line,
                            fault: LineFault::UnmappedApp(app),
                        }),
                    },
                    Err(fault) => skip_or_fail(&mut out.skipped, line, fault, strictness)?,
                }
            }
        }
        SmartphoneSchema::PointEvents => {
            expect_header(&mut rdr, &["timestamp", "app_name", "event"])?;
            let mut events = Vec::new();
            for rec in rdr.records() {
                let rec = rec.map_err(csv_error)?;
                let line = line_of(&rec);
                let row = field_count(&rec, 3).and_then(|_| {
                    let ts = timestamp_field(&rec[0])?;
                    let open = match rec[2].trim() {
                        "open" => true,
                        "close" => false,
                        other => return Err(LineFault::BadUsageEvent(other.to_string())),
                    };
                    Ok((ts, rec[1].trim().to_string(), open, line))
                });
                match row {
                    Ok(ev) => events.push(ev),
                    Err(fault) => skip_or_fail(&mut out.skipped, line, fault, strictness)?,
                }
            }
            events.sort_by_key(|e| e.0);
            let mut open: HashMap<String, (NaiveDateTime, u64)> = HashMap::new();
            for (ts, app, is_open, line) in events {
                if is_open {
                    if let Some((_, prev_line)) = open.insert(app.clone(), (ts, line)) {
                        skip_or_fail(
                            &mut out.skipped,
                            prev_line,
                            LineFault::Unpaired(format!("open of {app:?}")),
                            strictness,
                        )?;
                    }
                    continue;
                }
                let Some((start, _)) = open.remove(&app) else {
                    skip_or_fail(
                        &mut out.skipped,
                        line,
                        LineFault::Unpaired(format!("close of {app:?}")),
                        strictness,
                    )?;
                    continue;
                };
                match privacy.label_for(&app) {
                    Some(label) => out.records.push(AppUsageRecord {
                        start,
                        end: ts,
                        app_label: label.to_string(),
                    }),
                    None if strictness == Strictness::FailFast => {
                        unmapped.insert(app);
                    }
                    None => out.skipped.push(SkippedLine {
                        line,
                        fault: LineFault::UnmappedApp(app),
                    }),
                }
            }
            let mut dangling: Vec<_> = open.into_iter().collect();
            dangling.sort_by_key(|(_, (_, line))| *line);
            for (app, (_, line)) in dangling {
                skip_or_fail(
                    &mut out.skipped,
                    line,
                    LineFault::Unpaired(format!("open of {app:?}")),
                    strictness,
                )?;
            }
        }
    }
    if !unmapped.is_empty() {
        return Err(IngestError::UnmappedApps {
            names: unmapped.into_iter().collect(),
        });
    }
    out.records.sort_by_key(|r| r.start);
    out.skipped.sort_by_key(|s| s.line);
    Ok(out)
}

pub fn write_smartphone_log<W: Write>(writer: W, records: &[AppUsageRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["start", "end", "app_name"]).map_err(csv_write_error)?;
    for r in records {
        w.write_record([
            format_timestamp(r.start).as_str(),
            &format_timestamp(r.end),
            &r.app_label,
        ])
        .map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

// ----------------------------------------------------------------------------
// Wristband sleep

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SleepKind {
    DaySleep,
    NightSleep,
}

impl SleepKind {
    /// Channel names of the wristband registry, in bit order.
    pub const CHANNELS: [&'static str; 2] = ["day_sleep", "night_sleep"];

    pub fn channel(self) -> &'static str {
        match self {
            SleepKind::DaySleep => "day_sleep",
            SleepKind::NightSleep => "night_sleep",
        }
    }

    fn csv_value(self) -> &'static str {
        match self {
            SleepKind::DaySleep => "day",
            SleepKind::NightSleep => "night",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SleepRecord {
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    pub kind: SleepKind,
}

pub fn parse_wristband_log<R: Read>(reader: R, strictness: Strictness) -> Result<Parsed<SleepRecord>, IngestError> {
    let mut rdr = csv_reader(reader);
    expect_header(&mut rdr, &["start", "end", "kind"])?;
    let mut out = Parsed::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = line_of(&rec);
        let row = field_count(&rec, 3).and_then(|_| {
            let start = timestamp_field(&rec[0])?;
            let end = timestamp_field(&rec[1])?;
            if end == start {
                return Err(LineFault::EmptySleepInterval);
            }
            if end < start {
                return Err(LineFault::InvertedInterval);
            }
            let kind = match rec[2].trim() {
                "day" => SleepKind::DaySleep,
                "night" => SleepKind::NightSleep,
                other => return Err(LineFault::BadSleepKind(other.to_string())),
            };
            Ok(SleepRecord { start, end, kind })
        });
        match row {
            Ok(r) => out.records.push(r),
            Err(fault) => skip_or_fail(&mut out.skipped, line, fault, strictness)?,
        }
    }
    out.records.sort_by_key(|r| r.start);
    Ok(out)
}

pub fn write_wristband_log<W: Write>(writer: W, records: &[SleepRecord]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["start", "end", "kind"]).map_err(csv_write_error)?;
    for r in records {
        w.write_record([
            format_timestamp(r.start).as_str(),
            &format_timestamp(r.end),
            r.kind.csv_value(),
        ])
        .map_err(csv_write_error)?;
    }
    w.flush()?;
    Ok(())
}

// ----------------------------------------------------------------------------
// Interval sources as channel readings

/// Turns app sessions into rising/falling readings on one channel per label,
/// so smartphone data flows through the same state tracker as ambient sensors.
pub fn app_usage_readings(records: &[AppUsageRecord]) -> Vec<SensorReading> {
    interval_readings(records.iter().map(|r| (r.start, r.end, r.app_label.as_str())))
}

pub fn sleep_readings(records: &[SleepRecord]) -> Vec<SensorReading> {
    interval_readings(records.iter().map(|r| (r.start, r.end, r.kind.channel())))
}

fn interval_readings<'a>(
    intervals: impl Iterator<Item = (NaiveDateTime, NaiveDateTime, &'a str)>,
) -> Vec<SensorReading> {
    let mut out = Vec::new();
    for (start, end, channel) in intervals {
        out.push(SensorReading {
            timestamp: start,
            sensor_id: channel.to_string(),
            value: true,
        });
        out.push(SensorReading {
            timestamp: end,
            sensor_id: channel.to_string(),
            value: false,
        });
    }
    out.sort_by_key(|r| r.timestamp);
    out
}

/// Distinct labels in first-seen order.
pub fn distinct_labels(records: &[AppUsageRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.app_label.clone()))
        .map(|r| r.app_label.clone())
        .collect()
}

// ----------------------------------------------------------------------------
// csv helpers

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(reader)
}

fn expect_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), IngestError> {
    let headers = rdr.headers().map_err(csv_error)?;
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(IngestError::Header {
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(())
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn field_count(rec: &csv::StringRecord, expected: usize) -> Result<(), LineFault> {
    if rec.len() == expected {
        Ok(())
    } else {
        Err(LineFault::FieldCount {
            expected,
            found: rec.len(),
        })
    }
}

fn timestamp_field(s: &str) -> Result<NaiveDateTime, LineFault> {
    parse_timestamp(s).ok_or_else(|| LineFault::BadTimestamp(s.to_string()))
}

fn skip_or_fail(
    skipped: &mut Vec<SkippedLine>,
    line: u64,
    fault: LineFault,
    strictness: Strictness,
) -> Result<(), IngestError> {
    match strictness {
        Strictness::FailFast => Err(IngestError::Line { line, reason: fault }),
        Strictness::Permissive => {
            skipped.push(SkippedLine { line, fault });
            Ok(())
        }
    }
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    IngestError::Csv {
        line,
        message: e.to_string(),
    }
}

fn csv_write_error(e: csv::Error) -> IngestError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IngestError::Io(io),
        other => IngestError::Csv {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}
