//! Binary state vectors over a sensor registry and the changes between them.

use std::fmt;
use std::io::Write;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::ingest::{SensorReading, SensorRegistry};
use crate::source::format_timestamp;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StateError {
    #[error("snapshot has {found} bits, registry has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("reading references unknown sensor {0:?}")]
    UnknownSensor(String),
    #[error("invalid state character {0:?}")]
    BadDigit(char),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub bits: Vec<bool>,
    pub timestamp: NaiveDateTime,
}

impl StateSnapshot {
    pub fn zeros(len: usize, timestamp: NaiveDateTime) -> Self {
        StateSnapshot {
            bits: vec![false; len],
            timestamp,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Character `k` is the value of the sensor at bit position `k`.
pub fn encode_state(snapshot: &StateSnapshot) -> String {
    snapshot.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn decode_state(encoded: &str, timestamp: NaiveDateTime) -> Result<StateSnapshot, StateError> {
    let bits = encoded
        .chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(StateError::BadDigit(other)),
        })
        .collect::<Result<_, _>>()?;
    Ok(StateSnapshot { bits, timestamp })
}

impl fmt::Display for StateSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&encode_state(self))
    }
}

/// A transition between two differing snapshots. The unit of classification.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateChange {
    pub previous: StateSnapshot,
    pub current: StateSnapshot,
    pub timestamp: NaiveDateTime,
    /// Sorted ascending.
    pub changed_positions: Vec<usize>,
}

impl StateChange {
    /// `None` when the snapshots are equal or of different length.
    pub fn between(previous: &StateSnapshot, current: &StateSnapshot) -> Option<Self> {
        if previous.len() != current.len() {
            return None;
        }
        let changed_positions: Vec<usize> = previous
            .bits
            .iter()
            .zip(&current.bits)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect();
        if changed_positions.is_empty() {
            return None;
        }
        Some(StateChange {
            previous: previous.clone(),
            current: current.clone(),
            timestamp: current.timestamp,
            changed_positions,
        })
    }

    pub fn rose(&self, position: usize) -> bool {
        self.changed_positions.contains(&position) && self.current.bits[position]
    }

    pub fn fell(&self, position: usize) -> bool {
        self.changed_positions.contains(&position) && !self.current.bits[position]
    }
}

/// One snapshot per reading; each differs from its predecessor at most at the
/// reading's bit.
pub fn fold_readings(
    readings: &[SensorReading],
    registry: &SensorRegistry,
    initial: &StateSnapshot,
) -> Result<Vec<StateSnapshot>, StateError> {
    if initial.len() != registry.len() {
        return Err(StateError::LengthMismatch {
            expected: registry.len(),
            found: initial.len(),
        });
    }
    let mut bits = initial.bits.clone();
    readings
        .iter()
        .map(|r| {
            let pos = registry
                .position(&r.sensor_id)
                .ok_or_else(|| StateError::UnknownSensor(r.sensor_id.clone()))?;
            bits[pos] = r.value;
            Ok(StateSnapshot {
                bits: bits.clone(),
                timestamp: r.timestamp,
            })
        })
        .collect()
}

/// Keeps only the last snapshot of each run of equal timestamps, so sensors
/// that flip at the same instant end up in a single change.
pub fn coalesce_instants(snapshots: Vec<StateSnapshot>) -> Vec<StateSnapshot> {
    let mut out: Vec<StateSnapshot> = Vec::with_capacity(snapshots.len());
    for s in snapshots {
        match out.last_mut() {
            Some(last) if last.timestamp == s.timestamp => *last = s,
            _ => out.push(s),
        }
    }
    out
}

pub fn detect_changes(snapshots: &[StateSnapshot]) -> Vec<StateChange> {
    snapshots
        .windows(2)
        .filter_map(|w| StateChange::between(&w[0], &w[1]))
        .collect()
}

/// The full tracker: fold, coalesce same-instant flips, diff against the
/// initial state and each predecessor.
pub fn track_changes(
    readings: &[SensorReading],
    registry: &SensorRegistry,
    initial: &StateSnapshot,
) -> Result<Vec<StateChange>, StateError> {
    let folded = coalesce_instants(fold_readings(readings, registry, initial)?);
    let mut all = Vec::with_capacity(folded.len() + 1);
    all.push(initial.clone());
    all.extend(folded);
    Ok(detect_changes(&all))
}

/// Debug dump as `timestamp,state_string`.
pub fn write_snapshots<W: Write>(mut writer: W, snapshots: &[StateSnapshot]) -> std::io::Result<()> {
    writeln!(writer, "timestamp,state_string")?;
    for s in snapshots {
        writeln!(writer, "{},{}", format_timestamp(s.timestamp), encode_state(s))?;
    }
    Ok(())
}
