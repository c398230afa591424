use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use serde::{Deserialize, Serialize};

/// The device family a record came from. Rendered as the `Type` column of the
/// unified event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Ambient,
    Smartphone,
    Wristband,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Ambient, Source::Smartphone, Source::Wristband];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Ambient => "Ambient",
            Source::Smartphone => "Smartphone",
            Source::Wristband => "Wristband",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown source {0:?}")]
pub struct UnknownSource(pub String);

impl FromStr for Source {
    type Err = UnknownSource;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ambient" => Ok(Source::Ambient),
            "smartphone" => Ok(Source::Smartphone),
            "wristband" => Ok(Source::Wristband),
            _ => Err(UnknownSource(s.to_string())),
        }
    }
}

/// ISO-8601 local timestamp, seconds precision.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";
pub const CLOCK_FORMAT: &str = "%H:%M:%S";

pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT).ok()
}

pub fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

pub fn parse_clock(s: &str) -> Option<NaiveTime> {
    NaiveTime::parse_from_str(s.trim(), CLOCK_FORMAT).ok()
}

pub fn format_clock(t: NaiveTime) -> String {
    t.format(CLOCK_FORMAT).to_string()
}

/// How case dates are written in exported rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DateStyle {
    /// `M/D/YYYY`, no zero padding.
    #[default]
    Table,
    /// `YYYY-MM-DD`.
    Iso,
}

pub fn format_date(date: NaiveDate, style: DateStyle) -> String {
    match style {
        DateStyle::Table => date.format("%-m/%-d/%Y").to_string(),
        DateStyle::Iso => date.format("%Y-%m-%d").to_string(),
    }
}

/// Accepts either date style.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    NaiveDate::parse_from_str(s, "%m/%d/%Y")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
        .ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_dates_are_unpadded() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 8).unwrap();
        assert_eq!(format_date(d, DateStyle::Table), "1/8/2020");
        assert_eq!(format_date(d, DateStyle::Iso), "2020-01-08");
        assert_eq!(parse_date("1/8/2020"), Some(d));
        assert_eq!(parse_date("2020-01-08"), Some(d));
    }

    #[test]
    fn source_names_round_trip() {
        for s in Source::ALL {
            assert_eq!(s.as_str().parse::<Source>().unwrap(), s);
        }
        assert!("fridge".parse::<Source>().is_err());
    }
}
