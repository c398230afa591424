use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::{ActivityInterval, UnifiedEventLog};
use crate::source::{format_clock, format_date, parse_clock, parse_date, DateStyle, Source};

pub const EVENT_LOG_HEADER: [&str; 6] = ["Date", "Type", "Activity", "Start Time", "End Time", "Next date"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventLogFormat {
    pub header: bool,
    pub date_style: DateStyle,
}

impl Default for EventLogFormat {
    fn default() -> Self {
        EventLogFormat {
            header: true,
            date_style: DateStyle::Table,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
}

fn bool_title(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

/// One header-less row in column order.
pub fn format_row(iv: &ActivityInterval, style: DateStyle) -> String {
    format!(
        "{},{},{},{},{},{}",
        format_date(iv.case_id, style),
        iv.source.as_str(),
        iv.activity,
        format_clock(iv.start_time),
        iv.end_time.map(format_clock).unwrap_or_default(),
        bool_title(iv.next_date)
    )
}

pub fn write_event_log<W: Write>(
    mut writer: W,
    log: &UnifiedEventLog,
    format: EventLogFormat,
) -> Result<(), LogIoError> {
    if format.header {
        writeln!(writer, "{}", EVENT_LOG_HEADER.join(","))?;
    }
    for iv in log.intervals() {
        writeln!(writer, "{}", format_row(iv, format.date_style))?;
    }
    writer.flush()?;
    Ok(())
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

/// Parses the six columns of one row.
pub fn parse_row(fields: &[&str]) -> Result<ActivityInterval, String> {
    if fields.len() != 6 {
        return Err(format!("expected 6 fields, found {}", fields.len()));
    }
    let f: Vec<&str> = fields.iter().map(|s| s.trim()).collect();
    let case_id = parse_date(f[0]).ok_or_else(|| format!("bad date {:?}", f[0]))?;
    let source: Source = f[1].parse().map_err(|e: crate::source::UnknownSource| e.to_string())?;
    if f[2].is_empty() {
        return Err("empty activity".into());
    }
    let start_time = parse_clock(f[3]).ok_or_else(|| format!("bad start time {:?}", f[3]))?;
    let end_time = if f[4].is_empty() {
        None
    } else {
        Some(parse_clock(f[4]).ok_or_else(|| format!("bad end time {:?}", f[4]))?)
    };
    let next_date = parse_bool(f[5]).ok_or_else(|| format!("bad next-date flag {:?}", f[5]))?;
    if let (Some(end), false) = (end_time, next_date) {
        if end < start_time {
            return Err(format!("end {} before start {} on the same day", f[4], f[3]));
        }
    }
    Ok(ActivityInterval {
        case_id,
        source,
        activity: f[2].to_string(),
        start_time,
        end_time,
        next_date,
    })
}

/// Reads a log with or without the header row.
pub fn read_event_log<R: Read>(reader: R) -> Result<UnifiedEventLog, LogIoError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (idx == 0 && t.to_ascii_lowercase().starts_with("date,")) {
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        out.push(parse_row(&fields).map_err(|reason| LogIoError::Row { line: idx + 1, reason })?);
    }
    Ok(UnifiedEventLog::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_row() {
        let iv = parse_row(
            &"1/8/2020,Ambient,toilet,23:05:39,23:07:21,False"
                .split(',')
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(iv.activity, "toilet");
        assert!(!iv.next_date);
        assert_eq!(
            format_row(&iv, DateStyle::Table),
            "1/8/2020,Ambient,toilet,23:05:39,23:07:21,False"
        );
        assert_eq!(
            format_row(&iv, DateStyle::Iso),
            "2020-01-08,Ambient,toilet,23:05:39,23:07:21,False"
        );
    }

    #[test]
    fn round_trip_with_and_without_header() {
        let text = "Date,Type,Activity,Start Time,End Time,Next date\n\
1/8/2020,Ambient,sleeping,23:04:33,08:28:59,True\n\
1/8/2020,Smartphone,messaging,23:17:28,23:18:06,False\n\
1/8/2020,Wristband,sleep,23:30:00,,False\n";
        let log = read_event_log(text.as_bytes()).unwrap();
        assert_eq!(log.len(), 3);
        let mut buf = Vec::new();
        write_event_log(&mut buf, &log, EventLogFormat::default()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);

        let mut bare = Vec::new();
        let fmt = EventLogFormat {
            header: false,
            date_style: DateStyle::Iso,
        };
        write_event_log(&mut bare, &log, fmt).unwrap();
        assert_eq!(read_event_log(bare.as_slice()).unwrap(), log);
    }

    #[test]
    fn bad_rows_name_line() {
        let err = read_event_log("1/8/2020,Ambient,toilet,25:99:00,,False\n".as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("line 1"), "{err}");
    }
}
