use chrono::{Duration, NaiveDateTime, NaiveTime};

use super::pairing::AbsoluteInterval;
use super::ActivityInterval;

/// Activities may span at most two consecutive calendar days.
pub const HORIZON_HOURS: i64 = 48;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HorizonError {
    #[error("{activity} from {start} to {end} lasts 48 h or more")]
    TooLong {
        activity: String,
        start: NaiveDateTime,
        end: NaiveDateTime,
    },
    #[error("{activity} from {start} to {end} ends more than one day after it starts")]
    BeyondNextDay {
        activity: String,
        start: NaiveDateTime,
        end: NaiveDateTime,
    },
    #[error("{activity} ends at {end}, before its start {start}")]
    Inverted {
        activity: String,
        start: NaiveDateTime,
        end: NaiveDateTime,
    },
}

/// Assigns an instance to the date it started on. An instance that crosses
/// midnight keeps its true end clock time and gets `next_date = true`; nothing
/// is emitted for the following date. An end at exactly 00:00:00 belongs to
/// the previous day and is written as 23:59:59.
pub fn assign_and_trim(interval: &AbsoluteInterval) -> Result<ActivityInterval, HorizonError> {
    let (start, end) = (interval.start, interval.end);
    let err_fields = || (interval.activity.clone(), start, end);
    if end < start {
        let (activity, start, end) = err_fields();
        return Err(HorizonError::Inverted { activity, start, end });
    }
    if end - start >= Duration::hours(HORIZON_HOURS) {
        let (activity, start, end) = err_fields();
        return Err(HorizonError::TooLong { activity, start, end });
    }
    let midnight = NaiveTime::MIN;
    let (end_date, end_time) = if end > start && end.time() == midnight {
        (
            end.date() - Duration::days(1),
            NaiveTime::from_hms_opt(23, 59, 59).expect("valid time"),
        )
    } else {
        (end.date(), end.time())
    };
    let case_id = start.date();
    let next_date = match (end_date - case_id).num_days() {
        0 => false,
        1 => true,
        _ => {
            let (activity, start, end) = err_fields();
            return Err(HorizonError::BeyondNextDay { activity, start, end });
        }
    };
    Ok(ActivityInterval {
        case_id,
        source: interval.source,
        activity: interval.activity.clone(),
        start_time: start.time(),
        end_time: Some(end_time),
        next_date,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{parse_clock, parse_timestamp, Source};

    fn abs(start: &str, end: &str) -> AbsoluteInterval {
        AbsoluteInterval {
            source: Source::Ambient,
            activity: "sleeping".into(),
            start: parse_timestamp(start).unwrap(),
            end: parse_timestamp(end).unwrap(),
            events: 2,
        }
    }

    #[test]
    fn cross_midnight_keeps_true_end() {
        let r = assign_and_trim(&abs("2020-01-08T23:04:33", "2020-01-09T08:28:59")).unwrap();
        assert_eq!(r.case_id, parse_timestamp("2020-01-08T00:00:00").unwrap().date());
        assert_eq!(r.start_time, parse_clock("23:04:33").unwrap());
        assert_eq!(r.end_time, parse_clock("08:28:59"));
        assert!(r.next_date);
    }

    #[test]
    fn same_day() {
        let r = assign_and_trim(&abs("2020-01-08T23:05:39", "2020-01-08T23:07:21")).unwrap();
        assert!(!r.next_date);
        assert_eq!(r.end_time, parse_clock("23:07:21"));
    }

    /// Enumerates ends at ±1 s around the following midnight.
    #[test]
    fn midnight_boundary() {
        let cases = [
            ("2020-01-08T23:59:59", false, "23:59:59"),
            ("2020-01-09T00:00:00", false, "23:59:59"),
            ("2020-01-09T00:00:01", true, "00:00:01"),
        ];
        for (end, next, clock) in cases {
            let r = assign_and_trim(&abs("2020-01-08T22:00:00", end)).unwrap();
            assert_eq!(r.next_date, next, "{end}");
            assert_eq!(r.end_time, parse_clock(clock), "{end}");
        }
    }

    #[test]
    fn horizon_violations() {
        assert!(matches!(
            assign_and_trim(&abs("2020-01-08T10:00:00", "2020-01-10T10:00:00")),
            Err(HorizonError::TooLong { .. })
        ));
        assert!(matches!(
            assign_and_trim(&abs("2020-01-08T23:00:00", "2020-01-10T01:00:00")),
            Err(HorizonError::BeyondNextDay { .. })
        ));
        assert!(matches!(
            assign_and_trim(&abs("2020-01-08T23:00:00", "2020-01-08T22:00:00")),
            Err(HorizonError::Inverted { .. })
        ));
        // ends at the second midnight: still inside the two-day window
        let r = assign_and_trim(&abs("2020-01-08T00:00:01", "2020-01-10T00:00:00")).unwrap();
        assert!(r.next_date);
        assert_eq!(r.end_time, parse_clock("23:59:59"));
    }
}
