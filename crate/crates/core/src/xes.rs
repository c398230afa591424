//! XES export and import.
//!
//! Each case becomes a trace named by its date. Each interval becomes a
//! `start` event and, when it has an end, a `complete` event. Both carry the
//! activity as `concept:name`, the interval's index within the trace as
//! `concept:instance` and the source as a plain `source` attribute.
//! Timestamps are written without a zone offset, as the logs carry local
//! clock time.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use chrono::{Duration, NaiveDate, NaiveDateTime};
use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, Event};
use quick_xml::{Reader, Writer};

use crate::integrate::{ActivityInterval, UnifiedEventLog};
use crate::source::Source;

const XES_NS: &str = "http://www.xes-standard.org/";
const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%S%.3f";
const EXTENSIONS: [(&str, &str, &str); 3] = [
    ("Concept", "concept", "http://www.xes-standard.org/concept.xesext"),
    ("Lifecycle", "lifecycle", "http://www.xes-standard.org/lifecycle.xesext"),
    ("Time", "time", "http://www.xes-standard.org/time.xesext"),
];

#[derive(Debug, thiserror::Error)]
pub enum XesError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("xml: {0}")]
    Xml(String),
    #[error("malformed log: {0}")]
    Malformed(String),
}

fn xml_err<E: std::fmt::Display>(e: E) -> XesError {
    XesError::Xml(e.to_string())
}

struct XesEvent<'a> {
    at: NaiveDateTime,
    instance: usize,
    complete: bool,
    interval: &'a ActivityInterval,
}

fn attr<W: Write>(w: &mut Writer<W>, tag: &str, key: &str, value: &str) -> Result<(), XesError> {
    w.write_event(Event::Empty(
        BytesStart::new(tag).with_attributes([("key", key), ("value", value)]),
    ))
    .map_err(xml_err)
}

pub fn write_xes<W: Write>(writer: W, log: &UnifiedEventLog) -> Result<(), XesError> {
    let mut w = Writer::new_with_indent(writer, b' ', 2);
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))
        .map_err(xml_err)?;
    w.write_event(Event::Start(BytesStart::new("log").with_attributes([
        ("xes.version", "1849-2016"),
        ("xes.features", ""),
        ("xmlns", XES_NS),
    ])))
    .map_err(xml_err)?;
    for (name, prefix, uri) in EXTENSIONS {
        w.write_event(Event::Empty(BytesStart::new("extension").with_attributes([
            ("name", name),
            ("prefix", prefix),
            ("uri", uri),
        ])))
        .map_err(xml_err)?;
    }
    w.write_event(Event::Start(
        BytesStart::new("global").with_attributes([("scope", "trace")]),
    ))
    .map_err(xml_err)?;
    attr(&mut w, "string", "concept:name", "__INVALID__")?;
    w.write_event(Event::End(BytesEnd::new("global"))).map_err(xml_err)?;
    w.write_event(Event::Start(
        BytesStart::new("global").with_attributes([("scope", "event")]),
    ))
    .map_err(xml_err)?;
    attr(&mut w, "string", "concept:name", "__INVALID__")?;
    attr(&mut w, "string", "lifecycle:transition", "complete")?;
    attr(&mut w, "date", "time:timestamp", "1970-01-01T00:00:00.000")?;
    w.write_event(Event::End(BytesEnd::new("global"))).map_err(xml_err)?;
    w.write_event(Event::Empty(BytesStart::new("classifier").with_attributes([
        ("name", "Activity"),
        ("keys", "concept:name lifecycle:transition"),
    ])))
    .map_err(xml_err)?;

    for date in log.dates() {
        w.write_event(Event::Start(BytesStart::new("trace"))).map_err(xml_err)?;
        attr(&mut w, "string", "concept:name", &date.format("%Y-%m-%d").to_string())?;
        let mut events = Vec::new();
        for (instance, iv) in log.case(date).iter().enumerate() {
            events.push(XesEvent {
                at: iv.start(),
                instance,
                complete: false,
                interval: iv,
            });
            if let Some(end) = iv.end() {
                events.push(XesEvent {
                    at: end,
                    instance,
                    complete: true,
                    interval: iv,
                });
            }
        }
        events.sort_by_key(|e| (e.at, e.instance, e.complete));
        for e in events {
            w.write_event(Event::Start(BytesStart::new("event"))).map_err(xml_err)?;
            attr(&mut w, "string", "concept:name", &e.interval.activity)?;
            attr(&mut w, "string", "concept:instance", &e.instance.to_string())?;
            attr(
                &mut w,
                "string",
                "lifecycle:transition",
                if e.complete { "complete" } else { "start" },
            )?;
            attr(&mut w, "date", "time:timestamp", &e.at.format(TIME_FORMAT).to_string())?;
            attr(&mut w, "string", "source", e.interval.source.as_str())?;
            w.write_event(Event::End(BytesEnd::new("event"))).map_err(xml_err)?;
        }
        w.write_event(Event::End(BytesEnd::new("trace"))).map_err(xml_err)?;
    }
    w.write_event(Event::End(BytesEnd::new("log"))).map_err(xml_err)?;
    Ok(())
}

pub fn xes_string(log: &UnifiedEventLog) -> String {
    let mut buf = Vec::new();
    write_xes(&mut buf, log).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 output")
}

#[derive(Default)]
struct PendingEvent {
    name: Option<String>,
    instance: Option<String>,
    transition: Option<String>,
    timestamp: Option<String>,
    source: Option<String>,
}

#[derive(Default)]
struct PendingInterval {
    activity: String,
    source: Option<Source>,
    start: Option<NaiveDateTime>,
    end: Option<NaiveDateTime>,
}

fn parse_time(s: &str) -> Result<NaiveDateTime, XesError> {
    let trimmed = s.trim_end_matches('Z');
    let trimmed = match trimmed.rfind(['+', '-']) {
        Some(i) if i > 10 => &trimmed[..i],
        _ => trimmed,
    };
    NaiveDateTime::parse_from_str(trimmed, "%Y-%m-%dT%H:%M:%S%.f")
        .map_err(|e| XesError::Malformed(format!("timestamp {s:?}: {e}")))
}

fn finish_trace(
    case: Option<NaiveDate>,
    pending: BTreeMap<usize, PendingInterval>,
    out: &mut Vec<ActivityInterval>,
) -> Result<(), XesError> {
    let case = case.ok_or_else(|| XesError::Malformed("trace without a date name".into()))?;
    for (instance, p) in pending {
        let missing = |what: &str| XesError::Malformed(format!("{case} instance {instance}: no {what}"));
        let start = p.start.ok_or_else(|| missing("start event"))?;
        let source = p.source.ok_or_else(|| missing("source"))?;
        if start.date() != case {
            return Err(XesError::Malformed(format!(
                "{case} instance {instance}: start on {}",
                start.date()
            )));
        }
        let next_date = match p.end {
            None => false,
            Some(end) if end.date() == case => false,
            Some(end) if end.date() == case + Duration::days(1) => true,
            Some(end) => {
                return Err(XesError::Malformed(format!(
                    "{case} instance {instance}: end on {}",
                    end.date()
                )))
            }
        };
        out.push(ActivityInterval {
            case_id: case,
            source,
            activity: p.activity,
            start_time: start.time(),
            end_time: p.end.map(|e| e.time()),
            next_date,
        });
    }
    Ok(())
}

/// Reads a log written by [`write_xes`]. Events are grouped back into
/// intervals by `concept:instance`.
pub fn read_xes<R: BufRead>(reader: R) -> Result<UnifiedEventLog, XesError> {
    let mut rdr = Reader::from_reader(reader);
    rdr.config_mut().trim_text(true);
    let mut buf = Vec::new();
    let mut out = Vec::new();
    let mut in_trace = false;
    let mut case: Option<NaiveDate> = None;
    let mut pending: BTreeMap<usize, PendingInterval> = BTreeMap::new();
    let mut event: Option<PendingEvent> = None;
    loop {
        match rdr.read_event_into(&mut buf).map_err(xml_err)? {
            Event::Eof => break,
            Event::Start(e) => match e.name().as_ref() {
                b"trace" => {
                    in_trace = true;
                    case = None;
                    pending.clear();
                }
                b"event" if in_trace => event = Some(PendingEvent::default()),
                _ => {}
            },
            Event::Empty(e) if in_trace => {
                let (mut key, mut value) = (String::new(), String::new());
                for a in e.attributes() {
                    let a = a.map_err(xml_err)?;
                    let v = a.unescape_value().map_err(xml_err)?.into_owned();
                    match a.key.as_ref() {
                        b"key" => key = v,
                        b"value" => value = v,
                        _ => {}
                    }
                }
                match event.as_mut() {
                    Some(ev) => match key.as_str() {
                        "concept:name" => ev.name = Some(value),
                        "concept:instance" => ev.instance = Some(value),
                        "lifecycle:transition" => ev.transition = Some(value),
                        "time:timestamp" => ev.timestamp = Some(value),
                        "source" => ev.source = Some(value),
                        _ => {}
                    },
                    None if key == "concept:name" => {
                        case = Some(
                            NaiveDate::parse_from_str(&value, "%Y-%m-%d")
                                .map_err(|e| XesError::Malformed(format!("trace name {value:?}: {e}")))?,
                        );
                    }
                    None => {}
                }
            }
            Event::End(e) => match e.name().as_ref() {
                b"event" => {
                    let Some(ev) = event.take() else { continue };
                    let instance: usize = ev
                        .instance
                        .as_deref()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| XesError::Malformed("event without concept:instance".into()))?;
                    let at = parse_time(ev.timestamp.as_deref().unwrap_or_default())?;
                    let p = pending.entry(instance).or_default();
                    p.activity = ev.name.unwrap_or_default();
                    if let Some(s) = ev.source {
                        p.source = Some(s.parse().map_err(|_| XesError::Malformed(format!("source {s:?}")))?);
                    }
                    match ev.transition.as_deref() {
                        Some("start") => p.start = Some(at),
                        Some("complete") => p.end = Some(at),
                        other => return Err(XesError::Malformed(format!("transition {other:?}"))),
                    }
                }
                b"trace" => {
                    finish_trace(case, std::mem::take(&mut pending), &mut out)?;
                    in_trace = false;
                }
                _ => {}
            },
            _ => {}
        }
        buf.clear();
    }
    Ok(UnifiedEventLog::new(out))
}
