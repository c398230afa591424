use std::io::{Read, Write};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use super::taxonomy::{ActivityLabel, LabelTaxonomy};
use crate::source::{format_timestamp, parse_timestamp, Source};

/// A classified change or record edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEvent {
    pub timestamp: NaiveDateTime,
    pub source: Source,
    pub label: ActivityLabel,
    /// Empty for ground truth.
    pub backend: String,
}

#[derive(Debug, thiserror::Error)]
pub enum LabelFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
}

/// Writes `timestamp,source,label,backend`.
pub fn write_labels<W: Write>(writer: W, events: &[LabeledEvent]) -> Result<(), LabelFileError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| LabelFileError::Io(e.into());
    w.write_record(["timestamp", "source", "label", "backend"])
        .map_err(io)?;
    for e in events {
        w.write_record([
            format_timestamp(e.timestamp),
            e.source.to_string(),
            e.label.to_string(),
            e.backend.clone(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes ground-truth labels as `timestamp,source,label`.
pub fn write_truth_labels<W: Write>(writer: W, events: &[LabeledEvent]) -> Result<(), LabelFileError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| LabelFileError::Io(e.into());
    w.write_record(["timestamp", "source", "label"]).map_err(io)?;
    for e in events {
        w.write_record([format_timestamp(e.timestamp), e.source.to_string(), e.label.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads either layout; labels are resolved against the taxonomy of their
/// source.
pub fn read_labels<R: Read>(reader: R, taxonomies: &[LabelTaxonomy]) -> Result<Vec<LabeledEvent>, LabelFileError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| LabelFileError::Line {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |message: String| LabelFileError::Line { line, message };
        if rec.len() != 3 && rec.len() != 4 {
            return Err(bad(format!("expected 3 or 4 fields, found {}", rec.len())));
        }
        let timestamp = parse_timestamp(rec[0].trim()).ok_or_else(|| bad(format!("bad timestamp {:?}", &rec[0])))?;
        let source: Source = rec[1]
            .trim()
            .parse()
            .map_err(|e: crate::source::UnknownSource| bad(e.to_string()))?;
        let taxonomy = taxonomies
            .iter()
            .find(|t| t.source() == source)
            .ok_or_else(|| bad(format!("no taxonomy for {source}")))?;
        let label = taxonomy
            .lookup(rec[2].trim())
            .cloned()
            .ok_or_else(|| bad(format!("label {:?} is not in the {source} taxonomy", &rec[2])))?;
        out.push(LabeledEvent {
            timestamp,
            source,
            label,
            backend: rec.get(3).unwrap_or("").trim().to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::taxonomy::{Phase, TaxonomySet};

    #[test]
    fn round_trip_both_layouts() {
        let set = TaxonomySet::reference();
        let taxes: Vec<LabelTaxonomy> = Source::ALL.iter().map(|s| set.taxonomy(*s).unwrap()).collect();
        let events = vec![
            LabeledEvent {
                timestamp: parse_timestamp("2020-01-08T23:04:33").unwrap(),
                source: Source::Ambient,
                label: ActivityLabel::new("sleeping", Phase::Start),
                backend: "rules".into(),
            },
            LabeledEvent {
                timestamp: parse_timestamp("2020-01-08T23:17:28").unwrap(),
                source: Source::Smartphone,
                label: ActivityLabel::None,
                backend: "rules".into(),
            },
        ];
        let mut buf = Vec::new();
        write_labels(&mut buf, &events).unwrap();
        assert_eq!(read_labels(buf.as_slice(), &taxes).unwrap(), events);

        let mut buf = Vec::new();
        write_truth_labels(&mut buf, &events).unwrap();
        let back = read_labels(buf.as_slice(), &taxes).unwrap();
        assert_eq!(back[0].label, events[0].label);
        assert_eq!(back[0].backend, "");
    }

    #[test]
    fn foreign_label_names_line() {
        let set = TaxonomySet::reference();
        let taxes = vec![set.taxonomy(Source::Ambient).unwrap()];
        let err = read_labels(
            "timestamp,source,label\n2020-01-08T00:00:00,ambient,flying_start\n".as_bytes(),
            &taxes,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
    }
}
