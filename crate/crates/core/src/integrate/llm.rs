//! Model-driven integration: one prompt per case date carrying that day's
//! labeled records and the following day's, answered with header-less log
//! rows.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use chrono::{Duration, NaiveDate};
use rayon::prelude::*;

use super::io::{format_row, parse_row};
use super::{integrate_native, ActivityInterval, UnifiedEventLog};
use crate::abstraction::labels::LabeledEvent;
use crate::abstraction::llm::{Completer, CompletionError};
use crate::abstraction::prompt::{check_placeholders, render, PromptError};
use crate::abstraction::taxonomy::{ActivityLabel, LabelTaxonomy, Phase};
use crate::abstraction::tokens::{enforce_ceiling, OversizedPrompt};
use crate::source::{format_clock, format_date, parse_clock, parse_date, DateStyle, Source};

pub const INTEGRATION_PLACEHOLDERS: [&str; 6] = [
    "labels",
    "examples",
    "date",
    "day_records",
    "next_day_records",
    "output_format",
];

pub const DEFAULT_INTEGRATION_TEMPLATE: &str = include_str!("../../assets/integration_prompt.txt");

/// Stands in for a day without records.
pub const EMPTY_DAY_MARKER: &str = "(no records)";

/// Answer for a date on which no activity starts.
pub const NO_ROWS_ANSWER: &str = "NONE";

pub const DATE_LINE: &str = "Date of interest:";
pub const DAY_HEADING: &str = "Records for the date of interest:";
pub const NEXT_DAY_HEADING: &str = "Records for the following day:";

#[derive(Debug, thiserror::Error)]
pub enum IntegrationError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Oversized(#[from] OversizedPrompt),
    #[error("integration request for {date}: {source}")]
    Completion {
        date: NaiveDate,
        #[source]
        source: CompletionError,
    },
    #[error("no parseable rows for {date} ({} rejected)", rejects.len())]
    NoRows {
        date: NaiveDate,
        raw: String,
        rejects: Vec<RejectedRow>,
    },
    #[error("integration needs exactly two worked examples, got {0}")]
    ExampleCount(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    /// 1-based line in the response.
    pub line: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntegrationParse {
    pub intervals: Vec<ActivityInterval>,
    pub rejects: Vec<RejectedRow>,
}

/// A worked example: two days of records and the rows they yield.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrationExample {
    pub date: NaiveDate,
    pub day: Vec<LabeledEvent>,
    pub next_day: Vec<LabeledEvent>,
    pub answer: Vec<ActivityInterval>,
}

impl IntegrationExample {
    /// Derives the answer with the native integrator.
    pub fn derive(
        date: NaiveDate,
        day: Vec<LabeledEvent>,
        next_day: Vec<LabeledEvent>,
        taxonomies: &[LabelTaxonomy],
    ) -> Self {
        let answer = native_day(date, &day, &next_day, taxonomies);
        IntegrationExample {
            date,
            day,
            next_day,
            answer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrationTemplate {
    body: String,
    examples: Vec<IntegrationExample>,
    date_style: DateStyle,
}

impl IntegrationTemplate {
    pub fn new(body: impl Into<String>, examples: Vec<IntegrationExample>) -> Result<Self, IntegrationError> {
        let body = body.into();
        check_placeholders(&body, &INTEGRATION_PLACEHOLDERS)?;
        if examples.len() != 2 {
            return Err(IntegrationError::ExampleCount(examples.len()));
        }
        Ok(IntegrationTemplate {
            body,
            examples,
            date_style: DateStyle::Table,
        })
    }

    /// The bundled template with two built-in examples.
    pub fn standard(taxonomies: &[LabelTaxonomy]) -> Self {
        Self::new(DEFAULT_INTEGRATION_TEMPLATE, standard_examples(taxonomies)).expect("bundled integration template")
    }

    pub fn with_date_style(mut self, style: DateStyle) -> Self {
        self.date_style = style;
        self
    }

    pub fn date_style(&self) -> DateStyle {
        self.date_style
    }

    pub fn examples(&self) -> &[IntegrationExample] {
        &self.examples
    }

    fn record_rows(&self, events: &[LabeledEvent]) -> String {
        let rows: Vec<String> = sorted_records(events)
            .into_iter()
            .map(|e| {
                format!(
                    "{},{},{},{}",
                    format_date(e.timestamp.date(), self.date_style),
                    e.source.as_str(),
                    e.label,
                    format_clock(e.timestamp.time())
                )
            })
            .collect();
        if rows.is_empty() {
            EMPTY_DAY_MARKER.to_string()
        } else {
            rows.join("\n")
        }
    }

    fn answer_rows(&self, rows: &[ActivityInterval]) -> String {
        if rows.is_empty() {
            return NO_ROWS_ANSWER.to_string();
        }
        rows.iter()
            .map(|r| format_row(r, self.date_style))
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn render_examples(&self) -> String {
        self.examples
            .iter()
            .enumerate()
            .map(|(i, ex)| {
                format!(
                    "### Example {}\nDate: {}\nRecords for that date:\n{}\nRecords for the day after:\n{}\nAnswer:\n{}",
                    i + 1,
                    format_date(ex.date, self.date_style),
                    self.record_rows(&ex.day),
                    self.record_rows(&ex.next_day),
                    self.answer_rows(&ex.answer)
                )
            })
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

fn sorted_records(events: &[LabeledEvent]) -> Vec<&LabeledEvent> {
    let mut v: Vec<&LabeledEvent> = events.iter().filter(|e| !e.label.is_none()).collect();
    v.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.source.cmp(&b.source)));
    v
}

fn label_overview(taxonomies: &[LabelTaxonomy]) -> String {
    taxonomies
        .iter()
        .map(|t| {
            let phases: Vec<&str> = t.phases().iter().map(|p| p.as_str()).collect();
            format!(
                "- {}: {} (phases: {})",
                t.source().as_str(),
                t.activities().join(", "),
                phases.join(", ")
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn output_format(date: NaiveDate, style: DateStyle) -> String {
    let d = format_date(date, style);
    format!(
        "Answer format: one row per activity that starts on {d}, ordered by start time, as\n\
date,type,activity,start time,end time,next date\n\
using {d} as the date, HH:MM:SS times, the activity name without its phase, and True or False in the last column. \
Do not write a header row or any other text. If no activity starts on {d}, answer {NO_ROWS_ANSWER}."
    )
}

pub fn build_integration_prompt(
    date: NaiveDate,
    day: &[LabeledEvent],
    next_day: &[LabeledEvent],
    taxonomies: &[LabelTaxonomy],
    template: &IntegrationTemplate,
    token_ceiling: Option<usize>,
) -> Result<String, IntegrationError> {
    let values = HashMap::from([
        ("labels", label_overview(taxonomies)),
        ("examples", template.render_examples()),
        ("date", format_date(date, template.date_style)),
        ("day_records", template.record_rows(day)),
        ("next_day_records", template.record_rows(next_day)),
        ("output_format", output_format(date, template.date_style)),
    ]);
    let prompt = render(&template.body, &values)?;
    enforce_ceiling(&prompt, token_ceiling)?;
    Ok(prompt)
}

/// Parses header-less rows for `date`. Rows for other dates, headers and
/// unparseable lines are rejected; an answer of `NONE` is an empty day.
pub fn parse_integration_output(raw: &str, date: NaiveDate) -> Result<IntegrationParse, IntegrationError> {
    let mut out = IntegrationParse::default();
    let mut declared_empty = false;
    for (idx, line) in raw.lines().enumerate() {
        let t = line.trim().trim_matches('`').trim();
        if t.is_empty() || t.eq_ignore_ascii_case("csv") {
            continue;
        }
        if t.trim_end_matches('.').eq_ignore_ascii_case(NO_ROWS_ANSWER) {
            declared_empty = true;
            continue;
        }
        let reject = |reason: String| RejectedRow {
            line: idx + 1,
            text: line.to_string(),
            reason,
        };
        if t.to_ascii_lowercase().starts_with("date,") {
            out.rejects.push(reject("header row".into()));
            continue;
        }
        let fields: Vec<&str> = t.split(',').collect();
        match parse_row(&fields) {
            Ok(iv) if iv.case_id != date => out
                .rejects
                .push(reject(format!("row for {} instead of {date}", iv.case_id))),
            Ok(iv) => out.intervals.push(iv),
            Err(reason) => out.rejects.push(reject(reason)),
        }
    }
    if out.intervals.is_empty() && !declared_empty {
        return Err(IntegrationError::NoRows {
            date,
            raw: raw.to_string(),
            rejects: out.rejects,
        });
    }
    Ok(out)
}

/// Rows the native integrator assigns to `date` given the two-day window.
pub fn native_day(
    date: NaiveDate,
    day: &[LabeledEvent],
    next_day: &[LabeledEvent],
    taxonomies: &[LabelTaxonomy],
) -> Vec<ActivityInterval> {
    let window: Vec<LabeledEvent> = day.iter().chain(next_day).cloned().collect();
    match integrate_native(&window, taxonomies) {
        Ok((log, _)) => log.case(date).to_vec(),
        Err(_) => Vec::new(),
    }
}

/// Splits labeled events by calendar date.
pub fn events_by_date(events: &[LabeledEvent]) -> HashMap<NaiveDate, Vec<LabeledEvent>> {
    let mut out: HashMap<NaiveDate, Vec<LabeledEvent>> = HashMap::new();
    for e in events {
        out.entry(e.timestamp.date()).or_default().push(e.clone());
    }
    out
}

/// Dates a model call is made for: every date carrying a non-`None` label.
pub fn case_dates(events: &[LabeledEvent]) -> Vec<NaiveDate> {
    events
        .iter()
        .filter(|e| !e.label.is_none())
        .map(|e| e.timestamp.date())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub struct ModelIntegrator {
    completer: Arc<dyn Completer>,
    template: IntegrationTemplate,
    taxonomies: Vec<LabelTaxonomy>,
    token_ceiling: Option<usize>,
    parallelism: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelIntegration {
    pub log: UnifiedEventLog,
    pub rejects: Vec<(NaiveDate, RejectedRow)>,
    pub requests: usize,
}

impl ModelIntegrator {
    pub fn new(completer: Arc<dyn Completer>, template: IntegrationTemplate, taxonomies: Vec<LabelTaxonomy>) -> Self {
        ModelIntegrator {
            completer,
            template,
            taxonomies,
            token_ceiling: None,
            parallelism: 1,
        }
    }

    pub fn with_token_ceiling(mut self, ceiling: Option<usize>) -> Self {
        self.token_ceiling = ceiling;
        self
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism.max(1);
        self
    }

    pub fn prompt_for(
        &self,
        date: NaiveDate,
        by_date: &HashMap<NaiveDate, Vec<LabeledEvent>>,
    ) -> Result<String, IntegrationError> {
        let empty = Vec::new();
        let day = by_date.get(&date).unwrap_or(&empty);
        let next = by_date.get(&(date + Duration::days(1))).unwrap_or(&empty);
        build_integration_prompt(date, day, next, &self.taxonomies, &self.template, self.token_ceiling)
    }

    fn run_day(
        &self,
        date: NaiveDate,
        by_date: &HashMap<NaiveDate, Vec<LabeledEvent>>,
    ) -> Result<IntegrationParse, IntegrationError> {
        let prompt = self.prompt_for(date, by_date)?;
        let raw = self
            .completer
            .complete(&prompt)
            .map_err(|source| IntegrationError::Completion { date, source })?;
        parse_integration_output(&raw, date)
    }

    /// One request per case date; days run in parallel and are merged in
    /// date order.
    pub fn integrate(&self, events: &[LabeledEvent]) -> Result<ModelIntegration, IntegrationError> {
        let by_date = events_by_date(events);
        let dates = case_dates(events);
        let results: Vec<Result<IntegrationParse, IntegrationError>> = if self.parallelism > 1 && dates.len() > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.parallelism)
                .build()
                .expect("thread pool");
            pool.install(|| dates.par_iter().map(|d| self.run_day(*d, &by_date)).collect())
        } else {
            dates.iter().map(|d| self.run_day(*d, &by_date)).collect()
        };
        let mut intervals = Vec::new();
        let mut rejects = Vec::new();
        for (date, r) in dates.iter().zip(results) {
            let parsed = r?;
            intervals.extend(parsed.intervals);
            rejects.extend(parsed.rejects.into_iter().map(|x| (*date, x)));
        }
        Ok(ModelIntegration {
            log: UnifiedEventLog::new(intervals),
            rejects,
            requests: dates.len(),
        })
    }
}

/// Reads the query section of an integration prompt back into records.
/// Returns the date of interest and both days' events.
pub fn read_integration_query(
    prompt: &str,
    taxonomies: &[LabelTaxonomy],
) -> Option<(NaiveDate, Vec<LabeledEvent>, Vec<LabeledEvent>)> {
    let lines: Vec<&str> = prompt.lines().collect();
    let date_idx = lines.iter().rposition(|l| l.trim_start().starts_with(DATE_LINE))?;
    let date = parse_date(lines[date_idx].trim_start()[DATE_LINE.len()..].trim())?;
    let mut day = Vec::new();
    let mut next = Vec::new();
    // 0: outside a record section, 1: date of interest, 2: following day
    let mut section = 0;
    for l in &lines[date_idx + 1..] {
        let t = l.trim();
        if t == DAY_HEADING {
            section = 1;
        } else if t == NEXT_DAY_HEADING {
            section = 2;
        } else if t.is_empty() {
            if section == 2 {
                break;
            }
            section = 0;
        } else if t != EMPTY_DAY_MARKER && section != 0 {
            let e = parse_record(t, taxonomies)?;
            if section == 1 {
                day.push(e);
            } else {
                next.push(e);
            }
        }
    }
    Some((date, day, next))
}

fn parse_record(line: &str, taxonomies: &[LabelTaxonomy]) -> Option<LabeledEvent> {
    let f: Vec<&str> = line.split(',').map(str::trim).collect();
    if f.len() != 4 {
        return None;
    }
    let date = parse_date(f[0])?;
    let source: Source = f[1].parse().ok()?;
    let label = taxonomies.iter().find(|t| t.source() == source)?.lookup(f[2])?.clone();
    let time = parse_clock(f[3])?;
    Some(LabeledEvent {
        timestamp: date.and_time(time),
        source,
        label,
        backend: String::new(),
    })
}

fn ev(date: NaiveDate, clock: &str, source: Source, activity: &str, phase: Phase) -> LabeledEvent {
    LabeledEvent {
        timestamp: date.and_time(parse_clock(clock).expect("clock literal")),
        source,
        label: ActivityLabel::new(activity, phase),
        backend: String::new(),
    }
}

/// Two illustrations: a night that crosses midnight, and a morning that
/// opens with the end of the previous night.
pub fn standard_examples(taxonomies: &[LabelTaxonomy]) -> Vec<IntegrationExample> {
    use Phase::{End, Start};
    use Source::{Ambient, Smartphone, Wristband};
    let d1 = NaiveDate::from_ymd_opt(2020, 1, 8).expect("date literal");
    let d2 = d1 + Duration::days(1);
    let d3 = d2 + Duration::days(1);
    let first = IntegrationExample::derive(
        d1,
        vec![
            ev(d1, "21:40:12", Ambient, "watching_tv", Start),
            ev(d1, "22:51:03", Ambient, "watching_tv", End),
            ev(d1, "23:04:33", Ambient, "sleeping", Start),
            ev(d1, "23:05:39", Ambient, "toilet", Start),
            ev(d1, "23:07:21", Ambient, "toilet", End),
            ev(d1, "23:17:28", Smartphone, "messaging", Start),
            ev(d1, "23:18:06", Smartphone, "messaging", End),
            ev(d1, "23:20:32", Wristband, "sleep", Start),
        ],
        vec![
            ev(d2, "06:58:40", Wristband, "sleep", End),
            ev(d2, "08:28:59", Ambient, "sleeping", End),
            ev(d2, "08:41:10", Ambient, "toilet", Start),
            ev(d2, "08:44:52", Ambient, "toilet", End),
        ],
        taxonomies,
    );
    let second = IntegrationExample::derive(
        d2,
        first.next_day.clone(),
        vec![
            ev(d3, "07:02:15", Ambient, "cooking", Start),
            ev(d3, "07:31:40", Ambient, "cooking", End),
        ],
        taxonomies,
    );
    vec![first, second]
}
