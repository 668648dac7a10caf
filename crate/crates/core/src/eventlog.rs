//! Transparency-focused event log ingestion.
//!
//! Events arrive as JSON lines carrying the grouped data-disclosed object
//! plus case id, activity, and timestamp. Ingestion is streaming, tolerant
//! of bad lines (collected as rejects, never fatal), and groups events into
//! per-case traces ordered by (timestamp, eid).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::BufRead;

use chrono::NaiveDateTime;
use serde_json::Value;
use thiserror::Error;

use crate::label::normalize_label;
use crate::tilt::DataDisclosed;

pub const KEY_EID: &str = "ident:eid";
pub const KEY_TIMESTAMP: &str = "time:timestamp";
pub const KEY_CASE: &str = "case:concept:name";
pub const KEY_ACTIVITY: &str = "concept:name";
pub const KEY_CATEGORIES: &str = "tilt:categories";
pub const KEY_PURPOSES: &str = "tilt:purposes";
pub const KEY_LEGAL_BASES: &str = "tilt:legalBases";
pub const KEY_RECIPIENTS: &str = "tilt:recipients";
pub const KEY_STORAGE: &str = "tilt:storage";

/// Grouped data-disclosed payload of one event.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DisclosedGroup {
    pub categories: Vec<String>,
    pub purposes: Vec<String>,
    pub legal_bases: Vec<String>,
    pub recipients: Vec<String>,
    pub storage: Vec<String>,
}

/// One transparency log record. The case id is an opaque token (trace ids in
/// instrumented systems) and carries no personal data by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransparencyEvent {
    pub eid: u64,
    pub timestamp: NaiveDateTime,
    pub case_id: String,
    pub activity: String,
    pub disclosed: DisclosedGroup,
}

/// Events grouped into traces by case id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventLog {
    pub traces: BTreeMap<String, Vec<TransparencyEvent>>,
    pub activity_alphabet: BTreeSet<String>,
}

impl EventLog {
    pub fn trace_count(&self) -> usize {
        self.traces.len()
    }

    pub fn event_count(&self) -> usize {
        self.traces.values().map(Vec::len).sum()
    }

    /// Activity sequences of all traces, in case-id order.
    pub fn activity_sequences(&self) -> Vec<Vec<String>> {
        self.traces
            .values()
            .map(|t| t.iter().map(|e| e.activity.clone()).collect())
            .collect()
    }

    /// Build a control-flow-only log from activity sequences. Used by
    /// discovery tooling and tests; events get synthetic timestamps.
    pub fn from_activity_traces<S: AsRef<str>>(traces: &[Vec<S>]) -> EventLog {
        let mut log = EventLog::default();
        let epoch = NaiveDateTime::default();
        for (index, trace) in traces.iter().enumerate() {
            let case_id = format!("case-{index:04}");
            let events = trace
                .iter()
                .enumerate()
                .map(|(step, activity)| TransparencyEvent {
                    eid: step as u64,
                    timestamp: epoch + chrono::Duration::seconds(step as i64),
                    case_id: case_id.clone(),
                    activity: normalize_label(activity.as_ref()),
                    disclosed: DisclosedGroup::default(),
                })
                .collect::<Vec<_>>();
            for event in &events {
                log.activity_alphabet.insert(event.activity.clone());
            }
            log.traces.insert(case_id, events);
        }
        log
    }
}

/// Why a line was rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectReason {
    MalformedLine(String),
    MissingRequiredKey(&'static str),
    InvalidValue { key: String, reason: String },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::MalformedLine(e) => write!(f, "malformed line: {e}"),
            RejectReason::MissingRequiredKey(key) => write!(f, "missing required key '{key}'"),
            RejectReason::InvalidValue { key, reason } => {
                write!(f, "invalid value for '{key}': {reason}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reject {
    pub line_no: usize,
    pub reason: RejectReason,
}

/// Ingestion output: the grouped log plus per-line rejects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestResult {
    pub log: EventLog,
    pub rejects: Vec<Reject>,
    pub accepted: usize,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read log stream: {0}")]
    Io(#[from] std::io::Error),
}

/// Ingest JSON lines from a reader. Lines starting with `#` and blank lines
/// are skipped; invalid lines become rejects.
pub fn ingest<R: BufRead>(reader: R) -> Result<IngestResult, IngestError> {
    let mut traces: BTreeMap<String, Vec<TransparencyEvent>> = BTreeMap::new();
    let mut rejects = Vec::new();
    let mut accepted = 0usize;
    let mut fallback_eid = 0u64;

    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = index + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_line(trimmed, fallback_eid) {
            Ok(event) => {
                fallback_eid += 1;
                accepted += 1;
                traces.entry(event.case_id.clone()).or_default().push(event);
            }
            Err(reason) => rejects.push(Reject { line_no, reason }),
        }
    }

    let mut alphabet = BTreeSet::new();
    for trace in traces.values_mut() {
        trace.sort_by_key(|a| (a.timestamp, a.eid));
        for event in trace.iter() {
            alphabet.insert(event.activity.clone());
        }
    }

    Ok(IngestResult {
        log: EventLog { traces, activity_alphabet: alphabet },
        rejects,
        accepted,
    })
}

/// Ingest from an in-memory string.
pub fn ingest_str(text: &str) -> IngestResult {
    ingest(text.as_bytes()).expect("in-memory reads cannot fail")
}

fn parse_line(line: &str, fallback_eid: u64) -> Result<TransparencyEvent, RejectReason> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| RejectReason::MalformedLine(e.to_string()))?;
    let object = value
        .as_object()
        .ok_or_else(|| RejectReason::MalformedLine("line is not a JSON object".into()))?;

    let case_id = required_string(object, KEY_CASE)?;
    let activity_raw = required_string(object, KEY_ACTIVITY)?;
    let activity = normalize_label(&activity_raw);
    if activity.is_empty() {
        return Err(RejectReason::InvalidValue {
            key: KEY_ACTIVITY.into(),
            reason: "activity must be non-empty".into(),
        });
    }
    let timestamp_raw = required_string(object, KEY_TIMESTAMP)?;
    let timestamp = parse_timestamp(&timestamp_raw).ok_or_else(|| RejectReason::InvalidValue {
        key: KEY_TIMESTAMP.into(),
        reason: format!("unparseable timestamp '{timestamp_raw}'"),
    })?;

    let eid = match object.get(KEY_EID) {
        None => fallback_eid,
        Some(Value::Number(n)) => n.as_u64().ok_or_else(|| RejectReason::InvalidValue {
            key: KEY_EID.into(),
            reason: "eid must be a non-negative integer".into(),
        })?,
        Some(_) => {
            return Err(RejectReason::InvalidValue {
                key: KEY_EID.into(),
                reason: "eid must be a number".into(),
            })
        }
    };

    Ok(TransparencyEvent {
        eid,
        timestamp,
        case_id,
        activity,
        disclosed: DisclosedGroup {
            categories: string_list(object, KEY_CATEGORIES)?,
            purposes: string_list(object, KEY_PURPOSES)?,
            legal_bases: string_list(object, KEY_LEGAL_BASES)?,
            recipients: string_list(object, KEY_RECIPIENTS)?,
            storage: string_list(object, KEY_STORAGE)?,
        },
    })
}

fn required_string(
    object: &serde_json::Map<String, Value>,
    key: &'static str,
) -> Result<String, RejectReason> {
    match object.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(RejectReason::InvalidValue {
            key: key.into(),
            reason: "expected a string".into(),
        }),
        None => Err(RejectReason::MissingRequiredKey(key)),
    }
}

fn string_list(
    object: &serde_json::Map<String, Value>,
    key: &str,
) -> Result<Vec<String>, RejectReason> {
    match object.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => Ok(s.clone()),
                other => Err(RejectReason::InvalidValue {
                    key: key.into(),
                    reason: format!("expected string entries, got {other}"),
                }),
            })
            .collect(),
        Some(_) => Err(RejectReason::InvalidValue {
            key: key.into(),
            reason: "expected an array of strings".into(),
        }),
    }
}

/// ISO-8601 with an optional date part. Time-only values (as printed by
/// logging frameworks) are assigned the epoch date.
pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    if let Ok(with_offset) = chrono::DateTime::parse_from_rfc3339(raw) {
        return Some(with_offset.naive_utc());
    }
    let stripped = raw.strip_suffix('Z').unwrap_or(raw);
    for format in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(stripped, format) {
            return Some(dt);
        }
    }
    if let Ok(time) = chrono::NaiveTime::parse_from_str(stripped, "%H:%M:%S%.f") {
        return Some(chrono::NaiveDate::from_ymd_opt(1970, 1, 1)?.and_time(time));
    }
    None
}

/// Millisecond-precision timestamp rendering used across log outputs.
pub fn format_timestamp(timestamp: &NaiveDateTime) -> String {
    timestamp.format("%Y-%m-%dT%H:%M:%S%.3f").to_string()
}

/// Separate the grouped payload into one data-disclosed element per
/// category, each carrying the full purpose/legal-basis/recipient/storage
/// sets of the event.
pub fn flatten_disclosed(event: &TransparencyEvent) -> Vec<DataDisclosed> {
    event
        .disclosed
        .categories
        .iter()
        .map(|category| DataDisclosed {
            id: category.clone(),
            category: category.clone(),
            purposes: event.disclosed.purposes.clone(),
            legal_bases: event.disclosed.legal_bases.clone(),
            recipients: event.disclosed.recipients.clone(),
            storage: event.disclosed.storage.clone(),
        })
        .collect()
}

/// XES rendering of the control-flow projection, with tilt:* lists as
/// nested list attributes.
pub fn write_xes(log: &EventLog) -> String {
    use quick_xml::escape::escape;
    use std::fmt::Write as _;

    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<log xes.version=\"1849-2016\" xes.features=\"nested-attributes\">\n");
    out.push_str(
        "  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\" />\n",
    );
    out.push_str(
        "  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\" />\n",
    );
    out.push_str("  <classifier name=\"Activity\" keys=\"concept:name\" />\n");
    for (case_id, trace) in &log.traces {
        let _ = writeln!(out, "  <trace>");
        let _ = writeln!(out, "    <string key=\"concept:name\" value=\"{}\" />", escape(case_id));
        for event in trace {
            let _ = writeln!(out, "    <event>");
            let _ = writeln!(
                out,
                "      <string key=\"concept:name\" value=\"{}\" />",
                escape(&event.activity)
            );
            let _ = writeln!(
                out,
                "      <date key=\"time:timestamp\" value=\"{}+00:00\" />",
                format_timestamp(&event.timestamp)
            );
            let _ = writeln!(out, "      <int key=\"ident:eid\" value=\"{}\" />", event.eid);
            for (key, values) in [
                (KEY_CATEGORIES, &event.disclosed.categories),
                (KEY_PURPOSES, &event.disclosed.purposes),
                (KEY_LEGAL_BASES, &event.disclosed.legal_bases),
                (KEY_RECIPIENTS, &event.disclosed.recipients),
                (KEY_STORAGE, &event.disclosed.storage),
            ] {
                if values.is_empty() {
                    continue;
                }
                let _ = writeln!(out, "      <list key=\"{key}\">");
                for value in values {
                    let _ = writeln!(
                        out,
                        "        <string key=\"item\" value=\"{}\" />",
                        escape(value)
                    );
                }
                let _ = writeln!(out, "      </list>");
            }
            let _ = writeln!(out, "    </event>");
        }
        let _ = writeln!(out, "  </trace>");
    }
    out.push_str("</log>\n");
    out
}
