//! Reader and writer for a small XES subset.
//!
//! Only `concept:name` (on traces and events) and `time:timestamp` (on
//! events) are interpreted. Any other attribute is skipped on read and never
//! written. Dates are written as RFC 3339 UTC with millisecond precision.

use std::fmt::Write as _;

use chrono::{DateTime, SecondsFormat};
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{Event, EventLog, Trace};
use crate::error::{Error, Result};

const NAME_KEY: &str = "concept:name";
const TIME_KEY: &str = "time:timestamp";

#[derive(Default)]
struct PendingEvent {
    activity: Option<String>,
    timestamp: Option<i64>,
}

#[derive(Default)]
struct PendingTrace {
    name: Option<String>,
    events: Vec<PendingEvent>,
}

fn line_of(doc: &str, pos: usize) -> usize {
    let pos = pos.min(doc.len());
    doc.as_bytes()[..pos].iter().filter(|&&b| b == b'\n').count() + 1
}

fn parse_err(doc: &str, pos: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line: line_of(doc, pos),
        message: message.into(),
    }
}

/// Returns `(key, value)` of a typed attribute element such as
/// `<string key=".." value=".."/>`.
fn key_value(doc: &str, pos: usize, e: &BytesStart<'_>) -> Result<(String, String)> {
    let mut key = None;
    let mut value = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| parse_err(doc, pos, err.to_string()))?;
        let v = attr
            .unescape_value()
            .map_err(|err| parse_err(doc, pos, err.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"key" => key = Some(v),
            b"value" => value = Some(v),
            _ => {}
        }
    }
    Ok((key.unwrap_or_default(), value.unwrap_or_default()))
}

fn parse_timestamp(doc: &str, pos: usize, value: &str) -> Result<i64> {
    DateTime::parse_from_rfc3339(value)
        .map(|dt| dt.timestamp_millis())
        .map_err(|err| parse_err(doc, pos, format!("invalid timestamp {value:?}: {err}")))
}

pub fn parse_xes(document: &str) -> Result<EventLog> {
    let mut reader = Reader::from_str(document);
    reader.config_mut().trim_text(true);

    let mut stack: Vec<String> = Vec::new();
    let mut saw_log = false;
    let mut traces: Vec<PendingTrace> = Vec::new();

    loop {
        let pos = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|err| parse_err(document, reader.error_position() as usize, err.to_string()))?;
        let (start, empty) = match &event {
            XmlEvent::Start(e) => (Some(e.clone()), false),
            XmlEvent::Empty(e) => (Some(e.clone()), true),
            XmlEvent::End(e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                match stack.pop() {
                    Some(open) if open == name => {}
                    Some(open) => {
                        return Err(parse_err(
                            document,
                            pos,
                            format!("expected </{open}>, found </{name}>"),
                        ))
                    }
                    None => {
                        return Err(parse_err(document, pos, format!("unexpected </{name}>")))
                    }
                }
                continue;
            }
            XmlEvent::Eof => break,
            _ => continue,
        };
        let Some(e) = start else { continue };
        let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        let parent = stack.last().map(String::as_str);
        let depth = stack.len();

        match (name.as_str(), parent) {
            ("log", None) => saw_log = true,
            ("trace", Some("log")) => traces.push(PendingTrace::default()),
            ("event", Some("trace")) if depth == 2 => {
                if let Some(t) = traces.last_mut() {
                    t.events.push(PendingEvent::default());
                }
            }
            ("string", Some("trace")) if depth == 2 => {
                let (k, v) = key_value(document, pos, &e)?;
                if k == NAME_KEY {
                    if let Some(t) = traces.last_mut() {
                        t.name = Some(v);
                    }
                }
            }
            ("string", Some("event")) if depth == 3 => {
                let (k, v) = key_value(document, pos, &e)?;
                if k == NAME_KEY {
                    if let Some(ev) = traces.last_mut().and_then(|t| t.events.last_mut()) {
                        ev.activity = Some(v);
                    }
                }
            }
            ("date", Some("event")) if depth == 3 => {
                let (k, v) = key_value(document, pos, &e)?;
                if k == TIME_KEY {
                    let ts = parse_timestamp(document, pos, &v)?;
                    if let Some(ev) = traces.last_mut().and_then(|t| t.events.last_mut()) {
                        ev.timestamp = Some(ts);
                    }
                }
            }
            _ => {}
        }
        if !empty {
            stack.push(name);
        }
    }

    if let Some(open) = stack.last() {
        return Err(parse_err(
            document,
            document.len(),
            format!("unexpected end of document inside <{open}>"),
        ));
    }
    if !saw_log {
        return Err(Error::schema("document has no <log> root element"));
    }

    let mut out = Vec::with_capacity(traces.len());
    for (ti, t) in traces.into_iter().enumerate() {
        let case_id = t.name.unwrap_or_else(|| format!("case-{ti}"));
        let mut events = Vec::with_capacity(t.events.len());
        for (ei, ev) in t.events.into_iter().enumerate() {
            let activity = ev.activity.ok_or_else(|| {
                Error::schema(format!(
                    "trace {case_id}: event {ei} has no {NAME_KEY} attribute"
                ))
            })?;
            events.push(Event {
                case_id: case_id.clone(),
                activity,
                timestamp: ev.timestamp.unwrap_or(ei as i64),
            });
        }
        out.push(Trace::new(case_id, events)?);
    }
    Ok(EventLog::new(out))
}

fn escape(s: &str) -> std::borrow::Cow<'_, str> {
    quick_xml::escape::escape(s)
}

fn format_timestamp(ms: i64) -> String {
    match DateTime::from_timestamp_millis(ms) {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, false),
        // Outside chrono's range; cannot occur for logs built in this crate.
        None => DateTime::UNIX_EPOCH.to_rfc3339_opts(SecondsFormat::Millis, false),
    }
}

pub fn write_xes(log: &EventLog) -> String {
    let mut out = String::with_capacity(64 + log.event_count() * 128);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<log xes.version=\"1.0\">\n");
    for trace in log.traces() {
        out.push_str("  <trace>\n");
        let _ = writeln!(
            out,
            "    <string key=\"{NAME_KEY}\" value=\"{}\"/>",
            escape(trace.case_id())
        );
        for e in trace.events() {
            out.push_str("    <event>\n");
            let _ = writeln!(
                out,
                "      <string key=\"{NAME_KEY}\" value=\"{}\"/>",
                escape(&e.activity)
            );
            let _ = writeln!(
                out,
                "      <date key=\"{TIME_KEY}\" value=\"{}\"/>",
                format_timestamp(e.timestamp)
            );
            out.push_str("    </event>\n");
        }
        out.push_str("  </trace>\n");
    }
    out.push_str("</log>\n");
    out
}
