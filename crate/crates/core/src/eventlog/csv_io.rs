//! `case,activity,timestamp` CSV import/export.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Event, EventLog, Trace};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    case: String,
    activity: String,
    timestamp: i64,
}

/// Reads a CSV log. Traces appear in order of each case's first row; events
/// within a case are stably sorted by timestamp. Header names are trimmed,
/// field values are taken verbatim.
pub fn read_csv(text: &str) -> Result<EventLog> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::Headers)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    for required in ["case", "activity", "timestamp"] {
        if !headers.iter().any(|h| h == required) {
            return Err(Error::schema(format!("CSV log is missing column {required:?}")));
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut by_case: HashMap<String, Vec<Event>> = HashMap::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|err| Error::Parse {
            line: i + 2,
            message: err.to_string(),
        })?;
        let events = by_case.entry(row.case.clone()).or_insert_with(|| {
            order.push(row.case.clone());
            Vec::new()
        });
        events.push(Event {
            case_id: row.case,
            activity: row.activity,
            timestamp: row.timestamp,
        });
    }

    let mut traces = Vec::with_capacity(order.len());
    for case in order {
        let mut events = by_case.remove(&case).unwrap_or_default();
        events.sort_by_key(|e| e.timestamp);
        traces.push(Trace::new(case, events)?);
    }
    Ok(EventLog::new(traces))
}

pub fn write_csv(log: &EventLog) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for trace in log.traces() {
        for e in trace.events() {
            writer.serialize(Row {
                case: e.case_id.clone(),
                activity: e.activity.clone(),
                timestamp: e.timestamp,
            })?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|err| Error::Io(err.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits UTF-8"))
}
