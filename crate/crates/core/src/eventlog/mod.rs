//! Event-log data model: events, traces, logs, and variants.
//!
//! A log is an ordered list of traces where duplicates are allowed, i.e. a
//! multiset with a stable iteration order. Construction validates the trace
//! invariants so every [`Trace`] in the crate is internally consistent.

mod csv_io;
mod xes;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{read_csv, write_csv};
pub use xes::{parse_xes, write_xes};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Trace {
    case_id: String,
    events: Vec<Event>,
}

impl Trace {
    /// Builds a trace, checking that it is non-empty, that every event
    /// belongs to `case_id`, has a non-empty activity, and that timestamps
    /// never decrease.
    pub fn new(case_id: impl Into<String>, events: Vec<Event>) -> Result<Self> {
        let case_id = case_id.into();
        if events.is_empty() {
            return Err(Error::schema(format!("trace {case_id} has no events")));
        }
        for (i, e) in events.iter().enumerate() {
            if e.activity.is_empty() {
                return Err(Error::schema(format!(
                    "trace {case_id}: event {i} has an empty activity"
                )));
            }
            if e.case_id != case_id {
                return Err(Error::schema(format!(
                    "trace {case_id}: event {i} belongs to case {}",
                    e.case_id
                )));
            }
        }
        if events.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
            return Err(Error::schema(format!(
                "trace {case_id}: timestamps decrease"
            )));
        }
        Ok(Trace { case_id, events })
    }

    /// Trace whose events carry synthetic timestamps 0, 1, 2, ...
    pub fn from_activities<S: AsRef<str>>(
        case_id: impl Into<String>,
        activities: &[S],
    ) -> Result<Self> {
        let case_id = case_id.into();
        let events = activities
            .iter()
            .enumerate()
            .map(|(i, a)| Event {
                case_id: case_id.clone(),
                activity: a.as_ref().to_string(),
                timestamp: i as i64,
            })
            .collect();
        Trace::new(case_id, events)
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> + '_ {
        self.events.iter().map(|e| e.activity.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    traces: Vec<Trace>,
}

impl EventLog {
    pub fn new(traces: Vec<Trace>) -> Self {
        EventLog { traces }
    }

    /// Convenience constructor: one trace per activity sequence, with case
    /// ids `case-0`, `case-1`, ... and per-trace counter timestamps.
    pub fn from_sequences<T, S>(sequences: &[T]) -> Result<Self>
    where
        T: AsRef<[S]>,
        S: AsRef<str>,
    {
        let traces = sequences
            .iter()
            .enumerate()
            .map(|(i, seq)| Trace::from_activities(format!("case-{i}"), seq.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(EventLog { traces })
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.traces.iter().map(Trace::len).sum()
    }

    /// Activity labels of every trace, in log order.
    pub fn sequences(&self) -> Vec<Vec<&str>> {
        self.traces.iter().map(|t| t.activities().collect()).collect()
    }

    pub(crate) fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.traces.is_empty() {
            Err(Error::domain(format!("{what}: event log is empty")))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub activities: Vec<String>,
    pub count: usize,
}

/// Distinct activity sequences with their multiplicities, most frequent
/// first and lexicographic by sequence among equal counts.
pub fn variants(log: &EventLog) -> Result<Vec<Variant>> {
    log.require_non_empty("variants")?;
    let mut counts: HashMap<Vec<&str>, usize> = HashMap::new();
    for trace in log.traces() {
        *counts.entry(trace.activities().collect()).or_default() += 1;
    }
    let mut out: Vec<(Vec<&str>, usize)> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out
        .into_iter()
        .map(|(seq, count)| Variant {
            activities: seq.into_iter().map(str::to_string).collect(),
            count,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(seqs: &[&[&str]]) -> EventLog {
        EventLog::from_sequences(seqs).unwrap()
    }

    #[test]
    fn variants_count_and_order() {
        let v = variants(&log(&[&["a", "b"], &["a", "b"], &["a"]])).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].activities, vec!["a", "b"]);
        assert_eq!(v[0].count, 2);
        assert_eq!(v[1].activities, vec!["a"]);
        assert_eq!(v[1].count, 1);
    }

    #[test]
    fn identical_traces_single_variant() {
        let seqs: Vec<Vec<&str>> = vec![vec!["x", "y", "z"]; 7];
        let v = variants(&EventLog::from_sequences(&seqs).unwrap()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].count, 7);
    }

    #[test]
    fn lexicographic_tie_break() {
        let v = variants(&log(&[&["b", "a"], &["a", "b"]])).unwrap();
        assert_eq!(v[0].activities, vec!["a", "b"]);
        assert_eq!(v[1].activities, vec!["b", "a"]);
        assert!(v.iter().all(|x| x.count == 1));
    }

    #[test]
    fn empty_log_is_domain_error() {
        assert!(matches!(variants(&EventLog::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn trace_invariants_enforced() {
        assert!(Trace::new("c", vec![]).is_err());
        let ev = |case: &str, act: &str, ts| Event {
            case_id: case.into(),
            activity: act.into(),
            timestamp: ts,
        };
        assert!(Trace::new("c", vec![ev("c", "a", 5), ev("c", "b", 4)]).is_err());
        assert!(Trace::new("c", vec![ev("d", "a", 0)]).is_err());
        assert!(Trace::new("c", vec![ev("c", "", 0)]).is_err());
        assert!(Trace::new("c", vec![ev("c", "a", 3), ev("c", "b", 3)]).is_ok());
    }
}
