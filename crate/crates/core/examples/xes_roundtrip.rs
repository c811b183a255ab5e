//! Read a log from XES, write it back, convert to CSV.

use logshap::eventlog::{parse_xes, read_csv, variants, write_csv, write_xes};

const DOC: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<log xes.version="1.0">
  <trace>
    <string key="concept:name" value="order-1"/>
    <event><string key="concept:name" value="register"/><date key="time:timestamp" value="2024-03-01T09:00:00+00:00"/></event>
    <event><string key="concept:name" value="check &amp; approve"/><date key="time:timestamp" value="2024-03-01T09:30:00+00:00"/></event>
    <event><string key="concept:name" value="ship"/><date key="time:timestamp" value="2024-03-02T08:00:00+00:00"/></event>
  </trace>
  <trace>
    <string key="concept:name" value="order-2"/>
    <event><string key="concept:name" value="register"/><date key="time:timestamp" value="2024-03-01T10:00:00+00:00"/></event>
    <event><string key="concept:name" value="cancel"/><date key="time:timestamp" value="2024-03-01T10:05:00+00:00"/></event>
  </trace>
</log>"#;

fn main() -> logshap::Result<()> {
    let log = parse_xes(DOC)?;
    println!("{} traces, {} events", log.len(), log.event_count());
    for v in variants(&log)? {
        println!("{:>3} x {}", v.count, v.activities.join(" -> "));
    }

    let again = parse_xes(&write_xes(&log))?;
    assert_eq!(again, log);

    let csv = write_csv(&log)?;
    print!("{csv}");
    assert_eq!(read_csv(&csv)?, log);
    Ok(())
}
