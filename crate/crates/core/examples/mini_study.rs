//! A small end-to-end study: generate, measure, attribute, report.
//!
//! `cargo run --release --example mini_study -- [out-dir]`

use std::path::PathBuf;

use logshap::pipeline::{report, resume, run_with, RunConfig, RunControl};

fn main() -> logshap::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("logshap-mini-study"));
    let cfg = RunConfig::from_json(include_str!("mini_study.json"))?;

    // stop early once to show the checkpoint at work
    let first = run_with(&cfg, &out, &RunControl { stop_after: Some(5) })?;
    println!("first pass: {}/{}", first.completed, first.configurations);
    let st = resume(&out, None)?;
    println!("resumed: {} more, finished {}", st.processed_now, st.finished);

    report(&out)?;
    print!("{}", std::fs::read_to_string(out.join("summary.txt"))?);
    println!("outputs in {}", out.display());
    Ok(())
}
