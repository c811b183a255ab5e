//! The eight meta-features of a small log, plus a correlation-based
//! feature selection over a handful of generated logs.

use logshap::eventlog::EventLog;
use logshap::features::{extract, extract_detailed, greedy_select, write_report, ExtractionRow, FeatureId};
use logshap::generator::{generate, GeneratorParams};

fn main() -> logshap::Result<()> {
    let log = EventLog::from_sequences(&[
        vec!["a", "b", "c"],
        vec!["a", "b", "c"],
        vec!["a", "c"],
        vec!["a", "c"],
        vec!["b", "a", "c", "c"],
    ])?;
    let ex = extract_detailed(&log, &FeatureId::ALL)?;
    print!("{}", write_report(&ExtractionRow::from_extraction("toy", &ex))?);

    // one row per generated log
    let mut matrix = Vec::new();
    for seed in 0..12 {
        let params = GeneratorParams {
            seed,
            activity_count: 3 + seed as usize,
            noise_probability: 0.05 * (seed % 3) as f64,
            ..GeneratorParams::default()
        };
        let (_, l) = generate(&params)?;
        let v = extract(&l, &FeatureId::ALL)?;
        matrix.push(FeatureId::ALL.iter().map(|&f| v.get(f).unwrap_or(0.0)).collect::<Vec<_>>());
    }
    let names: Vec<&str> = FeatureId::ALL.iter().map(|f| f.as_str()).collect();
    match greedy_select(&matrix, &names, 4) {
        Ok(picked) => println!("least correlated four: {}", picked.join(", ")),
        Err(e) => println!("selection skipped: {e}"),
    }
    Ok(())
}
