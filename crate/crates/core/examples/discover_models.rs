//! Discover models with both built-in miners and inspect the nets.

use logshap::discovery::{check_soundness, to_petri, DfgOptions, MinerRegistry};
use logshap::eventlog::EventLog;
use logshap::conformance::SOUNDNESS_STATE_CAP;

fn main() -> logshap::Result<()> {
    let log = EventLog::from_sequences(&[
        vec!["a", "b", "c", "e"],
        vec!["a", "c", "b", "e"],
        vec!["a", "d", "e"],
        vec!["a", "b", "c", "e"],
    ])?;
    let registry = MinerRegistry::standard(DfgOptions::default());
    for id in ["ind", "dfg"] {
        let model = registry.get(id)?.discover(&log)?;
        let net = to_petri(&model)?;
        println!("== {id}");
        println!("{}", model.to_text().trim_end());
        println!(
            "{} places, {} transitions, {}",
            net.places.len(),
            net.transitions.len(),
            check_soundness(&net, SOUNDNESS_STATE_CAP).as_str()
        );
    }
    // the ILP slot exists but carries no adapter
    if let Err(e) = registry.get("ilp")?.discover(&log) {
        println!("ilp: {e}");
    }
    Ok(())
}
