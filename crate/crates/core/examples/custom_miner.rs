//! Plug a miner into the registry and measure it next to the built-ins.

use std::sync::Arc;

use logshap::conformance::{measure, Limits};
use logshap::discovery::{DfgOptions, DiscoveredModel, Miner, MinerRegistry, ProcessTree};
use logshap::eventlog::EventLog;
use logshap::generator::{generate, GeneratorParams};

/// Accepts every behaviour over the observed alphabet.
struct Flower;

impl Miner for Flower {
    fn id(&self) -> &str {
        "flower"
    }

    fn discover(&self, log: &EventLog) -> logshap::Result<DiscoveredModel> {
        let mut labels: Vec<&str> = log.traces().iter().flat_map(|t| t.activities()).collect();
        labels.sort_unstable();
        labels.dedup();
        let choice = ProcessTree::xor(labels.into_iter().map(ProcessTree::leaf).collect());
        DiscoveredModel::from_tree(self.id(), ProcessTree::looped(choice, ProcessTree::Silent))
    }
}

fn main() -> logshap::Result<()> {
    let mut registry = MinerRegistry::standard(DfgOptions::default());
    registry.register(Arc::new(Flower));
    let (_, log) = generate(&GeneratorParams { seed: 10, ..GeneratorParams::default() })?;
    let log = Arc::new(log);
    for id in registry.ids().map(str::to_string).collect::<Vec<_>>() {
        let r = measure(&registry, &id, log.clone(), &Limits::default(), "demo")?;
        let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "{id:<7} {:<17} fitness {:<6} precision {:<6} size {:>3}",
            r.status.as_str(),
            show(r.fitness),
            show(r.precision),
            r.size.map_or("-".into(), |s| s.to_string())
        );
    }
    Ok(())
}
