//! Fitness, precision, F-score and complexity for a discovered model.

use std::sync::Arc;

use logshap::conformance::{complexity, escaping_edges_precision, fscore, measure, token_replay_fitness, Limits};
use logshap::discovery::{DfgOptions, MinerRegistry, ProcessTree, tree_to_gateway_graph, tree_to_petri};
use logshap::generator::{generate, GeneratorParams};

fn main() -> logshap::Result<()> {
    let tree: ProcessTree = "SEQ(a,XOR(b,c),d)".parse()?;
    let net = tree_to_petri(&tree);
    let log = logshap::eventlog::EventLog::from_sequences(&[vec!["a", "b", "d"], vec!["a", "d"], vec!["a", "c", "d"]])?;
    let (f, p) = (token_replay_fitness(&net, &log)?, escaping_edges_precision(&net, &log)?);
    let (size, cfc) = complexity(&tree_to_gateway_graph(&tree));
    println!("hand model: fitness {f:.3} precision {p:.3} f1 {:.3} size {size} cfc {cfc}", fscore(f, p));

    let (_, generated) = generate(&GeneratorParams { seed: 3, noise_probability: 0.1, ..GeneratorParams::default() })?;
    let generated = Arc::new(generated);
    let registry = MinerRegistry::standard(DfgOptions::default());
    for miner in ["ind", "dfg"] {
        let r = measure(&registry, miner, generated.clone(), &Limits::default(), "demo")?;
        println!(
            "{miner}: {} fitness {:?} precision {:?} size {:?} cfc {:?} {} ms, {}",
            r.status.as_str(),
            r.fitness,
            r.precision,
            r.size,
            r.cfc,
            r.exec_time_ms,
            r.sound.as_str()
        );
    }
    Ok(())
}
