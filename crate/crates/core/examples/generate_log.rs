//! Sample a random process tree and simulate a log from it.

use logshap::features::{extract, FeatureId};
use logshap::generator::{generate, sample_tree, simulate, GeneratorParams};

fn main() -> logshap::Result<()> {
    let params = GeneratorParams {
        activity_count: 6,
        max_depth: 3,
        trace_count: 200,
        seed: 0,
        ..GeneratorParams::default()
    };
    let (tree, log) = generate(&params)?;
    println!("tree: {tree}");
    println!("{} traces, first: {:?}", log.len(), log.sequences()[0]);

    // same tree, noisy replay
    let noisy = simulate(&tree, 200, 0.2, params.loop_repeat_probability, 7)?;
    for (name, l) in [("clean", &log), ("noisy", &noisy)] {
        let v = extract(l, &[FeatureId::Tlv, FeatureId::Rt5v, FeatureId::Ekbr3])?;
        let cells: Vec<String> = v.iter().map(|(f, x)| format!("{f}={x:.3}")).collect();
        println!("{name}: {}", cells.join(" "));
    }

    let other = sample_tree(&GeneratorParams { seed: 1, ..params }, 1)?;
    println!("another tree: {other} (depth {}, {} nodes)", other.depth(), other.node_count());
    Ok(())
}
