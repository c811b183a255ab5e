//! Exact Shapley values of a three-feature game.

use logshap::conformance::Metric;
use logshap::features::FeatureId;
use logshap::shapley::{shapley_exact, shapley_permutation_oracle, CoalitionGame};

fn main() -> logshap::Result<()> {
    let players = vec![(FeatureId::Nusa, 3.0), (FeatureId::Tlv, 10.0), (FeatureId::Rt5v, 0.1)];
    let mut game = CoalitionGame::new("example", players.clone(), "ind", Metric::Fitness);
    // bitmask -> fitness of the log generated for that coalition
    for (mask, v) in [(1, 0.9), (2, 0.8), (3, 0.75), (4, 0.95), (5, 0.85), (6, 0.8), (7, 0.7)] {
        game.set(mask, v);
    }
    let exact = shapley_exact(&game)?;
    let oracle = shapley_permutation_oracle(&game)?;
    for (i, (f, value)) in players.iter().enumerate() {
        println!(
            "{f}={value:<5} phi {:+.4}  share {:.3}  (oracle {:+.4})",
            exact.phi[i], exact.phi_normalized[i], oracle.phi[i]
        );
    }
    println!("sum {:.4} = v(N) {:.4}", exact.phi.iter().sum::<f64>(), game.value(7).unwrap());
    Ok(())
}
