//! Count and list configuration vectors; join two of them.

use logshap::features::FeatureId;
use logshap::generator::TargetConfiguration;
use logshap::pipeline::{configuration_count, enumerate_configurations, join_configurations, RunConfig};

fn main() {
    println!("default study: {} configurations", configuration_count(8, 10, 3));

    let cfg = RunConfig {
        features: vec![FeatureId::Nusa, FeatureId::Tlv, FeatureId::Rt5v],
        values_per_feature: 3,
        k_max: 2,
        ..RunConfig::default()
    };
    let all = enumerate_configurations(&cfg);
    println!("small study: {}", all.len());
    for c in all.iter().step_by(7) {
        println!("  {:<16} {:?}", c.id, c.targets);
    }

    let a = TargetConfiguration::new("nusa.1", [(FeatureId::Nusa, 3.0)]);
    let b = TargetConfiguration::new("tlv.0", [(FeatureId::Tlv, 0.0)]);
    println!("join: {:?}", join_configurations(&a, &b).map(|j| j.targets));
    let clash = TargetConfiguration::new("nusa.2", [(FeatureId::Nusa, 4.0)]);
    println!("clash: {}", join_configurations(&a, &clash).unwrap_err());
}
