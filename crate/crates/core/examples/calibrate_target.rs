//! Search generator parameters until a log hits target meta-feature values.

use logshap::features::FeatureId;
use logshap::generator::{calibrate, TargetConfiguration};

fn main() -> logshap::Result<()> {
    let targets = [
        TargetConfiguration::new("three-starts", [(FeatureId::Nusa, 3.0)]),
        TargetConfiguration::new("variance", [(FeatureId::Tlv, 20.0)]),
        TargetConfiguration::new("pair", [(FeatureId::Nusa, 2.0), (FeatureId::Rt5v, 0.2)]),
    ];
    for t in &targets {
        let out = calibrate(t, 2000, 0.05, 42)?;
        let got: Vec<String> = t
            .features()
            .iter()
            .map(|&f| format!("{f}={:.3}", out.achieved.get(f).unwrap_or(f64::NAN)))
            .collect();
        println!(
            "{:<13} {:<16} distance {:.4} after {:>4} iterations -> {}",
            t.id,
            out.status.as_str(),
            out.distance,
            out.iterations_used,
            got.join(" ")
        );
    }
    Ok(())
}
