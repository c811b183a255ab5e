//! Friedman/Nemenyi ranking and Spearman correlations.

use logshap::analysis::{classify_strength, friedman_nemenyi, spearman, Alpha};

fn main() -> logshap::Result<()> {
    // |normalized phi| per game (rows) and feature (columns)
    let matrix = vec![
        vec![0.50, 0.30, 0.20],
        vec![0.60, 0.25, 0.15],
        vec![0.45, 0.35, 0.20],
        vec![0.40, 0.20, 0.40],
        vec![0.55, 0.30, 0.15],
        vec![0.70, 0.10, 0.20],
    ];
    let names = vec!["nusa".to_string(), "tlv".into(), "rt5v".into()];
    let r = friedman_nemenyi(&matrix, &names, Alpha::P05)?;
    println!("chi2 {:.3}  p {:.4}  CD {:.3}", r.statistic, r.p_value, r.critical_distance);
    for (f, rank) in r.features.iter().zip(&r.mean_ranks) {
        println!("  {f:<5} mean rank {rank:.2}");
    }
    println!("  cliques {:?}", r.cliques);

    let target = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let phi = [0.1, 0.15, 0.3, 0.2, 0.4, 0.5, 0.45, 0.7];
    let s = spearman(&target, &phi)?;
    println!("rho {:.3} p {:.4} -> {}", s.rho, s.p_value, classify_strength(s.rho, s.p_value).as_str());
    Ok(())
}
