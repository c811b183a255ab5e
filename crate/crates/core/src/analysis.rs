//! Statistics over Shapley attributions: mean attributions, Friedman and
//! Nemenyi rankings, Spearman correlations, robustness and feasibility.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::conformance::{Metric, MetricRecord, Status};
use crate::error::{Error, Result};
use crate::features::{pearson, FeatureCatalog, FeatureId};
use crate::generator::TargetConfiguration;
use crate::shapley::ShapleyRow;

fn complete(rows: &[ShapleyRow]) -> impl Iterator<Item = (&ShapleyRow, f64, f64)> {
    rows.iter()
        .filter_map(|r| Some((r, r.phi?, r.phi_normalized?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAttribution {
    pub feature: FeatureId,
    pub miner: Option<String>,
    pub metric: Option<Metric>,
    pub mean_phi: f64,
    pub mean_phi_normalized: f64,
    pub games: usize,
}

/// Mean phi per feature, optionally split by miner and/or metric.
pub fn mean_attribution(rows: &[ShapleyRow], by_miner: bool, by_metric: bool) -> Vec<MeanAttribution> {
    let mut groups: BTreeMap<(FeatureId, Option<String>, Option<Metric>), (f64, f64, usize)> = BTreeMap::new();
    for (r, phi, norm) in complete(rows) {
        let key = (
            r.feature,
            by_miner.then(|| r.miner.clone()),
            by_metric.then_some(r.metric),
        );
        let e = groups.entry(key).or_insert((0.0, 0.0, 0));
        e.0 += phi;
        e.1 += norm;
        e.2 += 1;
    }
    groups
        .into_iter()
        .map(|((feature, miner, metric), (p, q, n))| MeanAttribution {
            feature,
            miner,
            metric,
            mean_phi: p / n as f64,
            mean_phi_normalized: q / n as f64,
            games: n,
        })
        .collect()
}

/// Average ranks with ties; `descending` gives rank 1 to the largest value.
pub fn average_ranks(values: &[f64], descending: bool) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = values[a].total_cmp(&values[b]);
        if descending {
            o.reverse()
        } else {
            o
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            ranks[t] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alpha {
    P05,
    P10,
}

impl Alpha {
    pub fn value(self) -> f64 {
        match self {
            Alpha::P05 => 0.05,
            Alpha::P10 => 0.10,
        }
    }
}

/// Two-tailed Nemenyi critical values (studentized range over sqrt 2) for
/// k = 2..=20.
const Q_05: [f64; 19] = [
    1.960, 2.344, 2.569, 2.728, 2.850, 2.948, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];
const Q_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.460, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120,
    3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
];

pub fn nemenyi_q(alpha: Alpha, k: usize) -> Result<f64> {
    if !(2..=20).contains(&k) {
        return Err(Error::domain(format!("Nemenyi table covers 2..=20 groups, got {k}")));
    }
    Ok(match alpha {
        Alpha::P05 => Q_05[k - 2],
        Alpha::P10 => Q_10[k - 2],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub features: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub blocks: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub critical_distance: f64,
    /// Maximal groups whose mean ranks all lie within the critical distance.
    pub cliques: Vec<Vec<String>>,
}

/// Friedman test and Nemenyi post-hoc over a blocks x features matrix of
/// impact magnitudes (higher is more important, so rank 1 is the largest).
pub fn friedman_nemenyi(matrix: &[Vec<f64>], features: &[String], alpha: Alpha) -> Result<RankReport> {
    let k = features.len();
    let n = matrix.len();
    if k < 2 || n < 2 {
        return Err(Error::domain("ranking needs at least 2 features and 2 blocks"));
    }
    if matrix.iter().any(|r| r.len() != k) {
        return Err(Error::domain("rank matrix rows must have one entry per feature"));
    }
    let q = nemenyi_q(alpha, k)?;
    let mut sums = vec![0.0; k];
    for row in matrix {
        for (s, r) in sums.iter_mut().zip(average_ranks(row, true)) {
            *s += r;
        }
    }
    let (kf, nf) = (k as f64, n as f64);
    let mean_ranks: Vec<f64> = sums.iter().map(|s| s / nf).collect();
    let sum_sq: f64 = mean_ranks.iter().map(|r| r * r).sum();
    let statistic = (12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0).powi(2) / 4.0)).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).map_err(|e| Error::domain(e.to_string()))?;
    let p_value = (1.0 - chi.cdf(statistic)).clamp(0.0, 1.0);
    let critical_distance = q * (kf * (kf + 1.0) / (6.0 * nf)).sqrt();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| mean_ranks[a].total_cmp(&mean_ranks[b]).then(features[a].cmp(&features[b])));
    let mut cliques: Vec<Vec<String>> = Vec::new();
    let mut last_end = 0;
    for i in 0..k {
        let mut j = i;
        while j + 1 < k && mean_ranks[order[j + 1]] - mean_ranks[order[i]] < critical_distance {
            j += 1;
        }
        // a run ending where the previous one ended is contained in it
        if j + 1 > last_end {
            cliques.push(order[i..=j].iter().map(|&t| features[t].clone()).collect());
            last_end = j + 1;
        }
    }
    Ok(RankReport {
        features: features.to_vec(),
        mean_ranks,
        blocks: n,
        statistic,
        p_value,
        critical_distance,
        cliques,
    })
}

/// Blocks x features matrix of mean |normalized phi| for ranking.
///
/// When every complete game covers all features each game is a block;
/// otherwise each (miner, metric) pair is a block holding per-feature means,
/// and pairs missing a feature are left out.
pub fn rank_matrix(rows: &[ShapleyRow], features: &[FeatureId]) -> (Vec<Vec<f64>>, Vec<String>) {
    let mut per_game: BTreeMap<&str, BTreeMap<FeatureId, f64>> = BTreeMap::new();
    for (r, _, norm) in complete(rows) {
        per_game.entry(&r.game_id).or_default().insert(r.feature, norm.abs());
    }
    let covers = |m: &BTreeMap<FeatureId, f64>| features.iter().all(|f| m.contains_key(f));
    if !per_game.is_empty() && per_game.values().all(covers) {
        let labels = per_game.keys().map(|s| s.to_string()).collect();
        let matrix = per_game
            .values()
            .map(|m| features.iter().map(|f| m[f]).collect())
            .collect();
        return (matrix, labels);
    }
    let mut blocks: BTreeMap<(String, Metric), BTreeMap<FeatureId, (f64, usize)>> = BTreeMap::new();
    for (r, _, norm) in complete(rows) {
        let e = blocks
            .entry((r.miner.clone(), r.metric))
            .or_default()
            .entry(r.feature)
            .or_insert((0.0, 0));
        e.0 += norm.abs();
        e.1 += 1;
    }
    let mut matrix = Vec::new();
    let mut labels = Vec::new();
    for ((miner, metric), m) in blocks {
        if features.iter().all(|f| m.contains_key(f)) {
            matrix.push(features.iter().map(|f| m[f].0 / m[f].1 as f64).collect());
            labels.push(format!("{miner}:{metric}"));
        }
    }
    (matrix, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    pub p_value: f64,
    /// The t approximation is rough below 10 points.
    pub approximate: bool,
}

pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Spearman> {
    let n = xs.len();
    if n != ys.len() || n < 3 {
        return Err(Error::domain("spearman needs two samples of equal length >= 3"));
    }
    let rho = pearson(&average_ranks(xs, false), &average_ranks(ys, false))
        .ok_or_else(|| Error::domain("spearman correlation undefined for a constant sample"))?
        .clamp(-1.0, 1.0);
    let p_value = if 1.0 - rho.abs() < 1e-12 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::domain(e.to_string()))?;
        (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
    };
    Ok(Spearman {
        rho,
        p_value,
        approximate: n < 10,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strength {
    Insignificant,
    Gray,
    Weak,
    Medium,
    Strong,
}

impl Strength {
    pub fn as_str(self) -> &'static str {
        match self {
            Strength::Insignificant => "insignificant",
            Strength::Gray => "gray",
            Strength::Weak => "weak",
            Strength::Medium => "medium",
            Strength::Strong => "strong",
        }
    }
}

pub fn classify_strength(rho: f64, p_value: f64) -> Strength {
    let r = rho.abs();
    if p_value > 0.05 {
        Strength::Insignificant
    } else if r < 0.1 {
        Strength::Gray
    } else if r <= 0.3 {
        Strength::Weak
    } else if r <= 0.5 {
        Strength::Medium
    } else {
        Strength::Strong
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRecord {
    pub miner: String,
    pub metric: Metric,
    pub feature: FeatureId,
    pub n: usize,
    pub rho: f64,
    pub p_value: f64,
    pub approximate: bool,
    pub strength: Strength,
}

/// Spearman correlation between a feature's target value and its phi, per
/// miner and metric. Groups with fewer than 3 points or a constant side
/// are skipped.
pub fn correlations(rows: &[ShapleyRow]) -> Vec<CorrelationRecord> {
    let mut groups: BTreeMap<(String, Metric, FeatureId), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (r, phi, _) in complete(rows) {
        let e = groups.entry((r.miner.clone(), r.metric, r.feature)).or_default();
        e.0.push(r.target_value);
        e.1.push(phi);
    }
    groups
        .into_iter()
        .filter_map(|((miner, metric, feature), (xs, ys))| {
            let s = spearman(&xs, &ys).ok()?;
            Some(CorrelationRecord {
                miner,
                metric,
                feature,
                n: xs.len(),
                rho: s.rho,
                p_value: s.p_value,
                approximate: s.approximate,
                strength: classify_strength(s.rho, s.p_value),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPoint {
    pub miner: String,
    pub metric: Metric,
    pub n: usize,
    pub mean_norm_phi: f64,
    pub var_norm_phi: f64,
    pub singleton: bool,
}

/// Mean and population variance of normalized phi pooled over features and
/// games, per miner and metric.
pub fn robustness(rows: &[ShapleyRow]) -> Vec<RobustnessPoint> {
    let mut pools: BTreeMap<(String, Metric), Vec<f64>> = BTreeMap::new();
    for (r, _, norm) in complete(rows) {
        pools.entry((r.miner.clone(), r.metric)).or_default().push(norm);
    }
    pools
        .into_iter()
        .map(|((miner, metric), xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            RobustnessPoint {
                miner,
                metric,
                n: xs.len(),
                mean_norm_phi: mean,
                var_norm_phi: if xs.len() < 2 { 0.0 } else { var },
                singleton: xs.len() < 2,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinerFeasibility {
    pub miner: String,
    pub configurations: usize,
    pub ok: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCell {
    pub feature: FeatureId,
    pub bucket_lo: f64,
    pub bucket_hi: f64,
    pub miner: String,
    pub metric: Metric,
    pub configurations: usize,
    pub successes: usize,
    pub success_fraction: f64,
    pub mean_norm_phi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub miners: Vec<MinerFeasibility>,
    pub overlap_percent: f64,
    pub cells: Vec<FeasibilityCell>,
}

fn bucket_of(value: f64, lo: f64, hi: f64, buckets: usize) -> usize {
    let t = ((value - lo) / (hi - lo) * buckets as f64).floor();
    (t.max(0.0) as usize).min(buckets - 1)
}

/// Per-miner ok percentages, the share of configurations ok under every
/// miner, and success/attribution cells over equal-width value buckets.
pub fn feasibility(
    measurements: &[(TargetConfiguration, MetricRecord)],
    rows: &[ShapleyRow],
    metrics: &[Metric],
    bucket_count: usize,
) -> Result<FeasibilityReport> {
    if bucket_count < 1 {
        return Err(Error::domain("bucket_count must be >= 1"));
    }
    let catalog = FeatureCatalog::standard();
    let mut per_miner: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut ok_by_config: BTreeMap<&str, Vec<bool>> = BTreeMap::new();
    for (cfg, rec) in measurements {
        let e = per_miner.entry(&rec.miner).or_default();
        e.0 += 1;
        e.1 += usize::from(rec.status == Status::Ok);
        ok_by_config.entry(&cfg.id).or_default().push(rec.status == Status::Ok);
    }
    let miner_count = per_miner.len();
    let miners = per_miner
        .iter()
        .map(|(m, &(total, ok))| MinerFeasibility {
            miner: m.to_string(),
            configurations: total,
            ok,
            percent: if total == 0 { 0.0 } else { 100.0 * ok as f64 / total as f64 },
        })
        .collect();
    let overlap = ok_by_config
        .values()
        .filter(|v| v.len() == miner_count && v.iter().all(|&b| b))
        .count();
    let overlap_percent = if ok_by_config.is_empty() {
        0.0
    } else {
        100.0 * overlap as f64 / ok_by_config.len() as f64
    };

    type CellKey = (FeatureId, usize, String, Metric);
    let mut counts: BTreeMap<CellKey, (usize, usize)> = BTreeMap::new();
    for (cfg, rec) in measurements {
        for (&f, &v) in &cfg.targets {
            let spec = catalog.get(f);
            let b = bucket_of(v, spec.lo, spec.hi, bucket_count);
            for &m in metrics {
                let e = counts.entry((f, b, rec.miner.clone(), m)).or_default();
                e.0 += 1;
                e.1 += usize::from(rec.status == Status::Ok && rec.value(m).is_some());
            }
        }
    }
    let mut phis: BTreeMap<CellKey, (f64, usize)> = BTreeMap::new();
    for (r, _, norm) in complete(rows) {
        let spec = catalog.get(r.feature);
        let b = bucket_of(r.target_value, spec.lo, spec.hi, bucket_count);
        let e = phis.entry((r.feature, b, r.miner.clone(), r.metric)).or_default();
        e.0 += norm;
        e.1 += 1;
    }
    let cells = counts
        .into_iter()
        .map(|(key, (total, ok))| {
            let spec = catalog.get(key.0);
            let width = spec.width() / bucket_count as f64;
            let mean = phis.get(&key).map(|(s, n)| s / *n as f64);
            FeasibilityCell {
                feature: key.0,
                bucket_lo: spec.lo + key.1 as f64 * width,
                bucket_hi: spec.lo + (key.1 + 1) as f64 * width,
                miner: key.2,
                metric: key.3,
                configurations: total,
                successes: ok,
                success_fraction: ok as f64 / total as f64,
                mean_norm_phi: mean,
            }
        })
        .collect();
    Ok(FeasibilityReport {
        miners,
        overlap_percent,
        cells,
    })
}

/// Plain-text table with one row per miner and a final overlap row.
pub fn feasibility_table(report: &FeasibilityReport) -> String {
    let width = report
        .miners
        .iter()
        .map(|m| m.miner.len())
        .chain(["Overlap".len(), "Miner".len()])
        .max()
        .unwrap_or(7);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  Feasible logs", "Miner");
    for m in &report.miners {
        let _ = writeln!(out, "{:<width$}  {:>5.1}% ({}/{})", m.miner, m.percent, m.ok, m.configurations);
    }
    let _ = writeln!(out, "{:<width$}  {:>5.1}%", "Overlap", report.overlap_percent);
    out
}

/// Feature ids present in any row, in catalog order.
pub fn features_in(rows: &[ShapleyRow]) -> Vec<FeatureId> {
    rows.iter().map(|r| r.feature).collect::<BTreeSet<_>>().into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::Normal;

    fn srow(game: &str, miner: &str, metric: Metric, f: FeatureId, t: f64, phi: f64, norm: f64) -> ShapleyRow {
        ShapleyRow {
            game_id: game.into(),
            miner: miner.into(),
            metric,
            feature: f,
            target_value: t,
            phi: Some(phi),
            phi_normalized: Some(norm),
            complete: true,
        }
    }

    #[test]
    fn means_and_grouping() {
        use FeatureId::*;
        let rows = vec![
            srow("g1", "ind", Metric::Fitness, Tlv, 0.0, 1.0, 0.5),
            srow("g2", "ind", Metric::Fitness, Tlv, 1.0, 3.0, 0.5),
            srow("g3", "dfg", Metric::Size, Tlv, 1.0, 5.0, 1.0),
            srow("g4", "dfg", Metric::Fitness, Tlv, 1.0, 7.0, 1.0),
            srow("g5", "ind", Metric::Size, Tlv, 1.0, 9.0, 1.0),
        ];
        let all = mean_attribution(&rows[..2], false, false);
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].mean_phi, 2.0);
        assert_eq!(mean_attribution(&rows[..1], false, false)[0].mean_phi, 1.0);
        assert_eq!(mean_attribution(&rows, true, true).len(), 4);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[0.5, 0.1, 0.5, 0.9], true), vec![2.5, 4.0, 2.5, 1.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 2.0], false), vec![3.0, 1.0, 2.0]);
    }

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn friedman_hand_fixture() {
        // rank rows: (1,2,3) x4, (2,1,3) x3, (1,3,2) x2, (3,2,1) x1
        // rank sums 15, 19, 26; chi2 = 12/(10*3*4) * 1262 - 3*10*4 = 6.2
        let value = |r: [f64; 3]| r.iter().map(|x| 1.0 / x).collect::<Vec<f64>>();
        let mut m = Vec::new();
        m.extend(std::iter::repeat(value([1.0, 2.0, 3.0])).take(4));
        m.extend(std::iter::repeat(value([2.0, 1.0, 3.0])).take(3));
        m.extend(std::iter::repeat(value([1.0, 3.0, 2.0])).take(2));
        m.push(value([3.0, 2.0, 1.0]));
        let r = friedman_nemenyi(&m, &names(3), Alpha::P05).unwrap();
        assert!((r.statistic - 6.2).abs() < 1e-9, "{}", r.statistic);
        assert_eq!(r.mean_ranks, vec![1.5, 1.9, 2.6]);
        assert!((r.p_value - (-6.2f64 / 2.0).exp()).abs() < 1e-9);
        assert!((r.critical_distance - 2.344 * (12.0f64 / 60.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn friedman_extremes() {
        let dominant: Vec<Vec<f64>> = (0..40).map(|i| vec![10.0, (i % 3) as f64, ((i + 1) % 3) as f64, ((i + 2) % 3) as f64]).collect();
        let r = friedman_nemenyi(&dominant, &names(4), Alpha::P05).unwrap();
        assert_eq!(r.mean_ranks[0], 1.0);
        assert_eq!(r.cliques[0], vec!["f0".to_string()]);
        assert!(r.cliques[1..].iter().all(|c| !c.contains(&"f0".to_string())));

        let ties = vec![vec![0.25; 4]; 6];
        let r = friedman_nemenyi(&ties, &names(4), Alpha::P10).unwrap();
        assert!(r.mean_ranks.iter().all(|&x| x == 2.5));
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(r.cliques.len(), 1);
        assert!(friedman_nemenyi(&ties, &names(21)[..4], Alpha::P05).is_ok());
        assert!(nemenyi_q(Alpha::P05, 21).is_err());
    }

    /// Upper quantile of the range of k standard normals, by quadrature.
    fn range_quantile(k: usize, alpha: f64) -> f64 {
        let n = Normal::new(0.0, 1.0).unwrap();
        let cdf = |q: f64| {
            let (a, b, steps) = (-9.0, 9.0, 4000);
            let h = (b - a) / steps as f64;
            let f = |z: f64| {
                let d = (-z * z / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
                k as f64 * d * (n.cdf(z + q) - n.cdf(z)).powi(k as i32 - 1)
            };
            let mut s = f(a) + f(b);
            for i in 1..steps {
                s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..60 {
            let mid = (lo + hi) / 2.0;
            if cdf(mid) < 1.0 - alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn nemenyi_table_matches_quadrature() {
        for k in 2..=20 {
            for alpha in [Alpha::P05, Alpha::P10] {
                let oracle = range_quantile(k, alpha.value()) / 2f64.sqrt();
                let table = nemenyi_q(alpha, k).unwrap();
                assert!((oracle - table).abs() < 2e-3, "k={k} {alpha:?}: {oracle} vs {table}");
            }
        }
    }

    #[test]
    fn spearman_fixtures() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap().rho, 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().rho, -1.0);
        let s = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((s.rho - 0.8).abs() < 1e-15);
        assert!(s.approximate);
        // t = 0.8 * sqrt(2 / 0.36); two-sided p with 2 degrees of freedom
        let t: f64 = 0.8 * (2.0f64 / 0.36).sqrt();
        let p = 1.0 - t / (2.0 + t * t).sqrt();
        assert!((s.p_value - p).abs() < 1e-9);
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn strength_classes() {
        assert_eq!(classify_strength(0.6, 0.001), Strength::Strong);
        assert_eq!(classify_strength(0.05, 0.001), Strength::Gray);
        assert_eq!(classify_strength(0.9, 0.2), Strength::Insignificant);
        assert_eq!(classify_strength(-0.4, 0.01), Strength::Medium);
        assert_eq!(classify_strength(0.1, 0.05), Strength::Weak);
        assert_eq!(classify_strength(0.3, 0.0), Strength::Weak);
        assert_eq!(classify_strength(0.5, 0.0), Strength::Medium);
    }

    #[test]
    fn robustness_pools() {
        use FeatureId::*;
        let rows = vec![
            srow("g1", "a", Metric::Fitness, Tlv, 0.0, 1.0, 0.2),
            srow("g1", "a", Metric::Fitness, Nusa, 0.0, 1.0, 0.2),
            srow("g2", "a", Metric::Fitness, Tlv, 0.0, 1.0, 0.2),
            srow("g3", "b", Metric::Fitness, Tlv, 0.0, 0.0, 0.0),
            srow("g3", "b", Metric::Fitness, Nusa, 0.0, 1.0, 1.0),
            srow("g4", "c", Metric::Fitness, Nusa, 0.0, 1.0, 1.0),
        ];
        let r = robustness(&rows);
        assert!((r[0].mean_norm_phi - 0.2).abs() < 1e-15 && r[0].var_norm_phi < 1e-30);
        assert_eq!((r[1].mean_norm_phi, r[1].var_norm_phi), (0.5, 0.25));
        assert!(r[2].singleton && r[2].var_norm_phi == 0.0);
    }

    fn meas(id: &str, miner: &str, ok: bool, targets: &[(FeatureId, f64)]) -> (TargetConfiguration, MetricRecord) {
        let mut rec = MetricRecord::failed(id, miner, Status::Timeout, 0);
        if ok {
            rec.status = Status::Ok;
            rec.fitness = Some(1.0);
        }
        (TargetConfiguration::new(id, targets.iter().copied()), rec)
    }

    #[test]
    fn feasibility_percentages() {
        use FeatureId::*;
        let t = [(Tlv, 0.0)];
        let m = vec![
            meas("1", "A", true, &t),
            meas("2", "A", true, &t),
            meas("3", "A", false, &t),
            meas("4", "A", true, &[(Tlv, 138.7)]),
        ];
        let r = feasibility(&m, &[], &[Metric::Fitness], 10).unwrap();
        assert_eq!(r.miners[0].percent, 75.0);
        assert_eq!(r.cells.len(), 2);
        assert_eq!(r.cells[0].success_fraction, 2.0 / 3.0);
        assert_eq!(r.cells[1].bucket_hi, 138.7);
        assert!(r.cells[0].mean_norm_phi.is_none());
        assert!(feasibility(&m, &[], &[Metric::Fitness], 0).is_err());

        let m = vec![
            meas("1", "A", true, &t),
            meas("2", "A", true, &t),
            meas("3", "A", false, &t),
            meas("1", "B", false, &t),
            meas("2", "B", true, &t),
            meas("3", "B", true, &t),
        ];
        let r = feasibility(&m, &[], &[Metric::Fitness], 10).unwrap();
        assert!((r.overlap_percent - 100.0 / 3.0).abs() < 1e-12);
        let table = feasibility_table(&r);
        assert!(table.lines().last().unwrap().starts_with("Overlap"));
        assert_eq!(table.lines().count(), 4);
    }
}
