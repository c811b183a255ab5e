//! Log meta-features: the eight-feature catalog, extraction, and greedy
//! low-correlation feature pre-selection.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eventlog::EventLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureId {
    Aq1,
    Nusa,
    Saq1,
    Ekbr3,
    Rt5v,
    Svo,
    Tlkh,
    Tlv,
}

impl FeatureId {
    pub const ALL: [FeatureId; 8] = [
        FeatureId::Aq1,
        FeatureId::Nusa,
        FeatureId::Saq1,
        FeatureId::Ekbr3,
        FeatureId::Rt5v,
        FeatureId::Svo,
        FeatureId::Tlkh,
        FeatureId::Tlv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureId::Aq1 => "aq1",
            FeatureId::Nusa => "nusa",
            FeatureId::Saq1 => "saq1",
            FeatureId::Ekbr3 => "ekbr3",
            FeatureId::Rt5v => "rt5v",
            FeatureId::Svo => "svo",
            FeatureId::Tlkh => "tlkh",
            FeatureId::Tlv => "tlv",
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureId::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown feature {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSpec {
    pub id: FeatureId,
    pub name: &'static str,
    pub description: &'static str,
    pub lo: f64,
    pub hi: f64,
}

impl FeatureSpec {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, value: f64) -> bool {
        value >= self.lo && value <= self.hi
    }
}

/// The feature catalog with the observed value range of every feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCatalog {
    specs: Vec<FeatureSpec>,
}

const STANDARD: [FeatureSpec; 8] = [
    FeatureSpec {
        id: FeatureId::Aq1,
        name: "activities_q1",
        description: "lower quartile of per-activity occurrence counts",
        lo: 1.0,
        hi: 79.92,
    },
    FeatureSpec {
        id: FeatureId::Nusa,
        name: "n_unique_start_activities",
        description: "number of distinct first activities",
        lo: 1.0,
        hi: 6.56,
    },
    FeatureSpec {
        id: FeatureId::Saq1,
        name: "start_activities_q1",
        description: "lower quartile of per-start-activity counts",
        lo: 1.0,
        hi: 174.79,
    },
    FeatureSpec {
        id: FeatureId::Ekbr3,
        name: "eventropy_k_block_ratio_3",
        description: "entropy of length-3 activity windows divided by 3",
        lo: 0.0,
        hi: 4.37,
    },
    FeatureSpec {
        id: FeatureId::Rt5v,
        name: "ratio_top_5_variants",
        description: "fraction of traces covered by the top 5% variants",
        lo: 0.0,
        hi: 0.38,
    },
    FeatureSpec {
        id: FeatureId::Svo,
        name: "skewness_variant_occurrence",
        description: "skewness of variant occurrence counts",
        lo: 1.54,
        hi: 11.61,
    },
    FeatureSpec {
        id: FeatureId::Tlkh,
        name: "trace_len_kurtosis",
        description: "excess kurtosis of trace lengths",
        lo: -0.97,
        hi: 7.92,
    },
    FeatureSpec {
        id: FeatureId::Tlv,
        name: "trace_len_variance",
        description: "population variance of trace lengths",
        lo: 0.0,
        hi: 138.7,
    },
];

impl Default for FeatureCatalog {
    fn default() -> Self {
        FeatureCatalog::standard()
    }
}

impl FeatureCatalog {
    pub fn standard() -> Self {
        FeatureCatalog {
            specs: STANDARD.to_vec(),
        }
    }

    pub fn get(&self, id: FeatureId) -> &FeatureSpec {
        self.specs
            .iter()
            .find(|s| s.id == id)
            .expect("catalog covers every feature id")
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    /// Features of `values` that fall outside their catalog range.
    pub fn out_of_range(&self, values: &FeatureVector) -> Vec<FeatureId> {
        values
            .iter()
            .filter(|(id, v)| !self.get(*id).contains(*v))
            .map(|(id, _)| id)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: BTreeMap<FeatureId, f64>,
}

impl FeatureVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a value; non-finite values are rejected.
    pub fn insert(&mut self, id: FeatureId, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::domain(format!("feature {id} has non-finite value {value}")));
        }
        self.entries.insert(id, value);
        Ok(())
    }

    pub fn get(&self, id: FeatureId) -> Option<f64> {
        self.entries.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureId, f64)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}

impl FromIterator<(FeatureId, f64)> for FeatureVector {
    fn from_iter<I: IntoIterator<Item = (FeatureId, f64)>>(iter: I) -> Self {
        FeatureVector {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Extracted values together with the features whose value was defined as 0
/// because the underlying moment was degenerate.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub values: FeatureVector,
    pub degenerate: Vec<FeatureId>,
}

/// Linear-interpolation quantile of `values` (sorted internally).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::domain(format!("quantile level {q} outside [0, 1]")));
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let h = (xs.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    if lo + 1 >= xs.len() {
        return Ok(xs[lo]);
    }
    Ok(xs[lo] + (h - lo as f64) * (xs[lo + 1] - xs[lo]))
}

/// Population central moments (m2, m3, m4).
fn central_moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// Fisher-Pearson skewness; `None` when degenerate.
fn skewness(xs: &[f64]) -> Option<f64> {
    if xs.len() < 3 {
        return None;
    }
    let (m2, m3, _) = central_moments(xs);
    (m2 > 0.0).then(|| m3 / m2.powf(1.5))
}

/// Excess kurtosis; `None` when degenerate.
fn excess_kurtosis(xs: &[f64]) -> Option<f64> {
    if xs.len() < 3 {
        return None;
    }
    let (m2, _, m4) = central_moments(xs);
    (m2 > 0.0).then(|| m4 / (m2 * m2) - 3.0)
}

fn population_variance(xs: &[f64]) -> f64 {
    central_moments(xs).0
}

/// Normalized k-block entropy: natural-log Shannon entropy of the
/// distribution of all length-`k` sliding windows, divided by `k`.
pub fn block_entropy_ratio(sequences: &[Vec<&str>], k: usize) -> f64 {
    let mut counts: HashMap<&[&str], usize> = HashMap::new();
    let mut total = 0usize;
    for seq in sequences {
        for w in seq.windows(k) {
            *counts.entry(w).or_default() += 1;
            total += 1;
        }
    }
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    // fixed summation order keeps the result bit-for-bit reproducible
    let mut freq: Vec<usize> = counts.into_values().collect();
    freq.sort_unstable();
    let h: f64 = freq
        .into_iter()
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    // -0.0 for a single window
    (h / k as f64).max(0.0)
}

struct LogStats<'s, 'a> {
    sequences: &'s [Vec<&'a str>],
    activity_counts: Vec<f64>,
    start_counts: Vec<f64>,
    /// variant counts sorted descending
    variant_counts: Vec<usize>,
    lengths: Vec<f64>,
}

impl<'s, 'a> LogStats<'s, 'a> {
    fn new(sequences: &'s [Vec<&'a str>]) -> Self {
        let mut activity: HashMap<&str, usize> = HashMap::new();
        let mut start: HashMap<&str, usize> = HashMap::new();
        let mut variants: HashMap<&[&str], usize> = HashMap::new();
        for seq in sequences {
            for a in seq {
                *activity.entry(a).or_default() += 1;
            }
            if let Some(first) = seq.first() {
                *start.entry(first).or_default() += 1;
            }
            *variants.entry(seq.as_slice()).or_default() += 1;
        }
        let mut variant_counts: Vec<usize> = variants.into_values().collect();
        variant_counts.sort_unstable_by(|a, b| b.cmp(a));
        LogStats {
            lengths: sequences.iter().map(|s| s.len() as f64).collect(),
            activity_counts: activity.into_values().map(|c| c as f64).collect(),
            start_counts: start.into_values().map(|c| c as f64).collect(),
            variant_counts,
            sequences,
        }
    }

    /// Returns the value and whether it was defined by the degeneracy rule.
    fn compute(&self, id: FeatureId) -> Result<(f64, bool)> {
        Ok(match id {
            FeatureId::Aq1 => (quantile(&self.activity_counts, 0.25)?, false),
            FeatureId::Nusa => (self.start_counts.len() as f64, false),
            FeatureId::Saq1 => (quantile(&self.start_counts, 0.25)?, false),
            FeatureId::Ekbr3 => (block_entropy_ratio(&self.sequences, 3), false),
            FeatureId::Rt5v => {
                let n_variants = self.variant_counts.len();
                let top = ((0.05 * n_variants as f64).ceil() as usize).max(1);
                let covered: usize = self.variant_counts[..top].iter().sum();
                (covered as f64 / self.sequences.len() as f64, false)
            }
            FeatureId::Svo => {
                let xs: Vec<f64> = self.variant_counts.iter().map(|&c| c as f64).collect();
                match skewness(&xs) {
                    Some(v) => (v, false),
                    None => (0.0, true),
                }
            }
            FeatureId::Tlkh => match excess_kurtosis(&self.lengths) {
                Some(v) => (v, false),
                None => (0.0, true),
            },
            FeatureId::Tlv => (population_variance(&self.lengths), false),
        })
    }
}

/// Extracts the requested features, reporting degenerate moments.
pub fn extract_detailed(log: &EventLog, ids: &[FeatureId]) -> Result<Extraction> {
    log.require_non_empty("feature extraction")?;
    extract_from_sequences(&log.sequences(), ids)
}

/// Extraction over bare activity sequences; agrees exactly with
/// [`extract_detailed`] on the log holding the same traces in order.
pub fn extract_from_sequences(sequences: &[Vec<&str>], ids: &[FeatureId]) -> Result<Extraction> {
    if sequences.is_empty() || sequences.iter().any(Vec::is_empty) {
        return Err(Error::domain("feature extraction needs non-empty traces"));
    }
    let stats = LogStats::new(sequences);
    let mut values = FeatureVector::new();
    let mut degenerate = Vec::new();
    for &id in ids {
        let (v, flag) = stats.compute(id)?;
        values.insert(id, v)?;
        if flag {
            degenerate.push(id);
        }
    }
    Ok(Extraction { values, degenerate })
}

pub fn extract(log: &EventLog, ids: &[FeatureId]) -> Result<FeatureVector> {
    extract_detailed(log, ids).map(|e| e.values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionRow {
    pub log_id: String,
    pub feature: FeatureId,
    pub value: f64,
    pub degenerate_flag: bool,
}

impl ExtractionRow {
    pub fn from_extraction(log_id: &str, extraction: &Extraction) -> Vec<ExtractionRow> {
        extraction
            .values
            .iter()
            .map(|(feature, value)| ExtractionRow {
                log_id: log_id.to_string(),
                feature,
                value,
                degenerate_flag: extraction.degenerate.contains(&feature),
            })
            .collect()
    }
}

/// Serializes extraction rows as `log_id,feature,value,degenerate_flag`.
pub fn write_report(rows: &[ExtractionRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["log_id", "feature", "value", "degenerate_flag"])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Greedy selection of `n` weakly correlated columns.
///
/// `matrix` holds one row per log and one column per candidate named in
/// `names`. The first pick has the lowest mean absolute Pearson correlation
/// to all other candidates; every later pick minimizes its maximum absolute
/// correlation to the already selected set. Ties go to the
/// lexicographically smaller name.
pub fn greedy_select<S: AsRef<str>>(
    matrix: &[Vec<f64>],
    names: &[S],
    n: usize,
) -> Result<Vec<String>> {
    let m = names.len();
    if matrix.len() < 2 {
        return Err(Error::domain("greedy selection needs at least two rows"));
    }
    if let Some(bad) = matrix.iter().position(|r| r.len() != m) {
        return Err(Error::domain(format!(
            "row {bad} has {} columns, expected {m}",
            matrix[bad].len()
        )));
    }
    if n > m {
        return Err(Error::domain(format!("cannot select {n} of {m} candidates")));
    }
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|j| matrix.iter().map(|r| r[j]).collect())
        .collect();
    for (j, col) in columns.iter().enumerate() {
        if col.iter().all(|&v| v == col[0]) {
            return Err(Error::domain(format!(
                "candidate {} is constant; its correlation is undefined",
                names[j].as_ref()
            )));
        }
    }
    let mut corr = vec![vec![1.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let r = pearson(&columns[i], &columns[j])
                .expect("non-constant columns")
                .abs();
            corr[i][j] = r;
            corr[j][i] = r;
        }
    }

    let better = |score: f64, j: usize, best: Option<(f64, usize)>| match best {
        None => true,
        Some((s, b)) => score < s || (score == s && names[j].as_ref() < names[b].as_ref()),
    };

    let mut selected: Vec<usize> = Vec::with_capacity(n);
    while selected.len() < n {
        let mut best: Option<(f64, usize)> = None;
        for j in (0..m).filter(|j| !selected.contains(j)) {
            let score = if selected.is_empty() {
                if m == 1 {
                    0.0
                } else {
                    (0..m).filter(|&o| o != j).map(|o| corr[j][o]).sum::<f64>() / (m - 1) as f64
                }
            } else {
                selected.iter().map(|&s| corr[j][s]).fold(0.0, f64::max)
            };
            if better(score, j, best) {
                best = Some((score, j));
            }
        }
        selected.push(best.expect("n <= m leaves a candidate").1);
    }
    Ok(selected
        .into_iter()
        .map(|j| names[j].as_ref().to_string())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(seqs: &[&[&str]]) -> EventLog {
        EventLog::from_sequences(seqs).unwrap()
    }

    #[test]
    fn quantile_fixtures() {
        assert!((quantile(&[2.0, 4.0, 4.0], 0.25).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(quantile(&[5.0], 0.0).unwrap(), 5.0);
        assert_eq!(quantile(&[5.0], 0.73).unwrap(), 5.0);
        assert_eq!(quantile(&[5.0], 1.0).unwrap(), 5.0);
        assert!((quantile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap() - 2.5).abs() < 1e-12);
        assert!(quantile(&[], 0.5).is_err());
    }

    #[test]
    fn mixed_log_fixture() {
        let l = log(&[&["a", "b", "c"], &["a", "b", "c"], &["a", "c"], &["a", "c"]]);
        let v = extract(&l, &FeatureId::ALL).unwrap();
        assert_eq!(v.get(FeatureId::Aq1), Some(3.0));
        assert_eq!(v.get(FeatureId::Nusa), Some(1.0));
        assert_eq!(v.get(FeatureId::Tlv), Some(0.25));
        // 2 variants of count 2: top ceil(0.1) = 1 variant covers 2 of 4
        assert_eq!(v.get(FeatureId::Rt5v), Some(0.5));
        assert_eq!(v.get(FeatureId::Svo), Some(0.0));
        assert_eq!(v.get(FeatureId::Saq1), Some(4.0));
    }

    #[test]
    fn single_variant_log() {
        let seqs = vec![vec!["a", "b", "c"]; 6];
        let l = EventLog::from_sequences(&seqs).unwrap();
        let e = extract_detailed(&l, &FeatureId::ALL).unwrap();
        assert_eq!(e.values.get(FeatureId::Ekbr3), Some(0.0));
        assert_eq!(e.values.get(FeatureId::Rt5v), Some(1.0));
        assert_eq!(e.values.get(FeatureId::Tlv), Some(0.0));
        assert_eq!(e.values.get(FeatureId::Tlkh), Some(0.0));
        assert!(e.degenerate.contains(&FeatureId::Tlkh));
        assert!(e.degenerate.contains(&FeatureId::Svo));
    }

    #[test]
    fn entropy_of_uniform_windows() {
        // two equiprobable 3-grams: ln 2 / 3
        let l = log(&[&["a", "b", "c"], &["c", "b", "a"], &["x", "y"]]);
        let v = extract(&l, &[FeatureId::Ekbr3]).unwrap();
        assert!((v.get(FeatureId::Ekbr3).unwrap() - 2f64.ln() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn moments_against_direct_formulas() {
        // lengths 1,2,2,3,7 computed term by term
        let l = log(&[
            &["a"],
            &["a", "b"],
            &["b", "a"],
            &["a", "b", "c"],
            &["a", "b", "c", "d", "e", "f", "g"],
        ]);
        let v = extract(&l, &[FeatureId::Tlv, FeatureId::Tlkh]).unwrap();
        let xs = [1.0, 2.0, 2.0, 3.0, 7.0];
        let mean = 3.0;
        let m2 = xs.iter().map(|x: &f64| (x - mean).powi(2)).sum::<f64>() / 5.0;
        let m4 = xs.iter().map(|x: &f64| (x - mean).powi(4)).sum::<f64>() / 5.0;
        assert!((v.get(FeatureId::Tlv).unwrap() - m2).abs() < 1e-12);
        assert!((v.get(FeatureId::Tlkh).unwrap() - (m4 / (m2 * m2) - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn skewness_of_variant_counts() {
        // variant counts 3,1,1 -> m2 = 8/9, m3 = 16/27, g1 = 1/sqrt(2)
        let l = log(&[&["a"], &["a"], &["a"], &["b"], &["c"]]);
        let v = extract(&l, &[FeatureId::Svo]).unwrap();
        assert!((v.get(FeatureId::Svo).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn empty_log_rejected() {
        assert!(extract(&EventLog::default(), &[FeatureId::Aq1]).is_err());
    }

    #[test]
    fn catalog_ranges() {
        let c = FeatureCatalog::standard();
        let r = |id| {
            let s = c.get(id);
            (s.lo, s.hi)
        };
        assert_eq!(r(FeatureId::Aq1), (1.0, 79.92));
        assert_eq!(r(FeatureId::Nusa), (1.0, 6.56));
        assert_eq!(r(FeatureId::Saq1), (1.0, 174.79));
        assert_eq!(r(FeatureId::Ekbr3), (0.0, 4.37));
        assert_eq!(r(FeatureId::Rt5v), (0.0, 0.38));
        assert_eq!(r(FeatureId::Svo), (1.54, 11.61));
        assert_eq!(r(FeatureId::Tlkh), (-0.97, 7.92));
        assert_eq!(r(FeatureId::Tlv), (0.0, 138.7));
        let v: FeatureVector = [(FeatureId::Rt5v, 0.5), (FeatureId::Tlv, 3.0)].into_iter().collect();
        assert_eq!(c.out_of_range(&v), vec![FeatureId::Rt5v]);
    }

    #[test]
    fn feature_id_round_trip() {
        for id in FeatureId::ALL {
            assert_eq!(id.as_str().parse::<FeatureId>().unwrap(), id);
        }
        assert!("bogus".parse::<FeatureId>().is_err());
    }

    #[test]
    fn report_csv_columns() {
        let l = log(&[&["a", "b"]]);
        let e = extract_detailed(&l, &[FeatureId::Nusa, FeatureId::Tlkh]).unwrap();
        let text = write_report(&ExtractionRow::from_extraction("L1", &e)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("log_id,feature,value,degenerate_flag"));
        assert_eq!(lines.next(), Some("L1,nusa,1.0,false"));
        assert_eq!(lines.next(), Some("L1,tlkh,0.0,true"));
    }

    #[test]
    fn greedy_select_edge_cases() {
        let m = vec![vec![1.0], vec![2.0], vec![4.0]];
        assert_eq!(greedy_select(&m, &["only"], 1).unwrap(), vec!["only"]);
        assert!(greedy_select(&m, &["only"], 2).is_err());
        let constant = vec![vec![1.0, 3.0], vec![2.0, 3.0]];
        let err = greedy_select(&constant, &["x", "flat"], 1).unwrap_err();
        assert!(err.to_string().contains("flat"));
        assert!(greedy_select(&[vec![1.0]], &["a"], 1).is_err());
    }
}
