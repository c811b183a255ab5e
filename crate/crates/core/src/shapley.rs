//! Coalition games over feature-value players and their Shapley values.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::conformance::{Metric, MetricRecord, Status};
use crate::error::{Error, Result};
use crate::features::FeatureId;
use crate::generator::TargetConfiguration;

/// A feature paired with the target value it was conditioned on.
pub type Player = (FeatureId, f64);

/// Characteristic function stored densely by player bitmask; `values[0]`
/// is the empty coalition and is always 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoalitionGame {
    pub id: String,
    pub players: Vec<Player>,
    pub values: Vec<Option<f64>>,
    pub miner: String,
    pub metric: Metric,
    pub complete: bool,
}

impl CoalitionGame {
    pub fn new(id: impl Into<String>, players: Vec<Player>, miner: impl Into<String>, metric: Metric) -> Self {
        let mut values = vec![None; 1 << players.len()];
        values[0] = Some(0.0);
        CoalitionGame {
            id: id.into(),
            complete: players.is_empty(),
            players,
            values,
            miner: miner.into(),
            metric,
        }
    }

    /// Complete game on `k` anonymous players with `v(mask)` for every
    /// non-empty mask.
    pub fn from_fn(k: usize, v: impl Fn(usize) -> f64) -> Self {
        let players = (0..k).map(|i| (FeatureId::ALL[i % FeatureId::ALL.len()], i as f64)).collect();
        let mut g = CoalitionGame::new(format!("k{k}"), players, "", Metric::Fitness);
        for mask in 1..g.values.len() {
            g.set(mask, v(mask));
        }
        g
    }

    pub fn k(&self) -> usize {
        self.players.len()
    }

    pub fn set(&mut self, mask: usize, value: f64) {
        assert!(mask != 0, "v(empty set) is fixed at 0");
        self.values[mask] = Some(value);
        self.complete = self.values.iter().all(Option::is_some);
    }

    pub fn value(&self, mask: usize) -> Option<f64> {
        self.values[mask]
    }

    fn require_complete(&self) -> Result<Vec<f64>> {
        self.values
            .iter()
            .map(|v| v.ok_or_else(|| Error::domain(format!("game {} is incomplete", self.id))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyAttribution {
    pub game_id: String,
    pub phi: Vec<f64>,
    pub phi_normalized: Vec<f64>,
    /// Every phi is zero, so shares are undefined and reported as 0.
    pub degenerate: bool,
}

impl ShapleyAttribution {
    fn new(game: &CoalitionGame, phi: Vec<f64>) -> Self {
        let (phi_normalized, degenerate) = normalize(&phi);
        ShapleyAttribution {
            game_id: game.id.clone(),
            phi,
            phi_normalized,
            degenerate,
        }
    }
}

/// Shares `|phi_i| / sum_j |phi_j|`; all zeros with the flag set when the
/// sum vanishes.
pub fn normalize(phi: &[f64]) -> (Vec<f64>, bool) {
    let total: f64 = phi.iter().map(|x| x.abs()).sum();
    if total == 0.0 {
        (vec![0.0; phi.len()], true)
    } else {
        (phi.iter().map(|x| x.abs() / total).collect(), false)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Exact Shapley values by subset enumeration with `|S|!(k-|S|-1)!/k!`
/// weights.
pub fn shapley_exact(game: &CoalitionGame) -> Result<ShapleyAttribution> {
    let v = game.require_complete()?;
    let k = game.k();
    let weight: Vec<f64> = (0..k)
        .map(|s| factorial(s) * factorial(k - s - 1) / factorial(k))
        .collect();
    let phi = (0..k)
        .map(|i| {
            let bit = 1 << i;
            (0..1usize << k)
                .filter(|s| s & bit == 0)
                .map(|s| weight[s.count_ones() as usize] * (v[s | bit] - v[s]))
                .sum()
        })
        .collect();
    Ok(ShapleyAttribution::new(game, phi))
}

pub const ORACLE_MAX_PLAYERS: usize = 8;

/// Average marginal contribution over all `k!` player orders.
pub fn shapley_permutation_oracle(game: &CoalitionGame) -> Result<ShapleyAttribution> {
    let v = game.require_complete()?;
    let k = game.k();
    if k > ORACLE_MAX_PLAYERS {
        return Err(Error::domain(format!("permutation oracle limited to {ORACLE_MAX_PLAYERS} players")));
    }
    let mut sums = vec![0.0; k];
    let mut order: Vec<usize> = (0..k).collect();
    let mut count = 0usize;
    permute(&mut order, 0, &mut |perm| {
        let mut mask = 0usize;
        for &i in perm {
            sums[i] += v[mask | 1 << i] - v[mask];
            mask |= 1 << i;
        }
        count += 1;
    });
    let phi = sums.into_iter().map(|s| s / count as f64).collect();
    Ok(ShapleyAttribution::new(game, phi))
}

fn permute(xs: &mut [usize], from: usize, visit: &mut impl FnMut(&[usize])) {
    if from == xs.len() {
        visit(xs);
        return;
    }
    for i in from..xs.len() {
        xs.swap(from, i);
        permute(xs, from + 1, visit);
        xs.swap(from, i);
    }
}

/// Bit-exact key of a coalition.
type CoalitionKey = Vec<(FeatureId, u64)>;

fn key_of(targets: &BTreeMap<FeatureId, f64>) -> CoalitionKey {
    targets.iter().map(|(&f, &v)| (f, v.to_bits())).collect()
}

/// One game per `k_max`-dimensional configuration, miner and metric, with
/// each sub-coalition value taken from the measurement of that smaller
/// configuration. Values from non-ok records count as missing.
pub fn assemble_games(
    rows: &[(TargetConfiguration, MetricRecord)],
    metrics: &[Metric],
    k_max: usize,
) -> Result<Vec<CoalitionGame>> {
    let mut table: HashMap<(CoalitionKey, &str, Metric), Option<f64>> = HashMap::new();
    let mut tops: Vec<&TargetConfiguration> = Vec::new();
    let mut seen_tops: HashSet<CoalitionKey> = HashSet::new();
    let mut miners: Vec<&str> = Vec::new();
    for (cfg, rec) in rows {
        let key = key_of(&cfg.targets);
        if cfg.dimensionality() == k_max && seen_tops.insert(key.clone()) {
            tops.push(cfg);
        }
        if !miners.contains(&rec.miner.as_str()) {
            miners.push(&rec.miner);
        }
        for &m in metrics {
            let value = (rec.status == Status::Ok).then(|| rec.value(m)).flatten();
            match table.insert((key.clone(), rec.miner.as_str(), m), value) {
                Some(prev) if prev.map(f64::to_bits) != value.map(f64::to_bits) => {
                    return Err(Error::domain(format!(
                        "conflicting {m} measurements for {} with miner {}: {prev:?} vs {value:?}",
                        cfg.id, rec.miner
                    )));
                }
                _ => {}
            }
        }
    }
    miners.sort_unstable();

    let mut games = Vec::new();
    for top in tops {
        let players: Vec<Player> = top.targets.iter().map(|(&f, &v)| (f, v)).collect();
        for &miner in &miners {
            for &metric in metrics {
                let mut g = CoalitionGame::new(
                    format!("{}:{miner}:{metric}", top.id),
                    players.clone(),
                    miner,
                    metric,
                );
                for mask in 1..1usize << players.len() {
                    let sub: CoalitionKey = players
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| mask & (1 << i) != 0)
                        .map(|(_, &(f, v))| (f, v.to_bits()))
                        .collect();
                    if let Some(Some(v)) = table.get(&(sub, miner, metric)) {
                        g.set(mask, *v);
                    }
                }
                games.push(g);
            }
        }
    }
    Ok(games)
}

/// One player's attribution in one game; phi is absent for incomplete games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyRow {
    pub game_id: String,
    pub miner: String,
    pub metric: Metric,
    pub feature: FeatureId,
    pub target_value: f64,
    pub phi: Option<f64>,
    pub phi_normalized: Option<f64>,
    pub complete: bool,
}

/// Solves every complete game exactly and flattens all games into rows.
pub fn shapley_rows(games: &[CoalitionGame]) -> Result<Vec<ShapleyRow>> {
    let mut rows = Vec::new();
    for g in games {
        let attribution = if g.complete { Some(shapley_exact(g)?) } else { None };
        for (i, &(feature, target_value)) in g.players.iter().enumerate() {
            rows.push(ShapleyRow {
                game_id: g.id.clone(),
                miner: g.miner.clone(),
                metric: g.metric,
                feature,
                target_value,
                phi: attribution.as_ref().map(|a| a.phi[i]),
                phi_normalized: attribution.as_ref().map(|a| a.phi_normalized[i]),
                complete: g.complete,
            });
        }
    }
    Ok(rows)
}
