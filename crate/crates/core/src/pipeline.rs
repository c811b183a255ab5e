//! Study orchestration: configuration enumeration, checkpointed execution,
//! Shapley recomputation and reports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    correlations, feasibility, feasibility_table, friedman_nemenyi, mean_attribution, rank_matrix,
    robustness, Alpha,
};
use crate::conformance::{measure, Limits, Metric, MetricRecord, Status};
use crate::discovery::{DfgOptions, MinerRegistry, Soundness};
use crate::error::{Error, Result};
use crate::eventlog::write_xes;
use crate::features::{extract_detailed, ExtractionRow, FeatureCatalog, FeatureId};
use crate::generator::{calibrate, GenerationStatus, TargetConfiguration};
use crate::shapley::{assemble_games, shapley_rows, ShapleyRow};

pub const PARALLELISM_ENV: &str = "LOGSHAP_PARALLELISM";

const CONFIG_FILE: &str = "config.json";
const CHECKPOINT_FILE: &str = "checkpoint.json";
const GENERATION_CSV: &str = "generation.csv";
const MEASUREMENTS_CSV: &str = "measurements.csv";
const FEATURES_CSV: &str = "features.csv";
const SHAPLEY_CSV: &str = "shapley.csv";

pub const GENERATION_COLUMNS: [&str; 8] =
    ["config_id", "features", "targets", "achieved", "distance", "status", "iterations", "seed"];
pub const MEASUREMENT_COLUMNS: [&str; 12] = [
    "config_id",
    "features",
    "target_values",
    "miner",
    "status",
    "fitness",
    "precision",
    "fscore",
    "size",
    "cfc",
    "exec_time_ms",
    "sound",
];
pub const FEATURE_COLUMNS: [&str; 4] = ["log_id", "feature", "value", "degenerate_flag"];
pub const SHAPLEY_COLUMNS: [&str; 8] = [
    "game_id",
    "miner",
    "metric",
    "feature",
    "target_value",
    "phi",
    "phi_normalized",
    "complete",
];
const RANKING_COLUMNS: [&str; 9] = [
    "scope",
    "feature",
    "mean_rank",
    "blocks",
    "statistic",
    "p_value",
    "critical_distance",
    "alpha",
    "cliques",
];
const CORRELATION_COLUMNS: [&str; 8] =
    ["miner", "metric", "feature", "n", "rho", "p_value", "approximate", "strength"];
const ROBUSTNESS_COLUMNS: [&str; 6] =
    ["miner", "metric", "n", "mean_norm_phi", "var_norm_phi", "singleton"];
const FEASIBILITY_COLUMNS: [&str; 9] = [
    "feature",
    "bucket_lo",
    "bucket_hi",
    "miner",
    "metric",
    "configurations",
    "successes",
    "success_fraction",
    "mean_norm_phi",
];
const MEAN_COLUMNS: [&str; 6] = ["feature", "miner", "metric", "mean_phi", "mean_phi_normalized", "games"];

/// Files written by [`report`], besides the summary.
pub const REPORT_FILES: [&str; 6] = [
    MEASUREMENTS_CSV,
    SHAPLEY_CSV,
    "ranking.csv",
    "correlations.csv",
    "robustness.csv",
    "feasibility.csv",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSettings {
    pub budget: usize,
    pub epsilon: f64,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        GenerationSettings {
            budget: 2000,
            epsilon: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub features: Vec<FeatureId>,
    pub values_per_feature: usize,
    pub k_max: usize,
    pub miners: Vec<String>,
    pub metrics: Vec<Metric>,
    pub limits: Limits,
    pub generation: GenerationSettings,
    pub seed: u64,
    /// Worker count; falls back to the environment, then to the host.
    pub parallelism: Option<usize>,
    pub dfg: DfgOptions,
    /// Per-feature value lists replacing the equidistant grid.
    pub value_grids: BTreeMap<FeatureId, Vec<f64>>,
    pub buckets: usize,
    pub alpha: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            features: FeatureId::ALL.to_vec(),
            values_per_feature: 10,
            k_max: 3,
            miners: vec!["ind".into(), "dfg".into()],
            metrics: Metric::ALL.to_vec(),
            limits: Limits::default(),
            generation: GenerationSettings::default(),
            seed: 0,
            parallelism: None,
            dfg: DfgOptions::default(),
            value_grids: BTreeMap::new(),
            buckets: 10,
            alpha: 0.05,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let distinct: BTreeSet<_> = self.features.iter().collect();
        if self.features.is_empty() || distinct.len() != self.features.len() {
            return Err(Error::domain("features must be a non-empty list without repeats"));
        }
        if self.k_max < 1 || self.k_max > self.features.len() {
            return Err(Error::domain(format!(
                "k_max {} outside [1, {}]",
                self.k_max,
                self.features.len()
            )));
        }
        if self.values_per_feature < 1 {
            return Err(Error::domain("values_per_feature must be >= 1"));
        }
        if self.miners.is_empty() || self.metrics.is_empty() {
            return Err(Error::domain("at least one miner and one metric are required"));
        }
        if self.generation.budget < 1 || !(self.generation.epsilon >= 0.0) {
            return Err(Error::domain("generation budget must be >= 1 and epsilon >= 0"));
        }
        if self.buckets < 1 {
            return Err(Error::domain("buckets must be >= 1"));
        }
        self.alpha()?;
        let catalog = FeatureCatalog::standard();
        for (f, grid) in &self.value_grids {
            if grid.is_empty() || grid.iter().any(|v| !catalog.get(*f).contains(*v)) {
                return Err(Error::domain(format!("value grid for {f} is empty or out of range")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> Result<Alpha> {
        match self.alpha {
            a if a == 0.05 => Ok(Alpha::P05),
            a if a == 0.10 => Ok(Alpha::P10),
            a => Err(Error::domain(format!("alpha must be 0.05 or 0.10, got {a}"))),
        }
    }

    pub fn grid(&self, feature: FeatureId) -> Vec<f64> {
        if let Some(g) = self.value_grids.get(&feature) {
            return g.clone();
        }
        let spec = FeatureCatalog::standard().get(feature).to_owned();
        let v = self.values_per_feature;
        if v == 1 {
            return vec![(spec.lo + spec.hi) / 2.0];
        }
        (0..v)
            .map(|j| (spec.lo + j as f64 * (spec.hi - spec.lo) / (v - 1) as f64).min(spec.hi))
            .collect()
    }

    pub fn worker_count(&self) -> usize {
        self.parallelism
            .or_else(|| std::env::var(PARALLELISM_ENV).ok()?.parse().ok())
            .or_else(|| thread::available_parallelism().ok().map(|n| n.get()))
            .unwrap_or(1)
            .max(1)
    }

    /// Snapshot form used for resume comparisons (scheduling excluded).
    fn comparable(&self) -> Result<String> {
        let mut c = self.clone();
        c.parallelism = None;
        Ok(serde_json::to_string_pretty(&c)?)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of configurations `sum_{k=1}^{k_max} C(n, k) v^k`.
pub fn configuration_count(n: usize, v: usize, k_max: usize) -> u128 {
    (1..=k_max.min(n) as u128)
        .map(|k| binomial(n as u128, k) * (v as u128).pow(k as u32))
        .sum()
}

/// Union of two configurations; a feature present in both must carry the
/// same value.
pub fn join_configurations(a: &TargetConfiguration, b: &TargetConfiguration) -> Result<TargetConfiguration> {
    let mut targets = a.targets.clone();
    for (&f, &v) in &b.targets {
        match targets.insert(f, v) {
            Some(prev) if prev != v => {
                return Err(Error::Conflict {
                    feature: f.to_string(),
                    left: prev,
                    right: v,
                })
            }
            _ => {}
        }
    }
    let parts: BTreeSet<&str> = a.id.split('+').chain(b.id.split('+')).filter(|s| !s.is_empty()).collect();
    Ok(TargetConfiguration {
        id: parts.into_iter().collect::<Vec<_>>().join("+"),
        targets,
    })
}

fn next_subset(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// All configurations: each feature subset of size 1..=k_max (lexicographic
/// by position) crossed with every value-index tuple (lexicographic). Ids
/// look like `nusa.2+tlv.0`.
pub fn enumerate_configurations(config: &RunConfig) -> Vec<TargetConfiguration> {
    let feats = &config.features;
    let grids: Vec<Vec<f64>> = feats.iter().map(|&f| config.grid(f)).collect();
    let mut out = Vec::new();
    for k in 1..=config.k_max.min(feats.len()) {
        let mut subset: Vec<usize> = (0..k).collect();
        loop {
            let mut tuple = vec![0usize; k];
            loop {
                let id = subset
                    .iter()
                    .zip(&tuple)
                    .map(|(&f, &j)| format!("{}.{j}", feats[f]))
                    .collect::<Vec<_>>()
                    .join("+");
                let targets = subset.iter().zip(&tuple).map(|(&f, &j)| (feats[f], grids[f][j]));
                out.push(TargetConfiguration::new(id, targets));
                // odometer over value indices, last position fastest
                let mut pos = k;
                while pos > 0 {
                    pos -= 1;
                    tuple[pos] += 1;
                    if tuple[pos] < grids[subset[pos]].len() {
                        break;
                    }
                    tuple[pos] = 0;
                    if pos == 0 {
                        pos = usize::MAX;
                        break;
                    }
                }
                if pos == usize::MAX {
                    break;
                }
            }
            if !next_subset(&mut subset, feats.len()) {
                break;
            }
        }
    }
    out
}

/// Seed for one configuration: the first 8 bytes of SHA-256 over the
/// global seed and the id.
pub fn config_seed(global: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update(id.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn encode_targets(t: &BTreeMap<FeatureId, f64>) -> String {
    t.iter().map(|(f, v)| format!("{f}={v}")).collect::<Vec<_>>().join(";")
}

fn decode_targets(s: &str) -> Result<BTreeMap<FeatureId, f64>> {
    s.split(';')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (f, v) = p
                .split_once('=')
                .ok_or_else(|| Error::schema(format!("bad target entry {p:?}")))?;
            let v: f64 = v.parse().map_err(|_| Error::schema(format!("bad target value {v:?}")))?;
            Ok((f.parse()?, v))
        })
        .collect()
}

fn feature_list(t: &TargetConfiguration) -> String {
    t.targets.keys().map(|f| f.as_str()).collect::<Vec<_>>().join(";")
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if !header.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::schema(format!(
            "{} has columns {found:?}, expected {header:?}",
            path.display()
        )));
    }
    r.records().map(|x| x.map_err(Error::from)).collect()
}

/// Checks that a CSV file carries exactly the given header.
pub fn validate_csv_schema(path: &Path, header: &[&str]) -> Result<usize> {
    read_rows(path, header).map(|rows| rows.len())
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    completed: usize,
    offsets: BTreeMap<String, u64>,
    elapsed_ms: u64,
    finished: bool,
}

const APPENDED: [(&str, &[&str]); 3] = [
    (GENERATION_CSV, &GENERATION_COLUMNS),
    (MEASUREMENTS_CSV, &MEASUREMENT_COLUMNS),
    (FEATURES_CSV, &FEATURE_COLUMNS),
];

struct ConfigResult {
    index: usize,
    generation: Vec<String>,
    measurements: Vec<Vec<String>>,
    features: Vec<Vec<String>>,
}

fn process(
    cfg: &RunConfig,
    registry: &MinerRegistry,
    target: &TargetConfiguration,
    index: usize,
    out: &Path,
) -> Result<ConfigResult> {
    let seed = config_seed(cfg.seed, &target.id);
    let outcome = calibrate(target, cfg.generation.budget, cfg.generation.epsilon, seed)?;
    let achieved = if outcome.log.is_some() {
        encode_targets(&outcome.achieved.iter().collect())
    } else {
        String::new()
    };
    let generation = vec![
        target.id.clone(),
        feature_list(target),
        encode_targets(&target.targets),
        achieved,
        if outcome.distance.is_finite() { fmt_f64(outcome.distance) } else { String::new() },
        outcome.status.as_str().to_string(),
        outcome.iterations_used.to_string(),
        seed.to_string(),
    ];
    let mut features = Vec::new();
    let records: Vec<MetricRecord> = match outcome.accepted_log() {
        Some(log) => {
            fs::write(out.join("logs").join(format!("{}.xes", target.id)), write_xes(log))?;
            let ex = extract_detailed(log, &FeatureId::ALL)?;
            for r in ExtractionRow::from_extraction(&target.id, &ex) {
                features.push(vec![
                    r.log_id,
                    r.feature.to_string(),
                    fmt_f64(r.value),
                    r.degenerate_flag.to_string(),
                ]);
            }
            let shared = Arc::new(log.clone());
            cfg.miners
                .iter()
                .map(|m| measure(registry, m, shared.clone(), &cfg.limits, &target.id))
                .collect::<Result<_>>()?
        }
        None => cfg
            .miners
            .iter()
            .map(|m| MetricRecord::failed(&target.id, m, Status::GenerationFailed, 0))
            .collect(),
    };
    let measurements = records
        .into_iter()
        .map(|r| {
            vec![
                target.id.clone(),
                feature_list(target),
                encode_targets(&target.targets),
                r.miner,
                r.status.as_str().to_string(),
                fmt_opt(r.fitness),
                fmt_opt(r.precision),
                fmt_opt(r.fscore),
                fmt_opt(r.size),
                fmt_opt(r.cfc),
                r.exec_time_ms.to_string(),
                r.sound.as_str().to_string(),
            ]
        })
        .collect();
    Ok(ConfigResult {
        index,
        generation,
        measurements,
        features,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunState {
    pub configurations: usize,
    pub completed: usize,
    pub processed_now: usize,
    pub finished: bool,
}

/// Options for [`run_with`].
#[derive(Debug, Clone, Default)]
pub struct RunControl {
    /// Stop after this many configurations in this invocation, leaving the
    /// directory resumable (used to exercise interruption).
    pub stop_after: Option<usize>,
}

pub fn run(config: &RunConfig, out: &Path) -> Result<RunState> {
    run_with(config, out, &RunControl::default())
}

/// Executes (or continues) a study in `out`; see the crate docs for the
/// directory layout.
pub fn run_with(config: &RunConfig, out: &Path, control: &RunControl) -> Result<RunState> {
    config.validate()?;
    fs::create_dir_all(out.join("logs"))?;
    let snapshot = out.join(CONFIG_FILE);
    if snapshot.exists() {
        let stored = RunConfig::load(&snapshot)?;
        check_same(&stored, config)?;
    } else {
        fs::write(&snapshot, serde_json::to_string_pretty(config)?)?;
    }
    let configs = enumerate_configurations(config);
    let order: HashMap<&str, usize> = configs.iter().enumerate().map(|(i, c)| (c.id.as_str(), i)).collect();
    let mut ckpt = open_checkpoint(out)?;
    let done = completed_ids(out, &ckpt, &order)?;

    let pending: Vec<usize> = (0..configs.len()).filter(|i| !done.contains(i)).collect();
    let registry = MinerRegistry::standard(config.dfg);
    for m in &config.miners {
        registry.get(m)?;
    }
    let started = Instant::now();
    let base_elapsed = ckpt.elapsed_ms;
    let limit = control.stop_after.unwrap_or(usize::MAX);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let mut processed = 0usize;
    let workers = config.worker_count().min(pending.len().max(1));
    let mut failure: Option<Error> = None;

    thread::scope(|scope| {
        let (tx, rx) = mpsc::channel::<Result<ConfigResult>>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, stop, pending, configs, registry) = (&next, &stop, &pending, &configs, &registry);
            scope.spawn(move || loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let slot = next.fetch_add(1, Ordering::SeqCst);
                let Some(&i) = pending.get(slot) else { break };
                let res = process(config, registry, &configs[i], i, out);
                if tx.send(res).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for res in rx {
            if processed >= limit || failure.is_some() {
                continue;
            }
            let outcome = res.and_then(|r| {
                append_result(out, &r)?;
                ckpt.completed += 1;
                for (name, _) in APPENDED {
                    ckpt.offsets.insert(name.to_string(), fs::metadata(out.join(name))?.len());
                }
                ckpt.elapsed_ms = base_elapsed + started.elapsed().as_millis() as u64;
                write_atomic(&out.join(CHECKPOINT_FILE), &serde_json::to_string(&ckpt)?)
            });
            match outcome {
                Ok(()) => processed += 1,
                Err(e) => {
                    failure = Some(e);
                    stop.store(true, Ordering::SeqCst);
                }
            }
            if processed >= limit {
                stop.store(true, Ordering::SeqCst);
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }

    let finished = ckpt.completed == configs.len();
    if finished {
        sort_results(out, &order, config)?;
        ckpt.finished = true;
        for (name, _) in APPENDED {
            ckpt.offsets.insert(name.to_string(), fs::metadata(out.join(name))?.len());
        }
        write_atomic(&out.join(CHECKPOINT_FILE), &serde_json::to_string(&ckpt)?)?;
        shapley_stage(out)?;
        report(out)?;
    }
    Ok(RunState {
        configurations: configs.len(),
        completed: ckpt.completed,
        processed_now: processed,
        finished,
    })
}

fn check_same(stored: &RunConfig, supplied: &RunConfig) -> Result<()> {
    let (a, b) = (stored.comparable()?, supplied.comparable()?);
    if a == b {
        return Ok(());
    }
    let (la, lb): (Vec<&str>, Vec<&str>) = (a.lines().collect(), b.lines().collect());
    let mut diff = String::new();
    for l in la.iter().filter(|l| !lb.contains(l)) {
        diff.push_str(&format!("- {}\n", l.trim()));
    }
    for l in lb.iter().filter(|l| !la.contains(l)) {
        diff.push_str(&format!("+ {}\n", l.trim()));
    }
    Err(Error::ConfigMismatch(diff))
}

fn open_checkpoint(out: &Path) -> Result<Checkpoint> {
    let path = out.join(CHECKPOINT_FILE);
    if !path.exists() {
        let mut ck = Checkpoint::default();
        for (name, header) in APPENDED {
            let text = csv_text(header, &[])?;
            fs::write(out.join(name), &text)?;
            ck.offsets.insert(name.to_string(), text.len() as u64);
        }
        write_atomic(&path, &serde_json::to_string(&ck)?)?;
        return Ok(ck);
    }
    let ck: Checkpoint = serde_json::from_str(&fs::read_to_string(&path)?)
        .map_err(|e| Error::Integrity(format!("unreadable checkpoint: {e}")))?;
    for (name, _) in APPENDED {
        let file = out.join(name);
        let want = *ck
            .offsets
            .get(name)
            .ok_or_else(|| Error::Integrity(format!("checkpoint lacks an offset for {name}")))?;
        let have = fs::metadata(&file)
            .map_err(|_| Error::Integrity(format!("{name} is missing")))?
            .len();
        if have < want {
            return Err(Error::Integrity(format!("{name} is shorter ({have}) than checkpointed ({want})")));
        }
        // drop rows written after the last checkpoint
        OpenOptions::new().write(true).open(&file)?.set_len(want)?;
    }
    Ok(ck)
}

fn completed_ids(out: &Path, ck: &Checkpoint, order: &HashMap<&str, usize>) -> Result<BTreeSet<usize>> {
    let rows = read_rows(&out.join(GENERATION_CSV), &GENERATION_COLUMNS)
        .map_err(|e| Error::Integrity(format!("generation.csv: {e}")))?;
    let mut done = BTreeSet::new();
    for r in &rows {
        let i = order
            .get(&r[0])
            .ok_or_else(|| Error::Integrity(format!("unknown configuration {} in generation.csv", &r[0])))?;
        if !done.insert(*i) {
            return Err(Error::Integrity(format!("configuration {} recorded twice", &r[0])));
        }
    }
    if done.len() != ck.completed {
        return Err(Error::Integrity(format!(
            "checkpoint counts {} configurations but generation.csv holds {}",
            ck.completed,
            done.len()
        )));
    }
    Ok(done)
}

fn append_result(out: &Path, r: &ConfigResult) -> Result<()> {
    let parts: [(&str, Vec<Vec<String>>); 3] = [
        (GENERATION_CSV, vec![r.generation.clone()]),
        (MEASUREMENTS_CSV, r.measurements.clone()),
        (FEATURES_CSV, r.features.clone()),
    ];
    for (name, rows) in parts {
        let mut f = OpenOptions::new().append(true).open(out.join(name))?;
        f.write_all(csv_text(&[], &rows)?.as_bytes())?;
        f.flush()?;
    }
    let _ = r.index;
    Ok(())
}

/// Rewrites the appended tables in enumeration order.
fn sort_results(out: &Path, order: &HashMap<&str, usize>, cfg: &RunConfig) -> Result<()> {
    let miner_pos = |m: &str| cfg.miners.iter().position(|x| x == m).unwrap_or(usize::MAX);
    let feature_pos = |f: &str| FeatureId::ALL.iter().position(|x| x.as_str() == f).unwrap_or(usize::MAX);
    for (name, header) in APPENDED {
        let path = out.join(name);
        let mut rows: Vec<Vec<String>> = read_rows(&path, header)?
            .iter()
            .map(|r| r.iter().map(str::to_string).collect())
            .collect();
        let idx = |id: &str| order.get(id).copied().unwrap_or(usize::MAX);
        match name {
            MEASUREMENTS_CSV => rows.sort_by_key(|r| (idx(&r[0]), miner_pos(&r[3]))),
            FEATURES_CSV => rows.sort_by_key(|r| (idx(&r[0]), feature_pos(&r[1]))),
            _ => rows.sort_by_key(|r| idx(&r[0])),
        }
        write_atomic(&path, &csv_text(header, &rows)?)?;
    }
    Ok(())
}

/// Continues the study stored in `out`. A supplied config must match the
/// stored snapshot.
pub fn resume(out: &Path, supplied: Option<&RunConfig>) -> Result<RunState> {
    resume_with(out, supplied, &RunControl::default())
}

pub fn resume_with(out: &Path, supplied: Option<&RunConfig>, control: &RunControl) -> Result<RunState> {
    let snapshot = out.join(CONFIG_FILE);
    if !snapshot.exists() {
        return Err(Error::MissingInputs(format!("{} has no {CONFIG_FILE}", out.display())));
    }
    let stored = RunConfig::load(&snapshot)?;
    let cfg = match supplied {
        Some(s) => {
            check_same(&stored, s)?;
            s.clone()
        }
        None => stored,
    };
    run_with(&cfg, out, control)
}

fn parse_opt<T: std::str::FromStr>(s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::schema(format!("unparsable cell {s:?}")))
}

/// Reads `measurements.csv` back into configurations and records.
pub fn load_measurements(out: &Path) -> Result<Vec<(TargetConfiguration, MetricRecord)>> {
    let rows = read_rows(&out.join(MEASUREMENTS_CSV), &MEASUREMENT_COLUMNS)?;
    rows.iter()
        .map(|r| {
            let cfg = TargetConfiguration {
                id: r[0].to_string(),
                targets: decode_targets(&r[2])?,
            };
            let sound = match &r[11] {
                "sound" => Soundness::Sound,
                "unsound" => Soundness::Unsound,
                _ => Soundness::Unknown,
            };
            let rec = MetricRecord {
                config_id: r[0].to_string(),
                miner: r[3].to_string(),
                status: r[4].parse()?,
                fitness: parse_opt(&r[5])?,
                precision: parse_opt(&r[6])?,
                fscore: parse_opt(&r[7])?,
                size: parse_opt(&r[8])?,
                cfc: parse_opt(&r[9])?,
                exec_time_ms: parse_opt(&r[10])?.unwrap_or(0),
                sound,
            };
            Ok((cfg, rec))
        })
        .collect()
}

fn stored_config(out: &Path) -> Result<RunConfig> {
    let snapshot = out.join(CONFIG_FILE);
    if !snapshot.exists() {
        return Err(Error::MissingInputs(format!("configuration snapshot ({CONFIG_FILE})")));
    }
    RunConfig::load(&snapshot)
}

fn require_finished(out: &Path) -> Result<Checkpoint> {
    let missing = |what: &str| Error::MissingInputs(format!("{what}; run or resume the study first"));
    let text = fs::read_to_string(out.join(CHECKPOINT_FILE)).map_err(|_| missing("execution stage (no checkpoint)"))?;
    let ck: Checkpoint =
        serde_json::from_str(&text).map_err(|e| Error::Integrity(format!("unreadable checkpoint: {e}")))?;
    if !ck.finished {
        return Err(missing(&format!(
            "execution stage ({} configurations completed so far)",
            ck.completed
        )));
    }
    Ok(ck)
}

/// Recomputes games and Shapley values from `measurements.csv`.
pub fn shapley_stage(out: &Path) -> Result<Vec<ShapleyRow>> {
    let cfg = stored_config(out)?;
    require_finished(out)?;
    let measurements = load_measurements(out)?;
    let games = assemble_games(&measurements, &cfg.metrics, cfg.k_max)?;
    let rows = shapley_rows(&games)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.game_id.clone(),
                r.miner.clone(),
                r.metric.to_string(),
                r.feature.to_string(),
                fmt_f64(r.target_value),
                fmt_opt(r.phi),
                fmt_opt(r.phi_normalized),
                r.complete.to_string(),
            ]
        })
        .collect();
    write_atomic(&out.join(SHAPLEY_CSV), &csv_text(&SHAPLEY_COLUMNS, &table)?)?;
    Ok(rows)
}

pub fn load_shapley(out: &Path) -> Result<Vec<ShapleyRow>> {
    read_rows(&out.join(SHAPLEY_CSV), &SHAPLEY_COLUMNS)?
        .iter()
        .map(|r| {
            Ok(ShapleyRow {
                game_id: r[0].to_string(),
                miner: r[1].to_string(),
                metric: r[2].parse()?,
                feature: r[3].parse()?,
                target_value: r[4]
                    .parse()
                    .map_err(|_| Error::schema(format!("bad target value {:?}", &r[4])))?,
                phi: parse_opt(&r[5])?,
                phi_normalized: parse_opt(&r[6])?,
                complete: &r[7] == "true",
            })
        })
        .collect()
}

/// Paths of the report artifacts inside `out`.
pub fn report_paths(out: &Path) -> Vec<PathBuf> {
    REPORT_FILES.iter().map(|f| out.join(f)).collect()
}

/// Writes rankings, correlations, robustness, feasibility, mean
/// attributions and `summary.txt` from the stored measurements and
/// Shapley values.
pub fn report(out: &Path) -> Result<()> {
    let cfg = stored_config(out)?;
    let ck = require_finished(out)?;
    if !out.join(SHAPLEY_CSV).exists() {
        return Err(Error::MissingInputs("Shapley stage (shapley.csv); run `shapley` first".into()));
    }
    let measurements = load_measurements(out)?;
    let rows = load_shapley(out)?;
    let alpha = cfg.alpha()?;

    let mut ranking = Vec::new();
    let mut scopes: Vec<(String, Vec<ShapleyRow>)> = vec![("all".into(), rows.clone())];
    for m in &cfg.miners {
        scopes.push((format!("miner:{m}"), rows.iter().filter(|r| &r.miner == m).cloned().collect()));
    }
    for m in &cfg.metrics {
        scopes.push((format!("metric:{m}"), rows.iter().filter(|r| r.metric == *m).cloned().collect()));
    }
    for (scope, subset) in &scopes {
        let (matrix, _) = rank_matrix(subset, &cfg.features);
        let names: Vec<String> = cfg.features.iter().map(|f| f.to_string()).collect();
        let Ok(rep) = friedman_nemenyi(&matrix, &names, alpha) else { continue };
        for (i, f) in rep.features.iter().enumerate() {
            let member: Vec<String> = rep
                .cliques
                .iter()
                .enumerate()
                .filter(|(_, c)| c.contains(f))
                .map(|(j, _)| j.to_string())
                .collect();
            ranking.push(vec![
                scope.clone(),
                f.clone(),
                fmt_f64(rep.mean_ranks[i]),
                rep.blocks.to_string(),
                fmt_f64(rep.statistic),
                fmt_f64(rep.p_value),
                fmt_f64(rep.critical_distance),
                fmt_f64(cfg.alpha),
                member.join(";"),
            ]);
        }
    }
    write_atomic(&out.join("ranking.csv"), &csv_text(&RANKING_COLUMNS, &ranking)?)?;

    let corr: Vec<Vec<String>> = correlations(&rows)
        .into_iter()
        .map(|c| {
            vec![
                c.miner,
                c.metric.to_string(),
                c.feature.to_string(),
                c.n.to_string(),
                fmt_f64(c.rho),
                fmt_f64(c.p_value),
                c.approximate.to_string(),
                c.strength.as_str().to_string(),
            ]
        })
        .collect();
    write_atomic(&out.join("correlations.csv"), &csv_text(&CORRELATION_COLUMNS, &corr)?)?;

    let rob: Vec<Vec<String>> = robustness(&rows)
        .into_iter()
        .map(|p| {
            vec![
                p.miner,
                p.metric.to_string(),
                p.n.to_string(),
                fmt_f64(p.mean_norm_phi),
                fmt_f64(p.var_norm_phi),
                p.singleton.to_string(),
            ]
        })
        .collect();
    write_atomic(&out.join("robustness.csv"), &csv_text(&ROBUSTNESS_COLUMNS, &rob)?)?;

    let feas = feasibility(&measurements, &rows, &cfg.metrics, cfg.buckets)?;
    let cells: Vec<Vec<String>> = feas
        .cells
        .iter()
        .map(|c| {
            vec![
                c.feature.to_string(),
                fmt_f64(c.bucket_lo),
                fmt_f64(c.bucket_hi),
                c.miner.clone(),
                c.metric.to_string(),
                c.configurations.to_string(),
                c.successes.to_string(),
                fmt_f64(c.success_fraction),
                fmt_opt(c.mean_norm_phi),
            ]
        })
        .collect();
    write_atomic(&out.join("feasibility.csv"), &csv_text(&FEASIBILITY_COLUMNS, &cells)?)?;

    let mut means = Vec::new();
    for (by_miner, by_metric) in [(false, false), (true, false), (true, true)] {
        for m in mean_attribution(&rows, by_miner, by_metric) {
            means.push(vec![
                m.feature.to_string(),
                m.miner.unwrap_or_default(),
                fmt_opt(m.metric),
                fmt_f64(m.mean_phi),
                fmt_f64(m.mean_phi_normalized),
                m.games.to_string(),
            ]);
        }
    }
    write_atomic(&out.join("mean_attribution.csv"), &csv_text(&MEAN_COLUMNS, &means)?)?;

    let generation = read_rows(&out.join(GENERATION_CSV), &GENERATION_COLUMNS)?;
    let mut gen_status: BTreeMap<String, usize> = BTreeMap::new();
    for r in &generation {
        *gen_status.entry(r[5].to_string()).or_default() += 1;
    }
    let games: BTreeSet<&str> = rows.iter().map(|r| r.game_id.as_str()).collect();
    let complete: BTreeSet<&str> = rows.iter().filter(|r| r.complete).map(|r| r.game_id.as_str()).collect();
    let mut summary = String::new();
    summary.push_str(&format!(
        "configurations: {} enumerated, {} completed\n",
        enumerate_configurations(&cfg).len(),
        ck.completed
    ));
    let gs: Vec<String> = [GenerationStatus::Ok, GenerationStatus::BudgetExhausted, GenerationStatus::Infeasible]
        .iter()
        .map(|s| format!("{} {}", s.as_str(), gen_status.get(s.as_str()).copied().unwrap_or(0)))
        .collect();
    summary.push_str(&format!("generation: {}\n", gs.join(", ")));
    summary.push_str(&format!("games: {} total, {} complete\n", games.len(), complete.len()));
    if complete.is_empty() {
        summary.push_str("warning: no complete games, Shapley values are unavailable\n");
    }
    summary.push_str(&format!("wall time: {:.1} s\n\n", ck.elapsed_ms as f64 / 1000.0));
    summary.push_str("Feasible logs by miner\n");
    summary.push_str(&feasibility_table(&feas));
    fs::write(out.join("summary.txt"), summary)?;
    Ok(())
}

/// Creates `out` if needed and fails early when it cannot be written.
pub fn ensure_writable(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let probe = out.join(".write-probe");
    File::create(&probe)?;
    fs::remove_file(probe)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(features: &[FeatureId], v: usize, k_max: usize) -> RunConfig {
        RunConfig {
            features: features.to_vec(),
            values_per_feature: v,
            k_max,
            ..RunConfig::default()
        }
    }

    #[test]
    fn counts() {
        assert_eq!(configuration_count(8, 10, 3), 58_880);
        assert_eq!(configuration_count(3, 3, 2), 36);
        assert_eq!(configuration_count(1, 1, 1), 1);
        assert_eq!(enumerate_configurations(&RunConfig::default()).len(), 58_880);
        use FeatureId::*;
        let c = enumerate_configurations(&cfg(&[Nusa, Tlv, Rt5v], 3, 2));
        assert_eq!(c.len(), 36);
        assert_eq!(c[0].id, "nusa.0");
        assert_eq!(c[9].id, "nusa.0+tlv.0");
        assert_eq!(c[10].id, "nusa.0+tlv.1");
        let ids: BTreeSet<&str> = c.iter().map(|x| x.id.as_str()).collect();
        assert_eq!(ids.len(), 36);
    }

    #[test]
    fn grids() {
        let c = cfg(&[FeatureId::Tlv], 1, 1);
        assert_eq!(c.grid(FeatureId::Tlv), vec![138.7 / 2.0]);
        let c = cfg(&[FeatureId::Nusa], 3, 1);
        assert_eq!(c.grid(FeatureId::Nusa), vec![1.0, 3.78, 6.56]);
        let catalog = FeatureCatalog::standard();
        for v in 1..=12 {
            let c = RunConfig { values_per_feature: v, ..RunConfig::default() };
            for f in FeatureId::ALL {
                let g = c.grid(f);
                assert_eq!(g.len(), v);
                assert!(g.iter().all(|&x| catalog.get(f).contains(x)), "{f} v={v}");
            }
        }
    }

    #[test]
    fn joins() {
        use FeatureId::*;
        let a = TargetConfiguration::new("nusa.1", [(Nusa, 3.0)]);
        let b = TargetConfiguration::new("tlv.0", [(Tlv, 0.0)]);
        let j = join_configurations(&a, &b).unwrap();
        assert_eq!(j.targets, [(Nusa, 3.0), (Tlv, 0.0)].into_iter().collect());
        assert_eq!(join_configurations(&a, &a).unwrap().targets, a.targets);
        let c = TargetConfiguration::new("nusa.2", [(Nusa, 4.0)]);
        assert!(matches!(join_configurations(&a, &c), Err(Error::Conflict { .. })));
    }

    #[test]
    fn seeds_depend_on_id_and_global_seed() {
        assert_eq!(config_seed(1, "a"), config_seed(1, "a"));
        assert_ne!(config_seed(1, "a"), config_seed(1, "b"));
        assert_ne!(config_seed(1, "a"), config_seed(2, "a"));
    }

    #[test]
    fn config_defaults_and_validation() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        let c = RunConfig::from_json(r#"{"features":["nusa","tlv"],"k_max":2,"values_per_feature":2}"#).unwrap();
        assert_eq!(enumerate_configurations(&c).len(), 8);
        assert!(RunConfig::from_json(r#"{"features":["nusa"],"k_max":2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"alpha":0.01}"#).is_err());
        assert!(RunConfig::from_json(r#"{"features":["bogus"]}"#).is_err());
    }

    #[test]
    fn target_encoding_round_trips() {
        let t: BTreeMap<FeatureId, f64> = [(FeatureId::Tlv, 34.675), (FeatureId::Rt5v, 0.095)].into_iter().collect();
        assert_eq!(decode_targets(&encode_targets(&t)).unwrap(), t);
    }
}
