//! Quality, complexity and timing metrics of discovered models.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::discovery::{check_soundness, GatewayGraph, GatewayKind, MinerRegistry, PetriNet, Soundness};
use crate::error::{Error, Result};
use crate::eventlog::{variants, write_xes, EventLog};

/// Depth cap for silent-transition searches during replay.
pub const SILENT_DEPTH: usize = 16;
const SILENT_STATES: usize = 4096;
/// Depth cap for reaching the final marking after the last event.
const DRAIN_DEPTH: usize = 4 * SILENT_DEPTH;
pub const SOUNDNESS_STATE_CAP: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Fitness,
    Precision,
    Fscore,
    Size,
    Cfc,
    ExecTime,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Fitness,
        Metric::Precision,
        Metric::Fscore,
        Metric::Size,
        Metric::Cfc,
        Metric::ExecTime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Fitness => "fitness",
            Metric::Precision => "precision",
            Metric::Fscore => "fscore",
            Metric::Size => "size",
            Metric::Cfc => "cfc",
            Metric::ExecTime => "exec_time",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown metric {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Timeout,
    ResourceExceeded,
    DiscoveryFailed,
    /// No log could be generated for the configuration, so nothing was mined.
    GenerationFailed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Timeout => "timeout",
            Status::ResourceExceeded => "resource_exceeded",
            Status::DiscoveryFailed => "discovery_failed",
            Status::GenerationFailed => "generation_failed",
        }
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Status::Ok,
            Status::Timeout,
            Status::ResourceExceeded,
            Status::DiscoveryFailed,
            Status::GenerationFailed,
        ]
        .into_iter()
        .find(|x| x.as_str() == s)
        .ok_or_else(|| Error::domain(format!("unknown status {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub config_id: String,
    pub miner: String,
    pub fitness: Option<f64>,
    pub precision: Option<f64>,
    pub fscore: Option<f64>,
    pub size: Option<u64>,
    pub cfc: Option<u64>,
    pub exec_time_ms: u64,
    pub sound: Soundness,
    pub status: Status,
}

impl MetricRecord {
    pub fn failed(config_id: &str, miner: &str, status: Status, exec_time_ms: u64) -> Self {
        MetricRecord {
            config_id: config_id.to_string(),
            miner: miner.to_string(),
            fitness: None,
            precision: None,
            fscore: None,
            size: None,
            cfc: None,
            exec_time_ms,
            sound: Soundness::Unknown,
            status,
        }
    }

    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Fitness => self.fitness,
            Metric::Precision => self.precision,
            Metric::Fscore => self.fscore,
            Metric::Size => self.size.map(|v| v as f64),
            Metric::Cfc => self.cfc.map(|v| v as f64),
            Metric::ExecTime => (self.status == Status::Ok).then_some(self.exec_time_ms as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub timeout_ms: u64,
    pub disk_cap_bytes: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            timeout_ms: 300_000,
            disk_cap_bytes: 19_000_000_000,
        }
    }
}

/// Silent firing sequence found by a search, or `None`.
type SilentPath = Option<Vec<usize>>;

fn unwind(parents: &[(usize, usize)], mut at: usize) -> Vec<usize> {
    let mut path = Vec::new();
    while at != 0 {
        let (parent, t) = parents[at];
        path.push(t);
        at = parent;
    }
    path.reverse();
    path
}

/// Breadth-first search over the silent transitions flagged in `allowed`
/// for a marking satisfying `goal`. The second value reports whether the
/// state cap cut the search short.
fn silent_bfs(net: &PetriNet, from: &[u32], allowed: &[bool], mut goal: impl FnMut(&[u32]) -> bool) -> (SilentPath, bool) {
    let mut seen: HashSet<Vec<u32>> = HashSet::from([from.to_vec()]);
    // (parent index, transition) per discovered state; index 0 is the root
    let mut parents = vec![(0, usize::MAX)];
    let mut queue = VecDeque::from([(from.to_vec(), 0usize, 0usize)]);
    let mut truncated = false;
    while let Some((m, depth, at)) = queue.pop_front() {
        if goal(&m) {
            return (Some(unwind(&parents, at)), truncated);
        }
        if depth >= SILENT_DEPTH {
            continue;
        }
        for t in (0..net.transitions.len()).filter(|&t| allowed[t]) {
            if !net.is_enabled(&m, t) {
                continue;
            }
            let mut next = m.clone();
            net.fire(&mut next, t);
            if seen.contains(&next) {
                continue;
            }
            if seen.len() >= SILENT_STATES {
                truncated = true;
                continue;
            }
            seen.insert(next.clone());
            parents.push((at, t));
            queue.push_back((next, depth + 1, parents.len() - 1));
        }
    }
    (None, truncated)
}

struct Replayer<'a> {
    net: &'a PetriNet,
    by_label: HashMap<&'a str, Vec<usize>>,
    silent: Vec<bool>,
    /// Per labeled transition: silent transitions that can move a token
    /// towards one of its input places.
    feeds: Vec<Vec<bool>>,
    /// Silent firings needed to carry a token from each place to the final
    /// marking, if possible at all.
    to_final: Vec<Option<u32>>,
}

#[derive(Clone)]
struct ReplayState {
    marking: Vec<u32>,
    produced: u64,
    consumed: u64,
    missing: u64,
}

impl<'a> Replayer<'a> {
    fn new(net: &'a PetriNet) -> Result<Self> {
        net.workflow_places()?;
        let n = net.transitions.len();
        let mut by_label: HashMap<&str, Vec<usize>> = HashMap::new();
        let mut producers: Vec<Vec<usize>> = vec![Vec::new(); net.places.len()];
        let silent: Vec<bool> = net.transitions.iter().map(|t| t.label.is_none()).collect();
        for (t, tr) in net.transitions.iter().enumerate() {
            if let Some(l) = &tr.label {
                by_label.entry(l).or_default().push(t);
            } else {
                tr.outputs.iter().for_each(|&p| producers[p].push(t));
            }
        }
        let feeds = (0..n)
            .map(|t| {
                let mut rel = vec![false; n];
                if silent[t] {
                    return rel;
                }
                let mut seen = vec![false; net.places.len()];
                let mut stack = net.transitions[t].inputs.clone();
                while let Some(p) = stack.pop() {
                    if std::mem::replace(&mut seen[p], true) {
                        continue;
                    }
                    for &x in &producers[p] {
                        if !std::mem::replace(&mut rel[x], true) {
                            stack.extend(&net.transitions[x].inputs);
                        }
                    }
                }
                rel
            })
            .collect();

        let mut to_final: Vec<Option<u32>> = net.final_marking.iter().map(|&k| (k > 0).then_some(0)).collect();
        let mut queue: VecDeque<usize> = (0..net.places.len()).filter(|&p| to_final[p].is_some()).collect();
        while let Some(q) = queue.pop_front() {
            let d = to_final[q].unwrap_or(0) + 1;
            for &x in &producers[q] {
                for &p in &net.transitions[x].inputs {
                    if to_final[p].is_none() {
                        to_final[p] = Some(d);
                        queue.push_back(p);
                    }
                }
            }
        }
        Ok(Replayer {
            net,
            by_label,
            silent,
            feeds,
            to_final,
        })
    }

    fn start(&self) -> ReplayState {
        ReplayState {
            marking: self.net.initial.clone(),
            produced: self.net.initial.iter().map(|&k| k as u64).sum(),
            consumed: 0,
            missing: 0,
        }
    }

    fn fire(&self, s: &mut ReplayState, t: usize) {
        let tr = &self.net.transitions[t];
        for &p in &tr.inputs {
            if s.marking[p] == 0 {
                s.missing += 1;
            } else {
                s.marking[p] -= 1;
            }
        }
        for &p in &tr.outputs {
            s.marking[p] += 1;
        }
        s.consumed += tr.inputs.len() as u64;
        s.produced += tr.outputs.len() as u64;
    }

    /// Shortest silent sequence enabling one of `cands`. Only silent
    /// transitions feeding a candidate are tried; dropping the others from
    /// any enabling sequence leaves it enabling, so nothing is lost.
    fn enabling_path(&self, marking: &[u32], cands: &[usize]) -> (SilentPath, bool) {
        let mut allowed = vec![false; self.net.transitions.len()];
        for &c in cands {
            for (a, &f) in allowed.iter_mut().zip(&self.feeds[c]) {
                *a |= f;
            }
        }
        silent_bfs(self.net, marking, &allowed, |m| cands.iter().any(|&t| self.net.is_enabled(m, t)))
    }

    fn step(&self, s: &mut ReplayState, label: &str) {
        let Some(cands) = self.by_label.get(label) else {
            // an activity the model lacks costs one missing token
            s.missing += 1;
            s.consumed += 1;
            return;
        };
        let enabled = |m: &[u32]| cands.iter().copied().find(|&t| self.net.is_enabled(m, t));
        if let Some(t) = enabled(&s.marking) {
            self.fire(s, t);
            return;
        }
        if let (Some(path), _) = self.enabling_path(&s.marking, cands) {
            for t in path {
                self.fire(s, t);
            }
            let t = enabled(&s.marking).expect("search goal");
            self.fire(s, t);
            return;
        }
        self.fire(s, cands[0]);
    }

    /// Silent sequence reaching the final marking exactly. Best-first on
    /// firings so far plus each token's distance to the final places, which
    /// walks concurrent branches to their ends without enumerating their
    /// interleavings.
    fn drain_path(&self, from: &[u32]) -> SilentPath {
        let fin = &self.net.final_marking;
        let h = |m: &[u32]| -> Option<u64> {
            m.iter().zip(&self.to_final).try_fold(0u64, |acc, (&k, d)| match (k, d) {
                (0, _) => Some(acc),
                (k, Some(d)) => Some(acc + k as u64 * *d as u64),
                (_, None) => None,
            })
        };
        let mut seen: HashSet<Vec<u32>> = HashSet::from([from.to_vec()]);
        let mut nodes = vec![(from.to_vec(), 0usize, 0usize, usize::MAX)];
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((h(from)?, 0usize)));
        while let Some(Reverse((_, at))) = heap.pop() {
            let (m, depth) = (nodes[at].0.clone(), nodes[at].1);
            if m == *fin {
                let parents: Vec<(usize, usize)> = nodes.iter().map(|n| (n.2, n.3)).collect();
                return Some(unwind(&parents, at));
            }
            if depth >= DRAIN_DEPTH {
                continue;
            }
            for t in (0..self.net.transitions.len()).filter(|&t| self.silent[t]) {
                if !self.net.is_enabled(&m, t) {
                    continue;
                }
                let mut next = m.clone();
                self.net.fire(&mut next, t);
                let Some(hn) = h(&next) else { continue };
                if seen.len() >= SILENT_STATES || !seen.insert(next.clone()) {
                    continue;
                }
                nodes.push((next, depth + 1, at, t));
                heap.push(Reverse((depth as u64 + 1 + hn, nodes.len() - 1)));
            }
        }
        None
    }

    /// Consumes the final marking and returns (consumed, missing, produced,
    /// remaining) for the whole trace.
    fn finish(&self, mut s: ReplayState) -> (u64, u64, u64, u64) {
        let fin = &self.net.final_marking;
        if s.marking != *fin {
            let path = self.drain_path(&s.marking).or_else(|| {
                silent_bfs(self.net, &s.marking, &self.silent, |m| m.iter().zip(fin).all(|(a, b)| a >= b)).0
            });
            for t in path.unwrap_or_default() {
                self.fire(&mut s, t);
            }
        }
        for (p, &k) in fin.iter().enumerate() {
            let k = k as u64;
            let have = s.marking[p] as u64;
            s.consumed += k;
            s.missing += k.saturating_sub(have);
            s.marking[p] = have.saturating_sub(k) as u32;
        }
        let remaining = s.marking.iter().map(|&k| k as u64).sum();
        (s.consumed, s.missing, s.produced, remaining)
    }

    /// Labels of visible transitions enabled after any silent firings.
    fn enabled_labels(&self, marking: &[u32]) -> BTreeSet<&'a str> {
        let mut out = BTreeSet::new();
        let (_, truncated) = silent_bfs(self.net, marking, &self.silent, |m| {
            for t in self.net.enabled(m) {
                if let Some(l) = &self.net.transitions[t].label {
                    out.insert(l.as_str());
                }
            }
            false
        });
        if truncated {
            // the blind search ran out of room; ask per missing label
            for (&label, cands) in &self.by_label {
                if !out.contains(label) && self.enabling_path(marking, cands).0.is_some() {
                    out.insert(label);
                }
            }
        }
        out
    }
}

/// Token-based replay fitness `0.5(1 - m/c) + 0.5(1 - r/p)`.
pub fn token_replay_fitness(net: &PetriNet, log: &EventLog) -> Result<f64> {
    let replayer = Replayer::new(net)?;
    let (mut c, mut m, mut p, mut r) = (0u64, 0u64, 0u64, 0u64);
    for v in variants(log)? {
        let mut s = replayer.start();
        for a in &v.activities {
            replayer.step(&mut s, a);
        }
        let (ci, mi, pi, ri) = replayer.finish(s);
        let n = v.count as u64;
        c += ci * n;
        m += mi * n;
        p += pi * n;
        r += ri * n;
    }
    Ok(0.5 * (1.0 - m as f64 / c as f64) + 0.5 * (1.0 - r as f64 / p as f64))
}

#[derive(Default)]
struct PrefixNode {
    weight: u64,
    next: BTreeMap<String, usize>,
}

/// Escaping-edges precision over all trace prefixes, weighted by how often
/// each prefix occurs with a continuation.
pub fn escaping_edges_precision(net: &PetriNet, log: &EventLog) -> Result<f64> {
    let replayer = Replayer::new(net)?;
    log.require_non_empty("precision")?;
    let mut trie = vec![PrefixNode::default()];
    for t in log.traces() {
        let mut node = 0;
        for a in t.activities() {
            trie[node].weight += 1;
            node = match trie[node].next.get(a) {
                Some(&n) => n,
                None => {
                    trie.push(PrefixNode::default());
                    let n = trie.len() - 1;
                    trie[node].next.insert(a.to_string(), n);
                    n
                }
            };
        }
    }

    let (mut num, mut den) = (0.0, 0.0);
    let mut stack = vec![(0usize, replayer.start())];
    while let Some((node, state)) = stack.pop() {
        let PrefixNode { weight, next } = &trie[node];
        if *weight > 0 {
            let enabled = replayer.enabled_labels(&state.marking);
            if !enabled.is_empty() {
                let observed = next.keys().filter(|a| enabled.contains(a.as_str())).count();
                num += *weight as f64 * observed as f64 / enabled.len() as f64;
                den += *weight as f64;
            }
        }
        for (a, &child) in next {
            let mut s = state.clone();
            replayer.step(&mut s, a);
            stack.push((child, s));
        }
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

pub fn fscore(fitness: f64, precision: f64) -> f64 {
    if fitness + precision == 0.0 {
        0.0
    } else {
        2.0 * fitness * precision / (fitness + precision)
    }
}

/// Node count and control-flow complexity of a gateway graph.
pub fn complexity(graph: &GatewayGraph) -> (u64, u64) {
    let cfc = graph
        .nodes
        .iter()
        .enumerate()
        .map(|(i, k)| match k {
            GatewayKind::XorSplit => graph.out_degree(i) as u64,
            GatewayKind::AndSplit => 1,
            _ => 0,
        })
        .sum();
    (graph.nodes.len() as u64, cfc)
}

enum Outcome {
    Done(MetricRecord),
    Failed(u64),
    TooLarge(u64),
}

/// Mines `log` with `miner` and computes all metrics under `limits`.
///
/// Work runs on a helper thread; on timeout the caller returns immediately
/// and the helper's result is discarded when it eventually finishes.
pub fn measure(
    registry: &MinerRegistry,
    miner: &str,
    log: Arc<EventLog>,
    limits: &Limits,
    config_id: &str,
) -> Result<MetricRecord> {
    let handle = registry.get(miner)?;
    if limits.timeout_ms == 0 {
        return Ok(MetricRecord::failed(config_id, miner, Status::Timeout, 0));
    }
    let (tx, rx) = mpsc::channel();
    let (id, name, cap) = (config_id.to_string(), miner.to_string(), limits.disk_cap_bytes);
    let spawned = thread::Builder::new()
        .name(format!("measure-{config_id}-{miner}"))
        .stack_size(64 << 20)
        .spawn(move || {
            let log_bytes = write_xes(&log).len() as u64;
            let t0 = Instant::now();
            let found = handle.discover(&log);
            let elapsed = t0.elapsed().as_millis() as u64;
            let model = match found {
                Ok(model) => model,
                Err(_) => {
                    let _ = tx.send(Outcome::Failed(elapsed));
                    return;
                }
            };
            if log_bytes + model.to_text().len() as u64 > cap {
                let _ = tx.send(Outcome::TooLarge(elapsed));
                return;
            }
            let metrics = (|| -> Result<MetricRecord> {
                let fitness = token_replay_fitness(&model.net, &log)?;
                let precision = escaping_edges_precision(&model.net, &log)?;
                let (size, cfc) = complexity(&model.graph);
                Ok(MetricRecord {
                    config_id: id.clone(),
                    miner: name.clone(),
                    fitness: Some(fitness),
                    precision: Some(precision),
                    fscore: Some(fscore(fitness, precision)),
                    size: Some(size),
                    cfc: Some(cfc),
                    exec_time_ms: elapsed,
                    sound: check_soundness(&model.net, SOUNDNESS_STATE_CAP),
                    status: Status::Ok,
                })
            })();
            let _ = tx.send(match metrics {
                Ok(r) => Outcome::Done(r),
                Err(_) => Outcome::Failed(elapsed),
            });
        })?;
    let outcome = rx.recv_timeout(Duration::from_millis(limits.timeout_ms));
    let finished = !matches!(outcome, Err(mpsc::RecvTimeoutError::Timeout));
    let record = match outcome {
        Ok(Outcome::Done(r)) => r,
        Ok(Outcome::Failed(ms)) => MetricRecord::failed(config_id, miner, Status::DiscoveryFailed, ms),
        Ok(Outcome::TooLarge(ms)) => {
            MetricRecord::failed(config_id, miner, Status::ResourceExceeded, ms)
        }
        Err(mpsc::RecvTimeoutError::Timeout) => {
            MetricRecord::failed(config_id, miner, Status::Timeout, limits.timeout_ms)
        }
        // the helper panicked before reporting
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            MetricRecord::failed(config_id, miner, Status::DiscoveryFailed, 0)
        }
    };
    if finished {
        let _ = spawned.join();
    }
    Ok(record)
}
