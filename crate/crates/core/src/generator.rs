//! Target-conditioned log generation: random process trees, trace
//! simulation and annealing-based calibration towards feature targets.

use std::collections::BTreeMap;
use std::fmt;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discovery::{Operator, ProcessTree};
use crate::error::{Error, Result};
use crate::eventlog::EventLog;
use crate::features::{extract, extract_from_sequences, FeatureCatalog, FeatureId, FeatureVector};

/// Loops stop repeating once a trace holds this many events.
pub const MAX_TRACE_LEN: usize = 150;
/// Leaf budget of sampled trees; beyond it every new node is a leaf.
pub const MAX_LEAVES: usize = 120;
pub const MAX_ACTIVITIES: usize = 100;
pub const MAX_DEPTH: usize = 5;
pub const MAX_TRACES: usize = 1000;

const CHAINS: usize = 5;
const COOLING: f64 = 0.995;
/// Iterations spent polishing after the first acceptable candidate.
const POLISH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorWeights {
    pub sequence: f64,
    pub choice: f64,
    pub parallel: f64,
    #[serde(rename = "loop")]
    pub loop_: f64,
}

impl OperatorWeights {
    fn as_array(&self) -> [f64; 4] {
        [self.sequence, self.choice, self.parallel, self.loop_]
    }

    fn slot(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.sequence,
            1 => &mut self.choice,
            2 => &mut self.parallel,
            _ => &mut self.loop_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub activity_count: usize,
    pub max_depth: usize,
    pub operator_weights: OperatorWeights,
    pub leaf_probability: f64,
    pub loop_repeat_probability: f64,
    pub trace_count: usize,
    pub noise_probability: f64,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            activity_count: 8,
            max_depth: 3,
            operator_weights: OperatorWeights {
                sequence: 1.0,
                choice: 1.0,
                parallel: 1.0,
                loop_: 0.5,
            },
            leaf_probability: 0.3,
            loop_repeat_probability: 0.3,
            trace_count: 100,
            noise_probability: 0.0,
            seed: 0,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let w = self.operator_weights.as_array();
        if self.activity_count == 0 || self.max_depth == 0 || self.trace_count == 0 {
            return Err(Error::domain("activity_count, max_depth and trace_count must be >= 1"));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().all(|x| *x == 0.0) {
            return Err(Error::domain("operator weights must be non-negative with one positive"));
        }
        if !(self.leaf_probability > 0.0 && self.leaf_probability <= 1.0) {
            return Err(Error::domain("leaf_probability must lie in (0, 1]"));
        }
        for (name, p) in [
            ("loop_repeat_probability", self.loop_repeat_probability),
            ("noise_probability", self.noise_probability),
        ] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::domain(format!("{name} must lie in [0, 1)")));
            }
        }
        Ok(())
    }

    fn simulation_seed(&self) -> u64 {
        self.seed ^ 0x9e37_79b9_7f4a_7c15
    }
}

/// Bijective base-26 activity names: a, b, ..., z, aa, ab, ...
pub fn activity_label(mut i: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

/// Samples a random process tree. Leaves cycle through the activity
/// alphabet in creation order.
pub fn sample_tree(params: &GeneratorParams, seed: u64) -> Result<ProcessTree> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ops = WeightedIndex::new(params.operator_weights.as_array())
        .map_err(|e| Error::domain(format!("operator weights: {e}")))?;
    let mut leaves = 0usize;
    Ok(grow(params, &ops, 1, &mut rng, &mut leaves))
}

fn grow(
    p: &GeneratorParams,
    ops: &WeightedIndex<f64>,
    depth: usize,
    rng: &mut ChaCha8Rng,
    leaves: &mut usize,
) -> ProcessTree {
    let stop = depth >= p.max_depth || *leaves >= MAX_LEAVES || rng.gen::<f64>() < p.leaf_probability;
    if stop {
        let label = activity_label(*leaves % p.activity_count);
        *leaves += 1;
        return ProcessTree::Leaf(label);
    }
    let op = [Operator::Sequence, Operator::Choice, Operator::Parallel, Operator::Loop][ops.sample(rng)];
    let arity = if op == Operator::Loop { 2 } else { rng.gen_range(2..=4) };
    let children = (0..arity).map(|_| grow(p, ops, depth + 1, rng, leaves)).collect();
    ProcessTree::Node(op, children)
}

enum Compiled {
    Leaf(usize),
    Silent,
    Node(Operator, Vec<Compiled>),
}

fn compile(tree: &ProcessTree, alphabet: &[String]) -> Compiled {
    match tree {
        ProcessTree::Leaf(l) => Compiled::Leaf(alphabet.binary_search(l).expect("label in alphabet")),
        ProcessTree::Silent => Compiled::Silent,
        ProcessTree::Node(op, ch) => {
            Compiled::Node(*op, ch.iter().map(|c| compile(c, alphabet)).collect())
        }
    }
}

fn play(node: &Compiled, repeat: f64, rng: &mut ChaCha8Rng, emitted: &mut usize, out: &mut Vec<usize>) {
    match node {
        Compiled::Leaf(a) => {
            out.push(*a);
            *emitted += 1;
        }
        Compiled::Silent => {}
        Compiled::Node(Operator::Sequence, ch) => {
            ch.iter().for_each(|c| play(c, repeat, rng, emitted, out));
        }
        Compiled::Node(Operator::Choice, ch) => {
            let c = &ch[rng.gen_range(0..ch.len())];
            play(c, repeat, rng, emitted, out);
        }
        Compiled::Node(Operator::Parallel, ch) => {
            let mut parts: Vec<std::vec::IntoIter<usize>> = ch
                .iter()
                .map(|c| {
                    let mut buf = Vec::new();
                    play(c, repeat, rng, emitted, &mut buf);
                    buf.into_iter()
                })
                .collect();
            let mut live: Vec<usize> = (0..parts.len()).filter(|&i| parts[i].len() > 0).collect();
            while !live.is_empty() {
                let k = rng.gen_range(0..live.len());
                out.push(parts[live[k]].next().expect("live part"));
                if parts[live[k]].len() == 0 {
                    live.remove(k);
                }
            }
        }
        Compiled::Node(Operator::Loop, ch) => {
            play(&ch[0], repeat, rng, emitted, out);
            while *emitted < MAX_TRACE_LEN && rng.gen::<f64>() < repeat {
                play(&ch[1], repeat, rng, emitted, out);
                play(&ch[0], repeat, rng, emitted, out);
            }
        }
    }
}

fn add_noise(trace: &mut Vec<usize>, alphabet_len: usize, rng: &mut ChaCha8Rng) {
    match rng.gen_range(0..3) {
        0 if trace.len() >= 2 => {
            let i = rng.gen_range(0..trace.len());
            trace.remove(i);
        }
        2 if trace.len() >= 2 => {
            let i = rng.gen_range(0..trace.len() - 1);
            trace.swap(i, i + 1);
        }
        _ => {
            let i = rng.gen_range(0..=trace.len());
            trace.insert(i, rng.gen_range(0..alphabet_len));
        }
    }
}

struct Simulated {
    alphabet: Vec<String>,
    traces: Vec<Vec<usize>>,
}

impl Simulated {
    fn sequences(&self) -> Vec<Vec<&str>> {
        self.traces
            .iter()
            .map(|t| t.iter().map(|&a| self.alphabet[a].as_str()).collect())
            .collect()
    }
}

fn simulate_indices(
    tree: &ProcessTree,
    trace_count: usize,
    noise_probability: f64,
    loop_repeat_probability: f64,
    seed: u64,
) -> Result<Simulated> {
    if trace_count == 0 {
        return Err(Error::domain("trace_count must be >= 1"));
    }
    tree.validate()?;
    let alphabet: Vec<String> = tree.activities().into_iter().map(str::to_string).collect();
    if alphabet.is_empty() {
        return Err(Error::domain("tree has no visible activities"));
    }
    let compiled = compile(tree, &alphabet);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traces = Vec::with_capacity(trace_count);
    for _ in 0..trace_count {
        let mut trace = Vec::new();
        for _ in 0..100 {
            let mut emitted = 0;
            play(&compiled, loop_repeat_probability, &mut rng, &mut emitted, &mut trace);
            if !trace.is_empty() {
                break;
            }
        }
        if trace.is_empty() {
            return Err(Error::domain("tree keeps producing empty traces"));
        }
        if rng.gen::<f64>() < noise_probability {
            add_noise(&mut trace, alphabet.len(), &mut rng);
        }
        traces.push(trace);
    }
    Ok(Simulated { alphabet, traces })
}

/// Plays `trace_count` random runs of `tree`. Each trace gets one random
/// deletion, insertion or adjacent swap with probability `noise_probability`.
/// Empty runs (possible with silent leaves) are redrawn.
pub fn simulate(
    tree: &ProcessTree,
    trace_count: usize,
    noise_probability: f64,
    loop_repeat_probability: f64,
    seed: u64,
) -> Result<EventLog> {
    let sim = simulate_indices(tree, trace_count, noise_probability, loop_repeat_probability, seed)?;
    EventLog::from_sequences(&sim.sequences())
}

/// Tree and log for a parameter set, using the params' own seed.
pub fn generate(params: &GeneratorParams) -> Result<(ProcessTree, EventLog)> {
    let tree = sample_tree(params, params.seed)?;
    let log = simulate(
        &tree,
        params.trace_count,
        params.noise_probability,
        params.loop_repeat_probability,
        params.simulation_seed(),
    )?;
    Ok((tree, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetConfiguration {
    pub id: String,
    pub targets: BTreeMap<FeatureId, f64>,
}

impl TargetConfiguration {
    pub fn new(id: impl Into<String>, targets: impl IntoIterator<Item = (FeatureId, f64)>) -> Self {
        TargetConfiguration {
            id: id.into(),
            targets: targets.into_iter().collect(),
        }
    }

    pub fn dimensionality(&self) -> usize {
        self.targets.len()
    }

    pub fn features(&self) -> Vec<FeatureId> {
        self.targets.keys().copied().collect()
    }

    pub fn validate(&self, catalog: &FeatureCatalog, k_max: usize) -> Result<()> {
        if self.targets.is_empty() || self.targets.len() > k_max {
            return Err(Error::domain(format!(
                "configuration {} has dimensionality {} outside [1, {k_max}]",
                self.id,
                self.targets.len()
            )));
        }
        for (&id, &v) in &self.targets {
            let spec = catalog.get(id);
            if !spec.contains(v) {
                return Err(Error::domain(format!(
                    "target {id}={v} outside [{}, {}]",
                    spec.lo, spec.hi
                )));
            }
        }
        Ok(())
    }
}

/// Mean range-normalized absolute error over the targeted features.
pub fn target_distance(
    achieved: &FeatureVector,
    target: &TargetConfiguration,
    catalog: &FeatureCatalog,
) -> Result<f64> {
    if target.targets.is_empty() {
        return Err(Error::domain("empty target"));
    }
    let mut total = 0.0;
    for (&id, &t) in &target.targets {
        let a = achieved
            .get(id)
            .ok_or_else(|| Error::domain(format!("achieved vector lacks {id}")))?;
        total += (a - t).abs() / catalog.get(id).width();
    }
    Ok(total / target.targets.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStatus {
    Ok,
    BudgetExhausted,
    Infeasible,
}

impl GenerationStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GenerationStatus::Ok => "ok",
            GenerationStatus::BudgetExhausted => "budget_exhausted",
            GenerationStatus::Infeasible => "infeasible",
        }
    }
}

impl fmt::Display for GenerationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationOutcome {
    pub target: TargetConfiguration,
    /// Best log found; kept as a best effort even when not acceptable.
    pub log: Option<EventLog>,
    pub params: Option<GeneratorParams>,
    pub achieved: FeatureVector,
    pub distance: f64,
    pub status: GenerationStatus,
    pub iterations_used: usize,
    pub seed: u64,
}

impl GenerationOutcome {
    pub fn accepted_log(&self) -> Option<&EventLog> {
        (self.status == GenerationStatus::Ok).then_some(self.log.as_ref()).flatten()
    }
}

fn random_params(rng: &mut ChaCha8Rng) -> GeneratorParams {
    GeneratorParams {
        activity_count: rng.gen_range(1..=20),
        max_depth: rng.gen_range(1..=4),
        operator_weights: OperatorWeights {
            sequence: rng.gen(),
            choice: rng.gen(),
            parallel: rng.gen(),
            loop_: rng.gen::<f64>() * 0.5 + 1e-3,
        },
        leaf_probability: rng.gen_range(0.05..=1.0),
        loop_repeat_probability: rng.gen_range(0.0..0.6),
        trace_count: (10f64.powf(rng.gen_range(0.0..3.0)).round() as usize).clamp(1, MAX_TRACES),
        noise_probability: rng.gen_range(0.0..0.3),
        seed: rng.gen(),
    }
}

fn nudge(x: f64, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (x + rng.gen_range(-0.2..0.2)).clamp(lo, hi)
}

fn neighbor(p: &GeneratorParams, rng: &mut ChaCha8Rng) -> GeneratorParams {
    let mut q = p.clone();
    match rng.gen_range(0..8) {
        0 => {
            let step = (q.activity_count / 5).max(1) as i64;
            let delta = rng.gen_range(-step..=step);
            q.activity_count = (q.activity_count as i64 + delta).clamp(1, MAX_ACTIVITIES as i64) as usize;
        }
        1 => {
            q.max_depth = if rng.gen() { q.max_depth + 1 } else { q.max_depth.saturating_sub(1) };
            q.max_depth = q.max_depth.clamp(1, MAX_DEPTH);
        }
        2 => {
            let mut w = q.operator_weights;
            *w.slot(rng.gen_range(0..4)) = rng.gen();
            if w.as_array().iter().all(|x| *x == 0.0) {
                w.sequence = 1.0;
            }
            q.operator_weights = w;
        }
        3 => q.leaf_probability = nudge(q.leaf_probability, rng, 0.05, 1.0),
        4 => q.loop_repeat_probability = nudge(q.loop_repeat_probability, rng, 0.0, 0.95),
        5 => {
            let f: f64 = rng.gen_range(-0.5..0.5);
            q.trace_count = ((q.trace_count as f64 * f.exp()).round() as usize).clamp(1, MAX_TRACES);
        }
        6 => q.noise_probability = nudge(q.noise_probability, rng, 0.0, 0.95),
        _ => q.seed = rng.gen(),
    }
    q
}

fn evaluate(
    params: &GeneratorParams,
    target: &TargetConfiguration,
    ids: &[FeatureId],
    catalog: &FeatureCatalog,
) -> f64 {
    let run = || -> Result<f64> {
        let tree = sample_tree(params, params.seed)?;
        let sim = simulate_indices(
            &tree,
            params.trace_count,
            params.noise_probability,
            params.loop_repeat_probability,
            params.simulation_seed(),
        )?;
        let values = extract_from_sequences(&sim.sequences(), ids)?.values;
        target_distance(&values, target, catalog)
    };
    run().unwrap_or(f64::INFINITY)
}

/// Simulated annealing over generator parameters.
///
/// Five chains advance round-robin under one geometric temperature
/// schedule. The search stops `POLISH` iterations after the first candidate
/// within `epsilon`, on an exact hit, or when the budget is spent. The
/// outcome is `infeasible` when every chain went without improving for over
/// a quarter of the budget, `budget_exhausted` otherwise.
pub fn calibrate(
    target: &TargetConfiguration,
    budget: usize,
    epsilon: f64,
    seed: u64,
) -> Result<GenerationOutcome> {
    if budget == 0 {
        return Err(Error::domain("budget must be >= 1"));
    }
    let catalog = FeatureCatalog::standard();
    let ids = target.features();
    if ids.is_empty() {
        return Err(Error::domain("empty target"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current: Vec<(GeneratorParams, f64)> = Vec::with_capacity(CHAINS);
    let mut chain_best = [f64::INFINITY; CHAINS];
    let mut last_gain = [0usize; CHAINS];
    let mut best: Option<(GeneratorParams, f64)> = None;
    let mut first_ok: Option<usize> = None;
    let mut used = 0;

    for i in 0..budget {
        used = i + 1;
        let c = i % CHAINS;
        let candidate = if i < CHAINS {
            random_params(&mut rng)
        } else {
            neighbor(&current[c].0, &mut rng)
        };
        let d = evaluate(&candidate, target, &ids, &catalog);
        if i < CHAINS {
            current.push((candidate.clone(), d));
        } else {
            let temperature = COOLING.powi(i as i32);
            let delta = d - current[c].1;
            if delta <= 0.0 || rng.gen::<f64>() < (-delta / temperature).exp() {
                current[c] = (candidate.clone(), d);
            }
        }
        if d < chain_best[c] {
            chain_best[c] = d;
            last_gain[c] = i;
        }
        if best.as_ref().map_or(true, |(_, b)| d < *b) {
            best = Some((candidate, d));
        }
        let b = best.as_ref().map_or(f64::INFINITY, |(_, b)| *b);
        if b <= epsilon && first_ok.is_none() {
            first_ok = Some(i);
        }
        if b == 0.0 || first_ok.is_some_and(|f| i >= f + POLISH) {
            break;
        }
    }

    let (params, search_distance) = best.expect("budget >= 1");
    if !search_distance.is_finite() {
        return Ok(GenerationOutcome {
            target: target.clone(),
            log: None,
            params: None,
            achieved: FeatureVector::new(),
            distance: f64::INFINITY,
            status: GenerationStatus::Infeasible,
            iterations_used: used,
            seed,
        });
    }
    let (_, log) = generate(&params)?;
    let achieved = extract(&log, &FeatureId::ALL)?;
    let distance = target_distance(&achieved, target, &catalog)?;
    let status = if distance <= epsilon {
        GenerationStatus::Ok
    } else if (0..CHAINS).all(|c| (used - last_gain[c]) as f64 > 0.25 * budget as f64) {
        GenerationStatus::Infeasible
    } else {
        GenerationStatus::BudgetExhausted
    };
    Ok(GenerationOutcome {
        target: target.clone(),
        log: Some(log),
        params: Some(params),
        achieved,
        distance,
        status,
        iterations_used: used,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::variants;

    fn only(op: usize) -> GeneratorParams {
        let mut w = [0.0; 4];
        w[op] = 1.0;
        GeneratorParams {
            operator_weights: OperatorWeights {
                sequence: w[0],
                choice: w[1],
                parallel: w[2],
                loop_: w[3],
            },
            ..GeneratorParams::default()
        }
    }

    #[test]
    fn labels_are_bijective_base26() {
        assert_eq!(activity_label(0), "a");
        assert_eq!(activity_label(25), "z");
        assert_eq!(activity_label(26), "aa");
        assert_eq!(activity_label(27), "ab");
        assert_eq!(activity_label(26 + 26 * 26), "aaa");
    }

    #[test]
    fn depth_one_is_a_leaf() {
        let p = GeneratorParams {
            max_depth: 1,
            ..GeneratorParams::default()
        };
        assert_eq!(sample_tree(&p, 3).unwrap(), ProcessTree::leaf("a"));
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let p = GeneratorParams {
            max_depth: 4,
            leaf_probability: 0.1,
            ..GeneratorParams::default()
        };
        for seed in 0..20 {
            let t = sample_tree(&p, seed).unwrap();
            assert_eq!(t, sample_tree(&p, seed).unwrap());
            assert!(t.depth() <= 4);
            t.validate().unwrap();
        }
    }

    #[test]
    fn sequence_only_weights() {
        fn all_seq(t: &ProcessTree) -> bool {
            match t {
                ProcessTree::Node(op, ch) => *op == Operator::Sequence && ch.iter().all(all_seq),
                _ => true,
            }
        }
        let p = GeneratorParams {
            leaf_probability: 0.2,
            ..only(0)
        };
        for seed in 0..10 {
            assert!(all_seq(&sample_tree(&p, seed).unwrap()));
        }
    }

    #[test]
    fn simulation_examples() {
        let l = simulate(&ProcessTree::leaf("a"), 3, 0.0, 0.0, 1).unwrap();
        assert_eq!(l.sequences(), vec![vec!["a"]; 3]);
        let seq: ProcessTree = "SEQ(a,b)".parse().unwrap();
        let l = simulate(&seq, 20, 0.0, 0.0, 1).unwrap();
        assert!(l.sequences().iter().all(|s| *s == ["a", "b"]));
        let par: ProcessTree = "AND(a,b)".parse().unwrap();
        let v = variants(&simulate(&par, 100, 0.0, 0.0, 7).unwrap()).unwrap();
        assert_eq!(v.len(), 2);
        let looped: ProcessTree = "LOOP(a,b)".parse().unwrap();
        let l = simulate(&looped, 200, 0.0, 0.99, 2).unwrap();
        assert!(l.traces().iter().all(|t| t.len() <= MAX_TRACE_LEN + 2));
        assert_eq!(simulate(&seq, 5, 0.5, 0.0, 9).unwrap(), simulate(&seq, 5, 0.5, 0.0, 9).unwrap());
        assert!(simulate(&seq, 0, 0.0, 0.0, 1).is_err());
    }

    #[test]
    fn silent_only_choices_are_redrawn() {
        let t: ProcessTree = "XOR(tau,a)".parse().unwrap();
        let l = simulate(&t, 50, 0.0, 0.0, 3).unwrap();
        assert!(l.sequences().iter().all(|s| *s == ["a"]));
    }

    #[test]
    fn distance_examples() {
        let cat = FeatureCatalog::standard();
        let t = TargetConfiguration::new("x", [(FeatureId::Tlv, 10.0)]);
        let same: FeatureVector = [(FeatureId::Tlv, 10.0)].into_iter().collect();
        assert_eq!(target_distance(&same, &t, &cat).unwrap(), 0.0);
        let far: FeatureVector = [(FeatureId::Tlv, 10.0 + cat.get(FeatureId::Tlv).width())]
            .into_iter()
            .collect();
        assert_eq!(target_distance(&far, &t, &cat).unwrap(), 1.0);

        let two = TargetConfiguration::new("y", [(FeatureId::Tlv, 10.0), (FeatureId::Nusa, 2.0)]);
        let half: FeatureVector = [
            (FeatureId::Tlv, 10.0),
            (FeatureId::Nusa, 2.0 + cat.get(FeatureId::Nusa).width() / 2.0),
            (FeatureId::Svo, 99.0),
        ]
        .into_iter()
        .collect();
        assert!((target_distance(&half, &two, &cat).unwrap() - 0.25).abs() < 1e-15);
        assert!(target_distance(&FeatureVector::new(), &two, &cat).is_err());
    }

    #[test]
    fn target_validation() {
        let cat = FeatureCatalog::standard();
        assert!(TargetConfiguration::new("a", [(FeatureId::Nusa, 3.0)]).validate(&cat, 3).is_ok());
        assert!(TargetConfiguration::new("b", [(FeatureId::Nusa, 9.0)]).validate(&cat, 3).is_err());
        assert!(TargetConfiguration::new("c", []).validate(&cat, 3).is_err());
        let wide = TargetConfiguration::new("d", [(FeatureId::Nusa, 2.0), (FeatureId::Tlv, 0.0)]);
        assert!(wide.validate(&cat, 1).is_err());
    }

    #[test]
    fn calibrates_zero_variance() {
        let t = TargetConfiguration::new("tlv0", [(FeatureId::Tlv, 0.0)]);
        let out = calibrate(&t, 500, 0.05, 11).unwrap();
        assert_eq!(out.status, GenerationStatus::Ok);
        assert_eq!(out.distance, 0.0);
        let log = out.log.as_ref().unwrap();
        assert_eq!(extract(log, &FeatureId::ALL).unwrap(), out.achieved);
    }

    #[test]
    fn calibrates_three_start_activities() {
        let t = TargetConfiguration::new("nusa3", [(FeatureId::Nusa, 3.0)]);
        let out = calibrate(&t, 500, 0.05, 5).unwrap();
        assert_eq!(out.status, GenerationStatus::Ok);
        assert_eq!(out.distance, 0.0);
        assert_eq!(out.achieved.get(FeatureId::Nusa), Some(3.0));
    }

    #[test]
    fn calibration_is_deterministic_and_budget_monotone() {
        let t = TargetConfiguration::new("svo", [(FeatureId::Svo, 9.0)]);
        let a = calibrate(&t, 60, 0.0, 3).unwrap();
        let b = calibrate(&t, 60, 0.0, 3).unwrap();
        assert_eq!(a, b);
        let mut prev = f64::INFINITY;
        for budget in [5, 20, 60] {
            let d = calibrate(&t, budget, 0.0, 3).unwrap().distance;
            assert!(d <= prev);
            prev = d;
        }
    }

    #[test]
    fn unreachable_target_is_not_ok() {
        // a quarter of the range in rt5v is below what any log can reach
        let t = TargetConfiguration::new("rt0", [(FeatureId::Rt5v, 0.0)]);
        let out = calibrate(&t, 100, 0.05, 1).unwrap();
        assert_ne!(out.status, GenerationStatus::Ok);
        assert!(out.accepted_log().is_none());
    }
}
