//! Directly-follows-graph miner with frequency filtering and gateway
//! insertion, in the spirit of split-style discovery.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::gateway::{GatewayGraph, GatewayKind};
use crate::error::Result;
use crate::eventlog::EventLog;
use crate::features::quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DfgOptions {
    /// Arcs below this quantile of arc frequencies are pruned unless that
    /// would disconnect a task.
    pub eta: f64,
    /// Pairs with arcs both ways whose frequency imbalance is below this
    /// ratio are treated as concurrent.
    pub concurrency_threshold: f64,
}

impl Default for DfgOptions {
    fn default() -> Self {
        DfgOptions {
            eta: 0.0,
            concurrency_threshold: 0.7,
        }
    }
}

type Arcs = BTreeMap<(usize, usize), u64>;

fn connected(arcs: &Arcs, tasks: usize, start: usize, end: usize) -> bool {
    let walk = |from: usize, forward: bool| {
        let mut seen = vec![false; tasks + 2];
        seen[from] = true;
        let mut q = VecDeque::from([from]);
        while let Some(n) = q.pop_front() {
            for &(a, b) in arcs.keys() {
                let (src, dst) = if forward { (a, b) } else { (b, a) };
                if src == n && !seen[dst] {
                    seen[dst] = true;
                    q.push_back(dst);
                }
            }
        }
        seen
    };
    let fwd = walk(start, true);
    let bwd = walk(end, false);
    (0..tasks).all(|t| fwd[t] && bwd[t]) && fwd[end]
}

/// Mines a gateway graph from the directly-follows relation of `log`.
pub fn dfg_discover(log: &EventLog, options: &DfgOptions) -> Result<GatewayGraph> {
    log.require_non_empty("dfg discovery")?;
    let labels: Vec<String> = {
        let set: BTreeSet<&str> = log.traces().iter().flat_map(|t| t.activities()).collect();
        set.into_iter().map(str::to_string).collect()
    };
    let n = labels.len();
    let (start, end) = (n, n + 1);
    let index = |a: &str| labels.binary_search_by(|l| l.as_str().cmp(a)).expect("known label");

    let mut arcs: Arcs = BTreeMap::new();
    for t in log.traces() {
        let ids: Vec<usize> = t.activities().map(index).collect();
        *arcs.entry((start, ids[0])).or_default() += 1;
        *arcs.entry((*ids.last().unwrap(), end)).or_default() += 1;
        for w in ids.windows(2) {
            *arcs.entry((w[0], w[1])).or_default() += 1;
        }
    }

    // frequency filtering with connectivity repair
    let freqs: Vec<f64> = arcs.values().map(|&f| f as f64).collect();
    let threshold = quantile(&freqs, options.eta.clamp(0.0, 1.0))?;
    let mut candidates: Vec<((usize, usize), u64)> = arcs
        .iter()
        .filter(|(_, &f)| (f as f64) < threshold)
        .map(|(&k, &f)| (k, f))
        .collect();
    candidates.sort_by_key(|&(k, f)| (f, k));
    for (key, f) in candidates {
        arcs.remove(&key);
        if !connected(&arcs, n, start, end) {
            arcs.insert(key, f);
        }
    }

    // concurrency detection
    let mut concurrent: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (&(a, b), &fab) in &arcs {
        if a < b && b < n {
            if let Some(&fba) = arcs.get(&(b, a)) {
                let balance = (fab as f64 - fba as f64).abs() / (fab + fba) as f64;
                if balance < options.concurrency_threshold {
                    concurrent.insert((a, b));
                }
            }
        }
    }
    let flow = loop {
        let flow: Arcs = arcs
            .iter()
            .filter(|(&(a, b), _)| !concurrent.contains(&(a.min(b), a.max(b))))
            .map(|(&k, &f)| (k, f))
            .collect();
        if connected(&flow, n, start, end) {
            break flow;
        }
        // drop the concurrency mark of the first pair touching a stranded task
        let before = concurrent.len();
        let stranded: Vec<usize> = (0..n)
            .filter(|&t| {
                !flow.keys().any(|&(a, _)| a == t) || !flow.keys().any(|&(_, b)| b == t)
            })
            .collect();
        let victim = concurrent
            .iter()
            .copied()
            .find(|(a, b)| stranded.contains(a) || stranded.contains(b))
            .or_else(|| concurrent.iter().next().copied());
        if let Some(v) = victim {
            concurrent.remove(&v);
        }
        if concurrent.len() == before {
            break flow;
        }
    };
    let is_conc = |a: usize, b: usize| a < n && b < n && concurrent.contains(&(a.min(b), a.max(b)));

    let mut g = GatewayGraph::default();
    let mut node_of = vec![0usize; n + 2];
    node_of[start] = g.add_node(GatewayKind::Start);
    for (t, l) in labels.iter().enumerate() {
        node_of[t] = g.add_node(GatewayKind::Task(l.clone()));
    }
    node_of[end] = g.add_node(GatewayKind::End);

    let succ = |x: usize| -> Vec<usize> { flow.keys().filter(|k| k.0 == x).map(|k| k.1).collect() };
    let pred = |x: usize| -> Vec<usize> { flow.keys().filter(|k| k.1 == x).map(|k| k.0).collect() };

    // per arc (a, b): the node it leaves from and the node it enters
    let mut exit: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut entry: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for x in (0..n).chain([start]) {
        let s = succ(x);
        let ports = gateway_block(&mut g, node_of[x], &s, &is_conc, true);
        for (b, port) in s.into_iter().zip(ports) {
            exit.insert((x, b), port);
        }
    }
    for x in (0..n).chain([end]) {
        let p = pred(x);
        let ports = gateway_block(&mut g, node_of[x], &p, &is_conc, false);
        for (a, port) in p.into_iter().zip(ports) {
            entry.insert((a, x), port);
        }
    }
    for &(a, b) in flow.keys() {
        g.add_edge(exit[&(a, b)], entry[&(a, b)]);
    }
    Ok(g)
}

/// Gateways between `anchor` and its neighbours `others` (successors when
/// `split`, predecessors otherwise). Neighbours fall into groups by the
/// concurrency relation; a fully concurrent group gets its own AND gateway
/// and several groups meet at an XOR gateway. Returns the node each
/// neighbour's arc attaches to, in the order of `others`.
fn gateway_block(
    g: &mut GatewayGraph,
    anchor: usize,
    others: &[usize],
    is_conc: &impl Fn(usize, usize) -> bool,
    split: bool,
) -> Vec<usize> {
    if others.len() < 2 {
        return vec![anchor; others.len()];
    }
    let (xor, and) = if split {
        (GatewayKind::XorSplit, GatewayKind::AndSplit)
    } else {
        (GatewayKind::XorJoin, GatewayKind::AndJoin)
    };
    let link = |g: &mut GatewayGraph, from_anchor: usize, to: usize| {
        if split {
            g.add_edge(from_anchor, to)
        } else {
            g.add_edge(to, from_anchor)
        }
    };

    // connected components of the concurrency relation
    let mut group = vec![usize::MAX; others.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..others.len() {
        if group[i] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![i];
        group[i] = id;
        let mut k = 0;
        while k < members.len() {
            let a = others[members[k]];
            for j in 0..others.len() {
                if group[j] == usize::MAX && is_conc(a, others[j]) {
                    group[j] = id;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        groups.push(members);
    }
    let clique = |m: &[usize]| {
        m.len() >= 2
            && m.iter()
                .enumerate()
                .all(|(i, &a)| m[i + 1..].iter().all(|&b| is_conc(others[a], others[b])))
    };

    let mut ports = vec![anchor; others.len()];
    if groups.len() == 1 && clique(&groups[0]) {
        let gw = g.add_node(and);
        link(g, anchor, gw);
        ports.iter_mut().for_each(|p| *p = gw);
        return ports;
    }
    let gw = g.add_node(xor);
    link(g, anchor, gw);
    for m in &groups {
        if clique(m) {
            let inner = g.add_node(and.clone());
            link(g, gw, inner);
            m.iter().for_each(|&i| ports[i] = inner);
        } else {
            // not a clean block: keep the members as plain alternatives
            m.iter().for_each(|&i| ports[i] = gw);
        }
    }
    ports
}
