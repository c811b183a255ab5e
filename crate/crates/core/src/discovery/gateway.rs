//! BPMN-like gateway graphs and the structured mapping from process trees.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::tree::{Operator, ProcessTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GatewayKind {
    Start,
    End,
    Task(String),
    XorSplit,
    XorJoin,
    AndSplit,
    AndJoin,
}

impl GatewayKind {
    fn keyword(&self) -> &str {
        match self {
            GatewayKind::Start => "start",
            GatewayKind::End => "end",
            GatewayKind::Task(_) => "task",
            GatewayKind::XorSplit => "xor-split",
            GatewayKind::XorJoin => "xor-join",
            GatewayKind::AndSplit => "and-split",
            GatewayKind::AndJoin => "and-join",
        }
    }

    pub fn is_split(&self) -> bool {
        matches!(self, GatewayKind::XorSplit | GatewayKind::AndSplit)
    }

    pub fn is_join(&self) -> bool {
        matches!(self, GatewayKind::XorJoin | GatewayKind::AndJoin)
    }
}

/// Directed graph of typed nodes; edges may repeat (parallel edges).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayGraph {
    pub nodes: Vec<GatewayKind>,
    pub edges: Vec<(usize, usize)>,
}

impl GatewayGraph {
    pub fn add_node(&mut self, kind: GatewayKind) -> usize {
        self.nodes.push(kind);
        self.nodes.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        self.edges.push((from, to));
    }

    pub fn out_degree(&self, n: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == n).count()
    }

    pub fn in_degree(&self, n: usize) -> usize {
        self.edges.iter().filter(|e| e.1 == n).count()
    }

    pub fn start(&self) -> Option<usize> {
        self.nodes.iter().position(|k| *k == GatewayKind::Start)
    }

    pub fn end(&self) -> Option<usize> {
        self.nodes.iter().position(|k| *k == GatewayKind::End)
    }

    pub fn successors(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == n).map(|e| e.1)
    }

    pub fn predecessors(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == n).map(|e| e.0)
    }

    fn reach(&self, from: usize, forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(n) = queue.pop_front() {
            let next: Vec<usize> = if forward {
                self.successors(n).collect()
            } else {
                self.predecessors(n).collect()
            };
            for m in next {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        seen
    }

    /// Checks the structural invariants: one start without incoming edges,
    /// one end without outgoing edges, every node on a start-to-end path,
    /// splits with out-degree >= 2 and joins with in-degree >= 2.
    pub fn validate(&self) -> Result<()> {
        let count = |k: &GatewayKind| self.nodes.iter().filter(|n| *n == k).count();
        if count(&GatewayKind::Start) != 1 || count(&GatewayKind::End) != 1 {
            return Err(Error::schema("gateway graph needs exactly one start and one end"));
        }
        if let Some(&(a, b)) = self
            .edges
            .iter()
            .find(|(a, b)| *a >= self.nodes.len() || *b >= self.nodes.len())
        {
            return Err(Error::schema(format!("edge {a}->{b} references a missing node")));
        }
        let (s, e) = (self.start().unwrap(), self.end().unwrap());
        if self.in_degree(s) != 0 || self.out_degree(e) != 0 {
            return Err(Error::schema("start has incoming or end has outgoing edges"));
        }
        let fwd = self.reach(s, true);
        let bwd = self.reach(e, false);
        for (i, kind) in self.nodes.iter().enumerate() {
            if !fwd[i] || !bwd[i] {
                return Err(Error::schema(format!(
                    "node {i} ({}) is not on a start-to-end path",
                    kind.keyword()
                )));
            }
            if kind.is_split() && self.out_degree(i) < 2 {
                return Err(Error::schema(format!("split {i} has out-degree < 2")));
            }
            if kind.is_join() && self.in_degree(i) < 2 {
                return Err(Error::schema(format!("join {i} has in-degree < 2")));
            }
        }
        Ok(())
    }

    /// Line format: `node <id> <kind> [label]` and `edge <from> <to>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, k) in self.nodes.iter().enumerate() {
            match k {
                GatewayKind::Task(l) => {
                    let _ = writeln!(out, "node {i} task {l}");
                }
                other => {
                    let _ = writeln!(out, "node {i} {}", other.keyword());
                }
            }
        }
        for (a, b) in &self.edges {
            let _ = writeln!(out, "edge {a} {b}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut g = GatewayGraph::default();
        for (ln, line) in text.lines().enumerate() {
            let err = |m: &str| Error::Parse {
                line: ln + 1,
                message: m.to_string(),
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(4, ' ');
            match parts.next() {
                Some("node") => {
                    let id: usize = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err("bad node id"))?;
                    if id != g.nodes.len() {
                        return Err(err("node ids must be consecutive"));
                    }
                    let kind = match parts.next() {
                        Some("start") => GatewayKind::Start,
                        Some("end") => GatewayKind::End,
                        Some("xor-split") => GatewayKind::XorSplit,
                        Some("xor-join") => GatewayKind::XorJoin,
                        Some("and-split") => GatewayKind::AndSplit,
                        Some("and-join") => GatewayKind::AndJoin,
                        Some("task") => GatewayKind::Task(
                            parts.next().ok_or_else(|| err("task without label"))?.to_string(),
                        ),
                        _ => return Err(err("unknown node kind")),
                    };
                    g.nodes.push(kind);
                }
                Some("edge") => {
                    let mut id = || -> Result<usize> {
                        parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err("bad edge endpoint"))
                    };
                    let (a, b) = (id()?, id()?);
                    g.edges.push((a, b));
                }
                _ => return Err(err("expected `node` or `edge`")),
            }
        }
        Ok(g)
    }
}

/// Entry and exit node of a translated fragment; `None` for silent steps.
type Fragment = Option<(usize, usize)>;

fn fragment(g: &mut GatewayGraph, tree: &ProcessTree) -> Fragment {
    match tree {
        ProcessTree::Silent => None,
        ProcessTree::Leaf(l) => {
            let n = g.add_node(GatewayKind::Task(l.clone()));
            Some((n, n))
        }
        ProcessTree::Node(Operator::Sequence, ch) => {
            let mut acc: Fragment = None;
            for c in ch {
                match (acc, fragment(g, c)) {
                    (None, f) => acc = f,
                    (Some(a), None) => acc = Some(a),
                    (Some((entry, exit)), Some((e2, x2))) => {
                        g.add_edge(exit, e2);
                        acc = Some((entry, x2));
                    }
                }
            }
            acc
        }
        ProcessTree::Node(op @ (Operator::Choice | Operator::Parallel), ch) => {
            if let [only] = &ch[..] {
                return fragment(g, only);
            }
            let (split, join) = if *op == Operator::Choice {
                (GatewayKind::XorSplit, GatewayKind::XorJoin)
            } else {
                (GatewayKind::AndSplit, GatewayKind::AndJoin)
            };
            let s = g.add_node(split);
            let j = g.add_node(join);
            for c in ch {
                match fragment(g, c) {
                    Some((entry, exit)) => {
                        g.add_edge(s, entry);
                        g.add_edge(exit, j);
                    }
                    None => g.add_edge(s, j),
                }
            }
            Some((s, j))
        }
        ProcessTree::Node(Operator::Loop, ch) => {
            let j = g.add_node(GatewayKind::XorJoin);
            let body = fragment(g, &ch[0]);
            let s = g.add_node(GatewayKind::XorSplit);
            match body {
                Some((entry, exit)) => {
                    g.add_edge(j, entry);
                    g.add_edge(exit, s);
                }
                None => g.add_edge(j, s),
            }
            match fragment(g, &ch[1]) {
                Some((entry, exit)) => {
                    g.add_edge(s, entry);
                    g.add_edge(exit, j);
                }
                None => g.add_edge(s, j),
            }
            Some((j, s))
        }
    }
}

/// Structured block translation of a process tree.
pub fn tree_to_gateway_graph(tree: &ProcessTree) -> GatewayGraph {
    let mut g = GatewayGraph::default();
    let start = g.add_node(GatewayKind::Start);
    let body = fragment(&mut g, tree);
    let end = g.add_node(GatewayKind::End);
    match body {
        Some((entry, exit)) => {
            g.add_edge(start, entry);
            g.add_edge(exit, end);
        }
        None => g.add_edge(start, end),
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(src: &str) -> GatewayGraph {
        let g = tree_to_gateway_graph(&src.parse().unwrap());
        g.validate().unwrap();
        g
    }

    #[test]
    fn leaf_is_three_nodes() {
        let g = graph("a");
        assert_eq!(g.nodes.len(), 3);
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn choice_and_parallel_blocks() {
        let x = graph("XOR(a,b)");
        assert_eq!(x.nodes.len(), 6);
        assert!(x.nodes.contains(&GatewayKind::XorSplit));
        let p = graph("AND(a,b)");
        assert_eq!(p.nodes.len(), 6);
        assert!(p.nodes.contains(&GatewayKind::AndJoin));
    }

    #[test]
    fn loops_and_silent_steps_are_well_formed() {
        for src in [
            "LOOP(a,tau)",
            "LOOP(tau,a)",
            "SEQ(tau,a,tau)",
            "XOR(tau,LOOP(SEQ(a,b),XOR(c,d)))",
            "AND(a,XOR(tau,b),LOOP(c,tau))",
            "LOOP(LOOP(a,b),c)",
            "XOR(a)",
        ] {
            graph(src);
        }
    }

    #[test]
    fn text_round_trip() {
        let g = graph("SEQ(a,XOR(b,c),AND(d,e))");
        assert_eq!(GatewayGraph::from_text(&g.to_text()).unwrap(), g);
        assert!(GatewayGraph::from_text("node 0 bogus").is_err());
    }

    #[test]
    fn invalid_graphs_rejected() {
        let mut g = GatewayGraph::default();
        let s = g.add_node(GatewayKind::Start);
        let x = g.add_node(GatewayKind::XorSplit);
        let e = g.add_node(GatewayKind::End);
        g.add_edge(s, x);
        g.add_edge(x, e);
        assert!(g.validate().is_err());
        g.add_edge(x, e);
        assert!(g.validate().is_ok());
        g.add_node(GatewayKind::Task("orphan".into()));
        assert!(g.validate().is_err());
    }
}
