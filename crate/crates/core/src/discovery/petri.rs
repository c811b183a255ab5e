//! Place/transition nets, their construction from trees and gateway graphs,
//! and bounded soundness checking.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::gateway::{GatewayGraph, GatewayKind};
use super::tree::{Operator, ProcessTree};
use crate::error::{Error, Result};

pub type Marking = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub name: String,
    /// `None` for silent transitions.
    pub label: Option<String>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PetriNet {
    pub places: Vec<String>,
    pub transitions: Vec<Transition>,
    pub initial: Marking,
    pub final_marking: Marking,
}

impl PetriNet {
    pub fn add_place(&mut self) -> usize {
        self.places.push(format!("p{}", self.places.len()));
        self.initial.push(0);
        self.final_marking.push(0);
        self.places.len() - 1
    }

    pub fn add_transition(
        &mut self,
        label: Option<String>,
        inputs: Vec<usize>,
        outputs: Vec<usize>,
    ) -> usize {
        self.transitions.push(Transition {
            name: format!("t{}", self.transitions.len()),
            label,
            inputs,
            outputs,
        });
        self.transitions.len() - 1
    }

    /// Unique source and sink places of a workflow net.
    pub fn workflow_places(&self) -> Result<(usize, usize)> {
        let mut has_in = vec![false; self.places.len()];
        let mut has_out = vec![false; self.places.len()];
        for t in &self.transitions {
            t.inputs.iter().for_each(|&p| has_out[p] = true);
            t.outputs.iter().for_each(|&p| has_in[p] = true);
        }
        let sources: Vec<usize> = (0..self.places.len()).filter(|&p| !has_in[p]).collect();
        let sinks: Vec<usize> = (0..self.places.len()).filter(|&p| !has_out[p]).collect();
        match (&sources[..], &sinks[..]) {
            ([s], [e]) if s != e => Ok((*s, *e)),
            _ => Err(Error::domain(format!(
                "not a workflow net: {} source and {} sink places",
                sources.len(),
                sinks.len()
            ))),
        }
    }

    pub fn is_enabled(&self, marking: &[u32], t: usize) -> bool {
        let inputs = &self.transitions[t].inputs;
        inputs.iter().enumerate().all(|(i, &p)| {
            let need = 1 + inputs[..i].iter().filter(|&&q| q == p).count() as u32;
            marking[p] >= need
        })
    }

    /// Fires `t`, which must be enabled.
    pub fn fire(&self, marking: &mut [u32], t: usize) {
        for &p in &self.transitions[t].inputs {
            marking[p] -= 1;
        }
        for &p in &self.transitions[t].outputs {
            marking[p] += 1;
        }
    }

    pub fn enabled(&self, marking: &[u32]) -> impl Iterator<Item = usize> + '_ {
        let m = marking.to_vec();
        (0..self.transitions.len()).filter(move |&t| self.is_enabled(&m, t))
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.transitions.iter().filter_map(|t| t.label.as_deref())
    }

    /// Line format, one item per line:
    /// `place <name>`, `transition <name> silent`,
    /// `transition <name> label <text>`, `arc <from> <to>`,
    /// `initial <place> <tokens>`, `final <place> <tokens>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for p in &self.places {
            let _ = writeln!(out, "place {p}");
        }
        for t in &self.transitions {
            match &t.label {
                Some(l) => {
                    let _ = writeln!(out, "transition {} label {l}", t.name);
                }
                None => {
                    let _ = writeln!(out, "transition {} silent", t.name);
                }
            }
        }
        for t in &self.transitions {
            for &p in &t.inputs {
                let _ = writeln!(out, "arc {} {}", self.places[p], t.name);
            }
            for &p in &t.outputs {
                let _ = writeln!(out, "arc {} {}", t.name, self.places[p]);
            }
        }
        for (p, &k) in self.initial.iter().enumerate().filter(|(_, k)| **k > 0) {
            let _ = writeln!(out, "initial {} {k}", self.places[p]);
        }
        for (p, &k) in self.final_marking.iter().enumerate().filter(|(_, k)| **k > 0) {
            let _ = writeln!(out, "final {} {k}", self.places[p]);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut net = PetriNet::default();
        let mut place_ix: HashMap<String, usize> = HashMap::new();
        let mut trans_ix: HashMap<String, usize> = HashMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let err = |m: String| Error::Parse {
                line: ln + 1,
                message: m,
            };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.splitn(4, ' ').collect();
            match parts[..] {
                ["place", name] => {
                    let p = net.add_place();
                    net.places[p] = name.to_string();
                    place_ix.insert(name.to_string(), p);
                }
                ["transition", name, "silent"] => {
                    let t = net.add_transition(None, vec![], vec![]);
                    net.transitions[t].name = name.to_string();
                    trans_ix.insert(name.to_string(), t);
                }
                ["transition", name, "label", label] => {
                    let t = net.add_transition(Some(label.to_string()), vec![], vec![]);
                    net.transitions[t].name = name.to_string();
                    trans_ix.insert(name.to_string(), t);
                }
                ["arc", from, to] => match (place_ix.get(from), trans_ix.get(to)) {
                    (Some(&p), Some(&t)) => net.transitions[t].inputs.push(p),
                    _ => match (trans_ix.get(from), place_ix.get(to)) {
                        (Some(&t), Some(&p)) => net.transitions[t].outputs.push(p),
                        _ => return Err(err(format!("arc {from} -> {to} has unknown ends"))),
                    },
                },
                [kind @ ("initial" | "final"), place, tokens] => {
                    let p = *place_ix
                        .get(place)
                        .ok_or_else(|| err(format!("unknown place {place}")))?;
                    let k: u32 = tokens
                        .parse()
                        .map_err(|_| err(format!("bad token count {tokens}")))?;
                    if kind == "initial" {
                        net.initial[p] = k;
                    } else {
                        net.final_marking[p] = k;
                    }
                }
                _ => return Err(err(format!("unrecognized line {line:?}"))),
            }
        }
        Ok(net)
    }
}

fn build_tree(net: &mut PetriNet, tree: &ProcessTree, input: usize, output: usize) {
    match tree {
        ProcessTree::Leaf(l) => {
            net.add_transition(Some(l.clone()), vec![input], vec![output]);
        }
        ProcessTree::Silent => {
            net.add_transition(None, vec![input], vec![output]);
        }
        ProcessTree::Node(Operator::Sequence, ch) => {
            let mut from = input;
            for (i, c) in ch.iter().enumerate() {
                let to = if i + 1 == ch.len() { output } else { net.add_place() };
                build_tree(net, c, from, to);
                from = to;
            }
        }
        ProcessTree::Node(Operator::Choice, ch) => {
            for c in ch {
                build_tree(net, c, input, output);
            }
        }
        ProcessTree::Node(Operator::Parallel, ch) => {
            let starts: Vec<usize> = ch.iter().map(|_| net.add_place()).collect();
            let ends: Vec<usize> = ch.iter().map(|_| net.add_place()).collect();
            net.add_transition(None, vec![input], starts.clone());
            for (c, (&s, &e)) in ch.iter().zip(starts.iter().zip(&ends)) {
                build_tree(net, c, s, e);
            }
            net.add_transition(None, ends, vec![output]);
        }
        ProcessTree::Node(Operator::Loop, ch) => {
            // fresh places keep the back edge local to the loop block
            let entry = net.add_place();
            let exit = net.add_place();
            net.add_transition(None, vec![input], vec![entry]);
            build_tree(net, &ch[0], entry, exit);
            build_tree(net, &ch[1], exit, entry);
            net.add_transition(None, vec![exit], vec![output]);
        }
    }
}

/// Compositional workflow-net translation of a process tree.
pub fn tree_to_petri(tree: &ProcessTree) -> PetriNet {
    let mut net = PetriNet::default();
    let source = net.add_place();
    let sink = net.add_place();
    build_tree(&mut net, tree, source, sink);
    net.initial[source] = 1;
    net.final_marking[sink] = 1;
    net
}

/// Gateway graph translation: tasks and AND gateways become transitions,
/// XOR gateways and start/end become places, and each edge between two
/// transitions becomes a place. Edges between two place-like nodes get a
/// silent transition.
pub fn gateway_to_petri(graph: &GatewayGraph) -> Result<PetriNet> {
    graph.validate()?;
    let mut net = PetriNet::default();
    #[derive(Clone, Copy)]
    enum Elem {
        Place(usize),
        Trans(usize),
    }
    let mut elem = Vec::with_capacity(graph.nodes.len());
    for kind in &graph.nodes {
        elem.push(match kind {
            GatewayKind::Start | GatewayKind::End | GatewayKind::XorSplit | GatewayKind::XorJoin => {
                Elem::Place(net.add_place())
            }
            GatewayKind::Task(l) => Elem::Trans(net.add_transition(Some(l.clone()), vec![], vec![])),
            GatewayKind::AndSplit | GatewayKind::AndJoin => {
                Elem::Trans(net.add_transition(None, vec![], vec![]))
            }
        });
    }
    for &(a, b) in &graph.edges {
        match (elem[a], elem[b]) {
            (Elem::Trans(t), Elem::Trans(u)) => {
                let p = net.add_place();
                net.transitions[t].outputs.push(p);
                net.transitions[u].inputs.push(p);
            }
            (Elem::Trans(t), Elem::Place(p)) => net.transitions[t].outputs.push(p),
            (Elem::Place(p), Elem::Trans(t)) => net.transitions[t].inputs.push(p),
            (Elem::Place(p), Elem::Place(q)) => {
                net.add_transition(None, vec![p], vec![q]);
            }
        }
    }
    let place = |n: Option<usize>| match n.map(|i| elem[i]) {
        Some(Elem::Place(p)) => p,
        _ => unreachable!("start and end map to places"),
    };
    net.initial[place(graph.start())] = 1;
    net.final_marking[place(graph.end())] = 1;
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Soundness {
    Sound,
    Unsound,
    Unknown,
}

impl Soundness {
    pub fn as_str(self) -> &'static str {
        match self {
            Soundness::Sound => "sound",
            Soundness::Unsound => "unsound",
            Soundness::Unknown => "unknown",
        }
    }
}

/// Bounded explicit-state soundness check.
///
/// Explores at most `state_cap` distinct markings. Sound iff the final
/// marking is reachable from every reachable marking, no reachable marking
/// strictly covers the final one, and every transition fires somewhere.
pub fn check_soundness(net: &PetriNet, state_cap: usize) -> Soundness {
    if net.workflow_places().is_err() {
        return Soundness::Unsound;
    }
    let mut index: HashMap<Marking, usize> = HashMap::new();
    let mut states: Vec<Marking> = Vec::new();
    let mut reverse: Vec<Vec<usize>> = Vec::new();
    let mut fired = vec![false; net.transitions.len()];
    let mut queue = VecDeque::new();

    index.insert(net.initial.clone(), 0);
    states.push(net.initial.clone());
    reverse.push(Vec::new());
    queue.push_back(0);

    while let Some(s) = queue.pop_front() {
        let m = states[s].clone();
        if m != net.final_marking
            && m.iter().zip(&net.final_marking).all(|(a, b)| a >= b)
        {
            return Soundness::Unsound;
        }
        for t in net.enabled(&m).collect::<Vec<_>>() {
            fired[t] = true;
            let mut next = m.clone();
            net.fire(&mut next, t);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if states.len() >= state_cap {
                        return Soundness::Unknown;
                    }
                    let id = states.len();
                    index.insert(next.clone(), id);
                    states.push(next);
                    reverse.push(Vec::new());
                    queue.push_back(id);
                    id
                }
            };
            reverse[id].push(s);
        }
    }

    if fired.iter().any(|f| !f) {
        return Soundness::Unsound;
    }
    let Some(&fin) = index.get(&net.final_marking) else {
        return Soundness::Unsound;
    };
    let mut can_finish = vec![false; states.len()];
    can_finish[fin] = true;
    let mut queue = VecDeque::from([fin]);
    while let Some(s) = queue.pop_front() {
        for &p in &reverse[s] {
            if !can_finish[p] {
                can_finish[p] = true;
                queue.push_back(p);
            }
        }
    }
    if can_finish.iter().all(|&b| b) {
        Soundness::Sound
    } else {
        Soundness::Unsound
    }
}
