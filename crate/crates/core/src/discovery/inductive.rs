//! Basic inductive miner: recursive cut detection on the directly-follows
//! graph with empty-trace handling and a flower fall-through.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::tree::ProcessTree;
use crate::error::Result;
use crate::eventlog::EventLog;

/// Sublog of distinct activity sequences (interned ids) with multiplicities.
type SubLog = BTreeMap<Vec<usize>, u64>;

struct Dfg {
    arcs: BTreeSet<(usize, usize)>,
    starts: BTreeSet<usize>,
    ends: BTreeSet<usize>,
    activities: Vec<usize>,
}

impl Dfg {
    fn new(log: &SubLog) -> Self {
        let mut arcs = BTreeSet::new();
        let mut starts = BTreeSet::new();
        let mut ends = BTreeSet::new();
        let mut acts = BTreeSet::new();
        for trace in log.keys() {
            if let (Some(&f), Some(&l)) = (trace.first(), trace.last()) {
                starts.insert(f);
                ends.insert(l);
            }
            acts.extend(trace.iter().copied());
            for w in trace.windows(2) {
                arcs.insert((w[0], w[1]));
            }
        }
        Dfg {
            arcs,
            starts,
            ends,
            activities: acts.into_iter().collect(),
        }
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.arcs.contains(&(a, b))
    }

    /// Transitive closure restricted to the activity set.
    fn reachability(&self) -> HashMap<usize, BTreeSet<usize>> {
        let mut succ: HashMap<usize, Vec<usize>> = HashMap::new();
        for &(a, b) in &self.arcs {
            succ.entry(a).or_default().push(b);
        }
        self.activities
            .iter()
            .map(|&a| {
                let mut seen = BTreeSet::new();
                let mut stack: Vec<usize> = succ.get(&a).cloned().unwrap_or_default();
                while let Some(x) = stack.pop() {
                    if seen.insert(x) {
                        stack.extend(succ.get(&x).into_iter().flatten().copied());
                    }
                }
                (a, seen)
            })
            .collect()
    }
}

/// Union-find components over `nodes` joined by `edges`; each group sorted
/// and the groups ordered by their smallest member.
fn components(nodes: &[usize], edges: impl Iterator<Item = (usize, usize)>) -> Vec<Vec<usize>> {
    let index: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    for (a, b) in edges {
        if let (Some(&i), Some(&j)) = (index.get(&a), index.get(&b)) {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &a) in nodes.iter().enumerate() {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(a);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_unstable();
    }
    out.sort();
    out
}

fn xor_cut(dfg: &Dfg) -> Option<Vec<Vec<usize>>> {
    let groups = components(&dfg.activities, dfg.arcs.iter().copied());
    (groups.len() > 1).then_some(groups)
}

fn sequence_cut(dfg: &Dfg) -> Option<Vec<Vec<usize>>> {
    let reach = dfg.reachability();
    let reaches = |a: usize, b: usize| reach[&a].contains(&b);
    // A strictly precedes B iff every a reaches every b and nothing in B
    // reaches back into A.
    let precedes = |x: &[usize], y: &[usize]| {
        x.iter()
            .all(|&a| y.iter().all(|&b| reaches(a, b) && !reaches(b, a)))
    };

    // strongly connected components
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut assigned = BTreeSet::new();
    for &a in &dfg.activities {
        if assigned.contains(&a) {
            continue;
        }
        let scc: Vec<usize> = dfg
            .activities
            .iter()
            .copied()
            .filter(|&b| b == a || (reaches(a, b) && reaches(b, a)))
            .collect();
        assigned.extend(scc.iter().copied());
        groups.push(scc);
    }

    // merge incomparable groups until the precedence order is total
    'outer: loop {
        for i in 0..groups.len() {
            for j in (i + 1)..groups.len() {
                if !precedes(&groups[i], &groups[j]) && !precedes(&groups[j], &groups[i]) {
                    let g = groups.remove(j);
                    groups[i].extend(g);
                    groups[i].sort_unstable();
                    continue 'outer;
                }
            }
        }
        break;
    }
    if groups.len() < 2 {
        return None;
    }
    groups.sort_by(|x, y| {
        if precedes(x, y) {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });
    Some(groups)
}

fn parallel_cut(dfg: &Dfg) -> Option<Vec<Vec<usize>>> {
    let acts = &dfg.activities;
    let mut not_both = Vec::new();
    for (i, &a) in acts.iter().enumerate() {
        for &b in &acts[i + 1..] {
            if !(dfg.has(a, b) && dfg.has(b, a)) {
                not_both.push((a, b));
            }
        }
    }
    let mut groups = components(acts, not_both.into_iter());
    let complete = |g: &[usize]| {
        g.iter().any(|a| dfg.starts.contains(a)) && g.iter().any(|a| dfg.ends.contains(a))
    };
    while groups.len() > 1 {
        let Some(bad) = groups.iter().position(|g| !complete(g)) else {
            break;
        };
        let g = groups.remove(bad);
        let target = if bad == 0 { 0 } else { bad - 1 };
        groups[target].extend(g);
        groups[target].sort_unstable();
    }
    groups.sort();
    (groups.len() > 1).then_some(groups)
}

/// Returns the body group followed by the redo groups.
fn loop_cut(dfg: &Dfg) -> Option<Vec<Vec<usize>>> {
    let mut body: BTreeSet<usize> = dfg.starts.union(&dfg.ends).copied().collect();
    let rest: Vec<usize> = dfg
        .activities
        .iter()
        .copied()
        .filter(|a| !body.contains(a))
        .collect();
    if rest.is_empty() {
        return None;
    }
    let inner = dfg
        .arcs
        .iter()
        .copied()
        .filter(|(a, b)| !body.contains(a) && !body.contains(b));
    let candidates = components(&rest, inner);

    let mut redo = Vec::new();
    for comp in candidates {
        let mut ok = true;
        for &x in &comp {
            for &b in body.iter() {
                // entering the redo part only from end activities
                if dfg.has(b, x) && !dfg.ends.contains(&b) {
                    ok = false;
                }
                // leaving the redo part only into start activities
                if dfg.has(x, b) && !dfg.starts.contains(&b) {
                    ok = false;
                }
            }
            let from_some_end = dfg.ends.iter().any(|&e| dfg.has(e, x));
            if from_some_end && !dfg.ends.iter().all(|&e| dfg.has(e, x)) {
                ok = false;
            }
            let to_some_start = dfg.starts.iter().any(|&s| dfg.has(x, s));
            if to_some_start && !dfg.starts.iter().all(|&s| dfg.has(x, s)) {
                ok = false;
            }
        }
        if ok {
            redo.push(comp);
        } else {
            body.extend(comp);
        }
    }
    if redo.is_empty() {
        return None;
    }
    let mut out = vec![body.into_iter().collect::<Vec<_>>()];
    out.extend(redo);
    Some(out)
}

fn group_of(groups: &[Vec<usize>]) -> HashMap<usize, usize> {
    groups
        .iter()
        .enumerate()
        .flat_map(|(i, g)| g.iter().map(move |&a| (a, i)))
        .collect()
}

fn add(log: &mut SubLog, trace: Vec<usize>, count: u64) {
    *log.entry(trace).or_default() += count;
}

struct Miner<'a> {
    names: &'a [String],
}

impl Miner<'_> {
    fn leaf(&self, a: usize) -> ProcessTree {
        ProcessTree::Leaf(self.names[a].clone())
    }

    fn mine(&self, log: &SubLog) -> ProcessTree {
        let has_empty = log.keys().any(Vec::is_empty);
        let non_empty: SubLog = log
            .iter()
            .filter(|(t, _)| !t.is_empty())
            .map(|(t, c)| (t.clone(), *c))
            .collect();
        if non_empty.is_empty() {
            return ProcessTree::Silent;
        }
        if has_empty {
            return ProcessTree::xor(vec![ProcessTree::Silent, self.mine(&non_empty)]);
        }

        let dfg = Dfg::new(log);
        if let [a] = dfg.activities[..] {
            return if log.keys().all(|t| t.len() == 1) {
                self.leaf(a)
            } else {
                ProcessTree::looped(self.leaf(a), ProcessTree::Silent)
            };
        }

        if let Some(groups) = xor_cut(&dfg) {
            let idx = group_of(&groups);
            let mut subs = vec![SubLog::new(); groups.len()];
            for (t, &c) in log {
                add(&mut subs[idx[&t[0]]], t.clone(), c);
            }
            return ProcessTree::xor(subs.iter().map(|s| self.mine(s)).collect());
        }

        if let Some(groups) = sequence_cut(&dfg) {
            let idx = group_of(&groups);
            let mut subs = vec![SubLog::new(); groups.len()];
            for (t, &c) in log {
                let mut segments = vec![Vec::new(); groups.len()];
                for &a in t {
                    segments[idx[&a]].push(a);
                }
                for (sub, seg) in subs.iter_mut().zip(segments) {
                    add(sub, seg, c);
                }
            }
            return ProcessTree::seq(subs.iter().map(|s| self.mine(s)).collect());
        }

        if let Some(groups) = parallel_cut(&dfg) {
            let idx = group_of(&groups);
            let mut subs = vec![SubLog::new(); groups.len()];
            for (t, &c) in log {
                let mut proj = vec![Vec::new(); groups.len()];
                for &a in t {
                    proj[idx[&a]].push(a);
                }
                for (sub, p) in subs.iter_mut().zip(proj) {
                    add(sub, p, c);
                }
            }
            return ProcessTree::and(subs.iter().map(|s| self.mine(s)).collect());
        }

        if let Some(groups) = loop_cut(&dfg) {
            let idx = group_of(&groups);
            let mut subs = vec![SubLog::new(); groups.len()];
            for (t, &c) in log {
                let mut start = 0;
                for i in 1..=t.len() {
                    if i == t.len() || idx[&t[i]] != idx[&t[start]] {
                        add(&mut subs[idx[&t[start]]], t[start..i].to_vec(), c);
                        start = i;
                    }
                }
            }
            let body = self.mine(&subs[0]);
            let mut redos: Vec<ProcessTree> = subs[1..].iter().map(|s| self.mine(s)).collect();
            let redo = if redos.len() == 1 {
                redos.pop().expect("one redo")
            } else {
                ProcessTree::xor(redos)
            };
            return ProcessTree::looped(body, redo);
        }

        // flower fall-through
        ProcessTree::looped(
            ProcessTree::xor(dfg.activities.iter().map(|&a| self.leaf(a)).collect()),
            ProcessTree::Silent,
        )
    }
}

/// Discovers a process tree from `log`. Deterministic: children of choice
/// and parallel operators are ordered by their smallest activity label.
pub fn inductive_discover(log: &EventLog) -> Result<ProcessTree> {
    log.require_non_empty("inductive discovery")?;
    let names: Vec<String> = {
        let set: BTreeSet<&str> = log.traces().iter().flat_map(|t| t.activities()).collect();
        set.into_iter().map(str::to_string).collect()
    };
    let ids: HashMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut sub = SubLog::new();
    for t in log.traces() {
        add(&mut sub, t.activities().map(|a| ids[a]).collect(), 1);
    }
    Ok(Miner { names: &names }.mine(&sub))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mine(seqs: &[&[&str]]) -> String {
        inductive_discover(&EventLog::from_sequences(seqs).unwrap())
            .unwrap()
            .to_string()
    }

    #[test]
    fn base_case() {
        assert_eq!(mine(&[&["a"]]), "a");
        assert_eq!(mine(&[&["a"], &["a", "a"]]), "LOOP(a,tau)");
    }

    #[test]
    fn parallel_pair() {
        assert_eq!(mine(&[&["a", "b"], &["b", "a"]]), "AND(a,b)");
    }

    #[test]
    fn sequence_then_choice() {
        assert_eq!(mine(&[&["a", "b"], &["a", "c"]]), "SEQ(a,XOR(b,c))");
    }

    #[test]
    fn optional_activity() {
        assert_eq!(mine(&[&["a", "b", "c"], &["a", "c"]]), "SEQ(a,XOR(tau,b),c)");
    }

    #[test]
    fn simple_loop() {
        assert_eq!(mine(&[&["a", "b"], &["a", "b", "c", "a", "b"]]), "LOOP(SEQ(a,b),c)");
    }

    #[test]
    fn disconnected_choice() {
        assert_eq!(mine(&[&["c", "d"], &["a", "b"]]), "XOR(SEQ(a,b),SEQ(c,d))");
    }

    #[test]
    fn deterministic_under_trace_order() {
        let a = mine(&[&["a", "b", "c"], &["a", "c", "b"], &["d"]]);
        let b = mine(&[&["d"], &["a", "c", "b"], &["a", "b", "c"]]);
        assert_eq!(a, b);
    }

    #[test]
    fn empty_log() {
        assert!(inductive_discover(&EventLog::default()).is_err());
    }
}
