use std::collections::{HashSet, VecDeque};

use fixedbitset::FixedBitSet;

use super::{resolve, PropKind, Property, ResolveError};
use crate::model::{ComposedModel, Expr};
use crate::statespace::{EdgeLabel, StateGraph, StateId, Trace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerdictValue {
    True,
    False,
    /// The graph is partial and the answer depends on what is missing.
    Unknown(String),
}

impl VerdictValue {
    pub fn word(&self) -> &'static str {
        match self {
            VerdictValue::True => "TRUE",
            VerdictValue::False => "FALSE",
            VerdictValue::Unknown(_) => "UNKNOWN",
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            VerdictValue::True => Some(true),
            VerdictValue::False => Some(false),
            VerdictValue::Unknown(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub value: VerdictValue,
    /// Witness for Present, counterexample otherwise.
    pub witness: Option<Trace>,
}

impl Verdict {
    fn new(value: VerdictValue, witness: Option<Trace>) -> Self {
        Verdict { value, witness }
    }

    fn unknown(g: &StateGraph) -> Self {
        let why = g.limit.map(|l| l.to_string()).unwrap_or_default();
        Verdict::new(VerdictValue::Unknown(why), None)
    }
}

fn mark(m: &ComposedModel, g: &StateGraph, e: &Expr) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(g.num_states());
    let mut buf = Vec::new();
    for id in 0..g.num_states() {
        g.state_into(id as StateId, &mut buf);
        out.set(id, m.holds(e, &buf));
    }
    out
}

fn is_sink(g: &StateGraph, s: StateId) -> bool {
    g.is_expanded(s) && g.edges(s).next().is_none()
}

pub fn check(m: &ComposedModel, g: &StateGraph, prop: &Property) -> Result<Verdict, ResolveError> {
    Ok(match &prop.kind {
        PropKind::Present(p) => {
            let hits = mark(m, g, &resolve(m, p)?);
            match hits.ones().next() {
                Some(s) => Verdict::new(VerdictValue::True, Some(g.path_to(s as StateId))),
                None if g.is_complete() => Verdict::new(VerdictValue::False, None),
                None => Verdict::unknown(g),
            }
        }
        PropKind::Absent(p) => {
            let hits = mark(m, g, &resolve(m, p)?);
            match hits.ones().next() {
                Some(s) => Verdict::new(VerdictValue::False, Some(g.path_to(s as StateId))),
                None if g.is_complete() => Verdict::new(VerdictValue::True, None),
                None => Verdict::unknown(g),
            }
        }
        PropKind::DeadlockFree => {
            let mut buf = Vec::new();
            let dead = (0..g.num_states() as StateId).find(|&s| {
                is_sink(g, s) && {
                    g.state_into(s, &mut buf);
                    m.terminal_status(&buf).is_none()
                }
            });
            match dead {
                Some(s) => Verdict::new(VerdictValue::False, Some(g.path_to(s))),
                None if g.is_complete() => Verdict::new(VerdictValue::True, None),
                None => Verdict::unknown(g),
            }
        }
        PropKind::LeadsTo { p, q, a, b } => {
            let (p, q) = (mark(m, g, &resolve(m, p)?), mark(m, g, &resolve(m, q)?));
            leads_to(g, &p, &q, *a, *b)
        }
        PropKind::ImpliesEventually(p, q) => {
            let (p, q) = (mark(m, g, &resolve(m, p)?), mark(m, g, &resolve(m, q)?));
            implies_eventually(g, &p, &q)
        }
    })
}

/// `layers[c]` holds the states from which, with `c` time steps already
/// elapsed, every path meets q at an elapsed time in [a, b]. Unexpanded
/// states count as good when `optimistic`.
fn leads_to_layers(g: &StateGraph, q: &FixedBitSet, a: u32, b: u32, optimistic: bool) -> Vec<FixedBitSet> {
    let n = g.num_states();
    // Predecessors along untimed edges, with multiplicity.
    let mut pre_off = vec![0u32; n + 1];
    for s in 0..n as StateId {
        for (e, t) in g.edges(s) {
            if matches!(e, EdgeLabel::Fire(_)) {
                pre_off[t as usize + 1] += 1;
            }
        }
    }
    for i in 1..=n {
        pre_off[i] += pre_off[i - 1];
    }
    let mut fill = pre_off.clone();
    let mut pre = vec![0 as StateId; pre_off[n] as usize];
    for s in 0..n as StateId {
        for (e, t) in g.edges(s) {
            if matches!(e, EdgeLabel::Fire(_)) {
                pre[fill[t as usize] as usize] = s;
                fill[t as usize] += 1;
            }
        }
    }

    let mut layers: Vec<FixedBitSet> = vec![FixedBitSet::with_capacity(n); b as usize + 1];
    let mut pending = vec![0u32; n];
    let mut tick_ok = FixedBitSet::with_capacity(n);
    for c in (0..=b).rev() {
        let mut win = FixedBitSet::with_capacity(n);
        let mut queue = VecDeque::new();
        for s in 0..n {
            let expanded = g.is_expanded(s as StateId);
            let mut untimed = 0;
            let mut ok = true;
            let mut deg = 0;
            for (e, t) in g.edges(s as StateId) {
                deg += 1;
                match e {
                    EdgeLabel::Fire(_) => untimed += 1,
                    EdgeLabel::Tick(_) => ok &= c < b && layers[c as usize + 1].contains(t as usize),
                }
            }
            pending[s] = untimed;
            tick_ok.set(s, ok && deg > 0);
            let good = (q.contains(s) && c >= a)
                || (!expanded && optimistic)
                || (expanded && deg > 0 && ok && untimed == 0);
            if good {
                win.insert(s);
                queue.push_back(s);
            }
        }
        while let Some(t) = queue.pop_front() {
            for &s in &pre[pre_off[t] as usize..pre_off[t + 1] as usize] {
                let s = s as usize;
                if win.contains(s) {
                    continue;
                }
                pending[s] -= 1;
                if pending[s] == 0 && tick_ok.contains(s) {
                    win.insert(s);
                    queue.push_back(s);
                }
            }
        }
        layers[c as usize] = win;
    }
    layers
}

fn leads_to(g: &StateGraph, p: &FixedBitSet, q: &FixedBitSet, a: u32, b: u32) -> Verdict {
    let violation = |layers: &[FixedBitSet]| p.ones().find(|&s| !layers[0].contains(s));
    let pessimistic = leads_to_layers(g, q, a, b, false);
    let Some(s) = violation(&pessimistic) else {
        return Verdict::new(VerdictValue::True, None);
    };
    let layers = if g.is_complete() { pessimistic } else { leads_to_layers(g, q, a, b, true) };
    let Some(s) = (if g.is_complete() { Some(s) } else { violation(&layers) }) else {
        return Verdict::unknown(g);
    };
    // Counterexample: reach s, then keep choosing a losing move.
    let mut tr = g.path_to(s as StateId);
    let (mut cur, mut c) = (s as StateId, 0u32);
    let mut seen = HashSet::new();
    while seen.insert((cur, c)) && g.is_expanded(cur) {
        let mv = g.edges(cur).find_map(|(e, t)| match e {
            EdgeLabel::Tick(_) if c == b => Some((e, t, c + 1, true)),
            EdgeLabel::Tick(_) if !layers[c as usize + 1].contains(t as usize) => Some((e, t, c + 1, false)),
            EdgeLabel::Fire(_) if !layers[c as usize].contains(t as usize) => Some((e, t, c, false)),
            _ => None,
        });
        let Some((e, t, nc, overdue)) = mv else { break };
        tr.edges.push(e);
        tr.states.push(t);
        if overdue {
            break;
        }
        cur = t;
        c = nc;
    }
    Verdict::new(VerdictValue::False, Some(tr))
}

/// Iterative Tarjan over the states in `keep`, following edges that stay in
/// `keep`. Returns the component id of every kept state and, per component,
/// whether it contains a cycle.
fn sccs(g: &StateGraph, keep: &FixedBitSet) -> (Vec<u32>, Vec<bool>) {
    const UNSEEN: u32 = u32::MAX;
    let n = g.num_states();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut comp = vec![UNSEEN; n];
    let mut on_stack = FixedBitSet::with_capacity(n);
    let mut stack: Vec<StateId> = Vec::new();
    let mut cyclic = Vec::new();
    let mut counter = 0u32;
    let succs = |v: StateId| -> Vec<StateId> { g.edges(v).map(|(_, t)| t).filter(|&t| keep.contains(t as usize)).collect() };

    for root in keep.ones() {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(StateId, Vec<StateId>, usize)> = Vec::new();
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root as StateId);
        on_stack.insert(root);
        call.push((root as StateId, succs(root as StateId), 0));
        while let Some((v, out, k)) = call.last_mut() {
            let v = *v;
            if *k < out.len() {
                let w = out[*k];
                *k += 1;
                let wi = w as usize;
                if index[wi] == UNSEEN {
                    index[wi] = counter;
                    low[wi] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack.insert(wi);
                    let ws = succs(w);
                    call.push((w, ws, 0));
                } else if on_stack.contains(wi) {
                    low[v as usize] = low[v as usize].min(index[wi]);
                }
                continue;
            }
            let self_loop = out.contains(&v);
            call.pop();
            if let Some((u, _, _)) = call.last() {
                low[*u as usize] = low[*u as usize].min(low[v as usize]);
            }
            if low[v as usize] == index[v as usize] {
                let id = cyclic.len() as u32;
                let mut size = 0;
                loop {
                    let w = stack.pop().unwrap();
                    on_stack.set(w as usize, false);
                    comp[w as usize] = id;
                    size += 1;
                    if w == v {
                        break;
                    }
                }
                cyclic.push(size > 1 || self_loop);
            }
        }
    }
    (comp, cyclic)
}

fn implies_eventually(g: &StateGraph, p: &FixedBitSet, q: &FixedBitSet) -> Verdict {
    let n = g.num_states();
    let mut nq = q.clone();
    nq.toggle_range(..);
    let (comp, cyclic) = sccs(g, &nq);
    // States that can avoid q forever: bad roots, then backwards within nq.
    let bad_root = |s: usize| nq.contains(s) && (is_sink(g, s as StateId) || cyclic[comp[s] as usize]);
    let (rev_off, rev) = g.reverse();
    let mut avoid = FixedBitSet::with_capacity(n);
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| bad_root(s)).collect();
    queue.iter().for_each(|&s| avoid.insert(s));
    while let Some(t) = queue.pop_front() {
        for &s in &rev[rev_off[t] as usize..rev_off[t + 1] as usize] {
            let s = s as usize;
            if nq.contains(s) && !avoid.contains(s) {
                avoid.insert(s);
                queue.push_back(s);
            }
        }
    }
    let Some(s) = p.ones().find(|&s| avoid.contains(s)) else {
        return if g.is_complete() { Verdict::new(VerdictValue::True, None) } else { Verdict::unknown(g) };
    };

    // Counterexample: reach s, walk inside `avoid` to a bad root, then
    // close the loop in its component.
    let mut tr = g.path_to(s as StateId);
    let root = bfs_path(g, s as StateId, |t| avoid.contains(t as usize), |t| bad_root(t as usize));
    let r = *root.states.last().unwrap();
    append(&mut tr, root);
    if !is_sink(g, r) {
        let c = comp[r as usize];
        let in_comp = |t: StateId| nq.contains(t as usize) && comp[t as usize] == c;
        let first = g.edges(r).find(|(_, t)| in_comp(*t)).unwrap();
        let back = bfs_path(g, first.1, in_comp, |t| t == r);
        tr.edges.push(first.0);
        tr.states.push(first.1);
        append(&mut tr, back);
    }
    Verdict::new(VerdictValue::False, Some(tr))
}

fn append(tr: &mut Trace, more: Trace) {
    tr.edges.extend(more.edges);
    tr.states.extend(more.states.into_iter().skip(1));
}

/// Shortest path from `from` to a `goal` state through `allowed` states.
fn bfs_path(g: &StateGraph, from: StateId, allowed: impl Fn(StateId) -> bool, goal: impl Fn(StateId) -> bool) -> Trace {
    let mut prev = std::collections::HashMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = HashSet::from([from]);
    let mut end = from;
    while let Some(v) = queue.pop_front() {
        if goal(v) {
            end = v;
            break;
        }
        for (e, t) in g.edges(v) {
            if allowed(t) && seen.insert(t) {
                prev.insert(t, (v, e));
                queue.push_back(t);
            }
        }
    }
    let mut states = vec![end];
    let mut edges = Vec::new();
    while let Some(&(v, e)) = prev.get(states.last().unwrap()) {
        edges.push(e);
        states.push(v);
    }
    states.reverse();
    edges.reverse();
    Trace { states, edges }
}
