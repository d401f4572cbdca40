//! Explicit-state exploration of offline models under discrete time.
//!
//! States are slot vectors; they are bit-packed into one arena and
//! deduplicated through a hash table keyed by state id. The elapsed tick
//! count is deliberately not part of a state.

mod pack;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write;
use std::hash::BuildHasher;
use std::time::{Duration, Instant};

use hashbrown::hash_map::DefaultHashBuilder;
use hashbrown::HashTable;
use thiserror::Error;

use crate::model::{ComposedModel, RangeError, SlotKind, Timing, TransId};
use crate::status::Outcome;

pub use pack::Packer;

pub type StateId = u32;

/// What happened along one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRef<'a> {
    /// A single urgent (or lazy) transition.
    Fire(TransId),
    /// A time step: one OneTick transition from every process that had one.
    Tick(&'a [TransId]),
}

/// Enumerate the successors of `s` in a fixed order: urgent transitions by
/// process then declaration order; otherwise every combination of OneTick
/// choices (guards read the pre-state, effects apply in process order).
/// Lazy transitions are offered in both phases.
pub fn for_each_successor(
    m: &ComposedModel,
    s: &[i32],
    mut f: impl FnMut(StepRef<'_>, &[i32]),
) -> Result<(), RangeError> {
    let mut buf = Vec::with_capacity(s.len());
    let mut urgent = false;
    for p in 0..m.processes.len() {
        for t in m.enabled_in(p, s) {
            if m.transitions[t].timing == Timing::Urgent {
                urgent = true;
                buf.clear();
                buf.extend_from_slice(s);
                m.apply(t, &mut buf)?;
                f(StepRef::Fire(t), &buf);
            }
        }
    }
    for p in 0..m.processes.len() {
        for t in m.enabled_in(p, s) {
            if m.transitions[t].timing == Timing::Lazy {
                buf.clear();
                buf.extend_from_slice(s);
                m.apply(t, &mut buf)?;
                f(StepRef::Fire(t), &buf);
            }
        }
    }
    if urgent {
        return Ok(());
    }
    let choices: Vec<Vec<TransId>> = (0..m.processes.len())
        .map(|p| m.enabled_in(p, s).filter(|&t| m.transitions[t].timing == Timing::OneTick).collect::<Vec<_>>())
        .filter(|c| !c.is_empty())
        .collect();
    if choices.is_empty() {
        return Ok(());
    }
    let mut digits = vec![0usize; choices.len()];
    let mut combo = vec![0; choices.len()];
    loop {
        for (i, c) in choices.iter().enumerate() {
            combo[i] = c[digits[i]];
        }
        buf.clear();
        buf.extend_from_slice(s);
        for &t in &combo {
            m.apply(t, &mut buf)?;
        }
        f(StepRef::Tick(&combo), &buf);
        // Mixed-radix increment, last process fastest.
        let mut i = choices.len();
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < choices[i].len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Whether any urgent transition is enabled (time cannot pass).
pub fn is_urgent(m: &ComposedModel, s: &[i32]) -> bool {
    (0..m.processes.len()).any(|p| m.enabled_in(p, s).any(|t| m.transitions[t].timing == Timing::Urgent))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeLabel {
    Fire(u32),
    /// Index into the graph's interned tick combinations.
    Tick(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub max_states: usize,
    pub max_time: Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_states: 5_000_000, max_time: Duration::from_secs(600) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    States,
    Time,
}

impl std::fmt::Display for LimitKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LimitKind::States => "state limit",
            LimitKind::Time => "time limit",
        })
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("{limit} reached after {} states", graph.num_states())]
    LimitExceeded { limit: LimitKind, graph: Box<StateGraph> },
    #[error("model error: {0}")]
    Range(#[from] RangeError),
    #[error("cycle of urgent transitions through {} states", trace.states.len())]
    UrgentCycle { trace: Trace },
}

impl ExploreError {
    /// The partial graph for limit errors.
    pub fn into_partial(self) -> Option<StateGraph> {
        match self {
            ExploreError::LimitExceeded { graph, .. } => Some(*graph),
            _ => None,
        }
    }
}

/// A path through the graph: `edges[i]` leads from `states[i]` to
/// `states[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub states: Vec<StateId>,
    pub edges: Vec<EdgeLabel>,
}

impl Trace {
    pub fn ticks(&self) -> usize {
        self.edges.iter().filter(|e| matches!(e, EdgeLabel::Tick(_))).count()
    }
}

#[derive(Debug, Clone)]
pub struct StateGraph {
    packer: Packer,
    arena: Vec<u64>,
    n_states: usize,
    /// CSR over expanded states.
    offsets: Vec<u32>,
    targets: Vec<StateId>,
    labels: Vec<EdgeLabel>,
    /// BFS tree: parent state and the edge index reaching each state.
    parents: Vec<(StateId, u32)>,
    combos: Vec<Vec<TransId>>,
    pub limit: Option<LimitKind>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stats {
    pub states: usize,
    pub transitions: usize,
    pub terminal_statuses: BTreeSet<Outcome>,
}

impl StateGraph {
    pub fn num_states(&self) -> usize {
        self.n_states
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    /// Exploration finished without hitting a limit.
    pub fn is_complete(&self) -> bool {
        self.limit.is_none()
    }

    /// Successors are known for this state.
    pub fn is_expanded(&self, id: StateId) -> bool {
        (id as usize) + 1 < self.offsets.len()
    }

    pub fn state(&self, id: StateId) -> Vec<i32> {
        let mut out = Vec::new();
        self.state_into(id, &mut out);
        out
    }

    pub fn state_into(&self, id: StateId, out: &mut Vec<i32>) {
        let w = self.packer.words();
        self.packer.unpack(&self.arena[id as usize * w..(id as usize + 1) * w], out);
    }

    pub fn edges(&self, id: StateId) -> impl Iterator<Item = (EdgeLabel, StateId)> + '_ {
        let range = if self.is_expanded(id) {
            self.offsets[id as usize] as usize..self.offsets[id as usize + 1] as usize
        } else {
            0..0
        };
        range.map(move |e| (self.labels[e], self.targets[e]))
    }

    pub fn combo(&self, i: u32) -> &[TransId] {
        &self.combos[i as usize]
    }

    /// Predecessor lists (CSR) for backward analyses.
    pub fn reverse(&self) -> (Vec<u32>, Vec<StateId>) {
        let mut counts = vec![0u32; self.n_states + 1];
        for &t in &self.targets {
            counts[t as usize + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut srcs = vec![0; self.targets.len()];
        for s in 0..self.offsets.len().saturating_sub(1) {
            for e in self.offsets[s] as usize..self.offsets[s + 1] as usize {
                let t = self.targets[e] as usize;
                srcs[fill[t] as usize] = s as StateId;
                fill[t] += 1;
            }
        }
        (counts, srcs)
    }

    /// The BFS-tree path from the initial state, which is a shortest one.
    pub fn path_to(&self, mut id: StateId) -> Trace {
        let mut states = vec![id];
        let mut edges = Vec::new();
        while id != 0 {
            let (p, e) = self.parents[id as usize];
            edges.push(self.labels[e as usize]);
            states.push(p);
            id = p;
        }
        states.reverse();
        edges.reverse();
        Trace { states, edges }
    }

    /// Shortest path from the initial state to a state satisfying `pred`.
    pub fn find_path(&self, pred: impl Fn(&[i32]) -> bool) -> Option<Trace> {
        let mut buf = Vec::new();
        (0..self.n_states as StateId).find(|&id| {
            self.state_into(id, &mut buf);
            pred(&buf)
        })
        .map(|id| self.path_to(id))
    }

    pub fn stats(&self, m: &ComposedModel) -> Stats {
        let mut buf = Vec::new();
        let mut terminal_statuses = BTreeSet::new();
        for id in 0..self.n_states as StateId {
            self.state_into(id, &mut buf);
            if let Some(o) = m.terminal_status(&buf) {
                terminal_statuses.insert(o);
            }
        }
        Stats { states: self.n_states, transitions: self.num_edges(), terminal_statuses }
    }

    pub fn edge_label(&self, m: &ComposedModel, e: EdgeLabel) -> String {
        match e {
            EdgeLabel::Fire(t) => m.transition_label(t as usize),
            EdgeLabel::Tick(c) => {
                let parts: Vec<String> = self.combo(c).iter().map(|&t| m.transition_label(t)).collect();
                format!("tick[{}]", parts.join(", "))
            }
        }
    }
}

/// Full location vector and valuation of one state, on one line.
pub fn describe_state(m: &ComposedModel, s: &[i32]) -> String {
    let mut out = String::from("locs [");
    let locs: Vec<String> = (0..m.processes.len())
        .filter(|&p| !matches!(m.processes[p].role, crate::model::Role::Sv(_)))
        .map(|p| format!("{}@{}", m.processes[p].name, m.location_name(s, p)))
        .collect();
    out.push_str(&locs.join(" "));
    out.push_str("] vals [");
    let vals: Vec<String> = m
        .slots
        .iter()
        .enumerate()
        .filter_map(|(i, sl)| match &sl.kind {
            SlotKind::Location(_) => None,
            SlotKind::Sv(j) => Some(format!("{}={}", sl.name, m.svs[*j].info.value_name(s[i] as i64))),
            SlotKind::Status(_) => Some(format!(
                "{}={}",
                sl.name,
                crate::status::ReturnStatus::from_code(s[i] as i64).map(|r| r.name()).unwrap_or("?")
            )),
            _ => Some(format!("{}={}", sl.name, s[i])),
        })
        .collect();
    out.push_str(&vals.join(" "));
    out.push(']');
    out
}

/// Line-oriented dump of the whole graph.
pub fn dump_graph(m: &ComposedModel, g: &StateGraph) -> String {
    let mut out = String::new();
    writeln!(out, "states {} transitions {} initial 0 complete {}", g.num_states(), g.num_edges(), g.is_complete())
        .unwrap();
    let mut buf = Vec::new();
    for id in 0..g.num_states() as StateId {
        g.state_into(id, &mut buf);
        writeln!(out, "state {id} {}", describe_state(m, &buf)).unwrap();
    }
    for id in 0..g.num_states() as StateId {
        for (e, t) in g.edges(id) {
            writeln!(out, "edge {id} {} {t}", g.edge_label(m, e)).unwrap();
        }
    }
    out
}

/// The same format restricted to one path.
pub fn dump_trace(m: &ComposedModel, g: &StateGraph, tr: &Trace) -> String {
    let mut out = String::new();
    writeln!(out, "trace states {} ticks {}", tr.states.len(), tr.ticks()).unwrap();
    let mut buf = Vec::new();
    for (i, &id) in tr.states.iter().enumerate() {
        g.state_into(id, &mut buf);
        writeln!(out, "state {id} {}", describe_state(m, &buf)).unwrap();
        if let Some(e) = tr.edges.get(i) {
            writeln!(out, "edge {id} {} {}", g.edge_label(m, *e), tr.states[i + 1]).unwrap();
        }
    }
    out
}

struct Store {
    packer: Packer,
    arena: Vec<u64>,
    table: HashTable<StateId>,
    hasher: DefaultHashBuilder,
    scratch: Vec<u64>,
}

impl Store {
    fn words(&self) -> usize {
        self.packer.words()
    }

    /// Returns the id and whether the state is new.
    fn intern(&mut self, s: &[i32]) -> (StateId, bool) {
        let w = self.words();
        self.packer.pack(s, &mut self.scratch);
        let hash = self.hasher.hash_one(&self.scratch[..]);
        let arena = &self.arena;
        let key = &self.scratch;
        if let Some(&id) = self.table.find(hash, |&id| &arena[id as usize * w..(id as usize + 1) * w] == &key[..]) {
            return (id, false);
        }
        let id = (self.arena.len() / w) as StateId;
        self.arena.extend_from_slice(&self.scratch);
        let (arena, hasher) = (&self.arena, &self.hasher);
        self.table.insert_unique(hash, id, |&i| hasher.hash_one(&arena[i as usize * w..(i as usize + 1) * w]));
        (id, true)
    }
}

/// Breadth-first exploration from the initial state.
pub fn explore(m: &ComposedModel, limits: Limits) -> Result<StateGraph, ExploreError> {
    let start = Instant::now();
    let packer = Packer::new(&m.slots);
    let words = packer.words();
    let mut store = Store {
        packer,
        arena: Vec::new(),
        table: HashTable::new(),
        hasher: DefaultHashBuilder::default(),
        scratch: vec![0; words],
    };
    store.intern(&m.initial_state());
    let mut offsets = vec![0u32];
    let mut targets = Vec::new();
    let mut labels = Vec::new();
    let mut parents = vec![(0, 0)];
    let mut combos: Vec<Vec<TransId>> = Vec::new();
    let mut combo_ids: HashMap<Vec<TransId>, u32> = HashMap::new();
    let mut limit = None;
    let mut cur = Vec::new();

    let mut next: StateId = 0;
    while (next as usize) < store.arena.len() / words {
        if next % 1024 == 0 && start.elapsed() > limits.max_time {
            limit = Some(LimitKind::Time);
            break;
        }
        store.packer.unpack(&store.arena[next as usize * words..(next as usize + 1) * words], &mut cur);
        let mut overflow = false;
        for_each_successor(m, &cur, |step, succ| {
            let label = match step {
                StepRef::Fire(t) => EdgeLabel::Fire(t as u32),
                StepRef::Tick(c) => {
                    let id = match combo_ids.get(c) {
                        Some(&id) => id,
                        None => {
                            combos.push(c.to_vec());
                            combo_ids.insert(c.to_vec(), combos.len() as u32 - 1);
                            combos.len() as u32 - 1
                        }
                    };
                    EdgeLabel::Tick(id)
                }
            };
            let (id, fresh) = store.intern(succ);
            if fresh {
                parents.push((next, targets.len() as u32));
                if parents.len() > limits.max_states {
                    overflow = true;
                }
            }
            targets.push(id);
            labels.push(label);
        })?;
        offsets.push(targets.len() as u32);
        next += 1;
        if overflow {
            limit = Some(LimitKind::States);
            break;
        }
    }

    let n_states = store.arena.len() / words;
    let graph = StateGraph {
        packer: store.packer,
        arena: store.arena,
        n_states,
        offsets,
        targets,
        labels,
        parents,
        combos,
        limit,
        elapsed: start.elapsed(),
    };
    if let Some(trace) = urgent_cycle(m, &graph) {
        return Err(ExploreError::UrgentCycle { trace });
    }
    match limit {
        Some(limit) => Err(ExploreError::LimitExceeded { limit, graph: Box::new(graph) }),
        None => Ok(graph),
    }
}

/// A cycle made only of urgent transitions, if any (iterative DFS).
fn urgent_cycle(m: &ComposedModel, g: &StateGraph) -> Option<Trace> {
    const WHITE: u8 = 0;
    const GREY: u8 = 1;
    const BLACK: u8 = 2;
    let urgent = |e: EdgeLabel| matches!(e, EdgeLabel::Fire(t) if m.transitions[t as usize].timing == Timing::Urgent);
    let mut color = vec![WHITE; g.num_states()];
    for root in 0..g.num_states() as StateId {
        if color[root as usize] != WHITE {
            continue;
        }
        // Stack of (state, next edge offset to try, label used to get here).
        let mut stack: Vec<(StateId, usize, Option<EdgeLabel>)> = vec![(root, 0, None)];
        color[root as usize] = GREY;
        while let Some(&(s, k, _)) = stack.last() {
            let out: Vec<(EdgeLabel, StateId)> = g.edges(s).filter(|(e, _)| urgent(*e)).collect();
            if k < out.len() {
                let (e, t) = out[k];
                stack.last_mut().unwrap().1 += 1;
                match color[t as usize] {
                    WHITE => {
                        color[t as usize] = GREY;
                        stack.push((t, 0, Some(e)));
                    }
                    GREY => {
                        let pos = stack.iter().position(|f| f.0 == t).unwrap();
                        let mut states: Vec<StateId> = stack[pos..].iter().map(|f| f.0).collect();
                        let mut edges: Vec<EdgeLabel> = stack[pos + 1..].iter().map(|f| f.2.unwrap()).collect();
                        states.push(t);
                        edges.push(e);
                        return Some(Trace { states, edges });
                    }
                    _ => {}
                }
            } else {
                color[s as usize] = BLACK;
                stack.pop();
            }
        }
    }
    None
}
