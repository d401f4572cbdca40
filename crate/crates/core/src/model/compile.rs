//! Translation of one validated tree into a network of automata.
//!
//! Every node becomes a process sharing the same skeleton: a preamble that
//! waits for its caller flag, a kind-specific body starting at `tick_node`
//! (or at `halt` when asked to stop), and a postamble that publishes the
//! return status and hands the tick back. Parents call a child by setting the
//! child's caller flag and wait until the child clears it.

use thiserror::Error;

use super::ir::*;
use crate::status::{Outcome, ReturnStatus};
use crate::syntax::{ArgItem, Driven, NodeInfo, NodeKind, Params, TypedExpr, ValidatedSpec};

const S: i64 = ReturnStatus::Success as i64;
const F: i64 = ReturnStatus::Failure as i64;
const R: i64 = ReturnStatus::Running as i64;
const NORET: i64 = ReturnStatus::NoRetStatus as i64;
const HALT_ME: i64 = ReturnStatus::HaltMe as i64;

/// Locations present in every node process, in this order.
pub const NODE_LOCATIONS: [&str; 8] =
    ["start_", "tick_node", "success", "failure", "running", "halt", "halted", "done"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompileOptions {
    pub tick: TickSemantics,
    pub variant: Variant,
    /// Environment variables change at arbitrary moments instead of only at
    /// time steps.
    pub free_env: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions { tick: TickSemantics::RootOnly, variant: Variant::Offline, free_env: false }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("no tree named `{0}`")]
    UnknownTree(String),
    #[error("node `{node}` refers to `{target}`, which belongs to another tree")]
    ForeignNode { node: String, target: String },
}

/// Compile tree `tree` (the first one when `None`).
pub fn compile(spec: &ValidatedSpec, tree: Option<&str>, opts: CompileOptions) -> Result<ComposedModel, CompileError> {
    let t = match tree {
        None => 0,
        Some(name) => spec.tree_by_name(name).ok_or_else(|| CompileError::UnknownTree(name.to_string()))?,
    };
    Builder::new(spec, t, opts).build()
}

struct Proc {
    id: ProcId,
    name: String,
    role: Role,
    locations: Vec<String>,
    loc_slot: SlotId,
    locals: Vec<(String, SlotId)>,
    trans: Vec<Transition>,
}

impl Proc {
    fn loc(&mut self, name: &str) -> LocId {
        match self.locations.iter().position(|l| l == name) {
            Some(i) => i,
            None => {
                self.locations.push(name.to_string());
                self.locations.len() - 1
            }
        }
    }

    fn edge(&mut self, from: &str, to: &str, guard: Expr, effects: Vec<(SlotId, Expr)>) -> &mut Transition {
        let (from, to) = (self.loc(from), self.loc(to));
        self.trans.push(Transition {
            process: self.id,
            from,
            to,
            guard,
            timing: Timing::Urgent,
            effects,
            call: None,
            event: None,
        });
        self.trans.last_mut().unwrap()
    }
}

struct Builder<'a> {
    spec: &'a ValidatedSpec,
    tree: usize,
    opts: CompileOptions,
    slots: Vec<Slot>,
    processes: Vec<ProcessAutomaton>,
    transitions: Vec<Transition>,
    nodes: Vec<NodeMeta>,
    svs: Vec<SvMeta>,
}

// Child-waiting locations carry the child's (unique) name and a prefix no
// fixed location uses, so location names never clash.
fn wait_loc(name: &str) -> String {
    format!("wait_{name}")
}

impl<'a> Builder<'a> {
    fn new(spec: &'a ValidatedSpec, tree: usize, opts: CompileOptions) -> Self {
        Builder {
            spec,
            tree,
            opts,
            slots: Vec::new(),
            processes: Vec::new(),
            transitions: Vec::new(),
            nodes: Vec::new(),
            svs: Vec::new(),
        }
    }

    fn slot(&mut self, name: String, kind: SlotKind, min: i64, max: i64, init: i64) -> SlotId {
        self.slots.push(Slot { name, kind, min: min as i32, max: max as i32, init: init as i32 });
        self.slots.len() - 1
    }

    fn build(mut self) -> Result<ComposedModel, CompileError> {
        let range = self.spec.trees[self.tree].nodes.clone();
        let base = range.start;
        let n = range.len();
        let nsv = self.spec.svs.len();

        // Records first, so every process can refer to every node.
        for (idx, info) in self.spec.nodes[range.clone()].iter().enumerate() {
            let caller = self.slot(format!("caller({})", info.name), SlotKind::Caller(idx), 0, 1, 0);
            let rstatus = self.slot(format!("rstatus({})", info.name), SlotKind::Status(idx), 0, HALT_ME, NORET);
            self.nodes.push(NodeMeta {
                name: info.name.clone(),
                kind: info.kind,
                id_attr: info.id_attr.clone(),
                parent: info.parent.map(|p| p - base),
                children: info.children.iter().map(|c| c - base).collect(),
                process: idx,
                caller,
                rstatus,
                args: Vec::new(),
                immediate: matches!(info.params, Params::Action { no_running: true }),
            });
        }
        for (j, sv) in self.spec.svs.iter().enumerate() {
            let slot = self.slot(sv.name.clone(), SlotKind::Sv(j), sv.min(), sv.max(), sv.init);
            self.svs.push(SvMeta { info: sv.clone(), slot, process: n + j });
        }

        let spec = self.spec;
        for idx in 0..n {
            let info = &spec.nodes[base + idx];
            let args = info.args.iter().map(|a| self.arg(info, a)).collect::<Result<Vec<_>, _>>()?;
            self.nodes[idx].args = args;
            let p = self.node_process(idx, info)?;
            self.finish(p);
        }
        for j in 0..nsv {
            let p = self.sv_process(j);
            self.finish(p);
        }
        let ticker = self.ticker();
        self.finish(ticker);

        Ok(ComposedModel {
            name: self.spec.trees[self.tree].name.clone(),
            tick: self.opts.tick,
            variant: self.opts.variant,
            slots: self.slots,
            processes: self.processes,
            transitions: self.transitions,
            nodes: self.nodes,
            svs: self.svs,
            ticker: n + nsv,
        })
    }

    fn new_proc(&mut self, name: String, role: Role, loc_slot: Option<SlotId>) -> Proc {
        let id = self.processes.len();
        let loc_slot = loc_slot.unwrap_or_else(|| self.slot(format!("loc({name})"), SlotKind::Location(id), 0, 0, 0));
        Proc { id, name, role, locations: Vec::new(), loc_slot, locals: Vec::new(), trans: Vec::new() }
    }

    fn local(&mut self, p: &mut Proc, name: &str, min: i64, max: i64, init: i64) -> SlotId {
        let s = self.slot(format!("{}.{name}", p.name), SlotKind::Local(p.id), min, max, init);
        p.locals.push((name.to_string(), s));
        s
    }

    fn finish(&mut self, p: Proc) {
        if let SlotKind::Location(_) = self.slots[p.loc_slot].kind {
            self.slots[p.loc_slot].max = p.locations.len() as i32 - 1;
        }
        let mut outgoing = vec![Vec::new(); p.locations.len()];
        for t in p.trans {
            outgoing[t.from].push(self.transitions.len());
            self.transitions.push(t);
        }
        self.processes.push(ProcessAutomaton {
            name: p.name,
            role: p.role,
            locations: p.locations,
            loc_slot: p.loc_slot,
            locals: p.locals,
            outgoing,
        });
    }

    // -- expression helpers ------------------------------------------------

    fn caller(&self, c: NodeIdx) -> SlotId {
        self.nodes[c].caller
    }

    fn rs(&self, c: NodeIdx) -> SlotId {
        self.nodes[c].rstatus
    }

    /// Child has handed the tick back with status `st`.
    fn returned(&self, c: NodeIdx, st: i64) -> Expr {
        Expr::and(vec![Expr::slot_eq(self.caller(c), 0), Expr::slot_eq(self.rs(c), st)])
    }

    fn all_returned(&self, cs: &[NodeIdx]) -> Expr {
        Expr::and(cs.iter().map(|&c| Expr::slot_eq(self.caller(c), 0)).collect())
    }

    fn any_running(&self, cs: &[NodeIdx]) -> Expr {
        Expr::or(cs.iter().map(|&c| Expr::slot_eq(self.rs(c), R)).collect())
    }

    fn none_running(&self, cs: &[NodeIdx]) -> Expr {
        Expr::and(cs.iter().map(|&c| Expr::slot_ne(self.rs(c), R)).collect())
    }

    fn call(&self, c: NodeIdx) -> (SlotId, Expr) {
        (self.caller(c), Expr::Const(1))
    }

    /// Ask every Running child in `cs` to halt.
    fn halt_writes(&self, cs: &[NodeIdx]) -> Vec<(SlotId, Expr)> {
        let mut out = Vec::new();
        for &c in cs {
            let running = || Expr::slot_eq(self.rs(c), R);
            out.push((self.caller(c), Expr::ite(running(), Expr::Const(1), Expr::Slot(self.caller(c)))));
            out.push((self.rs(c), Expr::ite(running(), Expr::Const(HALT_ME), Expr::Slot(self.rs(c)))));
        }
        out
    }

    fn typed(&self, owner: &NodeInfo, e: &TypedExpr) -> Result<Expr, CompileError> {
        let b = |e: &TypedExpr| self.typed(owner, e).map(Box::new);
        Ok(match e {
            TypedExpr::Const(v) => Expr::Const(*v),
            TypedExpr::Sv(j) => Expr::Slot(self.svs[*j].slot),
            TypedExpr::NodeStatus(n) => {
                let range = &self.spec.trees[self.tree].nodes;
                if !range.contains(n) {
                    return Err(CompileError::ForeignNode {
                        node: owner.name.clone(),
                        target: self.spec.nodes[*n].name.clone(),
                    });
                }
                Expr::Slot(self.rs(n - range.start))
            }
            TypedExpr::Eq(a, c) => Expr::Cmp(CmpOp::Eq, b(a)?, b(c)?),
            TypedExpr::Not(a) => Expr::Not(b(a)?),
            TypedExpr::Add(a, c) => Expr::Add(b(a)?, b(c)?),
            TypedExpr::Mul(a, c) => Expr::Mul(b(a)?, b(c)?),
            TypedExpr::Assign(..) => unreachable!("assignment only at the top of an Eval"),
        })
    }

    fn arg(&self, owner: &NodeInfo, a: &ArgItem) -> Result<ArgTemplate, CompileError> {
        Ok(match a {
            ArgItem::Lit(s) => ArgTemplate::Lit(s.clone()),
            ArgItem::Opaque(s) => ArgTemplate::Lit(format!("${s}")),
            ArgItem::Sv(j) => ArgTemplate::Value(Expr::Slot(self.svs[*j].slot)),
            ArgItem::Expr(e) => ArgTemplate::Value(self.typed(owner, e)?),
        })
    }

    fn tick_exit_timing(&self, kind: NodeKind) -> Timing {
        match self.opts.tick {
            TickSemantics::RootOnly => Timing::Urgent,
            TickSemantics::Leaves if kind.is_leaf() => Timing::OneTick,
            TickSemantics::Leaves => Timing::Urgent,
            TickSemantics::AllNodes => Timing::OneTick,
        }
    }

    // -- processes ---------------------------------------------------------

    fn node_process(&mut self, idx: NodeIdx, info: &NodeInfo) -> Result<Proc, CompileError> {
        let mut p = self.new_proc(info.name.clone(), Role::Node(idx), None);
        for l in NODE_LOCATIONS {
            p.loc(l);
        }
        let (me_c, me_r) = (self.caller(idx), self.rs(idx));

        p.edge(
            "start_",
            "tick_node",
            Expr::and(vec![Expr::slot_eq(me_c, 1), Expr::slot_ne(me_r, HALT_ME)]),
            vec![(me_r, Expr::Const(NORET))],
        )
        .event = Some(EventTag::Ticked);
        p.edge("start_", "halt", Expr::and(vec![Expr::slot_eq(me_c, 1), Expr::slot_eq(me_r, HALT_ME)]), vec![])
            .event = Some(EventTag::Halting);

        self.body(&mut p, idx, info)?;

        for (loc, st) in [("success", ReturnStatus::Success), ("failure", ReturnStatus::Failure), ("running", ReturnStatus::Running)] {
            p.edge(loc, "done", Expr::TRUE, vec![(me_r, Expr::Const(st.code()))]).event = Some(EventTag::Returned(st));
        }
        p.edge("halted", "done", Expr::TRUE, vec![(me_r, Expr::Const(F))]);
        p.edge("done", "start_", Expr::TRUE, vec![(me_c, Expr::Const(0))]);

        let tick_node = p.loc("tick_node");
        let halted = p.loc("halted");
        let timing = self.tick_exit_timing(info.kind);
        for t in &mut p.trans {
            if t.from == tick_node {
                t.timing = timing;
            }
            if t.to == halted {
                t.event = Some(EventTag::Halted);
            }
        }
        Ok(p)
    }

    /// Halt path shared by all composite nodes: stop Running children, wait
    /// for them, reset memory.
    fn halt_block(&self, p: &mut Proc, cs: &[NodeIdx], resets: Vec<(SlotId, Expr)>) {
        let mut fx = resets.clone();
        fx.extend(self.halt_writes(cs));
        p.edge("halt", "halt_wait", self.any_running(cs), fx);
        p.edge("halt", "halted", self.none_running(cs), resets);
        p.edge("halt_wait", "halted", self.all_returned(cs), vec![]);
    }

    /// Leave towards `outcome`, first halting any Running child among
    /// `orphans`.
    #[allow(clippy::too_many_arguments)]
    fn exit_halting(
        &self,
        p: &mut Proc,
        from: &str,
        guard: Expr,
        effects: Vec<(SlotId, Expr)>,
        outcome: &str,
        orphans: &[NodeIdx],
        all: &[NodeIdx],
    ) {
        if orphans.is_empty() {
            p.edge(from, outcome, guard, effects);
            return;
        }
        let reap = format!("halt_orphans_{outcome}");
        p.edge(from, outcome, Expr::and(vec![guard.clone(), self.none_running(orphans)]), effects.clone());
        let mut fx = effects;
        fx.extend(self.halt_writes(orphans));
        p.edge(from, &reap, Expr::and(vec![guard, self.any_running(orphans)]), fx);
        if !p.trans.iter().any(|t| p.locations[t.from] == reap) {
            p.edge(&reap, outcome, self.all_returned(all), vec![]);
        }
    }

    fn body(&mut self, p: &mut Proc, idx: NodeIdx, info: &NodeInfo) -> Result<(), CompileError> {
        use NodeKind::*;
        let ch = self.nodes[idx].children.clone();
        match info.kind {
            BehaviorTree | Inverter | ForceFailure | ForceSuccess | KeepRunningUntilFailure => {
                let c = ch[0];
                let w = wait_loc(&self.nodes[c].name);
                let (on_s, on_f, on_r) = match info.kind {
                    Inverter => ("failure", "success", "running"),
                    ForceFailure => ("failure", "failure", "running"),
                    ForceSuccess => ("success", "success", "running"),
                    KeepRunningUntilFailure => ("running", "failure", "running"),
                    _ => ("success", "failure", "running"),
                };
                p.edge("tick_node", &w, Expr::TRUE, vec![self.call(c)]);
                p.edge(&w, on_s, self.returned(c, S), vec![]);
                p.edge(&w, on_f, self.returned(c, F), vec![]);
                p.edge(&w, on_r, self.returned(c, R), vec![]);
                self.halt_block(p, &ch, vec![]);
            }
            Repeat | RetryUntilSuccessful => {
                let c = ch[0];
                let w = wait_loc(&self.nodes[c].name);
                let (k, again, done_loc, other, other_loc, var) = match info.params {
                    Params::Repeat { times } => (times as i64, S, "success", F, "failure", "cnt"),
                    Params::Retry { attempts } => (attempts as i64, F, "failure", S, "success", "att"),
                    _ => unreachable!(),
                };
                p.edge("tick_node", &w, Expr::TRUE, vec![self.call(c)]);
                if k > 1 {
                    let v = self.local(p, var, 0, k - 1, 0);
                    let vv = || Expr::Slot(v);
                    p.edge(
                        &w,
                        &w,
                        Expr::and(vec![self.returned(c, again), Expr::cmp(CmpOp::Lt, vv(), Expr::Const(k - 1))]),
                        vec![(v, Expr::Add(Box::new(vv()), Box::new(Expr::Const(1)))), self.call(c)],
                    );
                    p.edge(
                        &w,
                        done_loc,
                        Expr::and(vec![self.returned(c, again), Expr::slot_eq(v, k - 1)]),
                        vec![(v, Expr::Const(0))],
                    );
                    p.edge(&w, other_loc, self.returned(c, other), vec![(v, Expr::Const(0))]);
                    p.edge(&w, "running", self.returned(c, R), vec![]);
                    self.halt_block(p, &ch, vec![(v, Expr::Const(0))]);
                } else {
                    p.edge(&w, done_loc, self.returned(c, again), vec![]);
                    p.edge(&w, other_loc, self.returned(c, other), vec![]);
                    p.edge(&w, "running", self.returned(c, R), vec![]);
                    self.halt_block(p, &ch, vec![]);
                }
            }
            RateController => {
                let c = ch[0];
                let w = wait_loc(&self.nodes[c].name);
                let Params::Rate { period } = info.params else { unreachable!() };
                let period = period as i64;
                if period > 1 {
                    let thr = self.local(p, "thr", 0, period - 1, 0);
                    p.edge(
                        "tick_node",
                        "running",
                        Expr::cmp(CmpOp::Gt, Expr::Slot(thr), Expr::Const(0)),
                        vec![(thr, Expr::Add(Box::new(Expr::Slot(thr)), Box::new(Expr::Const(-1))))],
                    );
                    p.edge("tick_node", &w, Expr::slot_eq(thr, 0), vec![self.call(c)]);
                    p.edge(&w, "success", self.returned(c, S), vec![(thr, Expr::Const(period - 1))]);
                    p.edge(&w, "failure", self.returned(c, F), vec![(thr, Expr::Const(period - 1))]);
                    p.edge(&w, "running", self.returned(c, R), vec![]);
                    self.halt_block(p, &ch, vec![(thr, Expr::Const(0))]);
                } else {
                    p.edge("tick_node", &w, Expr::TRUE, vec![self.call(c)]);
                    p.edge(&w, "success", self.returned(c, S), vec![]);
                    p.edge(&w, "failure", self.returned(c, F), vec![]);
                    p.edge(&w, "running", self.returned(c, R), vec![]);
                    self.halt_block(p, &ch, vec![]);
                }
            }
            Sequence | ReactiveSequence | SequenceWithMemory | Fallback | ReactiveFallback => {
                self.sequence_like(p, info, &ch);
            }
            Parallel | ParallelAll => {
                let Params::Parallel { m, halt, wait } = info.params else { unreachable!() };
                self.parallel(p, &ch, m as i64, halt, wait);
            }
            Recovery => {
                let Params::Recovery { retries } = info.params else { unreachable!() };
                self.recovery(p, &ch, retries as i64);
            }
            RoundRobin => self.round_robin(p, &ch),
            PipelineSequence => self.pipeline(p, &ch),
            Action | Condition | SetSV | Eval => self.leaf(p, idx, info)?,
        }
        Ok(())
    }

    /// Sequences and fallbacks: `cont` moves on to the next child, the
    /// opposite status ends the node.
    fn sequence_like(&mut self, p: &mut Proc, info: &NodeInfo, ch: &[NodeIdx]) {
        use NodeKind::*;
        let n = ch.len();
        let is_seq = matches!(info.kind, Sequence | ReactiveSequence | SequenceWithMemory);
        let reactive = matches!(info.kind, ReactiveSequence | ReactiveFallback);
        let memory = info.kind == SequenceWithMemory;
        let halt_orphans = matches!(info.params, Params::Reactive { halt: true });
        let (cont, stop) = if is_seq { (S, F) } else { (F, S) };
        let (last_loc, stop_loc) = if is_seq { ("success", "failure") } else { ("failure", "success") };
        let next = (!reactive && n > 1).then(|| self.local(p, "next", 0, n as i64 - 1, 0));
        let reset_next = |v: i64| next.map(|s| (s, Expr::Const(v))).into_iter().collect::<Vec<_>>();
        let waits: Vec<String> = ch.iter().map(|&c| wait_loc(&self.nodes[c].name)).collect();

        for (i, &c) in ch.iter().enumerate() {
            let guard = match next {
                Some(s) => Expr::slot_eq(s, i as i64),
                None if i == 0 => Expr::TRUE,
                None => continue,
            };
            p.edge("tick_node", &waits[i], guard, vec![self.call(c)]);
        }
        for (i, &c) in ch.iter().enumerate() {
            let orphans: &[NodeIdx] = if halt_orphans { &ch[i + 1..] } else { &[] };
            if i + 1 < n {
                p.edge(&waits[i], &waits[i + 1], self.returned(c, cont), vec![self.call(ch[i + 1])]);
            } else {
                p.edge(&waits[i], last_loc, self.returned(c, cont), reset_next(0));
            }
            let keep = if memory { i as i64 } else { 0 };
            self.exit_halting(p, &waits[i], self.returned(c, stop), reset_next(keep), stop_loc, orphans, ch);
            let resume = if reactive { 0 } else { i as i64 };
            self.exit_halting(p, &waits[i], self.returned(c, R), reset_next(resume), "running", orphans, ch);
        }
        self.halt_block(p, ch, reset_next(0));
    }

    fn parallel(&mut self, p: &mut Proc, ch: &[NodeIdx], m: i64, halt: bool, wait: bool) {
        let n = ch.len() as i64;
        let fins: Vec<SlotId> = (0..ch.len()).map(|i| self.local(p, &format!("fin_{i}"), 0, 1, 0)).collect();
        let rs: Vec<SlotId> = ch.iter().map(|&c| self.rs(c)).collect();

        let calls = ch
            .iter()
            .zip(&fins)
            .map(|(&c, &f)| {
                (self.caller(c), Expr::ite(Expr::slot_eq(f, 0), Expr::Const(1), Expr::Slot(self.caller(c))))
            })
            .collect();
        p.edge("tick_node", "wait_all", Expr::TRUE, calls);

        let reset: Vec<(SlotId, Expr)> = fins.iter().map(|&f| (f, Expr::Const(0))).collect();
        let update: Vec<(SlotId, Expr)> = fins
            .iter()
            .zip(&rs)
            .map(|(&f, &r)| {
                let finished = Expr::or(vec![Expr::slot_eq(r, S), Expr::slot_eq(r, F)]);
                (f, Expr::ite(finished, Expr::Const(1), Expr::Const(0)))
            })
            .collect();
        let all = self.all_returned(ch);
        let succ = Expr::cmp(CmpOp::Ge, Expr::count_eq(&rs, S), Expr::Const(m));
        let fail = Expr::cmp(CmpOp::Gt, Expr::count_eq(&rs, F), Expr::Const(n - m));

        for (decided, outcome) in [(succ.clone(), "success"), (fail.clone(), "failure")] {
            let g = Expr::and(vec![all.clone(), decided]);
            p.edge("wait_all", outcome, Expr::and(vec![g.clone(), self.none_running(ch)]), reset.clone());
            let g_run = Expr::and(vec![g, self.any_running(ch)]);
            if halt {
                let reap = format!("halt_orphans_{outcome}");
                let mut fx = reset.clone();
                fx.extend(self.halt_writes(ch));
                p.edge("wait_all", &reap, g_run, fx);
                p.edge(&reap, outcome, self.all_returned(ch), vec![]);
            } else if wait {
                p.edge("wait_all", "running", g_run, update.clone());
            } else {
                p.edge("wait_all", outcome, g_run, reset.clone());
            }
        }
        p.edge("wait_all", "running", Expr::and(vec![all, Expr::not(succ), Expr::not(fail)]), update);
        self.halt_block(p, ch, reset);
    }

    fn recovery(&mut self, p: &mut Proc, ch: &[NodeIdx], retries: i64) {
        let (c1, c2) = (ch[0], ch[1]);
        let retry = self.local(p, "retry", 0, retries, 0);
        let cur = self.local(p, "cur", 0, 1, 0);
        let (w1, w2) = (wait_loc(&self.nodes[c1].name), wait_loc(&self.nodes[c2].name));
        let reset = vec![(retry, Expr::Const(0)), (cur, Expr::Const(0))];

        p.edge("tick_node", &w1, Expr::slot_eq(cur, 0), vec![self.call(c1)]);
        p.edge("tick_node", &w2, Expr::slot_eq(cur, 1), vec![self.call(c2)]);

        p.edge(&w1, "success", self.returned(c1, S), reset.clone());
        let below = Expr::cmp(CmpOp::Lt, Expr::Slot(retry), Expr::Const(retries));
        p.edge(
            &w1,
            &w2,
            Expr::and(vec![self.returned(c1, F), below.clone()]),
            vec![(cur, Expr::Const(1)), self.call(c2)],
        );
        p.edge(&w1, "failure", Expr::and(vec![self.returned(c1, F), Expr::not(below)]), reset.clone());
        p.edge(&w1, "running", self.returned(c1, R), vec![]);

        p.edge(
            &w2,
            &w1,
            self.returned(c2, S),
            vec![
                (retry, Expr::Add(Box::new(Expr::Slot(retry)), Box::new(Expr::Const(1)))),
                (cur, Expr::Const(0)),
                self.call(c1),
            ],
        );
        p.edge(&w2, "failure", self.returned(c2, F), reset.clone());
        p.edge(&w2, "running", self.returned(c2, R), vec![]);
        self.halt_block(p, ch, reset);
    }

    fn round_robin(&mut self, p: &mut Proc, ch: &[NodeIdx]) {
        let n = ch.len() as i64;
        let idx = self.local(p, "idx", 0, n - 1, 0);
        let failed = self.local(p, "failed", 0, n - 1, 0);
        let waits: Vec<String> = ch.iter().map(|&c| wait_loc(&self.nodes[c].name)).collect();
        for (i, &c) in ch.iter().enumerate() {
            p.edge("tick_node", &waits[i], Expr::slot_eq(idx, i as i64), vec![self.call(c)]);
        }
        for (i, &c) in ch.iter().enumerate() {
            let nx = (i + 1) % ch.len();
            p.edge(
                &waits[i],
                "success",
                self.returned(c, S),
                vec![(idx, Expr::Const(nx as i64)), (failed, Expr::Const(0))],
            );
            let more = Expr::cmp(CmpOp::Lt, Expr::Slot(failed), Expr::Const(n - 1));
            p.edge(
                &waits[i],
                &waits[nx],
                Expr::and(vec![self.returned(c, F), more.clone()]),
                vec![
                    (failed, Expr::Add(Box::new(Expr::Slot(failed)), Box::new(Expr::Const(1)))),
                    (idx, Expr::Const(nx as i64)),
                    self.call(ch[nx]),
                ],
            );
            p.edge(
                &waits[i],
                "failure",
                Expr::and(vec![self.returned(c, F), Expr::not(more)]),
                vec![(failed, Expr::Const(0)), (idx, Expr::Const(0))],
            );
            p.edge(&waits[i], "running", self.returned(c, R), vec![]);
        }
        self.halt_block(p, ch, vec![(idx, Expr::Const(0)), (failed, Expr::Const(0))]);
    }

    fn pipeline(&mut self, p: &mut Proc, ch: &[NodeIdx]) {
        let n = ch.len();
        let front = self.local(p, "front", 0, n as i64 - 1, 0);
        let waits: Vec<String> = ch.iter().map(|&c| wait_loc(&self.nodes[c].name)).collect();
        let reset = vec![(front, Expr::Const(0))];
        p.edge("tick_node", &waits[0], Expr::TRUE, vec![self.call(ch[0])]);
        for (i, &c) in ch.iter().enumerate() {
            let others: Vec<NodeIdx> = ch.iter().copied().filter(|&o| o != c).collect();
            if i + 1 < n {
                p.edge(&waits[i], &waits[i + 1], self.returned(c, S), vec![self.call(ch[i + 1])]);
            } else {
                self.exit_halting(p, &waits[i], self.returned(c, S), reset.clone(), "success", &others, ch);
            }
            self.exit_halting(p, &waits[i], self.returned(c, F), reset.clone(), "failure", &others, ch);
            let at_front = Expr::cmp(CmpOp::Le, Expr::Slot(front), Expr::Const(i as i64));
            p.edge(
                &waits[i],
                "running",
                Expr::and(vec![self.returned(c, R), at_front.clone()]),
                vec![(front, Expr::Const(i as i64))],
            );
            if i + 1 < n {
                p.edge(
                    &waits[i],
                    &waits[i + 1],
                    Expr::and(vec![self.returned(c, R), Expr::not(at_front)]),
                    vec![self.call(ch[i + 1])],
                );
            }
        }
        self.halt_block(p, ch, reset);
    }

    fn leaf(&mut self, p: &mut Proc, idx: NodeIdx, info: &NodeInfo) -> Result<(), CompileError> {
        let runtime = self.opts.variant == Variant::Runtime;
        match (&info.params, info.kind) {
            (Params::Action { .. }, _) if runtime => {
                let pending = self.local(p, "pending", 0, 1, 0);
                let ret = self.local(p, "ret", 0, 2, 0);
                p.edge("tick_node", "dispatch", Expr::slot_eq(pending, 0), vec![]).call =
                    Some(ProviderCall::StartAction { pending, ret });
                p.edge("tick_node", "dispatch", Expr::slot_eq(pending, 1), vec![]);
                let clear = vec![(pending, Expr::Const(0)), (ret, Expr::Const(0))];
                p.edge("dispatch", "success", Expr::slot_eq(ret, S), clear.clone());
                p.edge("dispatch", "failure", Expr::slot_eq(ret, F), clear.clone());
                p.edge("dispatch", "running", Expr::slot_eq(ret, 0), vec![]);
                p.edge("halt", "halted", Expr::slot_eq(pending, 1), clear).call = Some(ProviderCall::HaltAction);
                p.edge("halt", "halted", Expr::slot_eq(pending, 0), vec![]);
            }
            (Params::Action { no_running }, _) => {
                p.edge("tick_node", "success", Expr::TRUE, vec![]);
                p.edge("tick_node", "failure", Expr::TRUE, vec![]);
                if !no_running {
                    p.edge("tick_node", "running", Expr::TRUE, vec![]);
                }
                p.edge("halt", "halted", Expr::TRUE, vec![]);
            }
            (_, NodeKind::Condition) if runtime => {
                let ret = self.local(p, "ret", 0, 2, 0);
                p.edge("tick_node", "dispatch", Expr::TRUE, vec![]).call = Some(ProviderCall::CheckCondition { ret });
                p.edge("dispatch", "success", Expr::slot_eq(ret, S), vec![(ret, Expr::Const(0))]);
                p.edge("dispatch", "failure", Expr::slot_eq(ret, F), vec![(ret, Expr::Const(0))]);
                p.edge("halt", "halted", Expr::TRUE, vec![]);
            }
            (_, NodeKind::Condition) => {
                p.edge("tick_node", "success", Expr::TRUE, vec![]);
                p.edge("tick_node", "failure", Expr::TRUE, vec![]);
                p.edge("halt", "halted", Expr::TRUE, vec![]);
            }
            (Params::SetSv { sv }, _) if runtime => {
                p.edge("tick_node", "success", Expr::TRUE, vec![]).call = Some(ProviderCall::SetSv { sv: *sv });
                p.edge("halt", "halted", Expr::TRUE, vec![]);
            }
            (Params::SetSv { sv }, _) => {
                let (slot, info_sv) = (self.svs[*sv].slot, &self.spec.svs[*sv]);
                for v in info_sv.min()..=info_sv.max() {
                    p.edge("tick_node", "success", Expr::Allowed(*sv, Box::new(Expr::Const(v))), vec![(slot, Expr::Const(v))]);
                }
                p.edge("halt", "halted", Expr::TRUE, vec![]);
            }
            (Params::Eval(TypedExpr::Assign(sv, e)), _) => {
                let value = self.typed(info, e)?;
                let ok = Expr::Allowed(*sv, Box::new(value.clone()));
                p.edge("tick_node", "success", ok.clone(), vec![(self.svs[*sv].slot, value)]);
                p.edge("tick_node", "failure", Expr::not(ok), vec![]);
                p.edge("halt", "halted", Expr::TRUE, vec![]);
            }
            (Params::Eval(e), _) => {
                let cond = self.typed(info, e)?;
                p.edge("tick_node", "success", cond.clone(), vec![]);
                p.edge("tick_node", "failure", Expr::not(cond), vec![]);
                p.edge("halt", "halted", Expr::TRUE, vec![]);
            }
            _ => unreachable!("leaf {} without leaf parameters", self.nodes[idx].name),
        }
        Ok(())
    }

    fn sv_process(&mut self, j: usize) -> Proc {
        let info = self.spec.svs[j].clone();
        let slot = self.svs[j].slot;
        let name = format!("sv:{}", info.name);
        let env = info.driven == Driven::Environment && self.opts.variant == Variant::Offline;
        let timing = if self.opts.free_env { Timing::Lazy } else { Timing::OneTick };
        if info.is_enum() {
            let mut p = self.new_proc(name, Role::Sv(j), Some(slot));
            for v in info.min()..=info.max() {
                p.loc(&info.value_name(v));
            }
            if env {
                for v in info.min()..=info.max() {
                    let from = info.value_name(v);
                    if !self.opts.free_env {
                        p.edge(&from, &from, Expr::TRUE, vec![]).timing = timing;
                    }
                    for w in info.changes_from(v) {
                        p.edge(&from, &info.value_name(w), Expr::TRUE, vec![]).timing = timing;
                    }
                }
            }
            p
        } else {
            let mut p = self.new_proc(name, Role::Sv(j), None);
            p.loc("value");
            if env {
                if !self.opts.free_env {
                    p.edge("value", "value", Expr::TRUE, vec![]).timing = timing;
                }
                for v in info.min()..=info.max() {
                    p.edge("value", "value", Expr::slot_ne(slot, v), vec![(slot, Expr::Const(v))]).timing = timing;
                }
            }
            p
        }
    }

    fn ticker(&mut self) -> Proc {
        let mut p = self.new_proc("ticker".into(), Role::Ticker, None);
        for l in ["idle", "ticking", "success", "failure"] {
            p.loc(l);
        }
        let root = 0;
        p.edge("idle", "ticking", Expr::TRUE, vec![self.call(root)]).timing = Timing::OneTick;
        p.edge("ticking", "idle", self.returned(root, R), vec![]);
        p.edge("ticking", "success", self.returned(root, S), vec![]).event = Some(EventTag::RootTerminal(Outcome::Success));
        p.edge("ticking", "failure", self.returned(root, F), vec![]).event = Some(EventTag::RootTerminal(Outcome::Failure));
        p
    }
}
