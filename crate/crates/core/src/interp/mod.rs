//! A direct, recursive behavior-tree interpreter.
//!
//! It shares no code with the compiler or the engine beyond the validated
//! syntax tree and the outcome scripts, which makes it useful as an oracle:
//! for root-only tick semantics it must produce exactly the event sequence
//! the runtime engine produces, and that sequence must be a path of the
//! offline model.

mod conformance;
mod enumerate;

use std::collections::HashMap;

use crate::runtime::{ActionEntry, EventKind, OutcomeScript, ProviderError, RunError, RunOutcome, TraceEvent};
use crate::status::{Outcome, ReturnStatus};
use crate::syntax::{Driven, NodeId, NodeKind, Params, SvInfo, TypedExpr, ValidatedSpec};

pub use conformance::{replay_offline, ConformanceError};
pub use enumerate::{enumerate_behaviors, Behavior, Enumeration};

/// Source of leaf results and environment changes.
pub trait Oracle {
    fn action(&mut self, node: &str, ordinal: u32, immediate: bool) -> Result<ActionEntry, ProviderError>;
    fn condition(&mut self, node: &str, ordinal: u32) -> Result<Outcome, ProviderError>;
    /// Next value of a program-set variable.
    fn setsv(&mut self, sv: &SvInfo, ordinal: u32, current: i64) -> Result<i64, ProviderError>;
    /// New value of an environment variable at `tick`, if it changes.
    fn env(&mut self, sv: &SvInfo, tick: u64, current: i64) -> Result<Option<i64>, ProviderError>;
}

fn illegal(value: &str, sv: &SvInfo) -> ProviderError {
    ProviderError(format!("`{value}` is not a legal next value of `{}`", sv.name))
}

impl Oracle for &OutcomeScript {
    fn action(&mut self, node: &str, ordinal: u32, immediate: bool) -> Result<ActionEntry, ProviderError> {
        Ok(OutcomeScript::action(self, node, ordinal, immediate)?)
    }

    fn condition(&mut self, node: &str, ordinal: u32) -> Result<Outcome, ProviderError> {
        Ok(OutcomeScript::condition(self, node, ordinal)?)
    }

    fn setsv(&mut self, sv: &SvInfo, ordinal: u32, current: i64) -> Result<i64, ProviderError> {
        Ok(OutcomeScript::setsv(self, sv, ordinal, current)?)
    }

    fn env(&mut self, sv: &SvInfo, tick: u64, current: i64) -> Result<Option<i64>, ProviderError> {
        let Some(v) = OutcomeScript::env(self, &sv.name, tick) else { return Ok(None) };
        match sv.parse_value(v) {
            Some(x) if sv.allowed(current, x) => Ok(Some(x)),
            _ => Err(illegal(v, sv)),
        }
    }
}

/// Per-node memory carried between ticks.
#[derive(Debug, Clone, Default)]
struct Mem {
    /// Next child (sequences), current child (round robin) or the furthest
    /// running child (pipeline).
    pos: usize,
    /// Repetitions, attempts, throttle ticks, recovery rounds or round-robin
    /// failures.
    count: u32,
    /// Recovery: the recovery child is in charge.
    recovering: bool,
    /// Parallel: children that finished in an earlier tick.
    fins: Vec<bool>,
    /// Action: due tick and outcome of the outstanding request.
    pending: Option<(u64, Outcome)>,
}

pub struct Interpreter<'a, O: Oracle> {
    spec: &'a ValidatedSpec,
    root: NodeId,
    oracle: O,
    status: Vec<ReturnStatus>,
    mem: Vec<Mem>,
    sv: Vec<i64>,
    ordinals: HashMap<(&'static str, String), u32>,
    tick: u64,
    events: Vec<TraceEvent>,
}

type Step<T> = Result<T, ProviderError>;

use ReturnStatus::{Failure as F, Running as R, Success as S};

impl<'a, O: Oracle> Interpreter<'a, O> {
    /// Interpreter for tree number `tree` of `spec`.
    pub fn new(spec: &'a ValidatedSpec, tree: usize, oracle: O) -> Self {
        Interpreter {
            spec,
            root: spec.trees[tree].root,
            oracle,
            status: vec![ReturnStatus::NoRetStatus; spec.nodes.len()],
            mem: spec.nodes.iter().map(|n| Mem { fins: vec![false; n.children.len()], ..Mem::default() }).collect(),
            sv: spec.svs.iter().map(|s| s.init).collect(),
            ordinals: HashMap::new(),
            tick: 0,
            events: Vec::new(),
        }
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn into_parts(self) -> (Vec<TraceEvent>, O) {
        (self.events, self.oracle)
    }

    fn emit(&mut self, node: Option<NodeId>, kind: EventKind) {
        let name = node.map(|n| self.spec.nodes[n].name.as_str());
        self.events.push(TraceEvent::new(self.tick, name, kind));
    }

    fn set_sv(&mut self, j: usize, v: i64) {
        let old = self.sv[j];
        if old != v {
            self.sv[j] = v;
            let info = &self.spec.svs[j];
            let kind = EventKind::SvChanged { sv: info.name.clone(), old: info.value_name(old), new: info.value_name(v) };
            self.emit(None, kind);
        }
    }

    fn ordinal(&mut self, kind: &'static str, key: &str) -> u32 {
        let k = self.ordinals.entry((kind, key.to_string())).or_insert(0);
        *k += 1;
        *k
    }

    fn eval(&self, e: &TypedExpr) -> i64 {
        match e {
            TypedExpr::Const(v) => *v,
            TypedExpr::Sv(j) => self.sv[*j],
            TypedExpr::NodeStatus(n) => self.status[*n].code(),
            TypedExpr::Eq(a, b) => (self.eval(a) == self.eval(b)) as i64,
            TypedExpr::Not(a) => (self.eval(a) == 0) as i64,
            TypedExpr::Add(a, b) => self.eval(a).wrapping_add(self.eval(b)),
            TypedExpr::Mul(a, b) => self.eval(a).wrapping_mul(self.eval(b)),
            TypedExpr::Assign(..) => unreachable!("assignment inside an expression"),
        }
    }

    /// Run one tick of the whole tree.
    pub fn step(&mut self) -> Step<Option<Outcome>> {
        self.tick += 1;
        for j in 0..self.spec.svs.len() {
            let info = &self.spec.svs[j];
            if info.driven == Driven::Environment {
                if let Some(v) = self.oracle.env(info, self.tick, self.sv[j])? {
                    self.set_sv(j, v);
                }
            }
        }
        let outcome = match self.tick_node(self.root)? {
            S => Outcome::Success,
            F => Outcome::Failure,
            _ => return Ok(None),
        };
        self.emit(None, EventKind::RootTerminal(outcome));
        Ok(Some(outcome))
    }

    pub fn run(&mut self, max_ticks: Option<u64>) -> RunOutcome {
        loop {
            if max_ticks.is_some_and(|m| self.tick >= m) {
                return RunOutcome::Stopped;
            }
            match self.step() {
                Ok(Some(o)) => return RunOutcome::Terminal(o),
                Ok(None) => {}
                Err(e) => return RunOutcome::Aborted(RunError::Provider(e)),
            }
        }
    }

    fn tick_node(&mut self, n: NodeId) -> Step<ReturnStatus> {
        self.emit(Some(n), EventKind::Ticked);
        self.status[n] = ReturnStatus::NoRetStatus;
        let st = self.body(n)?;
        self.status[n] = st;
        self.emit(Some(n), EventKind::Returned(st));
        Ok(st)
    }

    fn halt_node(&mut self, n: NodeId) {
        self.emit(Some(n), EventKind::Halting);
        let children = self.spec.nodes[n].children.clone();
        self.halt_running(&children);
        let m = &mut self.mem[n];
        m.pos = 0;
        m.count = 0;
        m.recovering = false;
        m.pending = None;
        m.fins.iter_mut().for_each(|f| *f = false);
        self.emit(Some(n), EventKind::Halted);
        self.status[n] = F;
    }

    fn halt_running(&mut self, nodes: &[NodeId]) {
        for &c in nodes {
            if self.status[c] == R {
                self.halt_node(c);
            }
        }
    }

    fn body(&mut self, n: NodeId) -> Step<ReturnStatus> {
        use NodeKind::*;
        let info = &self.spec.nodes[n];
        let ch = info.children.clone();
        let kind = info.kind;
        Ok(match kind {
            BehaviorTree | Inverter | ForceFailure | ForceSuccess | KeepRunningUntilFailure => {
                match (kind, self.tick_node(ch[0])?) {
                    (Inverter, S) => F,
                    (Inverter, F) => S,
                    (ForceFailure, S | F) => F,
                    (ForceSuccess, S | F) => S,
                    (KeepRunningUntilFailure, S) => R,
                    (_, st) => st,
                }
            }
            Repeat | RetryUntilSuccessful => {
                let (k, again) = match info.params {
                    Params::Repeat { times } => (times, S),
                    Params::Retry { attempts } => (attempts, F),
                    _ => unreachable!(),
                };
                loop {
                    let st = self.tick_node(ch[0])?;
                    if st == again && k > 1 && self.mem[n].count < k - 1 {
                        self.mem[n].count += 1;
                        continue;
                    }
                    if st != R {
                        self.mem[n].count = 0;
                    }
                    break st;
                }
            }
            RateController => {
                let Params::Rate { period } = info.params else { unreachable!() };
                if self.mem[n].count > 0 {
                    self.mem[n].count -= 1;
                    R
                } else {
                    let st = self.tick_node(ch[0])?;
                    if st != R && period > 1 {
                        self.mem[n].count = period - 1;
                    }
                    st
                }
            }
            Sequence | ReactiveSequence | SequenceWithMemory | Fallback | ReactiveFallback => {
                let is_seq = matches!(kind, Sequence | ReactiveSequence | SequenceWithMemory);
                let reactive = matches!(kind, ReactiveSequence | ReactiveFallback);
                let halt = matches!(info.params, Params::Reactive { halt: true });
                let (cont, stop) = if is_seq { (S, F) } else { (F, S) };
                let mut i = if reactive { 0 } else { self.mem[n].pos };
                loop {
                    let st = self.tick_node(ch[i])?;
                    if st == cont {
                        if i + 1 < ch.len() {
                            i += 1;
                            continue;
                        }
                        self.mem[n].pos = 0;
                        break cont;
                    }
                    self.mem[n].pos = match (st == stop, kind) {
                        (true, SequenceWithMemory) => i,
                        (true, _) => 0,
                        (false, _) if reactive => 0,
                        (false, _) => i,
                    };
                    if halt {
                        self.halt_running(&ch[i + 1..]);
                    }
                    break st;
                }
            }
            Parallel | ParallelAll => {
                let Params::Parallel { m, halt, wait } = info.params else { unreachable!() };
                for (i, &c) in ch.iter().enumerate() {
                    if !self.mem[n].fins[i] {
                        self.tick_node(c)?;
                    }
                }
                let count = |st| ch.iter().filter(|&&c| self.status[c] == st).count();
                let (succ, fail) = (count(S) >= m, count(F) > ch.len() - m);
                let running = count(R) > 0;
                let finished: Vec<bool> = ch.iter().map(|&c| matches!(self.status[c], S | F)).collect();
                let outcome = if succ { S } else { F };
                if !(succ || fail) || (running && !halt && wait) {
                    self.mem[n].fins = finished;
                    R
                } else {
                    self.mem[n].fins.iter_mut().for_each(|f| *f = false);
                    if halt {
                        self.halt_running(&ch);
                    }
                    outcome
                }
            }
            Recovery => {
                let Params::Recovery { retries } = info.params else { unreachable!() };
                loop {
                    if !self.mem[n].recovering {
                        match self.tick_node(ch[0])? {
                            F if self.mem[n].count < retries => self.mem[n].recovering = true,
                            R => break R,
                            st => {
                                self.mem[n].count = 0;
                                break st;
                            }
                        }
                    }
                    match self.tick_node(ch[1])? {
                        S => {
                            self.mem[n].count += 1;
                            self.mem[n].recovering = false;
                        }
                        R => break R,
                        st => {
                            self.mem[n].count = 0;
                            self.mem[n].recovering = false;
                            break st;
                        }
                    }
                }
            }
            RoundRobin => loop {
                let i = self.mem[n].pos;
                match self.tick_node(ch[i])? {
                    S => {
                        self.mem[n].pos = (i + 1) % ch.len();
                        self.mem[n].count = 0;
                        break S;
                    }
                    F if (self.mem[n].count as usize) < ch.len() - 1 => {
                        self.mem[n].count += 1;
                        self.mem[n].pos = (i + 1) % ch.len();
                    }
                    F => {
                        self.mem[n].pos = 0;
                        self.mem[n].count = 0;
                        break F;
                    }
                    st => break st,
                }
            },
            PipelineSequence => {
                let mut i = 0;
                loop {
                    match self.tick_node(ch[i])? {
                        S if i + 1 < ch.len() => i += 1,
                        R if self.mem[n].pos > i => i += 1,
                        R => {
                            self.mem[n].pos = i;
                            break R;
                        }
                        st => {
                            self.mem[n].pos = 0;
                            let others: Vec<NodeId> = ch.iter().copied().filter(|&o| o != ch[i]).collect();
                            self.halt_running(&others);
                            break st;
                        }
                    }
                }
            }
            Action => {
                let Params::Action { no_running } = info.params else { unreachable!() };
                if let Some((due, o)) = self.mem[n].pending {
                    if self.tick < due {
                        return Ok(R);
                    }
                    self.mem[n].pending = None;
                    return Ok(o.status());
                }
                let name = info.name.clone();
                let k = self.ordinal("node", &name);
                let e = self.oracle.action(&name, k, no_running)?;
                if e.latency == 0 {
                    e.outcome.status()
                } else if no_running {
                    return Err(ProviderError(format!("`{name}` must answer immediately but is pending")));
                } else {
                    self.mem[n].pending = Some((self.tick + e.latency as u64, e.outcome));
                    R
                }
            }
            Condition => {
                let name = info.name.clone();
                let k = self.ordinal("condition", &name);
                self.oracle.condition(&name, k)?.status()
            }
            SetSV => {
                let Params::SetSv { sv } = info.params else { unreachable!() };
                let k = self.ordinal("setsv", &self.spec.svs[sv].name);
                let v = self.oracle.setsv(&self.spec.svs[sv], k, self.sv[sv])?;
                self.set_sv(sv, v);
                S
            }
            Eval => match &info.params {
                Params::Eval(TypedExpr::Assign(sv, e)) => {
                    let (sv, v) = (*sv, self.eval(e));
                    if self.spec.svs[sv].allowed(self.sv[sv], v) {
                        self.set_sv(sv, v);
                        S
                    } else {
                        F
                    }
                }
                Params::Eval(e) => {
                    if self.eval(e) != 0 {
                        S
                    } else {
                        F
                    }
                }
                _ => unreachable!(),
            },
        })
    }
}

/// Run tree `tree` under `script` for at most `max_ticks` ticks.
pub fn interpret(
    spec: &ValidatedSpec,
    tree: usize,
    script: &OutcomeScript,
    max_ticks: Option<u64>,
) -> (Vec<TraceEvent>, RunOutcome) {
    let mut it = Interpreter::new(spec, tree, script);
    let outcome = it.run(max_ticks);
    (it.into_parts().0, outcome)
}
