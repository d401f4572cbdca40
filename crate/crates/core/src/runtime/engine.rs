//! Executes a runtime-variant model against an [`ActionProvider`].
//!
//! Each tick boundary runs two phases. First every process with an enabled
//! one-tick transition fires it (guards read the pre-boundary state), with
//! environment variables polled between the node processes and the ticker.
//! Then urgent transitions fire one at a time, always from the
//! lowest-numbered process that has one, until none is enabled. Action
//! completions are taken from the queue only at the start of the urgent
//! phase, so a tick sees a consistent snapshot.

use std::collections::HashMap;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::provider::{ActionCall, ActionProvider, Completer, Completion, Handle, ProviderError, Started};
use super::trace::{EventKind, ExecutionTrace, TraceEvent};
use crate::model::{ArgTemplate, ComposedModel, Expr, NodeIdx, ProviderCall, RangeError, Role, SlotKind, Timing, TransId, Variant};
use crate::status::Outcome;
use crate::syntax::Driven;

/// Bound on urgent steps within one tick; exceeding it means the model can
/// loop without letting time pass.
const MAX_URGENT_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RunError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Range(#[from] RangeError),
    #[error("model was not compiled for execution")]
    NotRuntime,
    #[error("tick {0}: urgent transitions do not settle")]
    Livelock(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pacing {
    /// Tick `k` starts at `k × period` after the run begins (fixed rate: an
    /// overrun makes the next tick start late but none is skipped).
    RealTime,
    /// Ticks follow each other immediately.
    Virtual,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub period: Duration,
    /// Stop after this many ticks unless the root finished earlier.
    pub max_ticks: Option<u64>,
    pub pacing: Pacing,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { period: Duration::from_millis(100), max_ticks: Some(1000), pacing: Pacing::RealTime }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunOutcome {
    Terminal(Outcome),
    /// Tick budget exhausted.
    Stopped,
    Aborted(RunError),
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: RunOutcome,
    pub trace: ExecutionTrace,
    pub ticks: u64,
    /// Measured start of every tick relative to the start of the run.
    pub tick_starts: Vec<Duration>,
    pub overruns: u64,
}

pub struct Engine<'a> {
    m: &'a ComposedModel,
    provider: &'a mut dyn ActionProvider,
    state: Vec<i32>,
    tick: u64,
    tx: Sender<Completion>,
    rx: Receiver<Completion>,
    next_handle: Handle,
    /// Pending actions that have not reported yet.
    outstanding: HashMap<Handle, NodeIdx>,
    handle_of: HashMap<NodeIdx, Handle>,
    env_svs: Vec<usize>,
    trace: ExecutionTrace,
}

impl<'a> Engine<'a> {
    pub fn new(m: &'a ComposedModel, provider: &'a mut dyn ActionProvider, period: Duration) -> Result<Self, RunError> {
        if m.variant != Variant::Runtime {
            return Err(RunError::NotRuntime);
        }
        let (tx, rx) = channel();
        let env_svs = (0..m.svs.len()).filter(|&j| m.svs[j].info.driven == Driven::Environment).collect();
        Ok(Engine {
            m,
            provider,
            state: m.initial_state(),
            tick: 0,
            tx,
            rx,
            next_handle: 0,
            outstanding: HashMap::new(),
            handle_of: HashMap::new(),
            env_svs,
            trace: ExecutionTrace::new(&m.name, period.as_millis() as u64),
        })
    }

    pub fn state(&self) -> &[i32] {
        &self.state
    }

    pub fn trace(&self) -> &ExecutionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> ExecutionTrace {
        self.trace
    }

    fn emit(&mut self, node: Option<&str>, kind: EventKind) {
        self.trace.events.push(TraceEvent::new(self.tick, node, kind));
    }

    fn sv_values(&self) -> Vec<i32> {
        self.m.svs.iter().map(|s| self.state[s.slot]).collect()
    }

    fn emit_sv_diffs(&mut self, before: &[i32]) {
        for (j, &old) in before.iter().enumerate() {
            let meta = &self.m.svs[j];
            let new = self.state[meta.slot];
            if new != old {
                let kind = EventKind::SvChanged {
                    sv: meta.info.name.clone(),
                    old: meta.info.value_name(old as i64),
                    new: meta.info.value_name(new as i64),
                };
                self.emit(None, kind);
            }
        }
    }

    fn arg_value(&self, e: &Expr) -> String {
        if let Expr::Slot(s) = e {
            if let SlotKind::Sv(j) = self.m.slots[*s].kind {
                return self.m.svs[j].info.value_name(self.state[*s] as i64);
            }
        }
        self.m.eval(e, &self.state).to_string()
    }

    fn call_for(&self, n: NodeIdx) -> ActionCall {
        let meta = &self.m.nodes[n];
        let args = meta
            .args
            .iter()
            .map(|a| match a {
                ArgTemplate::Lit(s) => s.clone(),
                ArgTemplate::Value(e) => self.arg_value(e),
            })
            .collect();
        ActionCall { node: meta.name.clone(), id: meta.id_attr.clone(), args, immediate: meta.immediate, tick: self.tick }
    }

    fn provider_call(&mut self, t: TransId, n: NodeIdx, call: ProviderCall) -> Result<(), RunError> {
        match call {
            ProviderCall::StartAction { pending, ret } => {
                let c = self.call_for(n);
                let h = self.next_handle;
                self.next_handle += 1;
                match self.provider.start_action(&c, Completer::new(h, self.tx.clone()))? {
                    Started::Done(o) => {
                        self.m.write(t, ret, o.status().code(), &mut self.state)?;
                    }
                    Started::Pending if c.immediate => {
                        return Err(ProviderError(format!("`{}` must answer immediately but is pending", c.node)).into());
                    }
                    Started::Pending => {
                        self.m.write(t, pending, 1, &mut self.state)?;
                        self.m.write(t, ret, 0, &mut self.state)?;
                        self.outstanding.insert(h, n);
                        self.handle_of.insert(n, h);
                    }
                }
            }
            ProviderCall::HaltAction => {
                if let Some(h) = self.handle_of.remove(&n) {
                    if self.outstanding.remove(&h).is_some() {
                        self.provider.halt_action(h)?;
                    }
                }
            }
            ProviderCall::CheckCondition { ret } => {
                let c = self.call_for(n);
                let o = self.provider.check_condition(&c)?;
                self.m.write(t, ret, o.status().code(), &mut self.state)?;
            }
            ProviderCall::SetSv { sv } => {
                let meta = &self.m.svs[sv];
                let cur = self.state[meta.slot] as i64;
                let answer = self.provider.set_sv(&meta.info.name, &meta.info.value_name(cur))?;
                let v = meta
                    .info
                    .parse_value(&answer)
                    .filter(|&v| meta.info.allowed(cur, v))
                    .ok_or_else(|| ProviderError(format!("`{answer}` is not a legal next value of `{}`", meta.info.name)))?;
                self.m.write(t, meta.slot, v, &mut self.state)?;
            }
        }
        Ok(())
    }

    fn fire(&mut self, t: TransId) -> Result<(), RunError> {
        let tr = &self.m.transitions[t];
        let before = self.sv_values();
        self.m.apply(t, &mut self.state)?;
        let node = match self.m.processes[tr.process].role {
            Role::Node(n) => Some(n),
            _ => None,
        };
        if let (Some(call), Some(n)) = (tr.call, node) {
            self.provider_call(t, n, call)?;
        }
        if let Some(ev) = tr.event {
            let name = node.map(|n| self.m.nodes[n].name.as_str());
            self.trace.events.push(TraceEvent::new(self.tick, name, ev.into()));
        }
        self.emit_sv_diffs(&before);
        Ok(())
    }

    fn poll_env(&mut self) -> Result<(), RunError> {
        for j in self.env_svs.clone() {
            let meta = &self.m.svs[j];
            let Some(v) = self.provider.read_env_sv(&meta.info.name, self.tick)? else { continue };
            let cur = self.state[meta.slot] as i64;
            let new = meta
                .info
                .parse_value(&v)
                .filter(|&x| meta.info.allowed(cur, x))
                .ok_or_else(|| ProviderError(format!("`{v}` is not a legal next value of `{}`", meta.info.name)))?;
            if new != cur {
                self.state[meta.slot] = new as i32;
                let kind = EventKind::SvChanged {
                    sv: meta.info.name.clone(),
                    old: meta.info.value_name(cur),
                    new: meta.info.value_name(new),
                };
                self.emit(None, kind);
            }
        }
        Ok(())
    }

    fn drain(&mut self) {
        while let Ok(c) = self.rx.try_recv() {
            // Completions of halted actions are dropped here.
            if let Some(n) = self.outstanding.remove(&c.handle) {
                let proc = &self.m.processes[self.m.nodes[n].process];
                let ret = proc.local("ret").expect("runtime action has a ret slot");
                self.state[ret] = c.outcome.status().code() as i32;
            }
        }
    }

    fn first_enabled(&self, p: usize, timing: Timing) -> Option<TransId> {
        self.m.enabled_in(p, &self.state).find(|&t| self.m.transitions[t].timing == timing)
    }

    /// Run one tick boundary to quiescence. Returns the root outcome once
    /// the tree has finished.
    pub fn step(&mut self) -> Result<Option<Outcome>, RunError> {
        if let Some(o) = self.m.terminal_status(&self.state) {
            return Ok(Some(o));
        }
        self.tick += 1;
        self.provider.on_tick(self.tick);
        let timed: Vec<TransId> =
            (0..self.m.processes.len()).filter_map(|p| self.first_enabled(p, Timing::OneTick)).collect();
        // Same order as the offline model: nodes, then variables, then the
        // ticker.
        let (nodes, rest): (Vec<TransId>, Vec<TransId>) = timed
            .into_iter()
            .partition(|&t| matches!(self.m.processes[self.m.transitions[t].process].role, Role::Node(_)));
        for t in nodes {
            self.fire(t)?;
        }
        self.poll_env()?;
        for t in rest {
            self.fire(t)?;
        }
        self.drain();
        let mut steps = 0;
        while let Some(t) = (0..self.m.processes.len()).find_map(|p| self.first_enabled(p, Timing::Urgent)) {
            self.fire(t)?;
            steps += 1;
            if steps > MAX_URGENT_STEPS {
                return Err(RunError::Livelock(self.tick));
            }
        }
        Ok(self.m.terminal_status(&self.state))
    }

    pub fn run(mut self, cfg: &RunConfig) -> RunReport {
        let start = Instant::now();
        let mut tick_starts = Vec::new();
        let mut overruns = 0;
        let outcome = loop {
            if cfg.max_ticks.is_some_and(|max| self.tick >= max) {
                break RunOutcome::Stopped;
            }
            let k = self.tick + 1;
            if cfg.pacing == Pacing::RealTime {
                let due = start + cfg.period * k as u32;
                let now = Instant::now();
                if due > now {
                    std::thread::sleep(due - now);
                }
            }
            tick_starts.push(start.elapsed());
            match self.step() {
                Err(e) => break RunOutcome::Aborted(e),
                Ok(Some(o)) => break RunOutcome::Terminal(o),
                Ok(None) => {}
            }
            if cfg.pacing == Pacing::RealTime && start.elapsed() > cfg.period * (k + 1) as u32 {
                overruns += 1;
                self.emit(None, EventKind::TickOverrun);
            }
        };
        RunReport { outcome, ticks: self.tick, trace: self.trace, tick_starts, overruns }
    }
}

/// Convenience wrapper: build an engine and run it.
pub fn run(m: &ComposedModel, provider: &mut dyn ActionProvider, cfg: &RunConfig) -> RunReport {
    match Engine::new(m, provider, cfg.period) {
        Ok(e) => e.run(cfg),
        Err(e) => RunReport {
            outcome: RunOutcome::Aborted(e),
            trace: ExecutionTrace::new(&m.name, cfg.period.as_millis() as u64),
            ticks: 0,
            tick_starts: Vec::new(),
            overruns: 0,
        },
    }
}
