//! The host side of a run: actions, conditions and variable updates.

use std::collections::HashMap;
use std::sync::mpsc::Sender;

use thiserror::Error;

use super::script::{OutcomeScript, ScriptError};
use crate::status::Outcome;
use crate::syntax::SvInfo;

/// Identifies one started action until it completes or is halted.
pub type Handle = u64;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("provider error: {0}")]
pub struct ProviderError(pub String);

impl From<ScriptError> for ProviderError {
    fn from(e: ScriptError) -> Self {
        ProviderError(e.to_string())
    }
}

/// A leaf invocation as seen by the provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionCall {
    /// Canonical node name.
    pub node: String,
    /// The `:ID` attribute, if any.
    pub id: Option<String>,
    /// Arguments with variable references already evaluated.
    pub args: Vec<String>,
    /// The node is declared to answer within the tick (`:SF`).
    pub immediate: bool,
    pub tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Started {
    Done(Outcome),
    /// The outcome will arrive through the [`Completer`].
    Pending,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Completion {
    pub handle: Handle,
    pub outcome: Outcome,
}

/// Reports the result of one pending action. Cheap to clone and `Send`, so
/// a provider may hand it to a worker thread; the engine only looks at the
/// queue at the start of each tick.
#[derive(Debug, Clone)]
pub struct Completer {
    handle: Handle,
    tx: Sender<Completion>,
}

impl Completer {
    pub(crate) fn new(handle: Handle, tx: Sender<Completion>) -> Self {
        Completer { handle, tx }
    }

    pub fn handle(&self) -> Handle {
        self.handle
    }

    /// Completing after the run has ended is harmless.
    pub fn complete(&self, outcome: Outcome) {
        let _ = self.tx.send(Completion { handle: self.handle, outcome });
    }
}

pub trait ActionProvider {
    fn start_action(&mut self, call: &ActionCall, done: Completer) -> Result<Started, ProviderError>;

    /// Stop a pending action. Any completion it still produces is ignored.
    fn halt_action(&mut self, handle: Handle) -> Result<(), ProviderError>;

    fn check_condition(&mut self, call: &ActionCall) -> Result<Outcome, ProviderError>;

    /// New value (by name) for a variable written by a SetSV leaf.
    fn set_sv(&mut self, sv: &str, current: &str) -> Result<String, ProviderError>;

    /// Value an environment variable takes at `tick`, if it changed.
    fn read_env_sv(&mut self, _sv: &str, _tick: u64) -> Result<Option<String>, ProviderError> {
        Ok(None)
    }

    /// Called at every tick boundary before anything else.
    fn on_tick(&mut self, _tick: u64) {}
}

/// Answers everything from an [`OutcomeScript`]. Pending actions complete at
/// the boundary of `start tick + latency`.
#[derive(Debug)]
pub struct ScriptedProvider {
    script: OutcomeScript,
    svs: Vec<SvInfo>,
    ordinals: HashMap<(&'static str, String), u32>,
    pending: Vec<(u64, Completer, Outcome)>,
}

impl ScriptedProvider {
    pub fn new(script: OutcomeScript, svs: Vec<SvInfo>) -> Self {
        ScriptedProvider { script, svs, ordinals: HashMap::new(), pending: Vec::new() }
    }

    fn next_ordinal(&mut self, kind: &'static str, key: &str) -> u32 {
        let k = self.ordinals.entry((kind, key.to_string())).or_insert(0);
        *k += 1;
        *k
    }

    fn sv(&self, name: &str) -> Result<&SvInfo, ProviderError> {
        self.svs.iter().find(|s| s.name == name).ok_or_else(|| ProviderError(format!("unknown variable `{name}`")))
    }
}

impl ActionProvider for ScriptedProvider {
    fn start_action(&mut self, call: &ActionCall, done: Completer) -> Result<Started, ProviderError> {
        let k = self.next_ordinal("node", &call.node);
        let e = self.script.action(&call.node, k, call.immediate)?;
        if e.latency == 0 {
            return Ok(Started::Done(e.outcome));
        }
        self.pending.push((call.tick + e.latency as u64, done, e.outcome));
        Ok(Started::Pending)
    }

    fn halt_action(&mut self, handle: Handle) -> Result<(), ProviderError> {
        self.pending.retain(|(_, c, _)| c.handle() != handle);
        Ok(())
    }

    fn check_condition(&mut self, call: &ActionCall) -> Result<Outcome, ProviderError> {
        let k = self.next_ordinal("condition", &call.node);
        Ok(self.script.condition(&call.node, k)?)
    }

    fn set_sv(&mut self, sv: &str, current: &str) -> Result<String, ProviderError> {
        let k = self.next_ordinal("setsv", sv);
        let info = self.sv(sv)?;
        let cur = info.parse_value(current).ok_or_else(|| ProviderError(format!("bad current value `{current}`")))?;
        let v = self.script.setsv(info, k, cur)?;
        Ok(info.value_name(v))
    }

    fn read_env_sv(&mut self, sv: &str, tick: u64) -> Result<Option<String>, ProviderError> {
        Ok(self.script.env(sv, tick).map(str::to_string))
    }

    fn on_tick(&mut self, tick: u64) {
        self.pending.retain(|(due, c, o)| {
            if *due <= tick {
                c.complete(*o);
                false
            } else {
                true
            }
        });
    }
}
