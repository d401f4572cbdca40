//! Executing compiled trees against real or scripted providers.

mod engine;
mod provider;
mod script;
mod trace;

pub use engine::{run, Engine, Pacing, RunConfig, RunError, RunOutcome, RunReport};
pub use provider::{ActionCall, ActionProvider, Completer, Completion, Handle, ProviderError, ScriptedProvider, Started};
pub use script::{ActionEntry, OutcomeScript, ScriptError};
pub use trace::{EventKind, ExecutionTrace, TraceEvent, TraceFormat, TraceParseError};
