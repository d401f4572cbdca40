//! Timed-automata intermediate representation and the compiler producing it.

mod compile;
mod eval;
mod export;
pub mod ir;

pub use compile::{compile, CompileError, CompileOptions, NODE_LOCATIONS};
pub use eval::RangeError;
pub use export::{dump_model, model_dot};
pub use ir::{
    ArgTemplate, CallerRef, CmpOp, ComposedModel, EventTag, Expr, LocId, NodeIdx, NodeMeta, NodeRecord, ProcId,
    ProcessAutomaton, ProviderCall, Role, Slot, SlotId, SlotKind, SvMeta, TickSemantics, Timing, TransId, Transition,
    Variant,
};
