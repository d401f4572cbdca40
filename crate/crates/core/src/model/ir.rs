//! The compiled form: processes with guarded, timed transitions over a flat
//! vector of integer slots.

use std::fmt;

use crate::status::{Outcome, ReturnStatus};
use crate::syntax::{NodeKind, SvInfo};

pub type SlotId = usize;
pub type ProcId = usize;
pub type LocId = usize;
pub type TransId = usize;
/// Index of a node inside one compiled tree (the tree root is 0).
pub type NodeIdx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TickSemantics {
    /// Only the root ticker consumes time.
    RootOnly,
    /// Leaves also take one time unit to answer.
    Leaves,
    /// Every node takes one time unit between being ticked and acting.
    AllNodes,
}

impl TickSemantics {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "root" => Some(TickSemantics::RootOnly),
            "leaves" => Some(TickSemantics::Leaves),
            "all" => Some(TickSemantics::AllNodes),
            _ => None,
        }
    }
}

/// Offline models resolve leaf outcomes nondeterministically; runtime models
/// call out to providers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Offline,
    Runtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Timing {
    /// Fires before any time elapses.
    Urgent,
    /// Fires exactly at the next time step.
    OneTick,
    /// May fire at any moment but never blocks time (free-changing
    /// environment variables).
    Lazy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn apply(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Integer expressions over slots; booleans are 0/1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(i64),
    Slot(SlotId),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Cmp(CmpOp, Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Whether state variable `sv` may take the value of the operand now.
    Allowed(usize, Box<Expr>),
}

impl Expr {
    pub const TRUE: Expr = Expr::Const(1);

    pub fn slot_eq(slot: SlotId, v: i64) -> Expr {
        Expr::Cmp(CmpOp::Eq, Box::new(Expr::Slot(slot)), Box::new(Expr::Const(v)))
    }

    pub fn slot_ne(slot: SlotId, v: i64) -> Expr {
        Expr::Cmp(CmpOp::Ne, Box::new(Expr::Slot(slot)), Box::new(Expr::Const(v)))
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Cmp(op, Box::new(a), Box::new(b))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }

    pub fn ite(c: Expr, a: Expr, b: Expr) -> Expr {
        Expr::Ite(Box::new(c), Box::new(a), Box::new(b))
    }

    /// Conjunction that drops trivially-true operands.
    pub fn and(parts: Vec<Expr>) -> Expr {
        let mut parts: Vec<Expr> = parts.into_iter().filter(|p| *p != Expr::TRUE).collect();
        match parts.len() {
            0 => Expr::TRUE,
            1 => parts.pop().unwrap(),
            _ => Expr::And(parts),
        }
    }

    pub fn or(mut parts: Vec<Expr>) -> Expr {
        match parts.len() {
            0 => Expr::Const(0),
            1 => parts.pop().unwrap(),
            _ => Expr::Or(parts),
        }
    }

    /// Σ [slot_i = v] over the given slots.
    pub fn count_eq(slots: &[SlotId], v: i64) -> Expr {
        let mut it = slots.iter().map(|&s| Expr::slot_eq(s, v));
        let first = it.next().unwrap_or(Expr::Const(0));
        it.fold(first, |acc, e| Expr::Add(Box::new(acc), Box::new(e)))
    }

    /// Slots read by this expression.
    pub fn reads(&self, out: &mut Vec<SlotId>) {
        match self {
            Expr::Const(_) => {}
            Expr::Slot(s) => out.push(*s),
            Expr::Not(e) => e.reads(out),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.reads(out)),
            Expr::Cmp(_, a, b) | Expr::Add(a, b) | Expr::Mul(a, b) => {
                a.reads(out);
                b.reads(out);
            }
            Expr::Ite(c, a, b) => {
                c.reads(out);
                a.reads(out);
                b.reads(out);
            }
            Expr::Allowed(_, e) => e.reads(out),
        }
    }
}

/// Provider interaction attached to a runtime transition. The node is the
/// transition's process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProviderCall {
    /// Start the node's action. The engine writes `ret` (0 pending, else the
    /// status code) and `pending` (1 while outstanding).
    StartAction { pending: SlotId, ret: SlotId },
    /// Halt the node's outstanding action, if any.
    HaltAction,
    /// Evaluate the node's condition into `ret`.
    CheckCondition { ret: SlotId },
    /// Ask the provider for the variable's next value.
    SetSv { sv: usize },
}

/// Observable event emitted when a transition fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventTag {
    Ticked,
    Returned(ReturnStatus),
    Halting,
    Halted,
    RootTerminal(Outcome),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub process: ProcId,
    pub from: LocId,
    pub to: LocId,
    pub guard: Expr,
    pub timing: Timing,
    /// Applied in order; each sees the writes before it.
    pub effects: Vec<(SlotId, Expr)>,
    pub call: Option<ProviderCall>,
    pub event: Option<EventTag>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotKind {
    Location(ProcId),
    Local(ProcId),
    Caller(NodeIdx),
    Status(NodeIdx),
    /// Enumerated variables share this slot with their process location.
    Sv(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    pub kind: SlotKind,
    pub min: i32,
    pub max: i32,
    pub init: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Node(NodeIdx),
    Sv(usize),
    Ticker,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessAutomaton {
    pub name: String,
    pub role: Role,
    pub locations: Vec<String>,
    /// Location 0 is always the initial one.
    pub loc_slot: SlotId,
    pub locals: Vec<(String, SlotId)>,
    /// Outgoing transitions per location, as indices into the model table.
    pub outgoing: Vec<Vec<TransId>>,
}

impl ProcessAutomaton {
    pub fn location(&self, name: &str) -> Option<LocId> {
        self.locations.iter().position(|l| l == name)
    }

    pub fn local(&self, name: &str) -> Option<SlotId> {
        self.locals.iter().find(|(n, _)| n == name).map(|(_, s)| *s)
    }
}

/// Argument as passed to providers; SV-dependent items are evaluated when
/// the call happens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgTemplate {
    Lit(String),
    Value(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeMeta {
    pub name: String,
    pub kind: NodeKind,
    pub id_attr: Option<String>,
    pub parent: Option<NodeIdx>,
    pub children: Vec<NodeIdx>,
    pub process: ProcId,
    pub caller: SlotId,
    pub rstatus: SlotId,
    pub args: Vec<ArgTemplate>,
    /// Action declared `:SF`: it must answer within the tick.
    pub immediate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvMeta {
    pub info: SvInfo,
    pub slot: SlotId,
    pub process: ProcId,
}

/// Who currently holds a node's tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallerRef {
    NoneCaller,
    /// The parent node, or `None` for the root (called by the ticker).
    Parent(Option<NodeIdx>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRecord {
    pub caller: CallerRef,
    pub rstatus: ReturnStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComposedModel {
    pub name: String,
    pub tick: TickSemantics,
    pub variant: Variant,
    pub slots: Vec<Slot>,
    pub processes: Vec<ProcessAutomaton>,
    pub transitions: Vec<Transition>,
    pub nodes: Vec<NodeMeta>,
    pub svs: Vec<SvMeta>,
    pub ticker: ProcId,
}

impl ComposedModel {
    pub fn initial_state(&self) -> Vec<i32> {
        self.slots.iter().map(|s| s.init).collect()
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeIdx> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn sv_by_name(&self, name: &str) -> Option<usize> {
        self.svs.iter().position(|s| s.info.name == name)
    }

    pub fn process_by_name(&self, name: &str) -> Option<ProcId> {
        self.processes.iter().position(|p| p.name == name)
    }

    pub fn location_of(&self, state: &[i32], p: ProcId) -> LocId {
        state[self.processes[p].loc_slot] as LocId
    }

    pub fn location_name(&self, state: &[i32], p: ProcId) -> &str {
        &self.processes[p].locations[self.location_of(state, p)]
    }

    pub fn record(&self, state: &[i32], n: NodeIdx) -> NodeRecord {
        let meta = &self.nodes[n];
        NodeRecord {
            caller: if state[meta.caller] == 0 { CallerRef::NoneCaller } else { CallerRef::Parent(meta.parent) },
            rstatus: ReturnStatus::from_code(state[meta.rstatus] as i64).expect("status slot in range"),
        }
    }

    /// Root outcome if the ticker has reached a terminal location.
    pub fn terminal_status(&self, state: &[i32]) -> Option<Outcome> {
        match self.location_name(state, self.ticker) {
            "success" => Some(Outcome::Success),
            "failure" => Some(Outcome::Failure),
            _ => None,
        }
    }

    /// One-line description of a transition for traces and dumps.
    pub fn transition_label(&self, t: TransId) -> String {
        let tr = &self.transitions[t];
        let p = &self.processes[tr.process];
        format!("{}:{}->{}", p.name, p.locations[tr.from], p.locations[tr.to])
    }

    /// Variable name for a slot, used in dumps.
    pub fn slot_name(&self, s: SlotId) -> &str {
        &self.slots[s].name
    }
}

impl fmt::Display for TickSemantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TickSemantics::RootOnly => "root",
            TickSemantics::Leaves => "leaves",
            TickSemantics::AllNodes => "all",
        })
    }
}
