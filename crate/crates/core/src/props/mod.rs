//! State predicates and temporal properties over explored graphs.

mod check;
mod parse;
mod report;

use thiserror::Error;

use crate::model::{CmpOp, ComposedModel, Expr, NodeIdx};
use crate::status::{Outcome, ReturnStatus};
use crate::syntax::{NodeKind, Pos};

pub use check::{check, Verdict, VerdictValue};
pub use parse::{parse_properties, PropParseError};
pub use report::{write_report, ReportLine};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    NodeAt { node: String, loc: String },
    SvCmp { sv: String, op: CmpOp, value: String },
    Status { node: String, op: CmpOp, status: String },
    Local { node: String, var: String, op: CmpOp, value: i64 },
    Terminal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pred {
    True,
    Atom(Atom, Pos),
    Not(Box<Pred>),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropKind {
    Absent(Pred),
    Present(Pred),
    /// No reachable non-terminal state without successors.
    DeadlockFree,
    /// From every p-state, every path meets q after between `a` and `b`
    /// time steps.
    LeadsTo { p: Pred, q: Pred, a: u32, b: u32 },
    /// From every p-state, every path eventually meets q.
    ImpliesEventually(Pred, Pred),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub kind: PropKind,
    pub expect: Option<bool>,
    pub pos: Pos,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{pos}: {msg}")]
pub struct ResolveError {
    pub pos: Pos,
    pub msg: String,
}

fn node(m: &ComposedModel, name: &str, pos: Pos) -> Result<NodeIdx, ResolveError> {
    m.node_by_name(name).ok_or_else(|| ResolveError { pos, msg: format!("unknown node `{name}`") })
}

/// Turn a predicate into a model expression, resolving every name.
pub fn resolve(m: &ComposedModel, p: &Pred) -> Result<Expr, ResolveError> {
    Ok(match p {
        Pred::True => Expr::TRUE,
        Pred::Not(a) => Expr::not(resolve(m, a)?),
        Pred::And(a, b) => Expr::And(vec![resolve(m, a)?, resolve(m, b)?]),
        Pred::Or(a, b) => Expr::Or(vec![resolve(m, a)?, resolve(m, b)?]),
        Pred::Atom(atom, pos) => {
            let pos = *pos;
            let err = |msg: String| ResolveError { pos, msg };
            match atom {
                Atom::NodeAt { node: n, loc } => {
                    let proc = &m.processes[m.nodes[node(m, n, pos)?].process];
                    let l = proc.location(loc).ok_or_else(|| err(format!("node `{n}` has no location `{loc}`")))?;
                    Expr::slot_eq(proc.loc_slot, l as i64)
                }
                Atom::SvCmp { sv, op, value } => {
                    let j = m.sv_by_name(sv).ok_or_else(|| err(format!("unknown variable `{sv}`")))?;
                    let info = &m.svs[j].info;
                    if info.is_enum() && !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                        return Err(err(format!("`{sv}` is enumerated; only = and != apply")));
                    }
                    let v = info.parse_value(value).or_else(|| (!info.is_enum()).then(|| value.parse().ok()).flatten());
                    let v = v.ok_or_else(|| err(format!("`{value}` is not a value of `{sv}`")))?;
                    Expr::cmp(*op, Expr::Slot(m.svs[j].slot), Expr::Const(v))
                }
                Atom::Status { node: n, op, status } => {
                    let st = ReturnStatus::parse(status).ok_or_else(|| err(format!("unknown status `{status}`")))?;
                    Expr::cmp(*op, Expr::Slot(m.nodes[node(m, n, pos)?].rstatus), Expr::Const(st.code()))
                }
                Atom::Local { node: n, var, op, value } => {
                    let proc = &m.processes[m.nodes[node(m, n, pos)?].process];
                    let s = proc.local(var).ok_or_else(|| err(format!("node `{n}` has no variable `{var}`")))?;
                    Expr::cmp(*op, Expr::Slot(s), Expr::Const(*value))
                }
                Atom::Terminal(o) => {
                    let o = Outcome::parse(o).ok_or_else(|| err(format!("expected success or failure, found `{o}`")))?;
                    let t = &m.processes[m.ticker];
                    Expr::slot_eq(t.loc_slot, t.location(&o.to_string()).expect("ticker terminal") as i64)
                }
            }
        }
    })
}

fn at(node: &str, loc: &str) -> Pred {
    Pred::Atom(Atom::NodeAt { node: node.into(), loc: loc.into() }, Pos::default())
}

fn status(node: &str, st: ReturnStatus) -> Pred {
    Pred::Atom(Atom::Status { node: node.into(), op: CmpOp::Eq, status: st.name().into() }, Pos::default())
}

/// Per-node reachability questions plus deadlock freedom.
pub fn default_properties(m: &ComposedModel) -> Vec<Property> {
    let mut out = Vec::new();
    let mut push = |name: String, kind| out.push(Property { name, kind, expect: None, pos: Pos::default() });
    for n in &m.nodes {
        let name = &n.name;
        push(format!("{name}.done"), PropKind::Present(at(name, "done")));
        push(format!("{name}.success"), PropKind::Present(status(name, ReturnStatus::Success)));
        push(format!("{name}.failure"), PropKind::Present(status(name, ReturnStatus::Failure)));
        push(format!("{name}.halted"), PropKind::Present(at(name, "halted")));
        if n.kind == NodeKind::Action {
            push(format!("{name}.running"), PropKind::Present(status(name, ReturnStatus::Running)));
        }
    }
    push("deadlock_free".into(), PropKind::DeadlockFree);
    out
}
