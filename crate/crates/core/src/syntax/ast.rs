//! Untyped-but-structured AST for `.btf` documents.
//!
//! The AST keeps what the author wrote (attribute order, literal spelling of
//! numbers, enum-literal case); every normalisation happens in
//! [`validate`](super::validate), so `parse ∘ emit` is the identity here.

use std::fmt;

/// 1-based line/column of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

macro_rules! node_kinds {
    ($($kind:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum NodeKind { $($kind),* }

        impl NodeKind {
            pub const ALL: &'static [NodeKind] = &[$(NodeKind::$kind),*];

            pub fn name(self) -> &'static str {
                match self { $(NodeKind::$kind => stringify!($kind)),* }
            }

            pub fn from_name(s: &str) -> Option<NodeKind> {
                match s { $(stringify!($kind) => Some(NodeKind::$kind),)* _ => None }
            }
        }
    };
}

node_kinds!(
    BehaviorTree,
    Sequence,
    ReactiveSequence,
    SequenceWithMemory,
    Fallback,
    ReactiveFallback,
    Parallel,
    ParallelAll,
    Inverter,
    ForceFailure,
    ForceSuccess,
    Repeat,
    RetryUntilSuccessful,
    KeepRunningUntilFailure,
    Recovery,
    PipelineSequence,
    RoundRobin,
    RateController,
    Action,
    Condition,
    SetSV,
    Eval,
);

/// Structural class of a node kind, which fixes its arity rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindClass {
    Root,
    Control,
    Decorator,
    Leaf,
}

impl NodeKind {
    pub fn class(self) -> KindClass {
        use NodeKind::*;
        match self {
            BehaviorTree => KindClass::Root,
            Sequence | ReactiveSequence | SequenceWithMemory | Fallback | ReactiveFallback
            | Parallel | ParallelAll | Recovery | PipelineSequence | RoundRobin => {
                KindClass::Control
            }
            Inverter | ForceFailure | ForceSuccess | Repeat | RetryUntilSuccessful
            | KeepRunningUntilFailure | RateController => KindClass::Decorator,
            Action | Condition | SetSV | Eval => KindClass::Leaf,
        }
    }

    pub fn is_leaf(self) -> bool {
        self.class() == KindClass::Leaf
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Eval operators. `:=` is lexed as an operator, never as a keyword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Eq,
    Not,
    Assign,
    Add,
    Mul,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Eq => "=",
            Op::Not => "~",
            Op::Assign => ":=",
            Op::Add => "+",
            Op::Mul => "*",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Op> {
        Some(match s {
            "=" => Op::Eq,
            "~" => Op::Not,
            ":=" => Op::Assign,
            "+" => Op::Add,
            "*" => Op::Mul,
            _ => return None,
        })
    }
}

/// A classified atom. Numbers keep their source spelling (`1.0` vs `1`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    Num(String),
    Ident(String),
    Keyword(String),
    /// `$name`
    ArgRef(String),
    /// `name.rstatus`
    StatusRef(String),
    Op(Op),
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Num(s) | Atom::Ident(s) => f.write_str(s),
            Atom::Keyword(s) => write!(f, ":{s}"),
            Atom::ArgRef(s) => write!(f, "${s}"),
            Atom::StatusRef(s) => write!(f, "{s}.rstatus"),
            Atom::Op(op) => f.write_str(op.symbol()),
        }
    }
}

/// Value of a keyword attribute.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    /// A keyword with no value, e.g. `:SF`.
    Flag,
    Atom(Atom),
    List(Vec<Value>),
}

impl Value {
    pub fn as_ident(&self) -> Option<&str> {
        match self {
            Value::Atom(Atom::Ident(s)) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Atom(Atom::Num(s)) => s.parse().ok(),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Atom(Atom::Num(s)) => s.parse().ok(),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Flag => Ok(()),
            Value::Atom(a) => a.fmt(f),
            Value::List(items) => {
                f.write_str("(")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    v.fmt(f)?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attr {
    pub key: String,
    pub value: Value,
}

/// Eval expression as written. Symbols are resolved (SV name vs. enum
/// literal vs. status literal) during validation, where types are known.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expression {
    Num(i64),
    Sym(String),
    Status(String),
    Arg(String),
    Eq(Box<Expression>, Box<Expression>),
    Not(Box<Expression>),
    Assign(String, Box<Expression>),
    Add(Box<Expression>, Box<Expression>),
    Mul(Box<Expression>, Box<Expression>),
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(n) => write!(f, "{n}"),
            Expression::Sym(s) => f.write_str(s),
            Expression::Status(s) => write!(f, "{s}.rstatus"),
            Expression::Arg(s) => write!(f, "${s}"),
            Expression::Eq(l, r) => write!(f, "(= {l} {r})"),
            Expression::Not(e) => write!(f, "(~ {e})"),
            Expression::Assign(sv, e) => write!(f, "(:= {sv} {e})"),
            Expression::Add(l, r) => write!(f, "(+ {l} {r})"),
            Expression::Mul(l, r) => write!(f, "(* {l} {r})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeAst {
    pub kind: NodeKind,
    pub attrs: Vec<Attr>,
    pub children: Vec<NodeAst>,
    pub expr: Option<Expression>,
}

impl NodeAst {
    pub fn new(kind: NodeKind) -> Self {
        NodeAst { kind, attrs: Vec::new(), children: Vec::new(), expr: None }
    }

    /// First attribute with the given key.
    pub fn attr(&self, key: &str) -> Option<&Value> {
        self.attrs.iter().find(|a| a.key == key).map(|a| &a.value)
    }

    pub fn with_attr(mut self, key: &str, value: Value) -> Self {
        self.attrs.push(Attr { key: key.to_string(), value });
        self
    }

    pub fn with_child(mut self, child: NodeAst) -> Self {
        self.children.push(child);
        self
    }

    /// Number of nodes in this subtree, self included.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(NodeAst::size).sum::<usize>()
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, out: &mut Vec<&'a NodeAst>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SvInit {
    Int(i64),
    Sym(String),
}

impl fmt::Display for SvInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SvInit::Int(n) => write!(f, "{n}"),
            SvInit::Sym(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transitions {
    AllPairs,
    Pairs(Vec<(String, String)>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SvKind {
    Enumerated { states: Vec<String>, transitions: Transitions },
    BoundedNat { min: i64, max: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvDecl {
    pub name: String,
    pub kind: SvKind,
    pub init: SvInit,
}

/// Where things came from. Not part of structural equality.
#[derive(Debug, Clone, Default)]
pub struct SourceMap {
    /// Positions of every node, in document pre-order (tree roots included).
    pub nodes: Vec<Pos>,
    pub svs: Vec<Pos>,
}

#[derive(Debug, Clone, Default)]
pub struct BtSpec {
    pub svs: Vec<SvDecl>,
    pub trees: Vec<NodeAst>,
    pub source_map: SourceMap,
}

impl PartialEq for BtSpec {
    fn eq(&self, other: &Self) -> bool {
        self.svs == other.svs && self.trees == other.trees
    }
}

impl Eq for BtSpec {}

impl BtSpec {
    /// Total node count over all trees, roots included.
    pub fn node_count(&self) -> usize {
        self.trees.iter().map(NodeAst::size).sum()
    }
}
