//! Semantic checks, canonical naming and expression typing.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::ast::*;
use super::parse::value_to_expr;
use crate::status::ReturnStatus;

/// Index of a node in document pre-order (tree roots included).
pub type NodeId = usize;
pub type SvId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {path}: {reason}")]
pub struct SemanticError {
    pub path: String,
    pub pos: Pos,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub path: String,
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: warning: {}", self.pos, self.path, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Driven {
    /// Assigned somewhere by SetSV or `:=`.
    Program,
    /// Never assigned by the tree; changes spontaneously.
    Environment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SvDomain {
    /// Values are encoded as indices into `values`.
    Enum { values: Vec<String>, allowed: Vec<Vec<bool>> },
    Nat { min: i64, max: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SvInfo {
    pub name: String,
    pub domain: SvDomain,
    pub init: i64,
    pub driven: Driven,
}

impl SvInfo {
    pub fn min(&self) -> i64 {
        match &self.domain {
            SvDomain::Enum { .. } => 0,
            SvDomain::Nat { min, .. } => *min,
        }
    }

    pub fn max(&self) -> i64 {
        match &self.domain {
            SvDomain::Enum { values, .. } => values.len() as i64 - 1,
            SvDomain::Nat { max, .. } => *max,
        }
    }

    pub fn is_enum(&self) -> bool {
        matches!(self.domain, SvDomain::Enum { .. })
    }

    /// Whether the variable may move from `from` to `to`. Keeping the
    /// current value is always allowed.
    pub fn allowed(&self, from: i64, to: i64) -> bool {
        if to < self.min() || to > self.max() {
            return false;
        }
        if from == to {
            return true;
        }
        match &self.domain {
            SvDomain::Enum { allowed, .. } => allowed[from as usize][to as usize],
            SvDomain::Nat { .. } => true,
        }
    }

    /// Successor values other than `from` itself.
    pub fn changes_from(&self, from: i64) -> Vec<i64> {
        (self.min()..=self.max()).filter(|&v| v != from && self.allowed(from, v)).collect()
    }

    pub fn value_name(&self, v: i64) -> String {
        match &self.domain {
            SvDomain::Enum { values, .. } => {
                values.get(v as usize).cloned().unwrap_or_else(|| format!("<{v}>"))
            }
            SvDomain::Nat { .. } => v.to_string(),
        }
    }

    /// Parse a value: enum literals case-insensitively, integers for Nat.
    pub fn parse_value(&self, s: &str) -> Option<i64> {
        match &self.domain {
            SvDomain::Enum { values, .. } => {
                values.iter().position(|v| v.eq_ignore_ascii_case(s)).map(|i| i as i64)
            }
            SvDomain::Nat { min, max } => s.parse().ok().filter(|v| (min..=max).contains(&v)),
        }
    }
}

/// A type-checked Eval expression. Literals are already encoded
/// (enum index, status code or integer).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TypedExpr {
    Const(i64),
    Sv(SvId),
    NodeStatus(NodeId),
    Eq(Box<TypedExpr>, Box<TypedExpr>),
    Not(Box<TypedExpr>),
    Add(Box<TypedExpr>, Box<TypedExpr>),
    Mul(Box<TypedExpr>, Box<TypedExpr>),
    /// Only ever at the top of an Eval.
    Assign(SvId, Box<TypedExpr>),
}

/// One element of an `:args` list, as handed to providers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArgItem {
    /// Number or identifier, verbatim.
    Lit(String),
    /// `$sv`, read when the provider is called.
    Sv(SvId),
    /// Nested arithmetic over SVs.
    Expr(TypedExpr),
    /// `$name` that does not name an SV; passed through untouched.
    Opaque(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Params {
    None,
    Parallel { m: usize, halt: bool, wait: bool },
    Reactive { halt: bool },
    Repeat { times: u32 },
    Retry { attempts: u32 },
    Recovery { retries: u32 },
    /// Ticks between child completions, at least 1.
    Rate { period: u32 },
    Action { no_running: bool },
    SetSv { sv: SvId },
    Eval(TypedExpr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub kind: NodeKind,
    pub name: String,
    pub id_attr: Option<String>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub tree: usize,
    pub params: Params,
    pub args: Vec<ArgItem>,
    pub pos: Pos,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeInfo {
    pub name: String,
    pub root: NodeId,
    /// All nodes of this tree, in pre-order (a contiguous id range).
    pub nodes: std::ops::Range<NodeId>,
}

#[derive(Debug, Clone)]
pub struct ValidatedSpec {
    pub spec: BtSpec,
    pub svs: Vec<SvInfo>,
    pub nodes: Vec<NodeInfo>,
    pub trees: Vec<TreeInfo>,
    pub warnings: Vec<Warning>,
}

impl ValidatedSpec {
    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn sv_by_name(&self, name: &str) -> Option<SvId> {
        self.svs.iter().position(|s| s.name == name)
    }

    pub fn tree_by_name(&self, name: &str) -> Option<usize> {
        self.trees.iter().position(|t| t.name == name)
    }
}

struct Ctx<'a> {
    errors: Vec<SemanticError>,
    warnings: Vec<Warning>,
    svs: &'a [SvInfo],
    sv_index: HashMap<&'a str, SvId>,
}

impl Ctx<'_> {
    fn err(&mut self, path: &str, pos: Pos, reason: impl Into<String>) {
        self.errors.push(SemanticError { path: path.to_string(), pos, reason: reason.into() });
    }

    fn warn(&mut self, path: &str, pos: Pos, message: impl Into<String>) {
        self.warnings.push(Warning { path: path.to_string(), pos, message: message.into() });
    }
}

/// Validate a parsed document and assign canonical names.
pub fn validate(spec: BtSpec) -> Result<ValidatedSpec, Vec<SemanticError>> {
    let mut errors = Vec::new();
    let svs = check_svs(&spec, &mut errors);
    let mut ctx = Ctx {
        errors,
        warnings: Vec::new(),
        sv_index: svs.iter().enumerate().map(|(i, s)| (s.name.as_str(), i)).collect(),
        svs: &svs,
    };

    // Flatten every tree in pre-order and assign canonical names.
    let mut flat: Vec<(&NodeAst, Option<NodeId>, usize)> = Vec::new();
    for (t, tree) in spec.trees.iter().enumerate() {
        fn go<'a>(n: &'a NodeAst, parent: Option<NodeId>, t: usize, out: &mut Vec<(&'a NodeAst, Option<NodeId>, usize)>) {
            let me = out.len();
            out.push((n, parent, t));
            for c in &n.children {
                go(c, Some(me), t, out);
            }
        }
        go(tree, None, t, &mut flat);
    }
    let positions = |i: NodeId| spec.source_map.nodes.get(i).copied().unwrap_or_default();

    let mut names = Vec::with_capacity(flat.len());
    let mut k = 0usize;
    let mut tree_no = 0usize;
    for (node, parent, _) in &flat {
        let name_attr = node.attr("name").and_then(attr_text);
        let id_attr = node.attr("ID").and_then(attr_text);
        let name = if parent.is_none() {
            tree_no += 1;
            name_attr.or(id_attr).unwrap_or_else(|| format!("BehaviorTree{tree_no}"))
        } else {
            k += 1;
            match (name_attr, id_attr) {
                (Some(n), _) => n,
                (None, Some(id)) => format!("{id}_btn{k}"),
                (None, None) => format!("{}{k}_btn{k}", node.kind.name()),
            }
        };
        names.push(name);
    }

    let mut nodes: Vec<NodeInfo> = Vec::with_capacity(flat.len());
    for (i, (node, parent, t)) in flat.iter().enumerate() {
        let path = match parent {
            Some(p) => format!("{}/{}", nodes[*p].path, names[i]),
            None => names[i].clone(),
        };
        nodes.push(NodeInfo {
            kind: node.kind,
            name: names[i].clone(),
            id_attr: node.attr("ID").and_then(attr_text),
            parent: *parent,
            children: Vec::new(),
            tree: *t,
            params: Params::None,
            args: Vec::new(),
            pos: positions(i),
            path,
        });
        if let Some(p) = parent {
            nodes[*p].children.push(i);
        }
    }

    // Names must be unique document-wide.
    let mut seen: HashMap<&str, NodeId> = HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        if let Some(&first) = seen.get(n.name.as_str()) {
            let reason = format!("duplicate node name `{}` (first used at {})", n.name, nodes[first].pos);
            ctx.errors.push(SemanticError { path: n.path.clone(), pos: n.pos, reason });
        } else {
            seen.insert(&n.name, i);
        }
    }
    let name_index: HashMap<String, NodeId> = seen.iter().map(|(k, v)| (k.to_string(), *v)).collect();

    let mut trees = Vec::new();
    let mut start = 0;
    for tree in &spec.trees {
        let end = start + tree.size();
        trees.push(TreeInfo { name: names[start].clone(), root: start, nodes: start..end });
        start = end;
    }
    let mut tree_names = HashSet::new();
    for t in &trees {
        if !tree_names.insert(t.name.clone()) {
            let n = &nodes[t.root];
            ctx.err(&n.path, n.pos, format!("duplicate tree name `{}`", t.name));
        }
    }

    let mut assigned: HashSet<SvId> = HashSet::new();
    for i in 0..nodes.len() {
        let (ast, _, _) = flat[i];
        let (params, args) = check_node(&mut ctx, &nodes, i, ast, &name_index, &mut assigned);
        nodes[i].params = params;
        nodes[i].args = args;
    }

    let Ctx { errors, warnings, .. } = ctx;
    if !errors.is_empty() {
        return Err(errors);
    }
    let svs = svs
        .into_iter()
        .enumerate()
        .map(|(i, mut s)| {
            s.driven = if assigned.contains(&i) { Driven::Program } else { Driven::Environment };
            s
        })
        .collect();
    Ok(ValidatedSpec { spec, svs, nodes, trees, warnings })
}

fn attr_text(v: &Value) -> Option<String> {
    match v {
        Value::Atom(Atom::Ident(s)) | Value::Atom(Atom::Num(s)) => Some(s.clone()),
        _ => None,
    }
}

fn check_svs(spec: &BtSpec, errors: &mut Vec<SemanticError>) -> Vec<SvInfo> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, d) in spec.svs.iter().enumerate() {
        let pos = spec.source_map.svs.get(i).copied().unwrap_or_default();
        let mut err = |reason: String| errors.push(SemanticError { path: format!("defsv {}", d.name), pos, reason });
        if !seen.insert(d.name.clone()) {
            err(format!("duplicate state variable `{}`", d.name));
        }
        let (domain, init) = match &d.kind {
            SvKind::Enumerated { states, transitions } => {
                let mut lower = HashSet::new();
                for s in states {
                    if !lower.insert(s.to_ascii_lowercase()) {
                        err(format!("duplicate state `{s}`"));
                    }
                }
                let find = |s: &str| states.iter().position(|x| x.eq_ignore_ascii_case(s));
                let n = states.len();
                let allowed = match transitions {
                    Transitions::AllPairs => vec![vec![true; n]; n],
                    Transitions::Pairs(pairs) => {
                        let mut m = vec![vec![false; n]; n];
                        for (a, b) in pairs {
                            match (find(a), find(b)) {
                                (Some(x), Some(y)) => m[x][y] = true,
                                _ => err(format!("transition ({a} {b}) names an undeclared state")),
                            }
                        }
                        m
                    }
                };
                let init = match &d.init {
                    SvInit::Sym(s) => find(s).map(|x| x as i64).unwrap_or_else(|| {
                        err(format!("init `{s}` is not one of the declared states"));
                        0
                    }),
                    SvInit::Int(v) => {
                        err(format!("init `{v}` is not one of the declared states"));
                        0
                    }
                };
                (SvDomain::Enum { values: states.clone(), allowed }, init)
            }
            SvKind::BoundedNat { min, max } => {
                if min > max {
                    err(format!("min {min} exceeds max {max}"));
                }
                let init = match &d.init {
                    SvInit::Int(v) if (min..=max).contains(&v) => *v,
                    other => {
                        err(format!("init `{other}` is outside {min}..{max}"));
                        *min
                    }
                };
                (SvDomain::Nat { min: *min, max: *max }, init)
            }
        };
        out.push(SvInfo { name: d.name.clone(), domain, init, driven: Driven::Environment });
    }
    out
}

fn known_keys(kind: NodeKind) -> &'static [&'static str] {
    use NodeKind::*;
    match kind {
        Parallel | ParallelAll => &["success", "wait", "halt"],
        ReactiveSequence | ReactiveFallback => &["halt", "wait"],
        Repeat => &["repeat"],
        RetryUntilSuccessful => &["num_attempts", "num_retries"],
        Recovery => &["num_retries", "retry"],
        RateController => &["hz", "args"],
        Action => &["args", "SF"],
        Condition => &["args"],
        SetSV => &["sv", "args"],
        _ => &[],
    }
}

fn check_node(
    ctx: &mut Ctx<'_>,
    nodes: &[NodeInfo],
    i: NodeId,
    ast: &NodeAst,
    names: &HashMap<String, NodeId>,
    assigned: &mut HashSet<SvId>,
) -> (Params, Vec<ArgItem>) {
    let info = &nodes[i];
    let (path, pos) = (info.path.clone(), info.pos);
    let n = ast.children.len();
    let kind = ast.kind;

    for a in &ast.attrs {
        if !matches!(a.key.as_str(), "ID" | "name") && !known_keys(kind).contains(&a.key.as_str()) {
            ctx.warn(&path, pos, format!("unknown keyword `:{}` on {kind} is kept but ignored", a.key));
        }
    }
    for key in ["ID", "name"] {
        if let Some(v) = ast.attr(key) {
            if attr_text(v).is_none() {
                ctx.err(&path, pos, format!(":{key} expects an identifier"));
            }
        }
    }

    let arity_ok = match kind.class() {
        KindClass::Root | KindClass::Decorator => n == 1,
        KindClass::Leaf => n == 0,
        KindClass::Control if kind == NodeKind::Recovery => n == 2,
        KindClass::Control => n >= 1,
    };
    if !arity_ok {
        let want = match kind.class() {
            KindClass::Root | KindClass::Decorator => "exactly 1 child".to_string(),
            KindClass::Leaf => "no children".to_string(),
            KindClass::Control if kind == NodeKind::Recovery => "exactly 2 children".to_string(),
            KindClass::Control => "at least 1 child".to_string(),
        };
        ctx.err(&path, pos, format!("{kind} requires {want}, found {n}"));
    }
    if kind != NodeKind::Eval && ast.expr.is_some() {
        ctx.err(&path, pos, format!("{kind} cannot carry an expression"));
    }

    let flag = |ctx: &mut Ctx<'_>, key: &str| -> bool {
        match ast.attr(key) {
            None => false,
            Some(v) => match v.as_int() {
                Some(0) => false,
                Some(1) => true,
                _ => {
                    ctx.err(&path, pos, format!(":{key} expects 0 or 1"));
                    false
                }
            },
        }
    };
    let count = |ctx: &mut Ctx<'_>, keys: &[&str], min: i64, default: Option<i64>| -> u32 {
        let found = keys.iter().find_map(|k| ast.attr(k).map(|v| (k, v)));
        match found {
            Some((k, v)) => match v.as_int() {
                Some(x) if x >= min && x <= u32::MAX as i64 => x as u32,
                _ => {
                    ctx.err(&path, pos, format!(":{k} expects an integer ≥ {min}"));
                    min.max(0) as u32
                }
            },
            None => match default {
                Some(d) => d as u32,
                None => {
                    ctx.err(&path, pos, format!("{kind} requires :{}", keys[0]));
                    min.max(0) as u32
                }
            },
        }
    };

    let params = match kind {
        NodeKind::Parallel | NodeKind::ParallelAll => {
            let m = match (kind, ast.attr("success")) {
                (NodeKind::ParallelAll, None) => n as i64,
                (NodeKind::ParallelAll, Some(v)) => {
                    if v.as_int() != Some(n as i64) {
                        ctx.warn(&path, pos, "ParallelAll ignores :success; its threshold is the child count");
                    }
                    n as i64
                }
                (_, Some(v)) => v.as_int().unwrap_or(-1),
                (_, None) => {
                    ctx.err(&path, pos, "Parallel requires :success");
                    1
                }
            };
            if m < 1 || m > n as i64 {
                ctx.err(&path, pos, format!("Parallel :success {m} must be between 1 and the child count {n}"));
            }
            let halt = flag(ctx, "halt");
            let wait = flag(ctx, "wait");
            Params::Parallel { m: m.clamp(1, n.max(1) as i64) as usize, halt, wait }
        }
        NodeKind::ReactiveSequence | NodeKind::ReactiveFallback => {
            if ast.attr("wait").is_some() {
                ctx.warn(&path, pos, ":wait has no effect on reactive nodes (only :halt is honoured)");
            }
            Params::Reactive { halt: flag(ctx, "halt") }
        }
        NodeKind::Repeat => Params::Repeat { times: count(ctx, &["repeat"], 1, None) },
        NodeKind::RetryUntilSuccessful => {
            Params::Retry { attempts: count(ctx, &["num_attempts", "num_retries"], 1, None) }
        }
        NodeKind::Recovery => Params::Recovery { retries: count(ctx, &["num_retries", "retry"], 0, Some(1)) },
        NodeKind::RateController => {
            let hz = ast.attr("hz").and_then(Value::as_f64).or_else(|| match ast.attr("args") {
                Some(Value::List(items)) => items
                    .chunks(2)
                    .find(|kv| kv[0].as_ident() == Some("hz"))
                    .and_then(|kv| kv.get(1))
                    .and_then(Value::as_f64),
                _ => None,
            });
            let hz = hz.unwrap_or_else(|| {
                ctx.warn(&path, pos, "RateController without :hz defaults to 10 Hz");
                10.0
            });
            if !(hz > 0.0) || !hz.is_finite() {
                ctx.err(&path, pos, "RateController :hz must be positive");
                Params::Rate { period: 1 }
            } else {
                Params::Rate { period: ((1.0 / hz).ceil() as u32).max(1) }
            }
        }
        NodeKind::Action => Params::Action { no_running: ast.attr("SF").is_some() },
        NodeKind::SetSV => match ast.attr("sv").and_then(Value::as_ident) {
            Some(name) => match ctx.sv_index.get(name) {
                Some(&sv) => {
                    assigned.insert(sv);
                    Params::SetSv { sv }
                }
                None => {
                    ctx.err(&path, pos, format!("SetSV targets undeclared state variable `{name}`"));
                    Params::None
                }
            },
            None => {
                ctx.err(&path, pos, "SetSV requires :sv");
                Params::None
            }
        },
        NodeKind::Eval => match &ast.expr {
            None => {
                ctx.err(&path, pos, "Eval requires an expression");
                Params::None
            }
            Some(e) => match type_eval(ctx, e, names) {
                Ok(t) => {
                    if let TypedExpr::Assign(sv, _) = &t {
                        assigned.insert(*sv);
                    }
                    Params::Eval(t)
                }
                Err(reason) => {
                    ctx.err(&path, pos, reason);
                    Params::None
                }
            },
        },
        _ => Params::None,
    };

    let args = match ast.attr("args") {
        Some(Value::List(items)) => items
            .iter()
            .map(|v| resolve_arg(ctx, &path, pos, v))
            .collect(),
        Some(Value::Flag) | None => Vec::new(),
        Some(other) => vec![resolve_arg(ctx, &path, pos, other)],
    };
    (params, args)
}

fn resolve_arg(ctx: &mut Ctx<'_>, path: &str, pos: Pos, v: &Value) -> ArgItem {
    match v {
        Value::Atom(Atom::ArgRef(name)) => match ctx.sv_index.get(name.as_str()) {
            Some(&sv) if !ctx.svs[sv].is_enum() => ArgItem::Sv(sv),
            Some(_) => {
                ctx.err(path, pos, format!("`${name}` refers to an enumerated state variable; only bounded ones may be passed"));
                ArgItem::Opaque(format!("${name}"))
            }
            None => {
                ctx.warn(path, pos, format!("`${name}` is not a state variable; passed through unresolved"));
                ArgItem::Opaque(format!("${name}"))
            }
        },
        Value::Atom(a) => ArgItem::Lit(a.to_string()),
        Value::List(_) => {
            let typed = value_to_expr(v).ok_or_else(|| "malformed argument expression".to_string()).and_then(|e| {
                let (t, ty) = type_expr(ctx, &e, &HashMap::new(), None)?;
                if ty != Ty::Int {
                    return Err(format!("argument expression `{e}` must be numeric"));
                }
                Ok(t)
            });
            match typed {
                Ok(t) => ArgItem::Expr(t),
                Err(reason) => {
                    ctx.err(path, pos, reason);
                    ArgItem::Lit(v.to_string())
                }
            }
        }
        Value::Flag => ArgItem::Lit(String::new()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
    Enum(SvId),
    Status,
}

fn type_eval(ctx: &Ctx<'_>, e: &Expression, names: &HashMap<String, NodeId>) -> Result<TypedExpr, String> {
    if let Expression::Assign(sv, rhs) = e {
        let id = *ctx.sv_index.get(sv.as_str()).ok_or_else(|| format!("`{sv}` is not a declared state variable"))?;
        let want = if ctx.svs[id].is_enum() { Ty::Enum(id) } else { Ty::Int };
        let (t, ty) = type_expr(ctx, rhs, names, Some(want))?;
        if ty != want {
            return Err(format!("cannot assign {} to `{sv}`", ty_name(ctx, ty)));
        }
        return Ok(TypedExpr::Assign(id, Box::new(t)));
    }
    let (t, ty) = type_expr(ctx, e, names, Some(Ty::Bool))?;
    if ty != Ty::Bool {
        return Err(format!("Eval expression `{e}` is {}, not a condition or assignment", ty_name(ctx, ty)));
    }
    Ok(t)
}

fn ty_name(ctx: &Ctx<'_>, ty: Ty) -> String {
    match ty {
        Ty::Int => "an integer".into(),
        Ty::Bool => "a condition".into(),
        Ty::Enum(sv) => format!("a value of `{}`", ctx.svs[sv].name),
        Ty::Status => "a node status".into(),
    }
}

fn is_literal_sym(ctx: &Ctx<'_>, e: &Expression) -> bool {
    matches!(e, Expression::Sym(s) if !ctx.sv_index.contains_key(s.as_str()))
}

fn type_expr(
    ctx: &Ctx<'_>,
    e: &Expression,
    names: &HashMap<String, NodeId>,
    want: Option<Ty>,
) -> Result<(TypedExpr, Ty), String> {
    let sv_ref = |name: &str| -> Option<(TypedExpr, Ty)> {
        let id = *ctx.sv_index.get(name)?;
        Some((TypedExpr::Sv(id), if ctx.svs[id].is_enum() { Ty::Enum(id) } else { Ty::Int }))
    };
    let int_operand = |x: &Expression| -> Result<TypedExpr, String> {
        let (t, ty) = type_expr(ctx, x, names, Some(Ty::Int))?;
        if ty != Ty::Int {
            return Err(format!("arithmetic needs integers, `{x}` is {}", ty_name(ctx, ty)));
        }
        Ok(t)
    };
    Ok(match e {
        Expression::Num(n) => (TypedExpr::Const(*n), Ty::Int),
        Expression::Arg(name) => sv_ref(name).ok_or_else(|| format!("`${name}` is not a declared state variable"))?,
        Expression::Sym(s) => {
            if let Some(r) = sv_ref(s) {
                r
            } else {
                match want {
                    Some(Ty::Enum(sv)) => {
                        let v = ctx.svs[sv]
                            .parse_value(s)
                            .ok_or_else(|| format!("`{s}` is not a value of `{}`", ctx.svs[sv].name))?;
                        (TypedExpr::Const(v), Ty::Enum(sv))
                    }
                    Some(Ty::Status) => {
                        let st = ReturnStatus::parse(s)
                            .filter(|st| matches!(st, ReturnStatus::Success | ReturnStatus::Failure | ReturnStatus::Running))
                            .ok_or_else(|| format!("`{s}` is not a status (success, failure, running)"))?;
                        (TypedExpr::Const(st.code()), Ty::Status)
                    }
                    _ => return Err(format!("`{s}` is neither a state variable nor a literal of a known type")),
                }
            }
        }
        Expression::Status(node) => {
            let id = *names.get(node).ok_or_else(|| format!("`{node}.rstatus` refers to an unknown node"))?;
            (TypedExpr::NodeStatus(id), Ty::Status)
        }
        Expression::Eq(l, r) => {
            let (lt, rt) = if is_literal_sym(ctx, l) && !is_literal_sym(ctx, r) {
                let (rt, rty) = type_expr(ctx, r, names, None)?;
                let (lt, lty) = type_expr(ctx, l, names, Some(rty))?;
                ((lt, lty), (rt, rty))
            } else {
                let (lt, lty) = type_expr(ctx, l, names, None)?;
                let (rt, rty) = type_expr(ctx, r, names, Some(lty))?;
                ((lt, lty), (rt, rty))
            };
            if lt.1 != rt.1 {
                return Err(format!("cannot compare {} with {} in `{e}`", ty_name(ctx, lt.1), ty_name(ctx, rt.1)));
            }
            (TypedExpr::Eq(Box::new(lt.0), Box::new(rt.0)), Ty::Bool)
        }
        Expression::Not(x) => {
            let (t, ty) = type_expr(ctx, x, names, Some(Ty::Bool))?;
            if ty != Ty::Bool {
                return Err(format!("`~` needs a condition, `{x}` is {}", ty_name(ctx, ty)));
            }
            (TypedExpr::Not(Box::new(t)), Ty::Bool)
        }
        Expression::Add(l, r) => (TypedExpr::Add(Box::new(int_operand(l)?), Box::new(int_operand(r)?)), Ty::Int),
        Expression::Mul(l, r) => (TypedExpr::Mul(Box::new(int_operand(l)?), Box::new(int_operand(r)?)), Ty::Int),
        Expression::Assign(..) => return Err("`:=` is only allowed as the whole Eval expression".into()),
    })
}
