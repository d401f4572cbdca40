use super::ast::*;
use super::sexpr::{read_document, SExpr};
use super::ParseError;

/// Parse a `.btf` document into a [`BtSpec`].
pub fn parse_btf(text: &str) -> Result<BtSpec, ParseError> {
    let doc = read_document(text)?;
    let SExpr::List(forms, _) = doc else { unreachable!("reader returns a list") };
    let mut spec = BtSpec::default();
    for form in forms {
        let pos = form.pos();
        let SExpr::List(items, _) = form else {
            return Err(ParseError::Syntax { pos, detail: "expected `(defsv ...)` or `(BehaviorTree ...)`".into() });
        };
        match items.first() {
            Some(SExpr::Atom(Atom::Ident(h), _)) if h == "defsv" => {
                spec.svs.push(parse_defsv(&items, pos)?);
                spec.source_map.svs.push(pos);
            }
            Some(SExpr::Atom(Atom::Ident(h), _)) if h == "BehaviorTree" => {
                let tree = parse_node(&items, pos, &mut spec.source_map.nodes, 0)?;
                spec.trees.push(tree);
            }
            Some(SExpr::Atom(Atom::Ident(h), p)) => {
                return Err(ParseError::UnknownKind { pos: *p, kind: h.clone() });
            }
            _ => {
                return Err(ParseError::Syntax { pos, detail: "expected `(defsv ...)` or `(BehaviorTree ...)`".into() })
            }
        }
    }
    if spec.trees.is_empty() {
        return Err(ParseError::Syntax { pos: Pos { line: 1, col: 1 }, detail: "document has no BehaviorTree".into() });
    }
    Ok(spec)
}

fn to_value(e: &SExpr) -> Value {
    match e {
        SExpr::Atom(a, _) => Value::Atom(a.clone()),
        SExpr::List(items, _) => Value::List(items.iter().map(to_value).collect()),
    }
}

fn is_node_form(e: &SExpr) -> bool {
    matches!(e, SExpr::List(items, _)
        if matches!(items.first(), Some(SExpr::Atom(Atom::Ident(h), _)) if NodeKind::from_name(h).is_some()))
}

/// Keyword/value pairs: a keyword directly followed by `)`, another keyword
/// or a child node is a flag.
fn take_value(rest: &[SExpr]) -> Option<&SExpr> {
    match rest.first() {
        None => None,
        Some(SExpr::Atom(Atom::Keyword(_), _)) => None,
        Some(e) if is_node_form(e) => None,
        Some(e) => Some(e),
    }
}

fn parse_node(items: &[SExpr], pos: Pos, positions: &mut Vec<Pos>, depth: usize) -> Result<NodeAst, ParseError> {
    let kind = match items.first() {
        Some(SExpr::Atom(Atom::Ident(h), p)) => {
            NodeKind::from_name(h).ok_or_else(|| ParseError::UnknownKind { pos: *p, kind: h.clone() })?
        }
        Some(other) => {
            return Err(ParseError::Syntax { pos: other.pos(), detail: "expected a node kind".into() })
        }
        None => return Err(ParseError::Syntax { pos, detail: "empty node".into() }),
    };
    if depth > 0 && kind == NodeKind::BehaviorTree {
        return Err(ParseError::Syntax { pos, detail: "BehaviorTree may only appear at the top level".into() });
    }
    positions.push(pos);
    let mut node = NodeAst::new(kind);
    let mut i = 1;
    while i < items.len() {
        match &items[i] {
            SExpr::Atom(Atom::Keyword(k), _) => {
                let value = match take_value(&items[i + 1..]) {
                    Some(v) => {
                        i += 1;
                        to_value(v)
                    }
                    None => Value::Flag,
                };
                node.attrs.push(Attr { key: k.clone(), value });
            }
            SExpr::List(_, p) if kind == NodeKind::Eval => {
                if node.expr.is_some() {
                    return Err(ParseError::MalformedExpr { pos: *p, detail: "Eval takes exactly one expression".into() });
                }
                node.expr = Some(parse_expr(&items[i], true)?);
            }
            SExpr::List(sub, p) => {
                node.children.push(parse_node(sub, *p, positions, depth + 1)?);
            }
            SExpr::Atom(a, p) => {
                return Err(ParseError::MalformedKeyword {
                    pos: *p,
                    detail: format!("value `{a}` is not preceded by a keyword"),
                })
            }
        }
        i += 1;
    }
    Ok(node)
}

fn parse_expr(e: &SExpr, top: bool) -> Result<Expression, ParseError> {
    let bad = |pos, detail: String| ParseError::MalformedExpr { pos, detail };
    match e {
        SExpr::Atom(a, p) => match a {
            Atom::Num(s) => s.parse().map(Expression::Num).map_err(|_| bad(*p, format!("`{s}` is not an integer"))),
            Atom::Ident(s) => Ok(Expression::Sym(s.clone())),
            Atom::StatusRef(s) => Ok(Expression::Status(s.clone())),
            Atom::ArgRef(s) => Ok(Expression::Arg(s.clone())),
            Atom::Keyword(_) | Atom::Op(_) => Err(bad(*p, format!("unexpected `{a}`"))),
        },
        SExpr::List(items, p) => {
            let op = match items.first() {
                Some(SExpr::Atom(Atom::Op(op), _)) => *op,
                Some(other) => return Err(bad(other.pos(), "expected one of = ~ := + *".into())),
                None => return Err(bad(*p, "empty expression".into())),
            };
            let args = &items[1..];
            let arity = |n: usize| -> Result<(), ParseError> {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(bad(*p, format!("`{}` takes {n} operand(s), got {}", op.symbol(), args.len())))
                }
            };
            Ok(match op {
                Op::Eq => {
                    arity(2)?;
                    Expression::Eq(Box::new(parse_expr(&args[0], false)?), Box::new(parse_expr(&args[1], false)?))
                }
                Op::Not => {
                    arity(1)?;
                    Expression::Not(Box::new(parse_expr(&args[0], false)?))
                }
                Op::Assign => {
                    if !top {
                        return Err(bad(*p, "`:=` is only allowed as the whole Eval expression".into()));
                    }
                    arity(2)?;
                    let SExpr::Atom(Atom::Ident(sv), _) = &args[0] else {
                        return Err(bad(args[0].pos(), "`:=` needs a state-variable name".into()));
                    };
                    Expression::Assign(sv.clone(), Box::new(parse_expr(&args[1], false)?))
                }
                Op::Add | Op::Mul => {
                    if args.len() < 2 {
                        return Err(bad(*p, format!("`{}` takes at least 2 operands", op.symbol())));
                    }
                    let mut acc = parse_expr(&args[0], false)?;
                    for a in &args[1..] {
                        let rhs = Box::new(parse_expr(a, false)?);
                        acc = if op == Op::Add { Expression::Add(Box::new(acc), rhs) } else { Expression::Mul(Box::new(acc), rhs) };
                    }
                    acc
                }
            })
        }
    }
}

/// Parse one `:args`-style nested list as an expression (used by validation).
pub(crate) fn value_to_expr(v: &Value) -> Option<Expression> {
    fn conv(v: &Value) -> Option<SExpr> {
        let p = Pos::default();
        Some(match v {
            Value::Flag => return None,
            Value::Atom(a) => SExpr::Atom(a.clone(), p),
            Value::List(items) => SExpr::List(items.iter().map(conv).collect::<Option<_>>()?, p),
        })
    }
    parse_expr(&conv(v)?, false).ok()
}

fn parse_defsv(items: &[SExpr], pos: Pos) -> Result<SvDecl, ParseError> {
    let bad = |pos, detail: &str| ParseError::MalformedDefsv { pos, detail: detail.to_string() };
    let name = match items.get(1) {
        Some(SExpr::Atom(Atom::Ident(n), _)) => n.clone(),
        _ => return Err(bad(pos, "expected a state-variable name after defsv")),
    };
    let mut states: Option<Vec<String>> = None;
    let mut transitions: Option<Transitions> = None;
    let mut init: Option<SvInit> = None;
    let mut min: Option<i64> = None;
    let mut max: Option<i64> = None;

    let mut i = 2;
    while i < items.len() {
        let (key, kpos) = match &items[i] {
            SExpr::Atom(Atom::Keyword(k), p) => (k.as_str(), *p),
            other => return Err(bad(other.pos(), "expected a keyword")),
        };
        let value = items.get(i + 1).ok_or_else(|| bad(kpos, "keyword without value"))?;
        i += 2;
        let int_of = |v: &SExpr| match v {
            SExpr::Atom(Atom::Num(s), _) => s.parse::<i64>().ok(),
            _ => None,
        };
        match key {
            "states" => {
                let SExpr::List(xs, _) = value else { return Err(bad(value.pos(), ":states expects a list")) };
                let mut names = Vec::new();
                for x in xs {
                    match x {
                        SExpr::Atom(Atom::Ident(s), _) => names.push(s.clone()),
                        _ => return Err(bad(x.pos(), ":states entries must be identifiers")),
                    }
                }
                states = Some(names);
            }
            "transitions" => {
                transitions = Some(match value {
                    SExpr::Atom(Atom::Keyword(k), _) if k == "all" => Transitions::AllPairs,
                    SExpr::List(pairs, _) => {
                        let mut out = Vec::new();
                        for pr in pairs {
                            match pr {
                                SExpr::List(ab, _) => match ab.as_slice() {
                                    [SExpr::Atom(Atom::Ident(a), _), SExpr::Atom(Atom::Ident(b), _)] => {
                                        out.push((a.clone(), b.clone()))
                                    }
                                    _ => return Err(bad(pr.pos(), "transition pairs are `(from to)`")),
                                },
                                _ => return Err(bad(pr.pos(), "transition pairs are `(from to)`")),
                            }
                        }
                        Transitions::Pairs(out)
                    }
                    _ => return Err(bad(value.pos(), ":transitions expects :all or a list of pairs")),
                });
            }
            "init" => {
                init = Some(match value {
                    SExpr::Atom(Atom::Ident(s), _) => SvInit::Sym(s.clone()),
                    v => SvInit::Int(int_of(v).ok_or_else(|| bad(v.pos(), ":init expects a state or an integer"))?),
                });
            }
            "min" => min = Some(int_of(value).ok_or_else(|| bad(value.pos(), ":min expects an integer"))?),
            "max" => max = Some(int_of(value).ok_or_else(|| bad(value.pos(), ":max expects an integer"))?),
            _ => return Err(bad(kpos, &format!("unknown defsv keyword `:{key}`"))),
        }
    }

    let kind = match (states, min, max) {
        (Some(states), None, None) => {
            if states.is_empty() {
                return Err(bad(pos, ":states must not be empty"));
            }
            SvKind::Enumerated { states, transitions: transitions.unwrap_or(Transitions::AllPairs) }
        }
        (None, Some(min), Some(max)) => {
            if transitions.is_some() {
                return Err(bad(pos, ":transitions only applies to enumerated variables"));
            }
            SvKind::BoundedNat { min, max }
        }
        (Some(_), _, _) => return Err(bad(pos, "an enumerated variable cannot have :min/:max")),
        _ => return Err(bad(pos, "expected either :states or both :min and :max")),
    };
    let init = match init {
        Some(i) => i,
        None => match &kind {
            SvKind::Enumerated { states, .. } => SvInit::Sym(states[0].clone()),
            SvKind::BoundedNat { min, .. } => SvInit::Int(*min),
        },
    };
    Ok(SvDecl { name, kind, init })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let s = parse_btf("((BehaviorTree :name t (Action :ID a)))").unwrap();
        assert_eq!(s.trees.len(), 1);
        let root = &s.trees[0];
        assert_eq!(root.children[0].kind, NodeKind::Action);
        assert_eq!(root.children[0].attr("ID").and_then(Value::as_ident), Some("a"));
        assert_eq!(s.source_map.nodes.len(), 2);
    }

    #[test]
    fn flags_and_lists() {
        let s = parse_btf("((BehaviorTree (Action :ID u :SF) (Action :args (x -1.5 z (* 2 $f)) :SF)))").unwrap();
        let a = &s.trees[0].children[0];
        assert_eq!(a.attr("SF"), Some(&Value::Flag));
        let b = &s.trees[0].children[1];
        let Some(Value::List(args)) = b.attr("args") else { panic!() };
        assert_eq!(args.len(), 4);
        assert_eq!(b.attr("SF"), Some(&Value::Flag));
    }

    #[test]
    fn flag_before_child() {
        let s = parse_btf("((BehaviorTree (Inverter :mark (Action))))").unwrap();
        let inv = &s.trees[0].children[0];
        assert_eq!(inv.attr("mark"), Some(&Value::Flag));
        assert_eq!(inv.children.len(), 1);
    }

    #[test]
    fn eval_expression() {
        let s = parse_btf("((BehaviorTree (Eval (:= fls (+ 1 fls)))))").unwrap();
        let e = s.trees[0].children[0].expr.clone().unwrap();
        assert_eq!(
            e,
            Expression::Assign(
                "fls".into(),
                Box::new(Expression::Add(Box::new(Expression::Num(1)), Box::new(Expression::Sym("fls".into()))))
            )
        );
    }

    #[test]
    fn errors_have_positions() {
        let e = parse_btf("((BehaviorTree\n  (Sequense (Action))))").unwrap_err();
        assert!(matches!(e, ParseError::UnknownKind { pos: Pos { line: 2, col: 4 }, .. }), "{e:?}");
        assert!(matches!(parse_btf("((defsv x :min 0))"), Err(ParseError::MalformedDefsv { .. })));
        assert!(matches!(parse_btf("((BehaviorTree (Action a)))"), Err(ParseError::MalformedKeyword { .. })));
        assert!(matches!(parse_btf("((BehaviorTree (Eval (+ (:= a 1) 2))))"), Err(ParseError::MalformedExpr { .. })));
        assert!(parse_btf("((defsv x :min 0 :max 2))").is_err());
    }

    #[test]
    fn defsv_forms() {
        let s = parse_btf(
            "((defsv m :states (A B) :init A :transitions ((A B))) (defsv n :init 1 :min 0 :max 3) (BehaviorTree (Action)))",
        )
        .unwrap();
        assert_eq!(s.svs[0].kind, SvKind::Enumerated {
            states: vec!["A".into(), "B".into()],
            transitions: Transitions::Pairs(vec![("A".into(), "B".into())])
        });
        assert_eq!(s.svs[1].init, SvInit::Int(1));
    }
}
