use std::fmt::Write;

use super::ast::*;
use super::ValidatedSpec;

/// Deterministic pretty-print of a validated document.
pub fn emit_canonical(spec: &ValidatedSpec) -> String {
    emit_spec(&spec.spec)
}

/// Pretty-print any parsed document; `parse_btf(emit_spec(s)) == s`.
pub fn emit_spec(spec: &BtSpec) -> String {
    let mut out = String::from("(");
    for sv in &spec.svs {
        out.push_str("\n  ");
        emit_defsv(&mut out, sv);
    }
    for tree in &spec.trees {
        out.push_str("\n  ");
        emit_node(&mut out, tree, 1);
    }
    out.push_str(")\n");
    out
}

fn emit_defsv(out: &mut String, sv: &SvDecl) {
    write!(out, "(defsv {}", sv.name).unwrap();
    match &sv.kind {
        SvKind::Enumerated { states, transitions } => {
            write!(out, " :states ({}) :init {}", states.join(" "), sv.init).unwrap();
            match transitions {
                Transitions::AllPairs => out.push_str(" :transitions :all"),
                Transitions::Pairs(ps) => {
                    out.push_str(" :transitions (");
                    let body: Vec<String> = ps.iter().map(|(a, b)| format!("({a} {b})")).collect();
                    out.push_str(&body.join(" "));
                    out.push(')');
                }
            }
        }
        SvKind::BoundedNat { min, max } => {
            write!(out, " :init {} :min {min} :max {max}", sv.init).unwrap();
        }
    }
    out.push(')');
}

fn emit_node(out: &mut String, node: &NodeAst, depth: usize) {
    write!(out, "({}", node.kind).unwrap();
    // A trailing flag would swallow the expression as its value.
    let expr_first = node.attrs.iter().any(|a| a.value == Value::Flag);
    if let (true, Some(e)) = (expr_first, &node.expr) {
        write!(out, " {e}").unwrap();
    }
    for a in &node.attrs {
        write!(out, " :{}", a.key).unwrap();
        if a.value != Value::Flag {
            write!(out, " {}", a.value).unwrap();
        }
    }
    if let (false, Some(e)) = (expr_first, &node.expr) {
        write!(out, " {e}").unwrap();
    }
    for c in &node.children {
        out.push('\n');
        for _ in 0..=depth {
            out.push_str("  ");
        }
        emit_node(out, c, depth + 1);
    }
    out.push(')');
}
