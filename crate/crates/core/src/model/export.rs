use std::fmt::Write;

use super::ir::*;

fn expr(m: &ComposedModel, e: &Expr) -> String {
    match e {
        Expr::Const(v) => v.to_string(),
        Expr::Slot(s) => m.slot_name(*s).to_string(),
        Expr::Not(a) => format!("!({})", expr(m, a)),
        Expr::And(es) => es.iter().map(|e| expr(m, e)).collect::<Vec<_>>().join(" && "),
        Expr::Or(es) => format!("({})", es.iter().map(|e| expr(m, e)).collect::<Vec<_>>().join(" || ")),
        Expr::Cmp(op, a, b) => format!("{} {} {}", expr(m, a), op.symbol(), expr(m, b)),
        Expr::Add(a, b) => format!("({} + {})", expr(m, a), expr(m, b)),
        Expr::Mul(a, b) => format!("({} * {})", expr(m, a), expr(m, b)),
        Expr::Ite(c, a, b) => format!("({} ? {} : {})", expr(m, c), expr(m, a), expr(m, b)),
        Expr::Allowed(sv, v) => format!("allowed({}, {})", m.svs[*sv].info.name, expr(m, v)),
    }
}

fn transition_line(m: &ComposedModel, t: &Transition) -> String {
    let p = &m.processes[t.process];
    format!("{} -> {}{}", p.locations[t.from], p.locations[t.to], annotations(m, t))
}

fn annotations(m: &ComposedModel, t: &Transition) -> String {
    let mut line = String::new();
    if t.guard != Expr::TRUE {
        write!(line, " [{}]", expr(m, &t.guard)).unwrap();
    }
    if !t.effects.is_empty() {
        let fx: Vec<String> = t.effects.iter().map(|(s, e)| format!("{} := {}", m.slot_name(*s), expr(m, e))).collect();
        write!(line, " {{{}}}", fx.join("; ")).unwrap();
    }
    match t.timing {
        Timing::Urgent => {}
        Timing::OneTick => line.push_str(" @tick"),
        Timing::Lazy => line.push_str(" @lazy"),
    }
    if let Some(c) = &t.call {
        write!(line, " call {c:?}").unwrap();
    }
    if let Some(e) = &t.event {
        write!(line, " emit {e:?}").unwrap();
    }
    line
}

/// Human-readable listing of slots and processes.
pub fn dump_model(m: &ComposedModel) -> String {
    let mut out = String::new();
    writeln!(out, "model {} (tick={}, variant={:?})", m.name, m.tick, m.variant).unwrap();
    writeln!(out, "slots:").unwrap();
    for s in &m.slots {
        writeln!(out, "  {} in [{}, {}] init {}", s.name, s.min, s.max, s.init).unwrap();
    }
    for p in &m.processes {
        writeln!(out, "process {} ({} locations)", p.name, p.locations.len()).unwrap();
        for ts in &p.outgoing {
            for &t in ts {
                writeln!(out, "  {}", transition_line(m, &m.transitions[t])).unwrap();
            }
        }
    }
    out
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// One cluster per process; edge labels carry guards and effects.
pub fn model_dot(m: &ComposedModel) -> String {
    let mut out = String::from("digraph model {\n  rankdir=LR;\n");
    for (pi, p) in m.processes.iter().enumerate() {
        writeln!(out, "  subgraph cluster_{pi} {{\n    label={};", quote(&p.name)).unwrap();
        for (li, l) in p.locations.iter().enumerate() {
            let shape = if li == 0 { "doublecircle" } else { "circle" };
            writeln!(out, "    p{pi}_{li} [label={}, shape={shape}];", quote(l)).unwrap();
        }
        out.push_str("  }\n");
        for ts in &p.outgoing {
            for &t in ts {
                let tr = &m.transitions[t];
                let label = annotations(m, tr);
                writeln!(out, "  p{pi}_{} -> p{pi}_{} [label={}];", tr.from, tr.to, quote(label.trim())).unwrap();
            }
        }
    }
    out.push_str("}\n");
    out
}
