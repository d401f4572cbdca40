mod common;

use std::collections::HashMap;

use btmc::model::{CmpOp, ComposedModel, Expr};
use btmc::props::{check, default_properties, parse_properties, resolve, Atom, Pred, PropKind, Property, VerdictValue};
use btmc::statespace::{explore, EdgeLabel, Limits, StateGraph};
use btmc::syntax::Pos;
use common::*;

fn suite(model: &str, props: &str) -> Vec<(String, VerdictValue, Option<bool>)> {
    let m = offline(&spec_file(model));
    let g = graph(&m);
    parse_properties(&model_text(props))
        .unwrap()
        .into_iter()
        .map(|p| (p.name.clone(), check(&m, &g, &p).unwrap().value, p.expect))
        .collect()
}

fn words(v: &[(String, VerdictValue, Option<bool>)]) -> Vec<&'static str> {
    v.iter().map(|(_, x, _)| x.word()).collect()
}

#[test]
fn parse_examples() {
    let p = parse_properties("property p is absent (sv(fls) > 3)").unwrap();
    assert_eq!(p.len(), 1);
    match &p[0].kind {
        PropKind::Absent(Pred::Atom(Atom::SvCmp { sv, op, value }, _)) => {
            assert_eq!((sv.as_str(), *op, value.as_str()), ("fls", CmpOp::Gt, "3"));
        }
        k => panic!("{k:?}"),
    }
    let d = parse_properties("property d is deadlockfree").unwrap();
    assert_eq!(d[0].kind, PropKind::DeadlockFree);
    assert!(parse_properties("property w is node(a)@done leadsto node(b)@done within [2,1]").is_err());
}

#[test]
fn recovery_suite() {
    let v = suite("recovery.btf", "recovery.props");
    assert_eq!(words(&v), ["TRUE", "FALSE", "TRUE", "TRUE"]);
}

#[test]
fn roundrobin_suite() {
    let v = suite("roundrobin.btf", "roundrobin.props");
    assert_eq!(words(&v), ["FALSE", "TRUE", "TRUE", "TRUE"]);
}

#[test]
fn mars_rover_suite() {
    let v = suite("mars_rover.btf", "mars_rover.props");
    assert_eq!(words(&v), ["FALSE", "TRUE"]);
    for (name, verdict, expect) in &v {
        assert_eq!(verdict.as_bool(), *expect, "{name}");
    }
}

#[test]
fn single_condition_is_never_halted() {
    let m = offline(&spec("((BehaviorTree :name t (Condition :name c)))"));
    let g = graph(&m);
    let props = default_properties(&m);
    let halted = props.iter().find(|p| p.name == "c.halted").unwrap();
    assert_eq!(check(&m, &g, halted).unwrap().value, VerdictValue::False);
    for name in ["c.done", "c.success", "c.failure", "deadlock_free"] {
        let p = props.iter().find(|p| p.name == name).unwrap();
        assert_eq!(check(&m, &g, p).unwrap().value, VerdictValue::True, "{name}");
    }
    // Only actions get a running question.
    assert!(props.iter().all(|p| p.name != "c.running"));
}

#[test]
fn default_properties_cover_every_node() {
    let m = offline(&spec_file("drone.btf"));
    let props = default_properties(&m);
    let actions = m.nodes.iter().filter(|n| n.kind == btmc::syntax::NodeKind::Action).count();
    assert_eq!(props.len(), 4 * m.nodes.len() + actions + 1);
    for n in ["takeoff_btn22.done", "takeoff_btn22.success", "takeoff_btn22.failure", "takeoff_btn22.halted"] {
        assert!(props.iter().any(|p| p.name == n), "{n}");
    }
}

fn absent_present_pairs(m: &ComposedModel) -> Vec<(Property, Property)> {
    default_properties(m)
        .into_iter()
        .filter_map(|p| match p.kind.clone() {
            PropKind::Present(q) => Some((Property { kind: PropKind::Absent(q), ..p.clone() }, p)),
            _ => None,
        })
        .collect()
}

#[test]
fn absent_is_the_negation_of_present() {
    for f in ["recovery.btf", "roundrobin.btf", "mars_rover.btf", "drone_simple.btf"] {
        let m = offline(&spec_file(f));
        let Ok(g) = explore(&m, Limits::default()) else { continue };
        for (a, p) in absent_present_pairs(&m) {
            let (va, vp) = (check(&m, &g, &a).unwrap(), check(&m, &g, &p).unwrap());
            assert_eq!(va.value.as_bool(), vp.value.as_bool().map(|b| !b), "{f}: {}", p.name);
            if va.value == VerdictValue::False {
                // The counterexample ends in a state satisfying the predicate.
                let PropKind::Absent(q) = &a.kind else { unreachable!() };
                let e = resolve(&m, q).unwrap();
                let w = va.witness.unwrap();
                assert_eq!(w.states[0], 0);
                assert!(m.holds(&e, &g.state(*w.states.last().unwrap())));
            }
        }
    }
}

#[test]
fn partial_graphs_give_unknown() {
    let m = offline(&spec_file("drone.btf"));
    let g = explore(&m, Limits { max_states: 500, ..Limits::default() }).unwrap_err().into_partial().unwrap();
    let p = parse_properties("property p is absent (sv(fls) > 3)").unwrap();
    assert!(matches!(check(&m, &g, &p[0]).unwrap().value, VerdictValue::Unknown(_)));
    let d = parse_properties("property d is present node(land_btn35)@done").unwrap();
    assert!(matches!(check(&m, &g, &d[0]).unwrap().value, VerdictValue::Unknown(_)));
}

#[test]
fn unknown_names_are_errors() {
    let m = offline(&spec_file("recovery.btf"));
    let g = graph(&m);
    for text in [
        "property p is present node(nope)@done",
        "property p is present node(action)@nowhere",
        "property p is present local(action.retry) = 0",
        "property p is present sv(ghost) = 1",
    ] {
        let p = parse_properties(text).unwrap();
        assert!(check(&m, &g, &p[0]).is_err(), "{text}");
    }
}

// Independent oracles over an explored graph.

fn marks(m: &ComposedModel, g: &StateGraph, e: &Expr) -> Vec<bool> {
    (0..g.num_states() as u32).map(|s| m.holds(e, &g.state(s))).collect()
}

/// Every path from (s, c) meets q with elapsed time in [a, b]; a path that
/// stops early fails.
fn leads_oracle(g: &StateGraph, q: &[bool], s: u32, c: u32, a: u32, b: u32, memo: &mut HashMap<(u32, u32), bool>) -> bool {
    if q[s as usize] && a <= c && c <= b {
        return true;
    }
    if c > b {
        return false;
    }
    if let Some(&v) = memo.get(&(s, c)) {
        return v;
    }
    let succ: Vec<(EdgeLabel, u32)> = g.edges(s).collect();
    let v = !succ.is_empty()
        && succ.iter().all(|&(e, t)| leads_oracle(g, q, t, c + u32::from(matches!(e, EdgeLabel::Tick(_))), a, b, memo));
    memo.insert((s, c), v);
    v
}

/// States with a q-avoiding path that never ends in q: greatest fixpoint of
/// "not q, and a sink or some successor stays in the set".
fn avoid_forever(g: &StateGraph, q: &[bool]) -> Vec<bool> {
    let mut x: Vec<bool> = q.iter().map(|&b| !b).collect();
    loop {
        let mut changed = false;
        for s in 0..g.num_states() as u32 {
            if x[s as usize] {
                let mut succ = g.edges(s).peekable();
                let keep = succ.peek().is_none() || g.edges(s).any(|(_, t)| x[t as usize]);
                if !keep {
                    x[s as usize] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return x;
        }
    }
}

fn atoms(m: &ComposedModel) -> Vec<Pred> {
    let mut out = vec![];
    for n in &m.nodes {
        for loc in ["tick_node", "success", "failure", "running", "done", "halted"] {
            out.push(Pred::Atom(Atom::NodeAt { node: n.name.clone(), loc: loc.into() }, Pos::default()));
        }
    }
    out
}

#[test]
fn temporal_checks_match_brute_force() {
    for f in ["recovery.btf", "roundrobin.btf"] {
        let m = offline(&spec_file(f));
        let g = graph(&m);
        let preds = atoms(&m);
        let mut cases = 0;
        for (i, p) in preds.iter().enumerate() {
            for q in preds.iter().skip(i % 7).step_by(7) {
                let (pm, qm) = (marks(&m, &g, &resolve(&m, p).unwrap()), marks(&m, &g, &resolve(&m, q).unwrap()));
                if !pm.iter().any(|&b| b) {
                    continue;
                }
                for (a, b) in [(0, 0), (0, 1), (1, 2), (0, 3)] {
                    let prop = Property {
                        name: "x".into(),
                        kind: PropKind::LeadsTo { p: p.clone(), q: q.clone(), a, b },
                        expect: None,
                        pos: Pos::default(),
                    };
                    let mut memo = HashMap::new();
                    let want = (0..g.num_states() as u32).filter(|&s| pm[s as usize]).all(|s| leads_oracle(&g, &qm, s, 0, a, b, &mut memo));
                    assert_eq!(check(&m, &g, &prop).unwrap().value.as_bool(), Some(want), "{f}: {p:?} ~> {q:?} [{a},{b}]");
                    cases += 1;
                }
                let stuck = avoid_forever(&g, &qm);
                let want = !(0..g.num_states()).any(|s| pm[s] && stuck[s]);
                let prop = Property {
                    name: "y".into(),
                    kind: PropKind::ImpliesEventually(p.clone(), q.clone()),
                    expect: None,
                    pos: Pos::default(),
                };
                assert_eq!(check(&m, &g, &prop).unwrap().value.as_bool(), Some(want), "{f}: {p:?} => <> {q:?}");
            }
        }
        assert!(cases > 100, "{f}: only {cases} cases");
    }
}

#[test]
fn wide_window_agrees_with_eventually() {
    // RoundRobin's A2 success is followed by RR's success before the next
    // tick, so a generous bound and plain eventuality agree.
    let m = offline(&spec_file("roundrobin.btf"));
    let g = graph(&m);
    let text = "property w is node(A2)@success leadsto node(RR)@success within [0,50]\n\
                property e is always node(A2)@success implies eventually node(RR)@success\n";
    let ps = parse_properties(text).unwrap();
    let v: Vec<_> = ps.iter().map(|p| check(&m, &g, p).unwrap().value).collect();
    assert_eq!(v, [VerdictValue::True, VerdictValue::True]);
}
