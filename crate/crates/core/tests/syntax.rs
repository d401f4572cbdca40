use std::path::PathBuf;

use btmc::syntax::ast::{Atom, Attr, Expression, NodeAst, NodeKind, SvDecl, SvInit, SvKind, Transitions, Value};
use btmc::syntax::{emit_canonical, emit_spec, load, parse_btf, validate, BtSpec, Driven, Params};
use proptest::prelude::*;

fn model(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

const CORPUS: &[&str] =
    &["drone_simple.btf", "drone.btf", "mars_rover.btf", "recovery.btf", "roundrobin.btf", "nav2.btf"];

#[test]
fn corpus_validates_and_round_trips() {
    for f in CORPUS {
        let text = model(f);
        let v = load(&text).unwrap_or_else(|e| panic!("{f}: {e}"));
        let again = parse_btf(&emit_canonical(&v)).unwrap();
        assert_eq!(again, v.spec, "{f}");
        // Emitting twice is stable.
        assert_eq!(emit_spec(&again), emit_canonical(&v), "{f}");
    }
}

#[test]
fn drone_declarations() {
    let v = load(&model("drone.btf")).unwrap();
    assert_eq!(v.spec.svs.len(), 2);
    assert_eq!(v.spec.svs[0], SvDecl { name: "fls".into(), kind: SvKind::BoundedNat { min: 0, max: 3 }, init: SvInit::Int(0) });
    assert_eq!(
        v.spec.svs[1].kind,
        SvKind::Enumerated { states: vec!["Good".into(), "Low".into(), "Critical".into()], transitions: Transitions::AllPairs }
    );
    assert_eq!(v.trees.len(), 1);
    assert_eq!(v.nodes[v.trees[0].root].children.len(), 1);
    assert_eq!(v.nodes[1].kind, NodeKind::Sequence);
    // 38 node processes: the root plus 37 tree nodes.
    assert_eq!(v.nodes.len(), 38);
    assert!(v.svs.iter().all(|s| s.driven == Driven::Program));
}

#[test]
fn drone_generated_names_follow_preorder() {
    let v = load(&model("drone.btf")).unwrap();
    for name in ["land_btn12", "goto_waypoint_btn16", "localization_ok_btn18", "land_btn20", "measure_battery_btn9", "Sequence6_btn6"] {
        assert!(v.node_by_name(name).is_some(), "missing {name}");
    }
    assert!(v.node_by_name("camera_track").is_some());
    assert_eq!(v.nodes[0].name, "drone");
}

#[test]
fn mars_rover_transitions_and_drivers() {
    let v = load(&model("mars_rover.btf")).unwrap();
    assert_eq!(v.svs.len(), 3);
    let meteo = &v.svs[v.sv_by_name("meteo").unwrap()];
    let minit = meteo.parse_value("MInit").unwrap();
    for from in 0..3 {
        if from != minit {
            assert!(!meteo.allowed(from, minit), "meteo may not return to MInit");
        }
    }
    assert_eq!(meteo.driven, Driven::Environment);
    assert_eq!(v.svs[v.sv_by_name("battery").unwrap()].driven, Driven::Environment);
    assert_eq!(v.svs[v.sv_by_name("panel").unwrap()].driven, Driven::Program);
    let unfold = v.node_by_name("unfold_panels").unwrap();
    assert_eq!(v.nodes[unfold].params, Params::Action { no_running: true });
}

#[test]
fn nav2_keeps_opaque_arguments() {
    let v = load(&model("nav2.btf")).unwrap();
    assert_eq!(v.trees[0].name, "MainTree");
    assert!(v.warnings.iter().any(|w| w.message.contains("$goal")));
    let rc = v.nodes.iter().find(|n| n.kind == NodeKind::RateController).unwrap();
    assert_eq!(rc.params, Params::Rate { period: 1 });
}

#[test]
fn naming_is_independent_of_attribute_order() {
    let a = validate(parse_btf("((BehaviorTree :name t (Sequence (Action :ID x :args (a 1)) (Condition :args (b) :ID y))))").unwrap()).unwrap();
    let b = validate(parse_btf("((BehaviorTree :name t (Sequence (Action :args (a 1) :ID x) (Condition :ID y :args (b)))))").unwrap()).unwrap();
    let names = |v: &btmc::syntax::ValidatedSpec| v.nodes.iter().map(|n| n.name.clone()).collect::<Vec<_>>();
    assert_eq!(names(&a), names(&b));
    // Re-validating the emitted text gives the same names.
    let again = validate(parse_btf(&emit_canonical(&a)).unwrap()).unwrap();
    assert_eq!(names(&a), names(&again));
}

// ---------------------------------------------------------------------------
// Generated documents.

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,5}".prop_filter("not a node kind or keyword", |s| NodeKind::from_name(s).is_none() && s != "defsv")
}

fn atom_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        ident().prop_map(|s| Value::Atom(Atom::Ident(s))),
        (-50i64..50).prop_map(|n| Value::Atom(Atom::Num(n.to_string()))),
        (0u32..100, 0u32..100).prop_map(|(a, b)| Value::Atom(Atom::Num(format!("{a}.{b}")))),
        ident().prop_map(|s| Value::Atom(Atom::ArgRef(s))),
    ]
}

fn attr_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        3 => atom_value(),
        1 => Just(Value::Flag),
        1 => prop::collection::vec(atom_value(), 0..4).prop_map(Value::List),
    ]
}

fn expr() -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![
        (-9i64..9).prop_map(Expression::Num),
        ident().prop_map(Expression::Sym),
        ident().prop_map(Expression::Status),
        ident().prop_map(Expression::Arg),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Eq(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|a| Expression::Not(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expression::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Expression::Mul(Box::new(a), Box::new(b))),
        ]
    })
}

fn attrs() -> impl Strategy<Value = Vec<Attr>> {
    prop::collection::vec((ident(), attr_value()).prop_map(|(key, value)| Attr { key, value }), 0..3)
}

fn node() -> impl Strategy<Value = NodeAst> {
    let kinds: Vec<NodeKind> = NodeKind::ALL.iter().copied().filter(|k| *k != NodeKind::BehaviorTree).collect();
    let leaf_kinds = kinds.clone();
    let leaf = (prop::sample::select(leaf_kinds), attrs(), prop::option::of(expr())).prop_map(|(kind, attrs, e)| {
        let mut n = NodeAst::new(kind);
        n.attrs = attrs;
        if kind == NodeKind::Eval {
            // The whole Eval expression is always a list form.
            n.expr = e.map(|e| match e {
                Expression::Sym(s) => Expression::Assign(s, Box::new(Expression::Num(1))),
                e @ (Expression::Num(_) | Expression::Status(_) | Expression::Arg(_)) => Expression::Not(Box::new(e)),
                e => e,
            });
        }
        n
    });
    leaf.prop_recursive(4, 24, 3, move |inner| {
        (prop::sample::select(kinds.clone()), attrs(), prop::collection::vec(inner, 0..3)).prop_map(|(kind, attrs, children)| {
            let mut n = NodeAst::new(kind);
            n.attrs = attrs;
            n.children = if kind == NodeKind::Eval { vec![] } else { children };
            n
        })
    })
}

fn document() -> impl Strategy<Value = BtSpec> {
    let sv = (ident(), prop::collection::vec(ident(), 1..4), any::<bool>(), 0i64..3, 0i64..5).prop_map(
        |(name, states, enumerated, lo, span)| {
            if enumerated {
                let transitions = if states.len() > 1 {
                    Transitions::Pairs(vec![(states[0].clone(), states[states.len() - 1].clone())])
                } else {
                    Transitions::AllPairs
                };
                SvDecl { name, init: SvInit::Sym(states[0].clone()), kind: SvKind::Enumerated { states, transitions } }
            } else {
                SvDecl { name, kind: SvKind::BoundedNat { min: lo, max: lo + span }, init: SvInit::Int(lo) }
            }
        },
    );
    (prop::collection::vec(sv, 0..3), prop::collection::vec((attrs(), node()), 1..3)).prop_map(|(svs, trees)| BtSpec {
        svs,
        trees: trees
            .into_iter()
            .map(|(attrs, child)| {
                let mut root = NodeAst::new(NodeKind::BehaviorTree);
                root.attrs = attrs;
                root.children.push(child);
                root
            })
            .collect(),
        source_map: Default::default(),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn emit_then_parse_is_identity(spec in document()) {
        let text = emit_spec(&spec);
        let back = parse_btf(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(emit_spec(&back), text);
    }

    #[test]
    fn parser_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = parse_btf(&text);
    }

    #[test]
    fn parser_never_panics_on_near_misses(
        toks in prop::collection::vec(prop::sample::select(vec!["(", ")", "(", ")", ":", ":a", "x", "1", "$v", "a.rstatus",
            ":=", "=", "~", "+", "*", "Sequence", "Action", "BehaviorTree", "Eval", "defsv", ":states", ":min", ":transitions", ":all", ";c\n", "\n"]), 0..60)
    ) {
        let text = toks.join(" ");
        if let Ok(spec) = parse_btf(&text) {
            // Whatever parses must survive a round trip.
            prop_assert_eq!(parse_btf(&emit_spec(&spec)).unwrap(), spec.clone());
            let _ = validate(spec);
        }
    }
}
