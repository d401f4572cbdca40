mod common;

use btmc::model::{compile, dump_model, CompileOptions, Role, TickSemantics, Timing, Variant, NODE_LOCATIONS};
use btmc::runtime::{EventKind, OutcomeScript};
use btmc::statespace::StepRef;
use btmc::{Outcome, ReturnStatus};
use common::*;
use proptest::prelude::*;

#[test]
fn drone_process_count() {
    let m = offline(&spec_file("drone.btf"));
    assert_eq!(m.nodes.len(), 38);
    assert_eq!(m.svs.len(), 2);
    assert_eq!(m.processes.len(), 41);
    assert!(matches!(m.processes[m.ticker].role, Role::Ticker));
    assert_eq!(m.ticker, m.processes.len() - 1);
}

#[test]
fn single_action_process_count() {
    let m = offline(&spec("((BehaviorTree :name t (Action :name a)))"));
    assert_eq!(m.processes.len(), 3);
}

#[test]
fn node_processes_start_with_common_locations() {
    for f in CORPUS {
        let m = offline(&spec_file(f));
        for n in &m.nodes {
            let p = &m.processes[n.process];
            assert_eq!(&p.locations[..NODE_LOCATIONS.len()], &NODE_LOCATIONS[..], "{f}: {}", n.name);
        }
    }
}

#[test]
fn condition_has_two_outcome_transitions() {
    let m = offline(&spec("((BehaviorTree :name t (Condition :name c)))"));
    let p = &m.processes[m.nodes[m.node_by_name("c").unwrap()].process];
    let tick = p.location("tick_node").unwrap();
    let out: Vec<_> = p.outgoing[tick].iter().map(|&t| &m.transitions[t]).collect();
    assert_eq!(out.len(), 2);
    let mut targets: Vec<&str> = out.iter().map(|t| p.locations[t.to].as_str()).collect();
    targets.sort();
    assert_eq!(targets, ["failure", "success"]);
    assert!(out.iter().all(|t| t.timing == Timing::Urgent));
}

#[test]
fn meteo_is_an_environment_automaton() {
    let m = offline(&spec_file("mars_rover.btf"));
    let j = m.sv_by_name("meteo").unwrap();
    let p = &m.processes[m.svs[j].process];
    assert_eq!(p.locations, ["MInit", "Normal", "Storm"]);
    let ts: Vec<_> = p.outgoing.iter().flatten().map(|&t| &m.transitions[t]).collect();
    assert!(ts.iter().all(|t| t.timing == Timing::OneTick));
    assert_eq!(ts.iter().filter(|t| t.from != t.to).count(), 4);
    assert_eq!(ts.iter().filter(|t| t.from == t.to).count(), 3);
}

#[test]
fn program_driven_variables_never_move_on_their_own() {
    let m = offline(&spec_file("drone.btf"));
    for sv in &m.svs {
        let p = &m.processes[sv.process];
        assert!(p.outgoing.iter().all(|o| o.is_empty()), "{}", sv.info.name);
    }
}

#[test]
fn runtime_env_variables_have_no_transitions() {
    let m = runtime(&spec_file("mars_rover.btf"));
    for sv in &m.svs {
        assert!(m.processes[sv.process].outgoing.iter().all(|o| o.is_empty()));
    }
}

#[test]
fn compilation_is_deterministic() {
    for f in CORPUS {
        let s = spec_file(f);
        for tick in [TickSemantics::RootOnly, TickSemantics::Leaves, TickSemantics::AllNodes] {
            for variant in [Variant::Offline, Variant::Runtime] {
                let o = CompileOptions { tick, variant, free_env: false };
                let a = compile(&s, None, o).unwrap();
                let b = compile(&spec_file(f), None, o).unwrap();
                assert_eq!(a, b);
                assert_eq!(dump_model(&a), dump_model(&b));
            }
        }
    }
}

#[test]
fn tick_semantics_decide_which_transitions_take_time() {
    let s = spec("((BehaviorTree :name t (Sequence :name q (Action :name a))))");
    let one_tick = |tick| {
        let m = offline_with(&s, tick);
        let mut who: Vec<String> = m
            .transitions
            .iter()
            .filter(|t| t.timing == Timing::OneTick)
            .map(|t| m.processes[t.process].name.clone())
            .collect();
        who.dedup();
        who
    };
    assert_eq!(one_tick(TickSemantics::RootOnly), ["ticker"]);
    assert_eq!(one_tick(TickSemantics::Leaves), ["a", "ticker"]);
    assert_eq!(one_tick(TickSemantics::AllNodes), ["t", "q", "a", "ticker"]);
}

/// Direct threshold evaluation.
fn parallel_oracle(n: usize, m: usize, st: &[ReturnStatus]) -> ReturnStatus {
    let s = st.iter().filter(|&&x| x == ReturnStatus::Success).count();
    let f = st.iter().filter(|&&x| x == ReturnStatus::Failure).count();
    if s >= m {
        ReturnStatus::Success
    } else if f > n - m {
        ReturnStatus::Failure
    } else {
        ReturnStatus::Running
    }
}

const LEAF: [ReturnStatus; 3] = [ReturnStatus::Success, ReturnStatus::Failure, ReturnStatus::Running];

/// First status the compiled Parallel reports when its children answer `st`.
fn parallel_compiled(m: usize, halt: bool, st: &[ReturnStatus]) -> (ReturnStatus, Vec<btmc::runtime::TraceEvent>) {
    let kids: String = (0..st.len()).map(|i| format!(" (Action :name c{i})")).collect();
    let s = spec(&format!("((BehaviorTree :name t (Parallel :name p :success {m} :halt {} {kids})))", u8::from(halt)));
    let mut sc = OutcomeScript::new();
    for (i, x) in st.iter().enumerate() {
        let line = match x {
            ReturnStatus::Success => "success latency 0",
            ReturnStatus::Failure => "failure latency 0",
            _ => "success latency 9",
        };
        sc = script(&format!("{sc}node c{i} ordinal 1 -> {line}\n"));
    }
    let rep = run_script(&s, &sc, 1);
    let r = returns(&rep.trace.events, "p");
    (ReturnStatus::parse(&r[0]).unwrap(), rep.trace.events)
}

#[test]
fn parallel_examples() {
    use ReturnStatus::*;
    assert_eq!(parallel_compiled(2, false, &[Success, Running, Failure]).0, Running);
    assert_eq!(parallel_oracle(3, 2, &[Success, Running, Failure]), Running);
    // ParallelAll(A, B), A succeeds, B fails.
    let s = spec("((BehaviorTree :name t (ParallelAll :name p (Action :name a) (Action :name b))))");
    let rep = run_script(&s, &script("node a ordinal 1 -> success latency 0\nnode b ordinal 1 -> failure latency 0\n"), 1);
    assert_eq!(returns(&rep.trace.events, "p"), ["failure"]);
    // :success 1 :halt 1 with A done and B running: B is halted.
    let (st, ev) = parallel_compiled(1, true, &[Success, Running]);
    assert_eq!(st, Success);
    assert_eq!(count(&ev, "c1", "halting"), 1);
    assert_eq!(count(&ev, "c1", "halted"), 1);
}

#[test]
fn parallel_threshold_oracle_is_exhaustive() {
    let mut cases = 0;
    for n in 1..=4usize {
        for m in 1..=n {
            for code in 0..3usize.pow(n as u32) {
                let st: Vec<ReturnStatus> = (0..n).map(|i| LEAF[code / 3usize.pow(i as u32) % 3]).collect();
                for halt in [false, true] {
                    let got = parallel_compiled(m, halt, &st).0;
                    assert_eq!(got, parallel_oracle(n, m, &st), "n={n} m={m} halt={halt} {st:?}");
                    cases += 1;
                }
            }
        }
    }
    assert_eq!(cases, 2 * (3 + 2 * 9 + 3 * 27 + 4 * 81));
}

fn eval_once(decls: &str, expr: &str) -> (Outcome, Vec<btmc::runtime::TraceEvent>) {
    let s = spec(&format!("({decls} (BehaviorTree :name t (Eval :name e {expr})))"));
    let rep = run_script(&s, &OutcomeScript::new(), 1);
    (terminal(&rep.outcome).unwrap(), rep.trace.events)
}

#[test]
fn eval_comparison_and_assignment() {
    let battery = "(defsv battery :states (Good Low Critical) :init Good :transitions :all)";
    assert_eq!(eval_once(battery, "(= battery good)").0, Outcome::Success);
    assert_eq!(eval_once(battery, "(= battery critical)").0, Outcome::Failure);
    // Incrementing past the bound fails and leaves the value alone.
    let fls = "(defsv fls :init 3 :min 0 :max 3)";
    let (o, ev) = eval_once(fls, "(:= fls (+ 1 fls))");
    assert_eq!(o, Outcome::Failure);
    assert!(ev.iter().all(|e| !matches!(e.kind, EventKind::SvChanged { .. })));
    let fls = "(defsv fls :init 2 :min 0 :max 3)";
    let (o, ev) = eval_once(fls, "(:= fls (+ 1 fls))");
    assert_eq!(o, Outcome::Success);
    assert!(ev.iter().any(|e| e.kind == EventKind::SvChanged { sv: "fls".into(), old: "2".into(), new: "3".into() }));
}

/// Outcome of a one-leaf-per-line tree under a script, via the engine.
fn outcome_of(tree: &str, sc: &str, ticks: u64) -> (Option<Outcome>, Vec<btmc::runtime::TraceEvent>) {
    let rep = run_script(&spec(tree), &script(sc), ticks);
    (terminal(&rep.outcome), rep.trace.events)
}

#[test]
fn sequence_and_fallback_examples() {
    let seq = "((BehaviorTree :name t (Sequence :name q (Action :name a) (Action :name b))))";
    let (o, _) = outcome_of(seq, "node a ordinal 1 -> success\nnode b ordinal 1 -> success\n", 3);
    assert_eq!(o, Some(Outcome::Success));
    // A running child is resumed, not restarted.
    let (o, ev) = outcome_of(seq, "node a ordinal 1 -> success latency 1\nnode b ordinal 1 -> success\n", 3);
    assert_eq!(o, Some(Outcome::Success));
    assert_eq!(returns(&ev, "q"), ["running", "success"]);
    assert_eq!(returns(&ev, "a"), ["running", "success"]);

    let fb = "((BehaviorTree :name t (Fallback :name f (Action :name a) (Action :name b))))";
    let (o, _) = outcome_of(fb, "node a ordinal 1 -> failure\nnode b ordinal 1 -> success\n", 3);
    assert_eq!(o, Some(Outcome::Success));
    let (o, _) = outcome_of(fb, "node a ordinal 1 -> failure\nnode b ordinal 1 -> failure\n", 3);
    assert_eq!(o, Some(Outcome::Failure));
}

#[test]
fn reactive_nodes_restart_from_the_first_child() {
    let rs = "((BehaviorTree :name t (ReactiveSequence :name q (Condition :name a) (Action :name b))))";
    let (o, ev) = outcome_of(rs, "default condition -> success\nnode b ordinal 1 -> success latency 1\n", 3);
    assert_eq!(o, Some(Outcome::Success));
    assert_eq!(count(&ev, "a", "ticked"), 2);
    let ticks: Vec<&str> = ev.iter().filter(|e| e.tick == 2 && e.kind == EventKind::Ticked).filter_map(|e| e.node.as_deref()).collect();
    assert_eq!(ticks, ["t", "q", "a", "b"]);

    let rf = "((BehaviorTree :name t (ReactiveFallback :name f (Condition :name a) (Action :name b))))";
    let (o, ev) = outcome_of(rf, "default condition -> failure\nnode b ordinal 1 -> success latency 1\n", 3);
    assert_eq!(o, Some(Outcome::Success));
    let ticks: Vec<&str> = ev.iter().filter(|e| e.tick == 2 && e.kind == EventKind::Ticked).filter_map(|e| e.node.as_deref()).collect();
    assert_eq!(ticks, ["t", "f", "a", "b"]);
}

#[test]
fn decorator_examples() {
    let inv = "((BehaviorTree :name t (Inverter (Action :name a))))";
    assert_eq!(outcome_of(inv, "node a ordinal 1 -> failure\n", 2).0, Some(Outcome::Success));
    let rep = "((BehaviorTree :name t (Repeat :repeat 3 (Action :name a))))";
    let (o, ev) = outcome_of(rep, "default node -> success\n", 5);
    assert_eq!(o, Some(Outcome::Success));
    assert_eq!(returns(&ev, "a"), ["success"; 3]);
    let krf = "((BehaviorTree :name t (KeepRunningUntilFailure :name k (Action :name a))))";
    let (o, ev) = outcome_of(krf, "node a ordinal 1 -> success\nnode a ordinal 2 -> failure\n", 5);
    assert_eq!(o, Some(Outcome::Failure));
    assert_eq!(returns(&ev, "k"), ["running", "failure"]);
}

#[test]
fn recovery_examples() {
    let rec = model_text("recovery.btf");
    let (o, ev) = outcome_of(&rec, "node action ordinal 1 -> failure\nnode recov ordinal 1 -> success\nnode action ordinal 2 -> failure\n", 3);
    assert_eq!(o, Some(Outcome::Failure));
    assert_eq!(returns(&ev, "action"), ["failure", "failure"]);
    let (o, ev) = outcome_of(&rec, "node action ordinal 1 -> failure\nnode recov ordinal 1 -> failure\n", 3);
    assert_eq!(o, Some(Outcome::Failure));
    assert_eq!(returns(&ev, "action"), ["failure"]);
}

#[test]
fn roundrobin_wraps_after_the_last_child() {
    let rr = model_text("roundrobin.btf");
    // A1 succeeds, then A2..A4 fail with fewer than three failures counted
    // before A4's, so the rotation comes back to A1; its failure is the
    // fourth in a row and ends the tree.
    let sc = "node A1 ordinal 1 -> success\nnode A2 ordinal 1 -> failure\nnode A3 ordinal 1 -> failure\n\
              node A4 ordinal 1 -> failure\nnode A1 ordinal 2 -> failure\n";
    let (o, ev) = outcome_of(&rr, sc, 10);
    let order: Vec<&str> = ev.iter().filter(|e| e.kind == EventKind::Ticked).filter_map(|e| e.node.as_deref()).filter(|n| n.starts_with('A')).collect();
    assert_eq!(order, ["A1", "A2", "A3", "A4", "A1"]);
    assert_eq!(o, Some(Outcome::Failure));
}

fn status_strategy() -> impl Strategy<Value = Vec<(bool, u32)>> {
    prop::collection::vec((any::<bool>(), 0u32..3), 1..5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Every state reached from a step of the offline model keeps records
    /// consistent: idle nodes have no caller, and HaltMe only reaches
    /// nodes that were running.
    #[test]
    fn protocol_invariants_on_random_sequences(kids in status_strategy(), reactive in any::<bool>()) {
        let kind = if reactive { "ReactiveSequence :halt 1" } else { "Sequence" };
        let leaves: String = kids.iter().enumerate().map(|(i, _)| format!(" (Action :name c{i})")).collect();
        let s = spec(&format!("((BehaviorTree :name t ({kind} :name q (Condition :name g){leaves})))"));
        let m = offline(&s);
        let g = graph(&m);
        let start = 0;
        for id in 0..g.num_states() as u32 {
            let st = g.state(id);
            for (n, meta) in m.nodes.iter().enumerate() {
                let rec = m.record(&st, n);
                let loc = m.location_of(&st, meta.process);
                if rec.caller == btmc::model::CallerRef::NoneCaller && loc != start {
                    // Between `done` and the next call a node rests in start_.
                    prop_assert!(false, "{} idle but at {}", meta.name, m.location_name(&st, meta.process));
                }
            }
            btmc::statespace::for_each_successor(&m, &st, |step, next| {
                if let StepRef::Fire(t) = step {
                    for (n, meta) in m.nodes.iter().enumerate() {
                        let before = m.record(&st, n).rstatus;
                        let after = m.record(next, n).rstatus;
                        if after == ReturnStatus::HaltMe && before != ReturnStatus::HaltMe {
                            assert_eq!(before, ReturnStatus::Running, "{} halted from {before:?} by {}", meta.name, m.transition_label(t));
                        }
                    }
                }
            }).unwrap();
            // The reactive guard is never halted.
            prop_assert_ne!(m.record(&st, m.node_by_name("g").unwrap()).rstatus, ReturnStatus::HaltMe);
        }
    }

    /// Compiled Parallel decisions match the threshold rule on random
    /// assignments with latencies.
    #[test]
    fn parallel_random_latencies(kids in status_strategy(), m_off in 0usize..4) {
        let n = kids.len();
        let m = 1 + m_off % n;
        let st: Vec<ReturnStatus> = kids.iter().map(|&(ok, lat)| match (ok, lat) {
            (_, 1..) => ReturnStatus::Running,
            (true, 0) => ReturnStatus::Success,
            (false, 0) => ReturnStatus::Failure,
        }).collect();
        prop_assert_eq!(parallel_compiled(m, true, &st).0, parallel_oracle(n, m, &st));
    }
}
