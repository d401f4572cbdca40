mod common;

use std::collections::BTreeSet;

use btmc::interp::{enumerate_behaviors, interpret, replay_offline, ConformanceError};
use btmc::model::{ComposedModel, Role, Timing};
use btmc::runtime::{EventKind, OutcomeScript, RunOutcome, TraceEvent};
use btmc::statespace::{for_each_successor, StepRef};
use btmc::Outcome;
use common::*;
use proptest::prelude::*;


fn events_of(text: &str, sc: &str, ticks: u64) -> (Vec<TraceEvent>, RunOutcome) {
    interpret(&spec(text), 0, &script(sc), Some(ticks))
}

#[test]
fn sequence_success_then_failure_fails_in_one_tick() {
    let (ev, out) = events_of(
        "((BehaviorTree :name t (Sequence (Action :name a) (Action :name b))))",
        "node a ordinal 1 -> success\nnode b ordinal 1 -> failure\n",
        5,
    );
    assert_eq!(out, RunOutcome::Terminal(Outcome::Failure));
    assert!(ev.iter().all(|e| e.tick == 1));
}

#[test]
fn reactive_sequence_restarts_from_the_beginning() {
    let (ev, _) = events_of(
        "((BehaviorTree :name t (ReactiveSequence :name r (Condition :name a) (Action :name b))))",
        "default condition -> success\nnode b ordinal 1 -> success latency 1\n",
        5,
    );
    let order: Vec<(u64, &str)> =
        ev.iter().filter(|e| e.kind == EventKind::Ticked).map(|e| (e.tick, e.node.as_deref().unwrap())).collect();
    assert_eq!(order, [(1, "t"), (1, "r"), (1, "a"), (1, "b"), (2, "t"), (2, "r"), (2, "a"), (2, "b")]);
}

#[test]
fn recovery_with_one_retry() {
    let (ev, out) = events_of(
        &model_text("recovery.btf"),
        "node action ordinal 1 -> failure\nnode recov ordinal 1 -> success\nnode action ordinal 2 -> failure\n",
        5,
    );
    assert_eq!(out, RunOutcome::Terminal(Outcome::Failure));
    assert_eq!(returns(&ev, "recov"), ["success"]);
}

#[test]
fn single_condition_has_two_behaviors() {
    let s = spec("((BehaviorTree :name t (Condition :name c)))");
    let en = enumerate_behaviors(&s, 0, 1, 0, 100);
    assert!(!en.truncated);
    assert_eq!(en.behaviors.len(), 2);
    let outs: BTreeSet<_> = en.behaviors.iter().map(|b| format!("{:?}", b.outcome)).collect();
    assert_eq!(outs.len(), 2);
}

#[test]
fn parallel_halt_appears_in_one_tick() {
    let s = spec("((BehaviorTree :name t (Parallel :success 1 :halt 1 (Action :name a) (Action :name b))))");
    let en = enumerate_behaviors(&s, 0, 1, 1, 1000);
    assert!(!en.truncated);
    // Each action: success or failure, now or one tick later.
    assert_eq!(en.behaviors.len(), 16);
    let halted: Vec<_> = en.behaviors.iter().filter(|b| b.events.iter().any(|e| e.kind == EventKind::Halted)).collect();
    assert!(!halted.is_empty());
    for b in halted {
        assert!(returns(&b.events, "a").contains(&"success".into()) || returns(&b.events, "b").contains(&"success".into()));
    }
}

#[test]
fn mars_rover_enumeration_finds_panels_out_in_a_storm() {
    let s = spec_file("mars_rover.btf");
    let en = enumerate_behaviors(&s, 0, 2, 0, 100_000);
    assert!(!en.truncated);
    let hit = en.behaviors.iter().find(|b| {
        let (mut panel, mut meteo) = (String::new(), String::new());
        b.events.iter().any(|e| {
            if let EventKind::SvChanged { sv, new, .. } = &e.kind {
                match sv.as_str() {
                    "panel" => panel = new.clone(),
                    "meteo" => meteo = new.clone(),
                    _ => {}
                }
            }
            panel == "Unfolded" && meteo == "Storm"
        })
    });
    let b = hit.expect("no behavior with the panels out in a storm");
    // The recorded script reproduces it.
    let (ev, _) = interpret(&s, 0, &b.script, Some(2));
    assert_eq!(ev, b.events);
}

#[test]
fn replay_rejects_impossible_traces() {
    let s = spec_file("recovery.btf");
    let off = offline(&s);
    let (mut ev, _) = interpret(&s, 0, &script("node action ordinal 1 -> failure\nnode recov ordinal 1 -> failure\n"), Some(3));
    assert_eq!(replay_offline(&off, &ev), Ok(()));
    // recov cannot run before action.
    let i = ev.iter().position(|e| e.node.as_deref() == Some("action")).unwrap();
    ev[i].node = Some("recov".into());
    assert!(matches!(replay_offline(&off, &ev), Err(ConformanceError::Unexplained { .. })));
}

#[test]
fn exhaustive_agreement_on_small_trees() {
    for text in SMALL {
        let s = spec(text);
        let (off, rt) = (offline(&s), runtime(&s));
        let en = enumerate_behaviors(&s, 0, 3, 1, 20_000);
        assert!(!en.truncated, "{text}");
        for b in &en.behaviors {
            three_way(&s, &off, &rt, &b.script, 3).unwrap_or_else(|e| panic!("{text}\n{e}"));
        }
    }
}

/// Observable key of one event.
fn key(e: &TraceEvent) -> String {
    format!("{} {:?} {:?}", e.tick, e.node, e.kind)
}

/// Event sequences of the offline model within `ticks` ticks when urgent
/// steps always come from the lowest-numbered process that has one.
fn offline_sequences(m: &ComposedModel, ticks: u64) -> BTreeSet<Vec<String>> {
    fn emitted(m: &ComposedModel, s: &[i32], ts: &[usize], tick: u64, out: &mut Vec<String>) {
        let mut cur = s.to_vec();
        for &t in ts {
            let before = cur.clone();
            m.apply(t, &mut cur).unwrap();
            let tr = &m.transitions[t];
            if let Some(ev) = tr.event {
                let node = match m.processes[tr.process].role {
                    Role::Node(n) => Some(m.nodes[n].name.as_str()),
                    _ => None,
                };
                out.push(key(&TraceEvent::new(tick, node, ev.into())));
            }
            for sv in &m.svs {
                if before[sv.slot] != cur[sv.slot] {
                    let kind = EventKind::SvChanged {
                        sv: sv.info.name.clone(),
                        old: sv.info.value_name(before[sv.slot] as i64),
                        new: sv.info.value_name(cur[sv.slot] as i64),
                    };
                    out.push(key(&TraceEvent::new(tick, None, kind)));
                }
            }
        }
    }
    fn walk(m: &ComposedModel, s: Vec<i32>, tick: u64, ticks: u64, seq: &mut Vec<String>, out: &mut BTreeSet<Vec<String>>) {
        let first = (0..m.processes.len())
            .find(|&p| m.enabled_in(p, &s).any(|t| m.transitions[t].timing == Timing::Urgent));
        let mut steps: Vec<(Vec<usize>, u64, Vec<i32>)> = vec![];
        if m.terminal_status(&s).is_none() {
            for_each_successor(m, &s, |step, next| match step {
                StepRef::Fire(t) if Some(m.transitions[t].process) == first => steps.push((vec![t], tick, next.to_vec())),
                StepRef::Tick(c) if first.is_none() && tick < ticks => steps.push((c.to_vec(), tick + 1, next.to_vec())),
                _ => {}
            })
            .unwrap();
        }
        if steps.is_empty() {
            out.insert(seq.clone());
            return;
        }
        for (ts, t, next) in steps {
            let n = seq.len();
            emitted(m, &s, &ts, t, seq);
            walk(m, next, t, ticks, seq, out);
            seq.truncate(n);
        }
    }
    let mut out = BTreeSet::new();
    walk(m, m.initial_state(), 0, ticks, &mut vec![], &mut out);
    out
}

#[test]
fn interpreter_behaviors_are_exactly_the_prioritised_offline_paths() {
    const TICKS: u64 = 3;
    for text in SMALL {
        let s = spec(text);
        let en = enumerate_behaviors(&s, 0, TICKS, TICKS as u32, 200_000);
        assert!(!en.truncated, "{text}");
        let interp: BTreeSet<Vec<String>> = en.behaviors.iter().map(|b| b.events.iter().map(key).collect()).collect();
        let model = offline_sequences(&offline(&s), TICKS);
        let missing: Vec<_> = model.difference(&interp).take(1).collect();
        let extra: Vec<_> = interp.difference(&model).take(1).collect();
        assert!(missing.is_empty() && extra.is_empty(), "{text}\nonly offline: {missing:#?}\nonly interpreter: {extra:#?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn three_way_agreement_on_the_corpus(seed in any::<u64>(), tree in 0usize..CORPUS.len(), bias in 500u32..950) {
        let s = spec_file(CORPUS[tree]);
        let mut sc = OutcomeScript::seeded(seed);
        sc.success_permille = bias;
        let r = three_way(&s, &offline(&s), &runtime(&s), &sc, 30);
        prop_assert!(r.is_ok(), "{}: {}", CORPUS[tree], r.unwrap_err());
    }

    #[test]
    fn three_way_agreement_on_small_trees(seed in any::<u64>(), tree in 0usize..SMALL.len()) {
        let s = spec(SMALL[tree]);
        let r = three_way(&s, &offline(&s), &runtime(&s), &OutcomeScript::seeded(seed), 12);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}
