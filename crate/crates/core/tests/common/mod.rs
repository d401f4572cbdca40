//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use btmc::interp::interpret;
use btmc::model::{compile, ComposedModel, CompileOptions, TickSemantics, Variant};
use btmc::runtime::{run, EventKind, OutcomeScript, Pacing, RunConfig, RunOutcome, RunReport, ScriptedProvider, TraceEvent};
use btmc::statespace::{explore, Limits, StateGraph};
use btmc::syntax::{load, ValidatedSpec};

pub const CORPUS: &[&str] =
    &["drone_simple.btf", "drone.btf", "mars_rover.btf", "recovery.btf", "roundrobin.btf", "nav2.btf"];

/// Small trees covering every node kind, variables and the environment.
pub const SMALL: &[&str] = &[
    "((BehaviorTree :name t (Sequence (Action :name a) (Condition :name b))))",
    "((BehaviorTree :name t (ReactiveSequence :halt 1 (Condition :name a) (Action :name b))))",
    "((BehaviorTree :name t (SequenceWithMemory (Action :name a) (Action :name b))))",
    "((BehaviorTree :name t (Fallback (Action :name a) (Action :name b))))",
    "((BehaviorTree :name t (ReactiveFallback (Condition :name a) (Action :name b))))",
    "((BehaviorTree :name t (Parallel :success 1 :halt 1 (Action :name a) (Action :name b))))",
    "((BehaviorTree :name t (Parallel :success 1 :wait 1 (Action :name a) (Action :name b))))",
    "((BehaviorTree :name t (ParallelAll (Action :name a) (Condition :name b))))",
    "((BehaviorTree :name t (Inverter (Action :name a))))",
    "((BehaviorTree :name t (ForceSuccess (Action :name a))))",
    "((BehaviorTree :name t (ForceFailure (Action :name a))))",
    "((BehaviorTree :name t (Repeat :repeat 2 (Action :name a))))",
    "((BehaviorTree :name t (RetryUntilSuccessful :num_attempts 2 (Action :name a))))",
    "((BehaviorTree :name t (KeepRunningUntilFailure (Condition :name a))))",
    "((BehaviorTree :name t (RateController :hz 0.5 (Action :name a))))",
    "((BehaviorTree :name t (PipelineSequence (Action :name a) (Action :name b))))",
    "((BehaviorTree :name t (RoundRobin (Action :name a) (Condition :name b))))",
    "((BehaviorTree :name t (Recovery :num_retries 1 (Action :name a) (Action :name b))))",
    "((defsv v :states (P Q R) :init P :transitions ((P Q) (Q R) (R P)))
      (BehaviorTree :name t (Sequence (SetSV :sv v) (Eval (= v Q)) (Action :name a))))",
    "((defsv n :init 0 :min 0 :max 2)
      (BehaviorTree :name t (KeepRunningUntilFailure (Eval (:= n (+ n 1))))))",
    "((defsv w :states (X Y) :init X :transitions ((X Y) (Y X)))
      (BehaviorTree :name t (ReactiveSequence (Eval (= w X)) (Action :name a))))",
];

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn model_text(name: &str) -> String {
    let p = models_dir().join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub fn spec_file(name: &str) -> ValidatedSpec {
    load(&model_text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn spec(text: &str) -> ValidatedSpec {
    load(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

pub fn offline(spec: &ValidatedSpec) -> ComposedModel {
    offline_with(spec, TickSemantics::RootOnly)
}

pub fn offline_with(spec: &ValidatedSpec, tick: TickSemantics) -> ComposedModel {
    compile(spec, None, CompileOptions { tick, ..Default::default() }).unwrap()
}

pub fn runtime(spec: &ValidatedSpec) -> ComposedModel {
    compile(spec, None, CompileOptions { variant: Variant::Runtime, ..Default::default() }).unwrap()
}

pub fn graph(m: &ComposedModel) -> StateGraph {
    explore(m, Limits::default()).unwrap()
}

pub fn virtual_cfg(max_ticks: u64) -> RunConfig {
    RunConfig { pacing: Pacing::Virtual, max_ticks: Some(max_ticks), ..Default::default() }
}

/// Run the runtime variant of `spec` against `script` without pacing.
pub fn run_script(spec: &ValidatedSpec, script: &OutcomeScript, max_ticks: u64) -> RunReport {
    let m = runtime(spec);
    let mut p = ScriptedProvider::new(script.clone(), spec.svs.clone());
    run(&m, &mut p, &virtual_cfg(max_ticks))
}

pub fn script(text: &str) -> OutcomeScript {
    OutcomeScript::parse(text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

/// Interpreter, engine and offline model agree on one script.
pub fn three_way(spec: &ValidatedSpec, off: &ComposedModel, rt: &ComposedModel, s: &OutcomeScript, ticks: u64) -> Result<(), String> {
    let (events, outcome) = interpret(spec, 0, s, Some(ticks));
    let mut p = ScriptedProvider::new(s.clone(), spec.svs.clone());
    let rep = run(rt, &mut p, &virtual_cfg(ticks));
    if rep.trace.events != events {
        let i = events.iter().zip(&rep.trace.events).position(|(a, b)| a != b).unwrap_or(events.len().min(rep.trace.events.len()));
        return Err(format!(
            "interpreter and engine differ at event {i}: {:?} vs {:?}\nscript:\n{s}",
            events.get(i),
            rep.trace.events.get(i)
        ));
    }
    if rep.outcome != outcome {
        return Err(format!("outcomes differ: {outcome:?} vs {:?}\nscript:\n{s}", rep.outcome));
    }
    btmc::interp::replay_offline(off, &events).map_err(|e| format!("{e}\nscript:\n{s}"))
}

/// Statuses a node returned, in order.
pub fn returns(events: &[TraceEvent], node: &str) -> Vec<String> {
    events
        .iter()
        .filter(|e| e.node.as_deref() == Some(node))
        .filter_map(|e| match &e.kind {
            EventKind::Returned(s) => Some(s.name().to_string()),
            _ => None,
        })
        .collect()
}

pub fn count(events: &[TraceEvent], node: &str, word: &str) -> usize {
    events.iter().filter(|e| e.node.as_deref() == Some(node) && e.kind.word() == word).count()
}

pub fn ticked(events: &[TraceEvent], node: &str) -> bool {
    count(events, node, "ticked") > 0
}

pub fn terminal(o: &RunOutcome) -> Option<btmc::Outcome> {
    match o {
        RunOutcome::Terminal(x) => Some(*x),
        _ => None,
    }
}
