//! Outcome scripts: deterministic leaf results for scripted runs and for the
//! reference interpreter.
//!
//! ```text
//! # comment
//! node goto_waypoint_btn16 ordinal 2 -> failure latency 3
//! condition localization_ok_btn18 ordinal 3 -> failure
//! setsv battery ordinal 1 -> Critical
//! env meteo tick 4 -> Storm
//! default node -> success latency 0
//! default condition -> success
//! default setsv battery -> Good
//! ```
//!
//! Ordinals count invocations of one node (or setter calls of one variable)
//! from 1. Entries that are missing fall back to the `default` lines, then
//! to a pseudo-random draw keyed by (seed, key, ordinal) when a seed is set.

use std::collections::BTreeMap;
use std::fmt::{self, Write};
use std::hash::Hasher;

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::status::Outcome;
use crate::syntax::SvInfo;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionEntry {
    pub outcome: Outcome,
    /// Ticks until completion; 0 completes within the starting tick.
    pub latency: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutcomeScript {
    pub actions: BTreeMap<(String, u32), ActionEntry>,
    pub conditions: BTreeMap<(String, u32), Outcome>,
    pub setsv: BTreeMap<(String, u32), String>,
    pub env: BTreeMap<(String, u64), String>,
    pub default_action: Option<ActionEntry>,
    pub default_condition: Option<Outcome>,
    pub default_setsv: BTreeMap<String, String>,
    /// Seed for entries nobody specified.
    pub seed: Option<u64>,
    /// Upper bound of drawn latencies.
    pub max_latency: u32,
    /// Probability of a drawn success, in thousandths.
    pub success_permille: u32,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ScriptError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("script has no outcome for {kind} `{key}` ordinal {ordinal}")]
    Exhausted { kind: &'static str, key: String, ordinal: u32 },
    #[error("script value `{value}` is not a legal next value of `{sv}`")]
    BadValue { sv: String, value: String },
}

fn outcome(s: &str, line: usize) -> Result<Outcome, ScriptError> {
    Outcome::parse(s).ok_or_else(|| ScriptError::Parse { line, msg: format!("expected success or failure, found `{s}`") })
}

fn number<T: std::str::FromStr>(s: Option<&&str>, what: &str, line: usize) -> Result<T, ScriptError> {
    s.and_then(|s| s.parse().ok()).ok_or_else(|| ScriptError::Parse { line, msg: format!("expected {what}") })
}

/// Deterministic generator for one decision.
fn draw(seed: u64, kind: &str, key: &str, ordinal: u64) -> ChaCha8Rng {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write(kind.as_bytes());
    h.write_u8(0);
    h.write(key.as_bytes());
    h.write_u8(0);
    h.write_u64(ordinal);
    ChaCha8Rng::seed_from_u64(h.finish())
}

impl OutcomeScript {
    pub fn new() -> Self {
        OutcomeScript { max_latency: 3, success_permille: 500, ..Default::default() }
    }

    /// Empty script answering everything from `seed`.
    pub fn seeded(seed: u64) -> Self {
        OutcomeScript { seed: Some(seed), ..OutcomeScript::new() }
    }

    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let mut s = OutcomeScript::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (lhs, rhs) = body
                .split_once("->")
                .ok_or_else(|| ScriptError::Parse { line, msg: "expected `->`".into() })?;
            let l: Vec<&str> = lhs.split_whitespace().collect();
            let r: Vec<&str> = rhs.split_whitespace().collect();
            let bad = |msg: &str| ScriptError::Parse { line, msg: msg.into() };
            let action_rhs = |r: &[&str]| -> Result<ActionEntry, ScriptError> {
                let o = outcome(r.first().ok_or_else(|| bad("missing outcome"))?, line)?;
                let latency = match r.get(1) {
                    None => 0,
                    Some(&"latency") => number(r.get(2), "a latency", line)?,
                    Some(_) => return Err(bad("expected `latency <ticks>`")),
                };
                if r.len() > 3 {
                    return Err(bad("trailing input"));
                }
                Ok(ActionEntry { outcome: o, latency })
            };
            match l.as_slice() {
                ["node", name, "ordinal", k] => {
                    let k = number(Some(k), "an ordinal", line)?;
                    s.actions.insert((name.to_string(), k), action_rhs(&r)?);
                }
                ["condition", name, "ordinal", k] => {
                    let k = number(Some(k), "an ordinal", line)?;
                    let [o] = r.as_slice() else { return Err(bad("expected one outcome")) };
                    s.conditions.insert((name.to_string(), k), outcome(o, line)?);
                }
                ["setsv", name, "ordinal", k] => {
                    let k = number(Some(k), "an ordinal", line)?;
                    let [v] = r.as_slice() else { return Err(bad("expected one value")) };
                    s.setsv.insert((name.to_string(), k), v.to_string());
                }
                ["env", name, "tick", t] => {
                    let t = number(Some(t), "a tick", line)?;
                    let [v] = r.as_slice() else { return Err(bad("expected one value")) };
                    s.env.insert((name.to_string(), t), v.to_string());
                }
                ["default", "node"] => s.default_action = Some(action_rhs(&r)?),
                ["default", "condition"] => {
                    let [o] = r.as_slice() else { return Err(bad("expected one outcome")) };
                    s.default_condition = Some(outcome(o, line)?);
                }
                ["default", "setsv", name] => {
                    let [v] = r.as_slice() else { return Err(bad("expected one value")) };
                    s.default_setsv.insert(name.to_string(), v.to_string());
                }
                _ => return Err(bad("unrecognised entry")),
            }
        }
        Ok(s)
    }

    /// Outcome of the `ordinal`-th start of action `node`. Drawn latencies
    /// are 0 for actions that must answer at once.
    pub fn action(&self, node: &str, ordinal: u32, immediate: bool) -> Result<ActionEntry, ScriptError> {
        if let Some(e) = self.actions.get(&(node.to_string(), ordinal)).or(self.default_action.as_ref()) {
            return Ok(*e);
        }
        let seed = self.seed.ok_or_else(|| ScriptError::Exhausted { kind: "node", key: node.into(), ordinal })?;
        let mut rng = draw(seed, "node", node, ordinal as u64);
        let outcome = self.coin(&mut rng);
        let latency = if immediate { 0 } else { rng.gen_range(0..=self.max_latency) };
        Ok(ActionEntry { outcome, latency })
    }

    pub fn condition(&self, node: &str, ordinal: u32) -> Result<Outcome, ScriptError> {
        if let Some(o) = self.conditions.get(&(node.to_string(), ordinal)).or(self.default_condition.as_ref()) {
            return Ok(*o);
        }
        let seed = self.seed.ok_or_else(|| ScriptError::Exhausted { kind: "condition", key: node.into(), ordinal })?;
        let mut rng = draw(seed, "condition", node, ordinal as u64);
        Ok(self.coin(&mut rng))
    }

    fn coin(&self, rng: &mut ChaCha8Rng) -> Outcome {
        if rng.gen_ratio(self.success_permille.min(1000), 1000) {
            Outcome::Success
        } else {
            Outcome::Failure
        }
    }

    /// Next value of a program-set variable (encoded), checked against the
    /// variable's transition relation.
    pub fn setsv(&self, sv: &SvInfo, ordinal: u32, current: i64) -> Result<i64, ScriptError> {
        if let Some(v) = self.setsv.get(&(sv.name.clone(), ordinal)).or(self.default_setsv.get(&sv.name)) {
            return match sv.parse_value(v) {
                Some(x) if sv.allowed(current, x) => Ok(x),
                _ => Err(ScriptError::BadValue { sv: sv.name.clone(), value: v.clone() }),
            };
        }
        let seed = self.seed.ok_or_else(|| ScriptError::Exhausted { kind: "setsv", key: sv.name.clone(), ordinal })?;
        let mut options = vec![current];
        options.extend(sv.changes_from(current));
        let mut rng = draw(seed, "setsv", &sv.name, ordinal as u64);
        Ok(options[rng.gen_range(0..options.len())])
    }

    /// Scripted environment value of `sv` at tick `tick`, if any.
    pub fn env(&self, sv: &str, tick: u64) -> Option<&str> {
        self.env.get(&(sv.to_string(), tick)).map(String::as_str)
    }
}

impl fmt::Display for OutcomeScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        if let Some(e) = self.default_action {
            writeln!(out, "default node -> {} latency {}", e.outcome, e.latency)?;
        }
        if let Some(o) = self.default_condition {
            writeln!(out, "default condition -> {o}")?;
        }
        for (n, v) in &self.default_setsv {
            writeln!(out, "default setsv {n} -> {v}")?;
        }
        for ((n, k), e) in &self.actions {
            writeln!(out, "node {n} ordinal {k} -> {} latency {}", e.outcome, e.latency)?;
        }
        for ((n, k), o) in &self.conditions {
            writeln!(out, "condition {n} ordinal {k} -> {o}")?;
        }
        for ((n, k), v) in &self.setsv {
            writeln!(out, "setsv {n} ordinal {k} -> {v}")?;
        }
        for ((n, t), v) in &self.env {
            writeln!(out, "env {n} tick {t} -> {v}")?;
        }
        f.write_str(&out)
    }
}
