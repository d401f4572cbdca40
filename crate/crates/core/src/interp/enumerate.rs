//! Exhaustive enumeration of interpreter behaviors over all leaf outcomes,
//! latencies, variable updates and environment changes.

use super::{Interpreter, Oracle};
use crate::runtime::{ActionEntry, OutcomeScript, ProviderError, RunOutcome, TraceEvent};
use crate::status::Outcome;
use crate::syntax::{SvInfo, ValidatedSpec};

/// One complete run together with the script that reproduces it.
#[derive(Debug, Clone)]
pub struct Behavior {
    pub script: OutcomeScript,
    pub events: Vec<TraceEvent>,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub behaviors: Vec<Behavior>,
    /// The behavior limit was hit before the enumeration finished.
    pub truncated: bool,
}

/// Follows a prefix of choice indices, then always picks the first option,
/// recording every decision in a script.
struct Chooser {
    prefix: Vec<usize>,
    taken: Vec<(usize, usize)>,
    script: OutcomeScript,
    max_latency: u32,
}

impl Chooser {
    fn choose(&mut self, options: usize) -> usize {
        let c = self.prefix.get(self.taken.len()).copied().unwrap_or(0);
        self.taken.push((c, options));
        c
    }
}

impl Oracle for Chooser {
    fn action(&mut self, node: &str, ordinal: u32, immediate: bool) -> Result<ActionEntry, ProviderError> {
        let lat = if immediate { 0 } else { self.max_latency };
        let c = self.choose(2 * (lat as usize + 1));
        let e = ActionEntry {
            outcome: if c % 2 == 0 { Outcome::Success } else { Outcome::Failure },
            latency: (c / 2) as u32,
        };
        self.script.actions.insert((node.to_string(), ordinal), e);
        Ok(e)
    }

    fn condition(&mut self, node: &str, ordinal: u32) -> Result<Outcome, ProviderError> {
        let o = if self.choose(2) == 0 { Outcome::Success } else { Outcome::Failure };
        self.script.conditions.insert((node.to_string(), ordinal), o);
        Ok(o)
    }

    fn setsv(&mut self, sv: &SvInfo, ordinal: u32, current: i64) -> Result<i64, ProviderError> {
        let mut options = vec![current];
        options.extend(sv.changes_from(current));
        let v = options[self.choose(options.len())];
        self.script.setsv.insert((sv.name.clone(), ordinal), sv.value_name(v));
        Ok(v)
    }

    fn env(&mut self, sv: &SvInfo, tick: u64, current: i64) -> Result<Option<i64>, ProviderError> {
        let changes = sv.changes_from(current);
        let c = self.choose(changes.len() + 1);
        if c == 0 {
            return Ok(None);
        }
        self.script.env.insert((sv.name.clone(), tick), sv.value_name(changes[c - 1]));
        Ok(Some(changes[c - 1]))
    }
}

/// Every behavior of tree `tree` within `max_ticks` ticks, with action
/// latencies up to `max_latency`, stopping after `limit` behaviors.
pub fn enumerate_behaviors(
    spec: &ValidatedSpec,
    tree: usize,
    max_ticks: u64,
    max_latency: u32,
    limit: usize,
) -> Enumeration {
    let mut behaviors = Vec::new();
    let mut prefix: Vec<usize> = Vec::new();
    loop {
        if behaviors.len() >= limit {
            return Enumeration { behaviors, truncated: true };
        }
        let chooser = Chooser { prefix: prefix.clone(), taken: Vec::new(), script: OutcomeScript::new(), max_latency };
        let mut it = Interpreter::new(spec, tree, chooser);
        let outcome = it.run(Some(max_ticks));
        let (events, chooser) = it.into_parts();
        behaviors.push(Behavior { script: chooser.script, events, outcome });

        // Odometer over the decision tree, deepest decision first.
        let mut taken = chooser.taken;
        loop {
            let Some((c, n)) = taken.pop() else {
                return Enumeration { behaviors, truncated: false };
            };
            if c + 1 < n {
                prefix = taken.iter().map(|&(c, _)| c).collect();
                prefix.push(c + 1);
                break;
            }
        }
    }
}
