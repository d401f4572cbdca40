//! Replaying an observed event sequence on an offline model.

use std::collections::HashSet;

use thiserror::Error;

use crate::model::{ComposedModel, RangeError, Role, TransId};
use crate::runtime::{EventKind, TraceEvent};
use crate::statespace::{for_each_successor, StepRef};

const SEARCH_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ConformanceError {
    #[error("no model path explains event {matched} ({event:?}); the longest matching prefix has {matched} events")]
    Unexplained { matched: usize, event: Option<TraceEvent> },
    #[error("replay gave up after {0} search states")]
    SearchLimit(usize),
    #[error(transparent)]
    Range(#[from] RangeError),
}

type Observed = (Option<String>, EventKind);

/// Apply the transitions of one step in order and collect what they emit.
fn step_events(m: &ComposedModel, s: &[i32], ts: &[TransId], out: &mut Vec<Observed>) -> Result<(), RangeError> {
    let mut buf = s.to_vec();
    for &t in ts {
        let before: Vec<i32> = m.svs.iter().map(|sv| buf[sv.slot]).collect();
        m.apply(t, &mut buf)?;
        let tr = &m.transitions[t];
        if let Some(ev) = tr.event {
            let node = match m.processes[tr.process].role {
                Role::Node(n) => Some(m.nodes[n].name.clone()),
                _ => None,
            };
            out.push((node, ev.into()));
        }
        for (j, old) in before.into_iter().enumerate() {
            let meta = &m.svs[j];
            let new = buf[meta.slot];
            if new != old {
                let kind = EventKind::SvChanged {
                    sv: meta.info.name.clone(),
                    old: meta.info.value_name(old as i64),
                    new: meta.info.value_name(new as i64),
                };
                out.push((None, kind));
            }
        }
    }
    Ok(())
}

/// Check that `events` (as produced by the engine or the interpreter) is the
/// observation of some path of the offline model `m` from its initial state.
/// Overrun markers are ignored.
pub fn replay_offline(m: &ComposedModel, events: &[TraceEvent]) -> Result<(), ConformanceError> {
    let events: Vec<&TraceEvent> = events.iter().filter(|e| e.kind != EventKind::TickOverrun).collect();
    let mut seen: HashSet<(Vec<i32>, usize, u64)> = HashSet::new();
    let mut stack = vec![(m.initial_state(), 0usize, 0u64)];
    let mut best = 0;
    let mut emitted = Vec::new();
    while let Some((s, pos, tick)) = stack.pop() {
        if pos == events.len() {
            return Ok(());
        }
        best = best.max(pos);
        if !seen.insert((s.clone(), pos, tick)) {
            continue;
        }
        if seen.len() > SEARCH_LIMIT {
            return Err(ConformanceError::SearchLimit(SEARCH_LIMIT));
        }
        let mut next = Vec::new();
        let mut failure = None;
        for_each_successor(m, &s, |step, succ| {
            let (ts, t): (Vec<TransId>, u64) = match step {
                StepRef::Fire(t) => (vec![t], tick),
                StepRef::Tick(c) => (c.to_vec(), tick + 1),
            };
            emitted.clear();
            if let Err(e) = step_events(m, &s, &ts, &mut emitted) {
                failure = Some(e);
                return;
            }
            let fits = emitted.len() <= events.len() - pos
                && emitted.iter().zip(&events[pos..]).all(|((n, k), e)| e.tick == t && e.node == *n && e.kind == *k);
            // Time may only pass if the next observation lies in the future.
            if fits && (t == tick || events[pos].tick >= t) {
                next.push((succ.to_vec(), pos + emitted.len(), t));
            }
        })?;
        if let Some(e) = failure {
            return Err(e.into());
        }
        // Explore in declaration order.
        stack.extend(next.into_iter().rev());
    }
    Err(ConformanceError::Unexplained { matched: best, event: events.get(best).map(|e| (*e).clone()) })
}
