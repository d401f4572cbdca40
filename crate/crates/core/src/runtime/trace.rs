//! Execution traces and their two text encodings.
//!
//! Both encodings start with a header naming the tree and the tick period
//! and then carry one event per line. Timestamps are logical
//! (`tick × period`), so traces of seeded runs are reproducible.

use std::fmt::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::EventTag;
use crate::status::{Outcome, ReturnStatus};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EventKind {
    Ticked,
    Returned(ReturnStatus),
    Halting,
    Halted,
    RootTerminal(Outcome),
    SvChanged { sv: String, old: String, new: String },
    /// The tick's work did not fit in its period.
    TickOverrun,
}

impl From<EventTag> for EventKind {
    fn from(t: EventTag) -> Self {
        match t {
            EventTag::Ticked => EventKind::Ticked,
            EventTag::Returned(s) => EventKind::Returned(s),
            EventTag::Halting => EventKind::Halting,
            EventTag::Halted => EventKind::Halted,
            EventTag::RootTerminal(o) => EventKind::RootTerminal(o),
        }
    }
}

impl EventKind {
    pub fn word(&self) -> &'static str {
        match self {
            EventKind::Ticked => "ticked",
            EventKind::Returned(_) => "returned",
            EventKind::Halting => "halting",
            EventKind::Halted => "halted",
            EventKind::RootTerminal(_) => "root_terminal",
            EventKind::SvChanged { .. } => "sv_changed",
            EventKind::TickOverrun => "tick_overrun",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub tick: u64,
    pub node: Option<String>,
    pub kind: EventKind,
}

impl TraceEvent {
    pub fn new(tick: u64, node: Option<&str>, kind: EventKind) -> Self {
        TraceEvent { tick, node: node.map(str::to_string), kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Lines,
    Jsonl,
}

impl FromStr for TraceFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lines" => Ok(TraceFormat::Lines),
            "jsonl" => Ok(TraceFormat::Jsonl),
            _ => Err(format!("unknown trace format `{s}` (expected lines or jsonl)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecutionTrace {
    pub tree: String,
    pub period_ms: u64,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("trace line {line}: {msg}")]
pub struct TraceParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    tree: String,
    period_ms: u64,
}

#[derive(Serialize, Deserialize)]
struct Record {
    tick: u64,
    ts_ms: u64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    old: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    new: Option<String>,
}

impl Record {
    fn into_event(self) -> Result<TraceEvent, String> {
        let status = || self.status.clone().ok_or_else(|| format!("`{}` needs a status", self.kind));
        let kind = match self.kind.as_str() {
            "ticked" => EventKind::Ticked,
            "halting" => EventKind::Halting,
            "halted" => EventKind::Halted,
            "tick_overrun" => EventKind::TickOverrun,
            "returned" => {
                let s = status()?;
                EventKind::Returned(ReturnStatus::parse(&s).ok_or_else(|| format!("bad status `{s}`"))?)
            }
            "root_terminal" => {
                let s = status()?;
                EventKind::RootTerminal(Outcome::parse(&s).ok_or_else(|| format!("bad outcome `{s}`"))?)
            }
            "sv_changed" => match (self.sv, self.old, self.new) {
                (Some(sv), Some(old), Some(new)) => EventKind::SvChanged { sv, old, new },
                _ => return Err("sv_changed needs sv, old and new".into()),
            },
            k => return Err(format!("unknown event kind `{k}`")),
        };
        Ok(TraceEvent { tick: self.tick, node: self.node, kind })
    }
}

impl ExecutionTrace {
    pub fn new(tree: &str, period_ms: u64) -> Self {
        ExecutionTrace { tree: tree.to_string(), period_ms, events: Vec::new() }
    }

    fn record(&self, e: &TraceEvent) -> Record {
        let mut r = Record {
            tick: e.tick,
            ts_ms: e.tick * self.period_ms,
            kind: e.kind.word().to_string(),
            node: e.node.clone(),
            status: None,
            sv: None,
            old: None,
            new: None,
        };
        match &e.kind {
            EventKind::Returned(s) => r.status = Some(s.name().to_string()),
            EventKind::RootTerminal(o) => r.status = Some(o.to_string()),
            EventKind::SvChanged { sv, old, new } => {
                r.sv = Some(sv.clone());
                r.old = Some(old.clone());
                r.new = Some(new.clone());
            }
            _ => {}
        }
        r
    }

    pub fn render(&self, format: TraceFormat) -> String {
        let mut out = String::new();
        match format {
            TraceFormat::Jsonl => {
                let h = Header { tree: self.tree.clone(), period_ms: self.period_ms };
                out.push_str(&serde_json::to_string(&h).expect("header serializes"));
                out.push('\n');
                for e in &self.events {
                    out.push_str(&serde_json::to_string(&self.record(e)).expect("event serializes"));
                    out.push('\n');
                }
            }
            TraceFormat::Lines => {
                let _ = writeln!(out, "trace {} period_ms {}", self.tree, self.period_ms);
                for e in &self.events {
                    let r = self.record(e);
                    let _ = write!(out, "tick {} ts_ms {} {}", r.tick, r.ts_ms, r.kind);
                    for f in [r.node, r.status, r.sv, r.old, r.new].into_iter().flatten() {
                        let _ = write!(out, " {f}");
                    }
                    out.push('\n');
                }
            }
        }
        out
    }

    pub fn parse(text: &str, format: TraceFormat) -> Result<Self, TraceParseError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let err = |line: usize, msg: String| TraceParseError { line: line + 1, msg };
        let (hl, header) = lines.next().ok_or_else(|| err(0, "missing header".into()))?;
        let mut trace = match format {
            TraceFormat::Jsonl => {
                let h: Header = serde_json::from_str(header).map_err(|e| err(hl, e.to_string()))?;
                ExecutionTrace::new(&h.tree, h.period_ms)
            }
            TraceFormat::Lines => match header.split_whitespace().collect::<Vec<_>>().as_slice() {
                ["trace", tree, "period_ms", p] => {
                    ExecutionTrace::new(tree, p.parse().map_err(|_| err(hl, format!("bad period `{p}`")))?)
                }
                _ => return Err(err(hl, "expected `trace <tree> period_ms <n>`".into())),
            },
        };
        for (i, line) in lines {
            let rec = match format {
                TraceFormat::Jsonl => serde_json::from_str(line).map_err(|e| err(i, e.to_string()))?,
                TraceFormat::Lines => lines_record(line).map_err(|m| err(i, m))?,
            };
            trace.events.push(rec.into_event().map_err(|m| err(i, m))?);
        }
        Ok(trace)
    }
}

fn lines_record(line: &str) -> Result<Record, String> {
    let w: Vec<&str> = line.split_whitespace().collect();
    let ["tick", tick, "ts_ms", ts, kind, rest @ ..] = w.as_slice() else {
        return Err("expected `tick <n> ts_ms <n> <kind> ...`".into());
    };
    let num = |s: &str| s.parse::<u64>().map_err(|_| format!("bad number `{s}`"));
    let own = |s: &&str| Some(s.to_string());
    let mut r = Record {
        tick: num(tick)?,
        ts_ms: num(ts)?,
        kind: kind.to_string(),
        node: None,
        status: None,
        sv: None,
        old: None,
        new: None,
    };
    match (*kind, rest) {
        ("ticked" | "halting" | "halted", [n]) => r.node = own(n),
        ("tick_overrun", []) => {}
        ("returned", [n, s]) => (r.node, r.status) = (own(n), own(s)),
        ("root_terminal", [s]) => r.status = own(s),
        ("sv_changed", [sv, old, new]) => (r.sv, r.old, r.new) = (own(sv), own(old), own(new)),
        _ => return Err(format!("malformed `{kind}` event")),
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExecutionTrace {
        let mut t = ExecutionTrace::new("main", 100);
        t.events = vec![
            TraceEvent::new(1, Some("main"), EventKind::Ticked),
            TraceEvent::new(1, Some("act_btn1"), EventKind::Returned(ReturnStatus::Running)),
            TraceEvent::new(2, None, EventKind::SvChanged { sv: "meteo".into(), old: "Normal".into(), new: "Storm".into() }),
            TraceEvent::new(2, Some("act_btn1"), EventKind::Halting),
            TraceEvent::new(2, Some("act_btn1"), EventKind::Halted),
            TraceEvent::new(2, None, EventKind::TickOverrun),
            TraceEvent::new(3, None, EventKind::RootTerminal(Outcome::Failure)),
        ];
        t
    }

    #[test]
    fn both_formats_round_trip() {
        for f in [TraceFormat::Lines, TraceFormat::Jsonl] {
            let t = sample();
            assert_eq!(ExecutionTrace::parse(&t.render(f), f).unwrap(), t, "{f:?}");
        }
    }

    #[test]
    fn empty_trace_is_header_only() {
        let t = ExecutionTrace::new("x", 50);
        assert_eq!(t.render(TraceFormat::Lines), "trace x period_ms 50\n");
        assert_eq!(t.render(TraceFormat::Jsonl), "{\"tree\":\"x\",\"period_ms\":50}\n");
    }

    #[test]
    fn jsonl_fields() {
        let line = sample().render(TraceFormat::Jsonl).lines().nth(2).unwrap().to_string();
        assert_eq!(line, r#"{"tick":1,"ts_ms":100,"kind":"returned","node":"act_btn1","status":"running"}"#);
    }

    #[test]
    fn malformed_lines_are_reported() {
        let e = ExecutionTrace::parse("trace x period_ms 1\ntick 1 ts_ms 1 returned a\n", TraceFormat::Lines).unwrap_err();
        assert_eq!(e.line, 2);
        assert!(ExecutionTrace::parse("", TraceFormat::Jsonl).is_err());
    }
}
