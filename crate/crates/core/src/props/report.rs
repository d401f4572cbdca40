use std::fmt::Write;
use std::time::Duration;

use super::VerdictValue;

/// One verdict as printed in a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportLine {
    pub name: String,
    pub verdict: VerdictValue,
    pub expect: Option<bool>,
    /// Only printed when timings are requested, to keep reports
    /// byte-identical across runs.
    pub elapsed: Option<Duration>,
    pub witness: Option<String>,
}

impl ReportLine {
    /// The verdict disagrees with the file's `expect:` annotation.
    pub fn mismatch(&self) -> bool {
        self.expect.is_some_and(|e| self.verdict.as_bool() != Some(e))
    }
}

pub fn write_report(lines: &[ReportLine]) -> String {
    let width = lines.iter().map(|l| l.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for l in lines {
        write!(out, "{:width$}  {}", l.name, l.verdict.word()).unwrap();
        if let VerdictValue::Unknown(why) = &l.verdict {
            write!(out, " ({why})").unwrap();
        }
        if let Some(d) = l.elapsed {
            write!(out, " {:.3}s", d.as_secs_f64()).unwrap();
        }
        if let Some(w) = &l.witness {
            write!(out, " witness {w}").unwrap();
        }
        if l.mismatch() {
            write!(out, " MISMATCH expected {}", if l.expect == Some(true) { "TRUE" } else { "FALSE" }).unwrap();
        }
        out.push('\n');
    }
    out
}
