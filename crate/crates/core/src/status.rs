use std::fmt;

use serde::{Deserialize, Serialize};

/// Value of a node record's `rstatus` field. The discriminants are the
/// encoding used in model states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnStatus {
    NoRetStatus = 0,
    Success = 1,
    Failure = 2,
    Running = 3,
    HaltMe = 4,
}

impl ReturnStatus {
    pub const ALL: [ReturnStatus; 5] = [
        ReturnStatus::NoRetStatus,
        ReturnStatus::Success,
        ReturnStatus::Failure,
        ReturnStatus::Running,
        ReturnStatus::HaltMe,
    ];

    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn from_code(c: i64) -> Option<Self> {
        Self::ALL.get(usize::try_from(c).ok()?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ReturnStatus::NoRetStatus => "noretstatus",
            ReturnStatus::Success => "success",
            ReturnStatus::Failure => "failure",
            ReturnStatus::Running => "running",
            ReturnStatus::HaltMe => "halt_me",
        }
    }

    /// Case-insensitive lookup of a status literal.
    pub fn parse(s: &str) -> Option<Self> {
        let l = s.to_ascii_lowercase();
        Self::ALL.into_iter().find(|st| st.name() == l || (l == "haltme" && *st == ReturnStatus::HaltMe))
    }
}

impl fmt::Display for ReturnStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Completed result of a leaf or a whole tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
}

impl Outcome {
    pub fn status(self) -> ReturnStatus {
        match self {
            Outcome::Success => ReturnStatus::Success,
            Outcome::Failure => ReturnStatus::Failure,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "success" => Some(Outcome::Success),
            "failure" => Some(Outcome::Failure),
            _ => None,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.status().fmt(f)
    }
}
