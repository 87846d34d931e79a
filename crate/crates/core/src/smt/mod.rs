//! Discharging verification conditions.

mod external;
mod oracle;
pub mod script;

use std::fmt;

use thiserror::Error;

use crate::logic::Vc;

pub use external::{ExternalSolver, PersistentSolver};
pub use oracle::{check_oracle, Oracle};
pub use script::emit_script;

pub const DEFAULT_SOLVER: &str = "z3 -in -smt2";
pub const SOLVER_ENV: &str = "BOUNDCHECK_SOLVER";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    /// Counter-model text when the backend provides one.
    Invalid(Option<String>),
    Unknown(String),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid => f.write_str("valid"),
            Verdict::Invalid(_) => f.write_str("invalid"),
            Verdict::Unknown(r) => write!(f, "unknown ({r})"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SmtError {
    #[error("cannot start solver `{cmd}`: {reason}")]
    Spawn { cmd: String, reason: String },
    #[error("unexpected solver reply: {0}")]
    Protocol(String),
    #[error("outside oracle scope: {0}")]
    OracleOutOfScope(String),
}

pub trait Backend: Send + Sync {
    fn check(&self, vc: &Vc) -> Result<Verdict, SmtError>;

    /// Check several VCs; backends may share work across them.
    fn check_many(&self, vcs: &[Vc]) -> Result<Vec<Verdict>, SmtError> {
        vcs.iter().map(|vc| self.check(vc)).collect()
    }

    fn name(&self) -> String;
}
