use serde::{Deserialize, Serialize};
use std::fmt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes. The CLI maps these onto exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorCategory {
    Parse,
    Precondition,
    CapExceeded,
    Verification,
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("attribute `{attr}` is not in scheme {scheme}")]
    UnknownAttribute { attr: String, scheme: String },

    #[error("schemes overlap on `{attr}`: Cartesian products need disjoint schemes")]
    SchemeCollision { attr: String },

    #[error("relations live over different domains ({left} vs {right})")]
    DomainMismatch { left: String, right: String },

    #[error("attribute `{attr}` occurs in {count} factors, a bond allows at most 2")]
    NotBondable { attr: String, count: usize },

    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),

    #[error("invalid relation: {0}")]
    InvalidRelation(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("{what} is {value}, which exceeds the cap of {cap}")]
    CapExceeded { what: &'static str, value: u128, cap: u128 },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("relation symbol `{0}` is not bound in the environment")]
    UnboundSymbol(String),

    #[error("atom `{symbol}` has {found} arguments but its relation has arity {expected}")]
    ArityMismatch { symbol: String, expected: usize, found: usize },

    #[error("free variables do not match: {0}")]
    FreeVariables(String),

    #[error("refused: {0}")]
    Refused(Refusal),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{0} needs at least one input")]
    EmptyInput(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Syntax { .. } | Error::InvalidRelation(_) | Error::Json(_) => ErrorCategory::Parse,
            Error::CapExceeded { .. } => ErrorCategory::CapExceeded,
            Error::Verification(_) => ErrorCategory::Verification,
            Error::Io(_) => ErrorCategory::Io,
            _ => ErrorCategory::Precondition,
        }
    }

    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Syntax { line, column, message: message.into() }
    }

    pub(crate) fn refused(precondition: &str, detail: impl Into<String>) -> Self {
        Error::Refused(Refusal::new(precondition, detail))
    }
}

/// A violating configuration reported by a failed dependency check or a refusal.
///
/// `present` rows are tuples of the relation under test; `missing` is a tuple
/// the dependency requires but the relation lacks. Elements are rendered by name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub present: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub missing: Option<Vec<String>>,
}

/// Machine-readable reason why a constructive procedure declined to run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Refusal {
    /// Short stable identifier of the violated hypothesis, e.g. `not-a-key`.
    pub precondition: String,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<Witness>,
}

impl Refusal {
    pub fn new(precondition: &str, detail: impl Into<String>) -> Self {
        Refusal { precondition: precondition.to_string(), detail: detail.into(), witness: None }
    }

    pub fn with_witness(mut self, witness: Option<Witness>) -> Self {
        self.witness = witness;
        self
    }
}

impl fmt::Display for Refusal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.precondition, self.detail)
    }
}
