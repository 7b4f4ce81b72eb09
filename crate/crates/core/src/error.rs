use std::fmt;
use std::io;

/// Errors produced by instance construction, matching, and file I/O.
#[derive(Debug)]
pub enum Error {
    /// The instance parameters are inconsistent (k out of range, center
    /// outside the grid, duplicate ids, ...).
    InvalidInstance(String),
    /// An operation that needs a complete matching was handed a partial one.
    IncompleteAssignment { unassigned: usize },
    /// Pair sort would allocate more candidate pairs than the configured
    /// budget allows; the caller should fall back to the pair heap.
    PairBudgetExceeded { needed: u64, budget: u64 },
    /// An algorithm restricted to one center kind received the other.
    KindMismatch { expected: &'static str },
    /// A text input (instance file, assignment dump, sweep spec) failed to
    /// parse; `line` is 1-based.
    Parse { line: usize, msg: String },
    Io(io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInstance(msg) => write!(f, "invalid instance: {msg}"),
            Error::IncompleteAssignment { unassigned } => {
                write!(f, "assignment incomplete: {unassigned} pixels unassigned")
            }
            Error::PairBudgetExceeded { needed, budget } => write!(
                f,
                "pair sort needs {needed} pairs, budget is {budget}; use the pair heap instead"
            ),
            Error::KindMismatch { expected } => {
                write!(f, "algorithm requires {expected} centers")
            }
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(e: io::Error) -> Self {
        Error::Io(e)
    }
}
