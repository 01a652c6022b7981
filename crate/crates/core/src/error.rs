use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Malformed input document. `line` is 1-based for line-oriented formats.
    Parse {
        line: Option<usize>,
        msg: String,
    },
    /// A field violates a domain invariant.
    Invalid {
        field: String,
        msg: String,
    },
    DuplicateId(String),
    MissingModel {
        model: String,
        line: usize,
    },
    UnknownModel {
        model: String,
        line: usize,
    },
    DimensionMismatch {
        expected: usize,
        found: usize,
        line: Option<usize>,
    },
    /// The requested budget cannot be met by any router.
    Infeasible(String),
    /// Inputs for which the statistic or fit is undefined.
    Degenerate(String),
    TooLarge(String),
    Io(std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Invalid { field: field.into(), msg: msg.into() }
    }

    /// Infeasible budgets and degenerate statistics, as opposed to bad input data.
    pub fn is_computational(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::Degenerate(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parse { line: Some(l), msg } => write!(f, "line {l}: parse error: {msg}"),
            Error::Parse { line: None, msg } => write!(f, "parse error: {msg}"),
            Error::Invalid { field, msg } => write!(f, "invalid {field}: {msg}"),
            Error::DuplicateId(id) => write!(f, "duplicate id \"{id}\""),
            Error::MissingModel { model, line } => {
                write!(f, "line {line}: qualities missing for model \"{model}\"")
            }
            Error::UnknownModel { model, line } => {
                write!(f, "line {line}: qualities given for unknown model \"{model}\"")
            }
            Error::DimensionMismatch { expected, found, line: Some(l) } => {
                write!(f, "line {l}: dimension mismatch: expected {expected}, found {found}")
            }
            Error::DimensionMismatch { expected, found, line: None } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::Infeasible(msg) => write!(f, "infeasible: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::TooLarge(msg) => write!(f, "instance too large: {msg}"),
            Error::Io(e) => write!(f, "io: {e}"),
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

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
