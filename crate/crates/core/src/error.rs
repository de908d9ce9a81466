use thiserror::Error;

/// A single rule violation found while checking a query tree against the
/// restricted OLAP shape. `path` locates the offending node from the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub rule: &'static str,
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at {}: {}", self.rule, self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {message}")]
    Csv { path: String, message: String },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("unknown table: {0}")]
    UnknownTable(String),

    #[error("unknown column: {0}")]
    UnknownColumn(String),

    #[error("ambiguous column reference: {0}")]
    AmbiguousColumn(String),

    #[error("cell parse error in table {table}, row {row}, column {column}: {message}")]
    CellParse {
        table: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("type mismatch: cannot compare {lhs} with {rhs}")]
    TypeMismatch { lhs: &'static str, rhs: &'static str },

    #[error("numeric overflow in {0}")]
    Overflow(String),

    #[error("non-numeric sum operand in {0}")]
    NonNumericSum(String),

    #[error("invalid function call: {0}")]
    BadFunction(String),

    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("unsupported construct: {0}")]
    Unsupported(String),

    #[error("unresolvable alias: {0}")]
    UnresolvableAlias(String),

    #[error("invalid query:{}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("duplicate view: an identical view already exists as {0}")]
    DuplicateView(String),

    #[error("unknown item: {0}")]
    UnknownItem(String),

    #[error("invalid state transition for {item}: {message}")]
    WrongState { item: String, message: String },

    #[error("analysis refused: {0}")]
    AnalysisGuard(String),

    #[error("residual derivation failed: {0}")]
    NotDerivable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("workload error: {0}")]
    Workload(String),

    #[error("store error: {0}")]
    Store(String),

    #[error("bench error: {0}")]
    Bench(String),
}

fn format_violations(violations: &[Violation]) -> String {
    let mut out = String::new();
    for v in violations {
        out.push_str("\n  - ");
        out.push_str(&v.to_string());
    }
    out
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
