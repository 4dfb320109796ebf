use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes disagree at a tape node.
    #[error("shape mismatch at node {node} ({op}): {detail}")]
    Shape {
        node: usize,
        op: &'static str,
        detail: String,
    },

    #[error("backward requires a scalar root, node {node} has shape {rows}x{cols}")]
    NonScalarRoot { node: usize, rows: usize, cols: usize },

    #[error("non-finite value at coordinate {index}: {value}")]
    NonFinite { index: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular low-rank core (condition number {condition:e})")]
    SingularCore { condition: f64 },

    #[error("insufficient snapshots: have {have}, need {need}")]
    InsufficientSnapshots { have: usize, need: usize },

    #[error("unknown partition policy `{0}`")]
    UnknownPolicy(String),

    #[error("step {t} outside schedule range [0, {total}]")]
    ScheduleRange { t: usize, total: usize },

    #[error("dense Hessian guard: {dim} parameters exceeds limit {limit}")]
    HessianGuard { dim: usize, limit: usize },

    #[error("collinear plane points (angle {angle:e} rad)")]
    Collinear { angle: f64 },

    #[error("csv line {line}: {kind}")]
    Csv { line: usize, kind: CsvErrorKind },

    #[error("config error: {0}")]
    Config(String),

    #[error("report schema version {found} does not match {expected} ({path})")]
    SchemaVersion {
        path: String,
        found: u32,
        expected: u32,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CsvErrorKind {
    Empty,
    BadHeader(String),
    Ragged { expected: usize, found: usize },
    NonNumeric(String),
    BadLabel(String),
    LabelGap { missing: usize },
}

impl std::fmt::Display for CsvErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvErrorKind::Empty => write!(f, "dataset has no rows"),
            CsvErrorKind::BadHeader(h) => write!(f, "bad header `{h}`"),
            CsvErrorKind::Ragged { expected, found } => {
                write!(f, "ragged row: expected {expected} fields, found {found}")
            }
            CsvErrorKind::NonNumeric(cell) => write!(f, "non-numeric cell `{cell}`"),
            CsvErrorKind::BadLabel(cell) => write!(f, "label `{cell}` is not a non-negative integer"),
            CsvErrorKind::LabelGap { missing } => {
                write!(f, "labels are not contiguous from 0: label {missing} is missing")
            }
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::UnknownPolicy(_)
            | Error::SchemaVersion { .. }
            | Error::Csv { .. }
            | Error::InvalidArgument(_)
            | Error::Json(_) => 2,
            Error::NonFinite { .. }
            | Error::SingularCore { .. }
            | Error::Collinear { .. }
            | Error::HessianGuard { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
