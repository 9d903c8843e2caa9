use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("unknown cell id `{0}`")]
    UnknownCell(String),

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    EntryOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },

    #[error("group `{0}` has no cells")]
    EmptyGroup(String),

    #[error("labels cover {labels} cells but the matrix has {cells}")]
    LabelLengthMismatch { labels: usize, cells: usize },

    #[error("duplicate sample name `{0}`")]
    DuplicateSample(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: dimension mismatch: {msg}")]
    DimensionMismatch { path: PathBuf, msg: String },

    #[error("{path}:{line}: non-integer value `{value}`")]
    NonInteger {
        path: PathBuf,
        line: usize,
        value: String,
    },

    #[error("{path}:{line}: negative count {value}")]
    NegativeCount {
        path: PathBuf,
        line: usize,
        value: i64,
    },

    #[error("{path}:{line}: index ({row}, {col}) out of range")]
    IndexOutOfRange {
        path: PathBuf,
        line: usize,
        row: usize,
        col: usize,
    },

    #[error("{path}:{line}: duplicate coordinate ({row}, {col})")]
    DuplicateCoordinate {
        path: PathBuf,
        line: usize,
        row: usize,
        col: usize,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: barcode `{barcode}` has conflicting labels `{first}` and `{second}`")]
    ConflictingLabel {
        path: PathBuf,
        barcode: String,
        first: String,
        second: String,
    },

    #[error("malformed barcode `{barcode}` for cell `{cell}`")]
    MalformedBarcode { cell: String, barcode: String },

    #[error("cell `{cell}` has total count 0; filter cells before normalizing")]
    ZeroLibrary { cell: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("group and reference share cell `{0}`")]
    OverlappingGroups(String),

    #[error("nothing to test: {0}")]
    NothingToTest(String),

    #[error("gene budget exceeded: need {needed} distinct genes but only {available} exist")]
    GeneBudget { needed: usize, available: usize },

    #[error("step `{step}`: missing input {path}")]
    MissingInput { step: String, path: PathBuf },

    #[error("step `{step}` requires outputs of `{upstream}`, which has not completed")]
    MissingUpstream { step: String, upstream: String },

    #[error("step `{step}` is stale: {msg}")]
    Stale { step: String, msg: String },

    #[error("step `{step}` failed: {source}")]
    StepFailed {
        step: String,
        #[source]
        source: Box<Error>,
    },

    #[error("output directory {0} is locked by another pipeline instance")]
    Locked(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
