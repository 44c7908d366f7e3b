use crate::panel::Cell;

/// Errors produced while loading data or evaluating estimators.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column '{0}' in header")]
    MissingColumn(String),

    #[error("row {row}, column '{column}': {message}")]
    MalformedRow {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty sample")]
    EmptySample,

    #[error("cell (g={g}, r={r}) is empty but required by {needed_by}", g = cell.g, r = cell.r)]
    EmptyCell { cell: Cell, needed_by: &'static str },

    #[error("y1 requested for attritor cell (g={g}, r=0)", g = g)]
    Y1ForAttritors { g: u8 },

    #[error("logistic outcome has a single class")]
    SingleClassOutcome,

    #[error("logistic fit did not converge (possible perfect separation)")]
    PropensityFitFailed,

    #[error("all observations trimmed away")]
    AllTrimmed,

    #[error("invalid trim rule: floor {floor} must lie below ceiling {ceiling} in [0,1]")]
    InvalidTrimRule { floor: f64, ceiling: f64 },

    #[error("invalid bootstrap spec: {0}")]
    InvalidBootstrapSpec(String),

    #[error("cluster resampling requested but record '{0}' has no cluster id")]
    MissingClusterId(String),

    #[error("{failed} of {total} bootstrap replicates failed (more than 20%); result unreliable")]
    TooManyBootstrapFailures { failed: usize, total: usize },

    #[error("unknown design '{0}' (expected I, II, or III)")]
    UnknownDesign(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
