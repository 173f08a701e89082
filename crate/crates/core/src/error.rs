use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("{what} at (h={h}, s={s}, a={a}) is not a distribution (sum = {sum})")]
    NotADistribution {
        what: &'static str,
        h: usize,
        s: usize,
        a: usize,
        sum: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot estimate a visitation distribution from an empty dataset")]
    EmptyDataset,

    #[error("feedback `{feedback}` references dataset `{dataset}` which was not provided")]
    MissingDataset { feedback: String, dataset: String },

    #[error("dual vector has length {found}, the feasible set layout has {expected} entries")]
    DualLayout { expected: usize, found: usize },

    #[error(
        "no grid point out of {points} is feasible; refine the grid or check that the feedback \
         admits a strictly feasible reward"
    )]
    EmptyFeasibleGrid { points: u64 },

    #[error("grid has {points} points, above the cap of {cap}")]
    GridTooLarge { points: u64, cap: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid problem spec at `{path}`: {message}")]
    Spec { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn spec(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// True for errors caused by the filesystem rather than by the problem itself.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
