use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid device specification: {0}")]
    InvalidSpec(String),

    #[error("degenerate dispersion: {0}")]
    DegenerateDispersion(String),

    #[error("under-resolved grid: {0}")]
    Resolution(String),

    #[error("grid shape mismatch: {0}")]
    Shape(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("degenerate detection: {0}")]
    DegenerateDetection(String),

    #[error("unsupported correlation order ({0}, {1})")]
    UnsupportedOrder(u32, u32),

    #[error("non-physical cross-correlation C/A = {ratio:.6} (must exceed 1); background dominates")]
    NonPhysicalCorrelation { ratio: f64 },

    #[error("ill-posed fit: {0}")]
    IllPosed(String),

    #[error("optimizer did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize, trace: Vec<String> },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config { line, message: message.into() }
    }
}
