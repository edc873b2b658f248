use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("csv parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("{0}")]
    Csv(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("estimator start failure: {0}")]
    StartFailure(String),

    #[error("singular covariance: {0}")]
    Singular(String),

    /// More than `h` points lie on one line: the robust scatter is singular.
    #[error("exact fit: {count} points lie on the line through ({:.6}, {:.6}) with normal ({:.6}, {:.6})", center[0], center[1], normal[0], normal[1])]
    ExactFit {
        center: [f64; 2],
        normal: [f64; 2],
        count: usize,
    },

    #[error("bootstrap ensemble rejected: {failed} failed refits for B = {replicates}")]
    EnsembleQuality { failed: usize, replicates: usize },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error(
        "curve fit did not converge after {iterations} iterations (last iterate {last:?}); try a different scale start"
    )]
    FitNotConverged { iterations: usize, last: [f64; 4] },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, with stage labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for covariance failures that make the JE test unavailable.
    pub fn is_singularity(&self) -> bool {
        matches!(self.root(), Error::Singular(_) | Error::ExactFit { .. })
    }
}
