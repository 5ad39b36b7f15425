use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid resolution error: {0}")]
    Resolution(String),

    #[error("background window is empty: every sample lies inside a readout interval")]
    EmptyWindow,

    #[error("degenerate regressors: |<f, b>| = {overlap} leaves the mode indistinguishable from the background")]
    Singular { overlap: f64 },

    #[error("value undefined: {0}")]
    Undefined(String),

    #[error("{what} did not converge after {iterations} iterations (best objective {best_objective})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        best_objective: f64,
        best_point: Vec<f64>,
    },

    #[error("no trials survived post-selection")]
    EmptyDataset,

    #[error("invalid data: {0}")]
    Data(String),

    #[error("cannot pair {photon} photon sets with {control} control sets")]
    Pairing { photon: usize, control: usize },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("underdetermined: {0}")]
    Underdetermined(String),

    #[error("ill-conditioned regression: {0}")]
    Conditioning(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
