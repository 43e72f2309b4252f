use thiserror::Error;

/// All failure modes surfaced by the library.
///
/// Infeasibility variants (`MultiMdInfeasible`, `Stratification`,
/// `DegenerateConstraint`) describe datasets on which a requested method
/// cannot be posed at all, as opposed to invalid inputs or broken files;
/// callers that distinguish "bad request" from "method not applicable"
/// should branch on [`Error::is_infeasibility`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("estimator error: {0}")]
    Estimator(String),

    #[error("stratification into {k} strata failed: a stratum is empty")]
    Stratification { k: usize },

    #[error(
        "Multi MD with K = {k} is infeasible: stratum {stratum} has a one-sided sensitive feature"
    )]
    MultiMdInfeasible { k: usize, stratum: usize },

    #[error("degenerate constraint system: {0}")]
    DegenerateConstraint(String),

    /// Raised by experiment runs only when every requested method turned
    /// out infeasible, so it counts as infeasibility, not invalid input.
    #[error("harness error: {0}")]
    Harness(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that mean "this method cannot be applied to this
    /// data", which the CLI maps to its own exit code.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::Stratification { .. }
                | Error::MultiMdInfeasible { .. }
                | Error::DegenerateConstraint(_)
                | Error::Harness(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
