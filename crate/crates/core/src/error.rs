use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("income must be non-negative, got Y = {0}")]
    NegativeIncome(f64),

    #[error("isocline tracing failed: {0}")]
    Tracing(String),

    #[error("step size underflow at t = {t}, Y = {y}, R = {r} (h = {h:e})")]
    StepUnderflow { t: f64, y: f64, r: f64, h: f64 },

    #[error("non-finite state at t = {t} (Y = {y}, R = {r})")]
    NonFinite { t: f64, y: f64, r: f64 },

    #[error("reduced simulation stalled at fold Y = {y}: slow flow vanishes exactly at the fold")]
    Stalled { y: f64 },

    #[error("no stable landing branch at Y = {y} from R = {r}")]
    NoLandingBranch { y: f64, r: f64 },

    #[error("state (Y = {y}, R = {r}) is not on a stable branch of the isocline")]
    NotOnStableBranch { y: f64, r: f64 },

    #[error("scenario step {index}: {source}")]
    Scenario {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("config error in {path}: {message}")]
    Config { path: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Tracing(_)
                | Error::StepUnderflow { .. }
                | Error::NonFinite { .. }
                | Error::Stalled { .. }
                | Error::NoLandingBranch { .. }
                | Error::NotOnStableBranch { .. }
                | Error::NoSolution(_)
        ) || matches!(self, Error::Scenario { source, .. } if source.is_numerical())
    }
}
