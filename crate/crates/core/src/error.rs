use thiserror::Error;

use crate::metrics::FeasibilityReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unknown receiver index {index} (have {count})")]
    ReceiverIndex { index: usize, count: usize },
    #[error("conic program is malformed: {0}")]
    MalformedProgram(String),
    #[error("subproblem infeasible: {0}")]
    Infeasible(String),
    #[error("solver numerical failure: {0}")]
    NumericalFailure(String),
    #[error("initial iterate infeasible: {report:?}")]
    InfeasibleStart { report: Box<FeasibilityReport> },
    #[error("config file error: {0}")]
    ConfigIo(String),
}

pub type Result<T> = std::result::Result<T, Error>;
