pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error("function {0:?} is already deployed")]
    DuplicateFunction(String),
    #[error("function {0:?} is not deployed")]
    UnknownFunction(String),
    #[error("invalid function spec: {0}")]
    InvalidSpec(&'static str),
    #[error("heavy-classify needs at least one label")]
    EmptyLabels,
    #[error(transparent)]
    Scheduler(#[from] edgefaas_orchestrator::Error),
}
