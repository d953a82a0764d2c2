use std::path::PathBuf;

use edgefaas_overlay::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot parse scenario: {0}")]
    ParseError(String),
    #[error("scenario {scenario} has no link profile for {missing:?}")]
    IncompleteLinks { scenario: String, missing: Vec<(Site, Site)> },
    #[error("unknown scenario {0:?}; built-ins are OP, RS, CD and AS")]
    UnknownScenario(String),
    #[error("link {0}-{1} is down")]
    LinkDown(Site, Site),
    #[error("function {0:?} is not deployed")]
    DeploymentMissing(String),
    #[error("no samples to summarize")]
    EmptySamples,
    #[error("no reports to write")]
    NoReports,
    #[error("{path}: {source}")]
    IoError { path: PathBuf, source: std::io::Error },
    #[error("malformed report: {0}")]
    BadReport(String),
    #[error(transparent)]
    Overlay(#[from] edgefaas_overlay::Error),
    #[error(transparent)]
    Scheduler(#[from] edgefaas_orchestrator::Error),
    #[error(transparent)]
    Gateway(#[from] edgefaas_gateway::Error),
    #[error(transparent)]
    PubSub(#[from] edgefaas_pubsub::Error),
    #[error(transparent)]
    Docstore(#[from] edgefaas_docstore::Error),
}
