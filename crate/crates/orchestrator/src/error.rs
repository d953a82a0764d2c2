use edgefaas_overlay::Site;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    #[error("node {0:?} already registered")]
    DuplicateNode(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid node spec for {name:?}: {reason}")]
    InvalidNode { name: String, reason: &'static str },
    #[error("need {requested} replicas but only {available} slots are free")]
    InsufficientCapacity { requested: u32, available: u32 },
    #[error("no client round trip known for site {0}")]
    MissingRtt(Site),
    #[error("cannot release {count} replicas from {node:?}, only {allocated} allocated")]
    OverRelease { node: String, count: u32, allocated: u32 },
}
