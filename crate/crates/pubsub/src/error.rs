use edgefaas_overlay::Site;

use crate::broker::PublishReceipt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum Error {
    /// The message is committed at its origin but missed the listed peers.
    #[error("replicas {peers:?} unreachable, message committed locally")]
    ReplicaUnreachable { peers: Vec<String>, receipt: PublishReceipt },
    #[error("no replica with index {0}")]
    UnknownReplica(usize),
    #[error("publisher {publisher} sequence {seq} does not follow {last}")]
    OutOfOrder { publisher: u32, seq: u64, last: u64 },
    #[error("payload is {got} bytes, configured size is {want}")]
    PayloadSize { got: usize, want: usize },
    #[error("no link profile between {0} and {1}")]
    MissingLink(Site, Site),
    #[error("the cluster has no replicas")]
    NoReplicas,
    #[error("subscriber {subscriber} received {got} of {want} messages")]
    BenchIncomplete { subscriber: usize, got: u64, want: u64 },
    #[error("invalid bench config: {0}")]
    InvalidConfig(&'static str),
}
