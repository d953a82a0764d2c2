//! Replicated publish/subscribe.
//!
//! Every worker runs a broker replica. A publish is committed at the replica
//! the client is attached to, fanned out to that replica's subscribers and
//! pushed synchronously to every peer before the client is acknowledged.
//! Calls carry the time they happen at and return modelled completion
//! times, so the same cluster serves unit tests and the seeded
//! [`bench::run_pubsub_bench`].

pub mod bench;
mod broker;
mod error;

pub use bench::{run_pubsub_bench, BenchConfig, BenchOutcome, RunResult};
pub use broker::{
    BrokerCluster, BrokerConfig, Delivery, Message, MessageId, PublishReceipt, ReplicaSpec, Subscription,
};
pub use error::{Error, Result};
