//! Function gateway.
//!
//! The [`Gateway`] is a timing model: every call carries the time it happens
//! at, and the gateway answers with the time the client would see the reply.
//! Benchmarks drive it from a virtual clock; the [`http`] front end drives it
//! from the wall clock and waits out the computed latency before answering.

mod error;
mod gateway;
pub mod http;
mod spec;
pub mod workload;

pub use error::{Error, Result};
pub use gateway::{
    Clock, FunctionStatus, Gateway, GatewayConfig, Invocation, InvocationRecord, Outcome, Replica, ReplicaState,
    ScalingAction, VirtualClock, WallClock,
};
pub use spec::{FunctionSpec, WorkloadKind};
pub use workload::{run_heavy_classify, run_sentiment, Sentiment};
