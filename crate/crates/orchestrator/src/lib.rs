//! Node registry and replica placement.
//!
//! Two scoring policies are provided. [`SchedulerPolicy::ResourceCount`]
//! ranks nodes by free cores times memory and ignores how fast those cores
//! are, which is how the edge cluster ended up piling replicas onto the
//! Raspberry Pis. [`SchedulerPolicy::NetworkAware`] minimises the expected
//! response time seen by a client: round trip plus work over compute factor.

mod error;
mod node;
mod registry;
mod score;

pub use edgefaas_overlay::Site;
pub use error::{Error, Result};
pub use node::{reference_testbed, NodeSpec, COMPUTE_FACTOR_RPI, COMPUTE_FACTOR_VM};
pub use registry::{plan, Placement, Registry};
pub use score::{score_network_aware, score_resource_count, ScheduleContext, SchedulerPolicy, UnknownPolicy};
