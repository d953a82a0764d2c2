use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use edgefaas_overlay::Site;

use crate::error::{Error, Result};
use crate::node::NodeSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SchedulerPolicy {
    #[default]
    ResourceCount,
    NetworkAware,
}

impl SchedulerPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            SchedulerPolicy::ResourceCount => "resource-count",
            SchedulerPolicy::NetworkAware => "network-aware",
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scheduler policy {0:?}")]
pub struct UnknownPolicy(pub String);

impl FromStr for SchedulerPolicy {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "resource-count" => Ok(SchedulerPolicy::ResourceCount),
            "network-aware" => Ok(SchedulerPolicy::NetworkAware),
            _ => Err(UnknownPolicy(s.to_owned())),
        }
    }
}

/// Client round trips per site and the expected work of one invocation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScheduleContext {
    pub client_rtt_ms: BTreeMap<Site, f64>,
    pub work_units: f64,
}

impl ScheduleContext {
    pub fn new(work_units: f64) -> Self {
        Self { client_rtt_ms: BTreeMap::new(), work_units }
    }

    pub fn with_rtt(mut self, site: Site, rtt_ms: f64) -> Self {
        self.client_rtt_ms.insert(site, rtt_ms);
        self
    }

    pub fn rtt(&self, site: Site) -> Result<f64> {
        self.client_rtt_ms.get(&site).copied().ok_or(Error::MissingRtt(site))
    }
}

/// Free cores times memory. Higher is better; compute speed is not considered.
pub fn score_resource_count(node: &NodeSpec) -> f64 {
    node.free_cores() as f64 * node.memory_gb
}

/// Expected response time in milliseconds. Lower is better.
pub fn score_network_aware(node: &NodeSpec, client_rtt_ms: f64, work_units: f64) -> f64 {
    client_rtt_ms + work_units / node.compute_factor
}
