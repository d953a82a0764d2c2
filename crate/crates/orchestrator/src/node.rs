use std::net::Ipv4Addr;

use edgefaas_overlay::Site;

use crate::error::{Error, Result};

pub const COMPUTE_FACTOR_VM: f64 = 1.0;
pub const COMPUTE_FACTOR_RPI: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub site: Site,
    pub overlay_ip: Ipv4Addr,
    pub cpu_cores: u32,
    pub memory_gb: f64,
    /// Work units processed per millisecond.
    pub compute_factor: f64,
    pub allocated_replicas: u32,
    /// Control-plane nodes are registered but never receive replicas.
    pub schedulable: bool,
}

impl NodeSpec {
    pub fn new(
        name: impl Into<String>,
        site: Site,
        overlay_ip: Ipv4Addr,
        cpu_cores: u32,
        memory_gb: f64,
        compute_factor: f64,
    ) -> Self {
        Self {
            name: name.into(),
            site,
            overlay_ip,
            cpu_cores,
            memory_gb,
            compute_factor,
            allocated_replicas: 0,
            schedulable: true,
        }
    }

    pub fn control_plane(mut self) -> Self {
        self.schedulable = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason| Err(Error::InvalidNode { name: self.name.clone(), reason });
        if self.name.is_empty() {
            return fail("empty name");
        }
        if self.site == Site::Tester {
            return fail("the tester is not a cluster site");
        }
        if self.cpu_cores == 0 {
            return fail("cpu_cores must be at least 1");
        }
        if !(self.compute_factor > 0.0 && self.compute_factor.is_finite()) {
            return fail("compute_factor must be positive");
        }
        if !(self.memory_gb >= 0.0 && self.memory_gb.is_finite()) {
            return fail("memory_gb must be non-negative");
        }
        if self.allocated_replicas > self.max_replicas() {
            return fail("allocated replicas exceed the per-node cap");
        }
        Ok(())
    }

    /// One replica per core.
    pub fn max_replicas(&self) -> u32 {
        if self.schedulable {
            self.cpu_cores
        } else {
            0
        }
    }

    pub fn free_slots(&self) -> u32 {
        self.max_replicas().saturating_sub(self.allocated_replicas)
    }

    pub fn free_cores(&self) -> u32 {
        self.cpu_cores.saturating_sub(self.allocated_replicas)
    }

    pub fn is_rpi(&self) -> bool {
        self.site == Site::Rs
    }
}

/// The device table of the edge testbed: a control-plane master and two
/// worker VMs on premises, four Raspberry Pis at the remote site and two
/// worker VMs in the cloud.
pub fn reference_testbed() -> Vec<NodeSpec> {
    let ip = |n| Ipv4Addr::new(10, 42, 0, n);
    let mut nodes = vec![
        NodeSpec::new("master", Site::Op, ip(1), 4, 8.0, COMPUTE_FACTOR_VM).control_plane(),
        NodeSpec::new("worker-1", Site::Op, ip(2), 2, 8.0, COMPUTE_FACTOR_VM),
        NodeSpec::new("worker-2", Site::Op, ip(3), 2, 8.0, COMPUTE_FACTOR_VM),
    ];
    for i in 1..=4u8 {
        nodes.push(NodeSpec::new(format!("rpi-{i}"), Site::Rs, ip(3 + i), 4, 8.0, COMPUTE_FACTOR_RPI));
    }
    nodes.push(NodeSpec::new("worker-3", Site::Cd, ip(8), 2, 8.0, COMPUTE_FACTOR_VM));
    nodes.push(NodeSpec::new("worker-4", Site::Cd, ip(9), 2, 8.0, COMPUTE_FACTOR_VM));
    nodes
}
