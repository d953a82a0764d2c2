use std::collections::BTreeMap;

use parking_lot::RwLock;

use crate::error::{Error, Result};
use crate::node::NodeSpec;
use crate::score::{score_network_aware, score_resource_count, ScheduleContext, SchedulerPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub workload: String,
    /// Replica count per node, sorted by node name.
    pub assignments: Vec<(String, u32)>,
    pub policy_used: SchedulerPolicy,
    /// Node chosen for each replica, in assignment order.
    pub order: Vec<String>,
}

impl Placement {
    pub fn total(&self) -> u32 {
        self.assignments.iter().map(|(_, n)| n).sum()
    }

    pub fn count_on(&self, node: &str) -> u32 {
        self.assignments.iter().find(|(n, _)| n == node).map_or(0, |(_, c)| *c)
    }
}

/// Greedy placement over a snapshot of nodes. Each replica goes to the best
/// scoring node with a free slot; scores are recomputed after every step and
/// ties go to the lexicographically smallest name.
pub fn plan(
    nodes: &[NodeSpec],
    workload: &str,
    replicas: u32,
    policy: SchedulerPolicy,
    ctx: &ScheduleContext,
) -> Result<Placement> {
    let available: u32 = nodes.iter().map(NodeSpec::free_slots).sum();
    if available < replicas {
        return Err(Error::InsufficientCapacity { requested: replicas, available });
    }
    let mut work: Vec<NodeSpec> = nodes.to_vec();
    work.sort_by(|a, b| a.name.cmp(&b.name));

    let mut order = Vec::with_capacity(replicas as usize);
    for _ in 0..replicas {
        let mut best: Option<(usize, f64)> = None;
        for (i, node) in work.iter().enumerate() {
            if node.free_slots() == 0 {
                continue;
            }
            let (score, better) = match policy {
                SchedulerPolicy::ResourceCount => {
                    let s = score_resource_count(node);
                    (s, best.map_or(true, |(_, b)| s > b))
                }
                SchedulerPolicy::NetworkAware => {
                    let s = score_network_aware(node, ctx.rtt(node.site)?, ctx.work_units);
                    (s, best.map_or(true, |(_, b)| s < b))
                }
            };
            // Names are visited in ascending order, so strict comparison keeps ties on the smaller name.
            if better {
                best = Some((i, score));
            }
        }
        let (i, _) = best.expect("capacity was checked up front");
        work[i].allocated_replicas += 1;
        order.push(work[i].name.clone());
    }

    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for name in &order {
        *counts.entry(name).or_default() += 1;
    }
    Ok(Placement {
        workload: workload.to_owned(),
        assignments: counts.into_iter().map(|(n, c)| (n.to_owned(), c)).collect(),
        policy_used: policy,
        order,
    })
}

/// Registered nodes behind one lock; scheduling happens atomically with
/// respect to registrations and releases.
#[derive(Debug, Default)]
pub struct Registry {
    nodes: RwLock<BTreeMap<String, NodeSpec>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes(nodes: impl IntoIterator<Item = NodeSpec>) -> Result<Self> {
        let reg = Self::new();
        for n in nodes {
            reg.register_node(n)?;
        }
        Ok(reg)
    }

    pub fn register_node(&self, mut spec: NodeSpec) -> Result<()> {
        spec.allocated_replicas = 0;
        spec.validate()?;
        let mut nodes = self.nodes.write();
        if nodes.contains_key(&spec.name) {
            return Err(Error::DuplicateNode(spec.name));
        }
        nodes.insert(spec.name.clone(), spec);
        Ok(())
    }

    pub fn nodes(&self) -> Vec<NodeSpec> {
        self.nodes.read().values().cloned().collect()
    }

    pub fn node(&self, name: &str) -> Option<NodeSpec> {
        self.nodes.read().get(name).cloned()
    }

    pub fn len(&self) -> usize {
        self.nodes.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.read().is_empty()
    }

    pub fn schedulable(&self) -> usize {
        self.nodes.read().values().filter(|n| n.schedulable).count()
    }

    pub fn spare_capacity(&self) -> u32 {
        self.nodes.read().values().map(NodeSpec::free_slots).sum()
    }

    pub fn schedule(
        &self,
        workload: &str,
        replicas: u32,
        policy: SchedulerPolicy,
        ctx: &ScheduleContext,
    ) -> Result<Placement> {
        let mut nodes = self.nodes.write();
        let snapshot: Vec<NodeSpec> = nodes.values().cloned().collect();
        let placement = plan(&snapshot, workload, replicas, policy, ctx)?;
        for (name, count) in &placement.assignments {
            nodes.get_mut(name).expect("planned on a snapshot of these nodes").allocated_replicas += count;
        }
        Ok(placement)
    }

    pub fn release(&self, node: &str, count: u32) -> Result<()> {
        let mut nodes = self.nodes.write();
        let n = nodes.get_mut(node).ok_or_else(|| Error::UnknownNode(node.to_owned()))?;
        if n.allocated_replicas < count {
            return Err(Error::OverRelease { node: node.to_owned(), count, allocated: n.allocated_replicas });
        }
        n.allocated_replicas -= count;
        Ok(())
    }

    pub fn release_placement(&self, placement: &Placement) -> Result<()> {
        let mut nodes = self.nodes.write();
        for (name, count) in &placement.assignments {
            let n = nodes.get(name).ok_or_else(|| Error::UnknownNode(name.clone()))?;
            if n.allocated_replicas < *count {
                return Err(Error::OverRelease { node: name.clone(), count: *count, allocated: n.allocated_replicas });
            }
        }
        for (name, count) in &placement.assignments {
            nodes.get_mut(name).unwrap().allocated_replicas -= count;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::net::Ipv4Addr;

    use edgefaas_overlay::Site;

    use super::*;
    use crate::node::reference_testbed;

    fn as_ctx(work: f64) -> ScheduleContext {
        ScheduleContext::new(work).with_rtt(Site::Op, 1.17).with_rtt(Site::Rs, 27.57).with_rtt(Site::Cd, 231.5)
    }

    #[test]
    fn register_and_duplicate() {
        let reg = Registry::new();
        reg.register_node(NodeSpec::new("worker-1", Site::Op, Ipv4Addr::new(10, 42, 0, 2), 2, 8.0, 1.0)).unwrap();
        assert_eq!(reg.node("worker-1").unwrap().allocated_replicas, 0);
        let dup = reg.register_node(NodeSpec::new("worker-1", Site::Cd, Ipv4Addr::new(10, 42, 0, 9), 2, 8.0, 1.0));
        assert_eq!(dup, Err(Error::DuplicateNode("worker-1".into())));
    }

    #[test]
    fn resource_count_trace_on_full_testbed() {
        let reg = Registry::with_nodes(reference_testbed()).unwrap();
        assert_eq!(reg.schedulable(), 8);
        let p = reg.schedule("fn", 4, SchedulerPolicy::ResourceCount, &ScheduleContext::default()).unwrap();
        assert_eq!(p.order, ["rpi-1", "rpi-2", "rpi-3", "rpi-4"]);
        // Rescoring: after one replica each, a Pi scores 3 x 8 = 24, still above a VM's 16.
        let p = reg.schedule("fn2", 8, SchedulerPolicy::ResourceCount, &ScheduleContext::default()).unwrap();
        assert!(p.order.iter().all(|n| n.starts_with("rpi")));
        // 16 vs 16 tie goes to the Pis by name, then 8 vs 16 flips to the VMs.
        let p = reg.schedule("fn3", 1, SchedulerPolicy::ResourceCount, &ScheduleContext::default()).unwrap();
        assert_eq!(p.order, ["worker-1"]);
    }

    #[test]
    fn network_aware_heavy_avoids_pis() {
        let reg = Registry::with_nodes(reference_testbed()).unwrap();
        let p = reg.schedule("heavy", 2, SchedulerPolicy::NetworkAware, &as_ctx(1000.0)).unwrap();
        assert_eq!(p.order, ["worker-1", "worker-1"]);

        let remote = Registry::with_nodes(reference_testbed().into_iter().filter(|n| n.site != Site::Op)).unwrap();
        let p = remote.schedule("heavy", 2, SchedulerPolicy::NetworkAware, &as_ctx(1000.0)).unwrap();
        assert_eq!(p.order, ["worker-3", "worker-3"]);
        let p = remote.schedule("light", 1, SchedulerPolicy::NetworkAware, &as_ctx(10.0)).unwrap();
        assert_eq!(p.order, ["rpi-1"]);
    }

    #[test]
    fn capacity_exhaustion() {
        let reg = Registry::with_nodes(reference_testbed()).unwrap();
        assert_eq!(reg.spare_capacity(), 24);
        let err = reg.schedule("big", 100, SchedulerPolicy::ResourceCount, &ScheduleContext::default());
        assert_eq!(err, Err(Error::InsufficientCapacity { requested: 100, available: 24 }));
        assert_eq!(reg.spare_capacity(), 24);
    }

    #[test]
    fn missing_rtt_is_reported() {
        let reg = Registry::with_nodes(reference_testbed()).unwrap();
        let ctx = ScheduleContext::new(1.0).with_rtt(Site::Op, 1.0);
        assert_eq!(reg.schedule("x", 1, SchedulerPolicy::NetworkAware, &ctx), Err(Error::MissingRtt(Site::Rs)));
    }

    #[test]
    fn release_restores_capacity() {
        let reg = Registry::with_nodes(reference_testbed()).unwrap();
        let p = reg.schedule("fn", 6, SchedulerPolicy::ResourceCount, &ScheduleContext::default()).unwrap();
        assert_eq!(reg.spare_capacity(), 18);
        reg.release_placement(&p).unwrap();
        assert_eq!(reg.spare_capacity(), 24);
        assert!(matches!(reg.release("rpi-1", 1), Err(Error::OverRelease { .. })));
        assert!(matches!(reg.release("nope", 1), Err(Error::UnknownNode(_))));
    }
}
