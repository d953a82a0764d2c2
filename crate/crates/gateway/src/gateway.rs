use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use edgefaas_orchestrator::{Registry, ScheduleContext, SchedulerPolicy};
use edgefaas_overlay::LinkEmulator;
use parking_lot::{Mutex, RwLock};
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::spec::{FunctionSpec, WorkloadKind};
use crate::workload;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_ms(&self) -> f64 {
        self.origin.elapsed().as_secs_f64() * 1000.0
    }
}

#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<f64>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Moves the clock forward; never backwards.
    pub fn advance_to(&self, t: f64) {
        let mut now = self.now.lock();
        if t > *now {
            *now = t;
        }
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> f64 {
        *self.now.lock()
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    /// Mean in-flight requests per warm replica that triggers a scale up.
    pub scale_up_in_flight: f64,
    pub window_ms: f64,
    pub cooldown_ms: f64,
    pub tick_ms: f64,
}

impl GatewayConfig {
    pub const DESK_COOLDOWN_MS: f64 = 30_000.0;
    pub const FULL_COOLDOWN_MS: f64 = 900_000.0;
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { scale_up_in_flight: 5.0, window_ms: 1000.0, cooldown_ms: Self::DESK_COOLDOWN_MS, tick_ms: 1000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplicaState {
    Cold,
    Warm,
    Busy,
}

/// One function instance, modelled as a single FIFO server.
#[derive(Debug, Clone)]
pub struct Replica {
    pub id: u64,
    pub node: String,
    pub compute_factor: f64,
    pub ready_at: f64,
    /// When the last queued request leaves service.
    pub free_at: f64,
    pub last_used: f64,
    pub served: u64,
    spans: VecDeque<(f64, f64)>,
}

impl Replica {
    fn new(id: u64, node: String, compute_factor: f64, ready_at: f64) -> Self {
        Self {
            id,
            node,
            compute_factor,
            ready_at,
            free_at: ready_at,
            last_used: ready_at,
            served: 0,
            spans: VecDeque::new(),
        }
    }

    pub fn state(&self, now: f64) -> ReplicaState {
        if now < self.ready_at {
            ReplicaState::Cold
        } else if self.free_at > now {
            ReplicaState::Busy
        } else {
            ReplicaState::Warm
        }
    }

    /// Requests that have reached this replica and not yet left service.
    pub fn in_flight(&self, now: f64) -> usize {
        self.spans.iter().filter(|(a, d)| *a <= now && now < *d).count()
    }

    fn busy_time(&self, from: f64, to: f64) -> f64 {
        self.spans.iter().map(|(a, d)| (d.min(to) - a.max(from)).max(0.0)).sum()
    }

    fn prune(&mut self, before: f64) {
        while self.spans.front().is_some_and(|(_, d)| *d < before) {
            self.spans.pop_front();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    Timeout,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvocationRecord {
    pub function: String,
    pub replica: u64,
    pub node: String,
    pub enqueue_ms: f64,
    pub start_ms: f64,
    pub finish_ms: f64,
    pub outcome: Outcome,
    pub network_ms: f64,
    pub service_ms: f64,
    pub cold_wait_ms: f64,
}

impl InvocationRecord {
    pub fn response_ms(&self) -> f64 {
        self.finish_ms - self.enqueue_ms
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    /// Absent when the request timed out.
    pub response: Option<Value>,
    pub record: InvocationRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScalingAction {
    None,
    ScaledUp { replica: u64, node: String },
    ScaledDown { removed: Vec<u64> },
    Held(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionStatus {
    pub name: String,
    pub workload: WorkloadKind,
    pub work_units: f64,
    pub min_replicas: u32,
    pub max_replicas: u32,
    pub replicas: usize,
    pub warm: usize,
    pub nodes: Vec<String>,
}

#[derive(Debug)]
struct Deployment {
    spec: FunctionSpec,
    policy: SchedulerPolicy,
    ctx: ScheduleContext,
    replicas: Vec<Replica>,
    rr: usize,
    next_id: u64,
}

impl Deployment {
    fn route(&mut self, now: f64) -> usize {
        let warm: Vec<usize> = (0..self.replicas.len()).filter(|&i| self.replicas[i].ready_at <= now).collect();
        let pick = if warm.is_empty() { self.rr % self.replicas.len() } else { warm[self.rr % warm.len()] };
        self.rr = self.rr.wrapping_add(1);
        pick
    }
}

pub struct Gateway {
    registry: Arc<Registry>,
    links: RwLock<HashMap<String, Arc<LinkEmulator>>>,
    deployments: RwLock<BTreeMap<String, Arc<Mutex<Deployment>>>>,
    config: GatewayConfig,
    clock: Arc<dyn Clock>,
}

impl Gateway {
    pub fn new(registry: Arc<Registry>, config: GatewayConfig, clock: Arc<dyn Clock>) -> Self {
        Self { registry, links: RwLock::new(HashMap::new()), deployments: RwLock::new(BTreeMap::new()), config, clock }
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn now_ms(&self) -> f64 {
        self.clock.now_ms()
    }

    /// Sets the client link used for requests served on `node`. Nodes
    /// without a link answer with zero network delay.
    pub fn set_client_link(&self, node: impl Into<String>, link: LinkEmulator) {
        self.links.write().insert(node.into(), Arc::new(link));
    }

    fn deployment(&self, name: &str) -> Result<Arc<Mutex<Deployment>>> {
        self.deployments.read().get(name).cloned().ok_or_else(|| Error::UnknownFunction(name.to_owned()))
    }

    fn new_replica(&self, d: &mut Deployment, node: String, now: f64) -> Replica {
        let cf = self.registry.node(&node).map_or(1.0, |n| n.compute_factor);
        let r = Replica::new(d.next_id, node, cf, now + d.spec.cold_start_ms);
        d.next_id += 1;
        r
    }

    pub fn deploy_function(
        &self,
        spec: FunctionSpec,
        policy: SchedulerPolicy,
        ctx: &ScheduleContext,
    ) -> Result<edgefaas_orchestrator::Placement> {
        self.deploy_function_at(spec, policy, ctx, self.now_ms())
    }

    pub fn deploy_function_at(
        &self,
        spec: FunctionSpec,
        policy: SchedulerPolicy,
        ctx: &ScheduleContext,
        now: f64,
    ) -> Result<edgefaas_orchestrator::Placement> {
        spec.validate()?;
        let mut deployments = self.deployments.write();
        if deployments.contains_key(&spec.name) {
            return Err(Error::DuplicateFunction(spec.name));
        }
        let ctx = ScheduleContext { work_units: spec.work_units, ..ctx.clone() };
        let placement = self.registry.schedule(&spec.name, spec.min_replicas, policy, &ctx)?;
        let mut d = Deployment { spec, policy, ctx, replicas: Vec::new(), rr: 0, next_id: 0 };
        for node in &placement.order {
            let r = self.new_replica(&mut d, node.clone(), now);
            d.replicas.push(r);
        }
        tracing::debug!(function = %d.spec.name, nodes = ?placement.order, "deployed");
        deployments.insert(d.spec.name.clone(), Arc::new(Mutex::new(d)));
        Ok(placement)
    }

    pub fn remove_function(&self, name: &str) -> Result<()> {
        let dep = self.deployments.write().remove(name).ok_or_else(|| Error::UnknownFunction(name.to_owned()))?;
        let d = dep.lock();
        for r in &d.replicas {
            self.registry.release(&r.node, 1)?;
        }
        Ok(())
    }

    pub fn invoke(&self, function: &str, body: &[u8], timeout_ms: f64) -> Result<Invocation> {
        self.invoke_at(function, body, self.now_ms(), timeout_ms)
    }

    /// Routes one request sent by the client at `now`.
    ///
    /// The reply reaches the client after the outbound link delay, any wait
    /// for the replica to warm up or drain its queue, the service time and
    /// the return link delay.
    pub fn invoke_at(&self, function: &str, body: &[u8], now: f64, timeout_ms: f64) -> Result<Invocation> {
        let dep = self.deployment(function)?;
        let mut d = dep.lock();
        let idx = d.route(now);
        let link = self.links.read().get(&d.replicas[idx].node).cloned();
        let (out, back) = link.map_or((0.0, 0.0), |l| (l.sample_one_way(), l.sample_one_way()));
        let work = d.spec.work_units;
        let kind = d.spec.workload_kind;
        let window = self.config.window_ms;

        let r = &mut d.replicas[idx];
        let arrival = now + out;
        let start = arrival.max(r.ready_at).max(r.free_at);
        let cold_wait = (r.ready_at - arrival).max(0.0);
        let service = work / r.compute_factor;
        let done = start + service;
        r.free_at = done;
        r.last_used = done;
        r.served += 1;
        r.prune(now - window);
        r.spans.push_back((arrival, done));

        let finish = done + back;
        let outcome = if finish - now > timeout_ms { Outcome::Timeout } else { Outcome::Ok };
        let record = InvocationRecord {
            function: function.to_owned(),
            replica: r.id,
            node: r.node.clone(),
            enqueue_ms: now,
            start_ms: start,
            finish_ms: finish,
            outcome,
            network_ms: out + back,
            service_ms: service,
            cold_wait_ms: cold_wait,
        };
        drop(d);
        let response = (outcome == Outcome::Ok).then(|| workload::execute(kind, body));
        Ok(Invocation { response, record })
    }

    pub fn autoscale_tick(&self, function: &str) -> Result<ScalingAction> {
        self.autoscale_tick_at(function, self.now_ms())
    }

    /// Adds one replica when the mean in-flight count per warm replica over
    /// the last window exceeds the threshold; otherwise removes replicas that
    /// have idled past the cooldown, never going below `min_replicas`.
    pub fn autoscale_tick_at(&self, function: &str, now: f64) -> Result<ScalingAction> {
        let dep = self.deployment(function)?;
        let mut d = dep.lock();
        let cfg = &self.config;
        let from = now - cfg.window_ms;
        for r in &mut d.replicas {
            r.prune(from);
        }
        let warm = d.replicas.iter().filter(|r| r.ready_at <= now).count();
        let load: f64 = d.replicas.iter().map(|r| r.busy_time(from, now)).sum::<f64>() / cfg.window_ms;
        let live = d.replicas.len() as u32;

        if warm > 0 && load / warm as f64 > cfg.scale_up_in_flight {
            if live >= d.spec.max_replicas {
                return Ok(ScalingAction::Held(format!("at max_replicas {}", d.spec.max_replicas)));
            }
            let name = d.spec.name.clone();
            let placement = match self.registry.schedule(&name, 1, d.policy, &d.ctx) {
                Ok(p) => p,
                Err(e) => {
                    tracing::info!(function = %name, error = %e, "scale up held");
                    return Ok(ScalingAction::Held(e.to_string()));
                }
            };
            let node = placement.order[0].clone();
            let r = self.new_replica(&mut d, node.clone(), now);
            let id = r.id;
            d.replicas.push(r);
            tracing::debug!(function = %name, replica = id, node = %node, load, "scaled up");
            return Ok(ScalingAction::ScaledUp { replica: id, node });
        }

        let min = d.spec.min_replicas as usize;
        if d.replicas.len() > min {
            let idle_since = now - cfg.cooldown_ms;
            let mut removed = Vec::new();
            let mut i = d.replicas.len();
            while i > 0 && d.replicas.len() > min {
                i -= 1;
                let r = &d.replicas[i];
                if r.free_at <= idle_since && r.ready_at <= idle_since {
                    let r = d.replicas.remove(i);
                    self.registry.release(&r.node, 1)?;
                    removed.push(r.id);
                }
            }
            if !removed.is_empty() {
                tracing::debug!(function = %d.spec.name, ?removed, "scaled down");
                return Ok(ScalingAction::ScaledDown { removed });
            }
        }
        Ok(ScalingAction::None)
    }

    pub fn replicas(&self, function: &str) -> Result<Vec<Replica>> {
        Ok(self.deployment(function)?.lock().replicas.clone())
    }

    /// Time at which every current replica of `function` is warm.
    pub fn ready_at(&self, function: &str) -> Result<f64> {
        let dep = self.deployment(function)?;
        let d = dep.lock();
        Ok(d.replicas.iter().map(|r| r.ready_at).fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn functions(&self) -> Vec<String> {
        self.deployments.read().keys().cloned().collect()
    }

    pub fn status(&self) -> Vec<FunctionStatus> {
        let now = self.now_ms();
        let deployments = self.deployments.read();
        deployments
            .values()
            .map(|dep| {
                let d = dep.lock();
                FunctionStatus {
                    name: d.spec.name.clone(),
                    workload: d.spec.workload_kind,
                    work_units: d.spec.work_units,
                    min_replicas: d.spec.min_replicas,
                    max_replicas: d.spec.max_replicas,
                    replicas: d.replicas.len(),
                    warm: d.replicas.iter().filter(|r| r.state(now) != ReplicaState::Cold).count(),
                    nodes: d.replicas.iter().map(|r| r.node.clone()).collect(),
                }
            })
            .collect()
    }
}
