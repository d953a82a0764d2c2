//! Function load sweeps.
//!
//! Each sweep point issues a fixed number of requests from `threads`
//! closed-loop clients: a client sends its next request when the previous
//! one answers or times out. The gateway autoscaler ticks at its configured
//! interval between requests, and the system idles for the scale-down
//! cooldown between sweep points. Everything runs on a virtual clock.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::sync::Arc;

use edgefaas_gateway::{FunctionSpec, Gateway, GatewayConfig, InvocationRecord, Outcome, VirtualClock, WorkloadKind};
use edgefaas_orchestrator::{Placement, SchedulerPolicy};
use edgefaas_overlay::latency::derive_seed;
use edgefaas_overlay::{DelayMode, LinkEmulator, Site};

use crate::error::{Error, Result};
use crate::report::BenchReport;
use crate::scenario::Scenario;

pub const DESK_SENTIMENT_REQUESTS: usize = 2_000;
pub const DESK_HEAVY_REQUESTS: usize = 250;
pub const FULL_SENTIMENT_REQUESTS: usize = 200_000;
pub const FULL_HEAVY_REQUESTS: usize = 25_000;
/// Client-side timeout, as in the load generator used for the measurements.
pub const DEFAULT_TIMEOUT_MS: f64 = 20_000.0;

#[derive(Debug, Clone)]
pub struct FaasBenchConfig {
    pub spec: FunctionSpec,
    pub thread_counts: Vec<usize>,
    pub total_requests: usize,
    pub policy: SchedulerPolicy,
    pub timeout_ms: f64,
    pub gateway: GatewayConfig,
    pub body: Vec<u8>,
}

impl FaasBenchConfig {
    pub fn desk(kind: WorkloadKind) -> Self {
        let (spec, threads, total) = match kind {
            WorkloadKind::Sentiment => (FunctionSpec::sentiment(), vec![1, 8, 32], DESK_SENTIMENT_REQUESTS),
            WorkloadKind::HeavyClassify => (FunctionSpec::heavy_classify(), vec![1, 4, 8], DESK_HEAVY_REQUESTS),
        };
        Self {
            spec,
            thread_counts: threads,
            total_requests: total,
            policy: SchedulerPolicy::ResourceCount,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            gateway: GatewayConfig::default(),
            body: default_body(kind).to_vec(),
        }
    }

    pub fn full_scale(kind: WorkloadKind) -> Self {
        let (threads, total) = match kind {
            WorkloadKind::Sentiment => (vec![1, 10, 50, 100, 200, 500, 1000], FULL_SENTIMENT_REQUESTS),
            WorkloadKind::HeavyClassify => (vec![1, 5, 10, 20, 30], FULL_HEAVY_REQUESTS),
        };
        let gateway = GatewayConfig { cooldown_ms: GatewayConfig::FULL_COOLDOWN_MS, ..GatewayConfig::default() };
        Self { thread_counts: threads, total_requests: total, gateway, ..Self::desk(kind) }
    }

    pub fn threads(mut self, counts: Vec<usize>) -> Self {
        self.thread_counts = counts;
        self
    }

    pub fn requests(mut self, total: usize) -> Self {
        self.total_requests = total;
        self
    }

    pub fn policy(mut self, policy: SchedulerPolicy) -> Self {
        self.policy = policy;
        self
    }
}

pub fn default_body(kind: WorkloadKind) -> &'static [u8] {
    match kind {
        WorkloadKind::Sentiment => b"the new release is great and the support team was helpful",
        WorkloadKind::HeavyClassify => b"42",
    }
}

/// Outcome of one sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub threads: usize,
    pub records: Vec<InvocationRecord>,
    pub issued: usize,
    pub ok: usize,
    pub timeouts: usize,
    pub errors: usize,
    /// Replica count after each autoscaler tick, with the tick time.
    pub replica_trace: Vec<(f64, usize)>,
    pub started_ms: f64,
    pub finished_ms: f64,
}

impl SweepPoint {
    /// Response times of the valid replies only.
    pub fn response_times(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.outcome == Outcome::Ok).map(InvocationRecord::response_ms).collect()
    }

    pub fn median(&self) -> Result<f64> {
        crate::stats::median(&self.response_times())
    }

    pub fn report(&self, scenario: &str, function: &str) -> Result<BenchReport> {
        BenchReport::new(
            format!("faas-{function}"),
            scenario,
            format!("threads={}", self.threads),
            self.response_times(),
        )
    }

    pub fn max_replicas(&self) -> usize {
        self.replica_trace.iter().map(|(_, n)| *n).max().unwrap_or(0)
    }
}

/// A gateway on a virtual clock with one deployed function.
pub struct FaasHarness {
    pub gateway: Arc<Gateway>,
    pub function: String,
    pub placement: Placement,
    clock: Arc<VirtualClock>,
    now: f64,
}

impl FaasHarness {
    /// Registers the scenario's nodes, wires each worker's client link to
    /// the tester profile of its site and deploys `spec`.
    pub fn deploy(
        scenario: &Scenario,
        spec: FunctionSpec,
        policy: SchedulerPolicy,
        config: GatewayConfig,
    ) -> Result<Self> {
        scenario.validate()?;
        let clock = Arc::new(VirtualClock::new());
        let gateway = Arc::new(Gateway::new(Arc::new(scenario.registry()?), config, clock.clone()));
        for node in scenario.workers() {
            let profile = scenario.link(node.site, Site::Tester).ok_or(Error::LinkDown(node.site, Site::Tester))?;
            let seed = derive_seed(scenario.seed, &format!("client:{}", node.name));
            gateway.set_client_link(node.name.clone(), LinkEmulator::new(profile, seed, DelayMode::Virtual));
        }
        let ctx = scenario.schedule_context(spec.work_units);
        let function = spec.name.clone();
        let placement = gateway.deploy_function_at(spec, policy, &ctx, 0.0)?;
        Ok(Self { gateway, function, placement, clock, now: 0.0 })
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    fn tick(&self, at: f64, trace: &mut Vec<(f64, usize)>) -> Result<()> {
        self.clock.advance_to(at);
        self.gateway.autoscale_tick_at(&self.function, at)?;
        trace.push((at, self.gateway.replicas(&self.function)?.len()));
        Ok(())
    }

    fn next_tick_after(&self, t: f64) -> f64 {
        let step = self.gateway.config().tick_ms;
        (t / step).floor() * step + step
    }

    /// Issues `total` requests from `threads` clients, starting once every
    /// current replica is warm.
    pub fn sweep_point(&mut self, threads: usize, total: usize, timeout_ms: f64, body: &[u8]) -> Result<SweepPoint> {
        let threads = threads.max(1);
        let start = self.now.max(self.gateway.ready_at(&self.function)?);
        let mut clients: BinaryHeap<Reverse<(u64, usize)>> =
            (0..threads).map(|c| Reverse((start.to_bits(), c))).collect();
        let mut point = SweepPoint {
            threads,
            records: Vec::with_capacity(total),
            issued: 0,
            ok: 0,
            timeouts: 0,
            errors: 0,
            replica_trace: Vec::new(),
            started_ms: start,
            finished_ms: start,
        };
        let mut next_tick = self.next_tick_after(start);
        while point.issued < total {
            let Reverse((bits, client)) = clients.pop().expect("at least one client");
            let t = f64::from_bits(bits);
            while next_tick <= t {
                self.tick(next_tick, &mut point.replica_trace)?;
                next_tick += self.gateway.config().tick_ms;
            }
            self.clock.advance_to(t);
            point.issued += 1;
            let record = match self.gateway.invoke_at(&self.function, body, t, timeout_ms) {
                Ok(inv) => inv.record,
                Err(e) => {
                    tracing::warn!(error = %e, "invocation failed");
                    point.errors += 1;
                    clients.push(Reverse((t.to_bits(), client)));
                    continue;
                }
            };
            let answered = match record.outcome {
                Outcome::Ok => {
                    point.ok += 1;
                    record.finish_ms
                }
                Outcome::Timeout => {
                    point.timeouts += 1;
                    t + timeout_ms
                }
                Outcome::Error => {
                    point.errors += 1;
                    record.finish_ms
                }
            };
            point.finished_ms = point.finished_ms.max(answered);
            point.records.push(record);
            clients.push(Reverse((answered.to_bits(), client)));
        }
        while next_tick <= point.finished_ms {
            self.tick(next_tick, &mut point.replica_trace)?;
            next_tick += self.gateway.config().tick_ms;
        }
        self.now = point.finished_ms;
        Ok(point)
    }

    /// Idles past the scale-down cooldown, ticking the autoscaler as it goes.
    pub fn cool_down(&mut self) -> Result<()> {
        let cfg = self.gateway.config().clone();
        let until = self.now + cfg.cooldown_ms + cfg.tick_ms;
        let mut t = self.next_tick_after(self.now);
        let mut trace = Vec::new();
        while t <= until {
            self.tick(t, &mut trace)?;
            t += cfg.tick_ms;
        }
        self.now = until;
        Ok(())
    }
}

/// Runs every sweep point of `cfg` on a fresh deployment in `scenario`.
pub fn run_faas_bench(scenario: &Scenario, cfg: &FaasBenchConfig) -> Result<Vec<SweepPoint>> {
    let mut h = FaasHarness::deploy(scenario, cfg.spec.clone(), cfg.policy, cfg.gateway.clone())?;
    run_sweep(&mut h, cfg)
}

/// Runs the sweep on an existing harness; the function must still be deployed.
pub fn run_sweep(h: &mut FaasHarness, cfg: &FaasBenchConfig) -> Result<Vec<SweepPoint>> {
    if !h.gateway.functions().contains(&h.function) {
        return Err(Error::DeploymentMissing(h.function.clone()));
    }
    let mut points = Vec::with_capacity(cfg.thread_counts.len());
    for (i, &threads) in cfg.thread_counts.iter().enumerate() {
        if i > 0 {
            h.cool_down()?;
        }
        points.push(h.sweep_point(threads, cfg.total_requests, cfg.timeout_ms, &cfg.body)?);
    }
    Ok(points)
}

/// Raises the client count step by step without cooling down in between.
pub fn run_ramp(
    h: &mut FaasHarness,
    steps: &[usize],
    requests_per_step: usize,
    body: &[u8],
) -> Result<Vec<SweepPoint>> {
    steps.iter().map(|&threads| h.sweep_point(threads, requests_per_step, DEFAULT_TIMEOUT_MS, body)).collect()
}

pub fn reports(scenario: &Scenario, cfg: &FaasBenchConfig, points: &[SweepPoint]) -> Result<Vec<BenchReport>> {
    points.iter().map(|p| p.report(&scenario.name, cfg.spec.workload_kind.as_str())).collect()
}
