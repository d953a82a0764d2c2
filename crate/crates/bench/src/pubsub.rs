use edgefaas_pubsub::{run_pubsub_bench, BenchConfig, BenchOutcome, ReplicaSpec};

use crate::error::Result;
use crate::report::BenchReport;
use crate::scenario::Scenario;

/// The publisher:subscriber configurations of the broker benchmark.
pub const MATRIX: [(usize, usize); 4] = [(1, 1), (1, 5), (5, 1), (5, 5)];

/// One broker replica per worker node.
pub fn replicas(scenario: &Scenario) -> Vec<ReplicaSpec> {
    scenario
        .workers()
        .map(|n| ReplicaSpec { node: n.name.clone(), site: n.site, compute_factor: n.compute_factor })
        .collect()
}

pub fn run(scenario: &Scenario, cfg: &BenchConfig) -> Result<BenchOutcome> {
    scenario.validate()?;
    let cfg = BenchConfig { seed: scenario.seed, ..cfg.clone() };
    Ok(run_pubsub_bench(&replicas(scenario), &scenario.link_fn(), &cfg)?)
}

/// Publisher and subscriber throughput reports, msgs/s over repetitions.
pub fn reports(scenario: &Scenario, cfg: &BenchConfig, outcome: &BenchOutcome) -> Result<Vec<BenchReport>> {
    let param = format!("{}:{}", cfg.n_pubs, cfg.m_subs);
    let pubs = outcome.runs.iter().map(|r| r.pub_throughput).collect();
    let subs = outcome.runs.iter().map(|r| r.sub_throughput).collect();
    Ok(vec![
        BenchReport::new("pubsub-pub", scenario.name.clone(), param.clone(), pubs)?,
        BenchReport::new("pubsub-sub", scenario.name.clone(), param, subs)?,
    ])
}

/// Deliveries lost across all repetitions; zero when every subscriber saw
/// every message.
pub fn lost(cfg: &BenchConfig, outcome: &BenchOutcome) -> u64 {
    let want = cfg.total_msgs * cfg.m_subs as u64;
    outcome.runs.iter().map(|r| want.saturating_sub(r.delivered) + cfg.total_msgs.saturating_sub(r.published)).sum()
}
