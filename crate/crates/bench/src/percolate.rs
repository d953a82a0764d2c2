use edgefaas_docstore::{run_percolate_bench, PercolateBenchConfig, PercolateRun, StoreNode};

use crate::error::Result;
use crate::report::BenchReport;
use crate::scenario::Scenario;

pub fn store_nodes(scenario: &Scenario) -> Vec<StoreNode> {
    scenario.workers().map(|n| StoreNode::new(n.name.clone(), n.site, n.compute_factor)).collect()
}

pub fn run(scenario: &Scenario, cfg: &PercolateBenchConfig) -> Result<PercolateRun> {
    scenario.validate()?;
    let cfg = PercolateBenchConfig { seed: scenario.seed, ..cfg.clone() };
    Ok(run_percolate_bench(&store_nodes(scenario), &scenario.link_fn(), &cfg)?)
}

pub fn report(scenario: &Scenario, cfg: &PercolateBenchConfig, run: &PercolateRun) -> Result<BenchReport> {
    let scoring = if cfg.scoring { "on" } else { "off" };
    let samples = run.samples.iter().map(|s| s.latency_ms).collect();
    BenchReport::new("percolate", scenario.name.clone(), format!("scoring={scoring}"), samples)
}
