//! Percolator latency bench.
//!
//! Each document is sent from the tester to a replica picked at random. Its
//! latency is the client round trip plus the percolation work divided by the
//! node's compute factor. Every node holds a full copy of the queries; in
//! multi-node setups each registration also waits one round trip to the
//! farthest peer.

use edgefaas_overlay::latency::derive_seed;
use edgefaas_overlay::{DelayMode, LatencyProfile, LinkEmulator, Site};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, CorpusConfig};
use crate::error::{Error, Result};
use crate::store::PercolatorStore;

#[derive(Debug, Clone, PartialEq)]
pub struct StoreNode {
    pub name: String,
    pub site: Site,
    pub compute_factor: f64,
}

impl StoreNode {
    pub fn new(name: impl Into<String>, site: Site, compute_factor: f64) -> Self {
        Self { name: name.into(), site, compute_factor }
    }
}

/// Work units charged for one percolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercolateCost {
    pub per_query: f64,
    pub per_scored_match: f64,
}

impl Default for PercolateCost {
    fn default() -> Self {
        Self { per_query: 0.005, per_scored_match: 3.25 }
    }
}

impl PercolateCost {
    pub fn work(&self, stored: usize, matched: usize, scoring: bool) -> f64 {
        let scored = if scoring { self.per_scored_match * matched as f64 } else { 0.0 };
        self.per_query * stored as f64 + scored
    }
}

#[derive(Debug, Clone)]
pub struct PercolateBenchConfig {
    pub queries: usize,
    pub docs: usize,
    pub scoring: bool,
    pub seed: u64,
    pub cost: PercolateCost,
    pub corpus: CorpusConfig,
}

impl Default for PercolateBenchConfig {
    fn default() -> Self {
        Self {
            queries: 1000,
            docs: 5000,
            scoring: true,
            seed: 1,
            cost: PercolateCost::default(),
            corpus: CorpusConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercolateSample {
    pub doc_id: String,
    pub node: usize,
    pub matches: usize,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercolateRun {
    pub register_ms: Vec<f64>,
    pub samples: Vec<PercolateSample>,
    /// Matched query ids per document, in result order.
    pub results: Vec<Vec<String>>,
}

pub fn run_percolate_bench(
    nodes: &[StoreNode],
    links: &dyn Fn(Site, Site) -> Option<LatencyProfile>,
    cfg: &PercolateBenchConfig,
) -> Result<PercolateRun> {
    if nodes.is_empty() {
        return Err(Error::InvalidConfig("no store nodes"));
    }
    let profile = |a: Site, b: Site| links(a, b).ok_or(Error::MissingLink(a, b));
    let link =
        |label: String, p: LatencyProfile| LinkEmulator::new(p, derive_seed(cfg.seed, &label), DelayMode::Virtual);

    let clients = nodes
        .iter()
        .map(|n| Ok(link(format!("client:{}", n.name), profile(n.site, Site::Tester)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut peers = Vec::new();
    for (i, a) in nodes.iter().enumerate() {
        let mut row = Vec::new();
        for (j, b) in nodes.iter().enumerate() {
            if i != j {
                row.push(link(format!("sync:{}->{}", a.name, b.name), profile(a.site, b.site)?));
            }
        }
        peers.push(row);
    }

    let mut pick = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "percolate-routing"));
    let mut corpus = Corpus::new(cfg.corpus.clone(), derive_seed(cfg.seed, "corpus"));
    let store = PercolatorStore::new();

    let mut register_ms = Vec::with_capacity(cfg.queries);
    for q in corpus.queries(cfg.queries) {
        let n = pick.gen_range(0..nodes.len());
        let sync = peers[n].iter().map(LinkEmulator::round_trip).fold(0.0, f64::max);
        store.register_query(q)?;
        register_ms.push(clients[n].round_trip() + cfg.cost.per_query / nodes[n].compute_factor + sync);
    }

    let stored = store.len();
    let mut samples = Vec::with_capacity(cfg.docs);
    let mut results = Vec::with_capacity(cfg.docs);
    for doc in corpus.documents(cfg.docs) {
        let n = pick.gen_range(0..nodes.len());
        let matches = store.percolate(&doc, cfg.scoring);
        let work = cfg.cost.work(stored, matches.len(), cfg.scoring);
        let latency_ms = clients[n].round_trip() + work / nodes[n].compute_factor;
        samples.push(PercolateSample { doc_id: doc.id.clone(), node: n, matches: matches.len(), latency_ms });
        results.push(matches.into_iter().map(|m| m.query_id).collect());
    }
    Ok(PercolateRun { register_ms, samples, results })
}
