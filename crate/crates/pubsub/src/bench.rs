//! N:M publisher/subscriber throughput bench.
//!
//! Runs on the virtual clock: each publisher sends its next message as soon
//! as the previous one is acknowledged, and the run ends when every
//! subscriber holds every message.

use edgefaas_overlay::latency::derive_seed;
use edgefaas_overlay::{DelayMode, LatencyProfile, LinkEmulator, Site};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::broker::{BrokerCluster, BrokerConfig, Message, ReplicaSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n_pubs: usize,
    pub m_subs: usize,
    pub msg_size: usize,
    pub total_msgs: u64,
    pub reps: usize,
    pub seed: u64,
    pub subject: String,
    pub broker: BrokerConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_pubs: 1,
            m_subs: 1,
            msg_size: 64,
            total_msgs: 10_000,
            reps: 5,
            seed: 1,
            subject: "bench".into(),
            broker: BrokerConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn matrix(n_pubs: usize, m_subs: usize) -> Self {
        Self { n_pubs, m_subs, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Messages per second over the publishers' wall time.
    pub pub_throughput: f64,
    /// Deliveries per second until the last delivery.
    pub sub_throughput: f64,
    pub published: u64,
    pub delivered: u64,
    pub pub_wall_ms: f64,
    pub sub_wall_ms: f64,
    /// Replica each publisher and subscriber was attached to.
    pub pub_replicas: Vec<usize>,
    pub sub_replicas: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub runs: Vec<RunResult>,
}

impl BenchOutcome {
    pub fn pub_mean(&self) -> f64 {
        self.runs.iter().map(|r| r.pub_throughput).sum::<f64>() / self.runs.len() as f64
    }

    pub fn sub_mean(&self) -> f64 {
        self.runs.iter().map(|r| r.sub_throughput).sum::<f64>() / self.runs.len() as f64
    }
}

/// Runs the bench `cfg.reps` times against one replica per entry of
/// `replicas`. `links` gives the round-trip profile between two sites; the
/// clients sit at [`Site::Tester`].
pub fn run_pubsub_bench(
    replicas: &[ReplicaSpec],
    links: &dyn Fn(Site, Site) -> Option<LatencyProfile>,
    cfg: &BenchConfig,
) -> Result<BenchOutcome> {
    if replicas.is_empty() {
        return Err(Error::NoReplicas);
    }
    if cfg.n_pubs == 0 || cfg.reps == 0 {
        return Err(Error::InvalidConfig("need at least one publisher and one repetition"));
    }
    if cfg.total_msgs < cfg.n_pubs as u64 {
        return Err(Error::InvalidConfig("fewer messages than publishers"));
    }
    let profile = |a: Site, b: Site| links(a, b).ok_or(Error::MissingLink(a, b));
    for a in replicas {
        profile(a.site, Site::Tester)?;
        for b in replicas {
            profile(a.site, b.site)?;
        }
    }
    let runs = (0..cfg.reps)
        .map(|rep| run_once(replicas, &profile, cfg, derive_seed(cfg.seed, &format!("pubsub-rep-{rep}"))))
        .collect::<Result<_>>()?;
    Ok(BenchOutcome { runs })
}

fn run_once(
    replicas: &[ReplicaSpec],
    profile: &dyn Fn(Site, Site) -> Result<LatencyProfile>,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<RunResult> {
    let n = replicas.len();
    let mut peer_profiles = vec![vec![LatencyProfile::zero(); n]; n];
    for a in 0..n {
        for b in 0..n {
            peer_profiles[a][b] = profile(replicas[a].site, replicas[b].site)?;
        }
    }
    let cluster = BrokerCluster::new(
        replicas.to_vec(),
        |a, b| {
            if a == b {
                LinkEmulator::disabled()
            } else {
                LinkEmulator::new(peer_profiles[a][b], derive_seed(seed, &format!("peer:{a}->{b}")), DelayMode::Virtual)
            }
        },
        BrokerConfig { payload_size: Some(cfg.msg_size), ..cfg.broker.clone() },
    )?;
    let client = |role: &str, i: usize, r: usize| -> Result<LinkEmulator> {
        let p = profile(replicas[r].site, Site::Tester)?;
        Ok(LinkEmulator::new(p, derive_seed(seed, &format!("{role}:{i}")), DelayMode::Virtual))
    };

    let mut attach = ChaCha8Rng::seed_from_u64(derive_seed(seed, "attach"));
    let pub_replicas: Vec<usize> = (0..cfg.n_pubs).map(|_| attach.gen_range(0..n)).collect();
    let sub_replicas: Vec<usize> = (0..cfg.m_subs).map(|_| attach.gen_range(0..n)).collect();

    let subs = sub_replicas
        .iter()
        .enumerate()
        .map(|(j, &r)| cluster.subscribe(r, &cfg.subject, client("sub", j, r)?))
        .collect::<Result<Vec<_>>>()?;
    let pub_links = pub_replicas.iter().enumerate().map(|(i, &r)| client("pub", i, r)).collect::<Result<Vec<_>>>()?;

    // Even split, remainder to the first publishers.
    let base = cfg.total_msgs / cfg.n_pubs as u64;
    let extra = cfg.total_msgs % cfg.n_pubs as u64;
    let mut left: Vec<u64> = (0..cfg.n_pubs as u64).map(|i| base + u64::from(i < extra)).collect();
    let mut next_at = vec![0.0f64; cfg.n_pubs];
    let mut seq = vec![0u64; cfg.n_pubs];
    let mut pub_wall: f64 = 0.0;
    let payload = vec![0xA5u8; cfg.msg_size];

    while let Some(i) = (0..cfg.n_pubs).filter(|&i| left[i] > 0).min_by(|&a, &b| next_at[a].total_cmp(&next_at[b])) {
        seq[i] += 1;
        let msg = Message::new(cfg.subject.clone(), payload.clone(), i as u32, seq[i]);
        let receipt = cluster.publish_at(pub_replicas[i], msg, &pub_links[i], next_at[i])?;
        next_at[i] = receipt.acked_ms;
        pub_wall = pub_wall.max(receipt.acked_ms);
        left[i] -= 1;
    }

    let mut delivered = 0u64;
    let mut sub_wall: f64 = 0.0;
    for (j, s) in subs.iter().enumerate() {
        let got = s.drain();
        if got.len() as u64 != cfg.total_msgs {
            return Err(Error::BenchIncomplete { subscriber: j, got: got.len() as u64, want: cfg.total_msgs });
        }
        delivered += got.len() as u64;
        sub_wall = got.iter().map(|d| d.at_ms).fold(sub_wall, f64::max);
    }

    Ok(RunResult {
        pub_throughput: cfg.total_msgs as f64 / (pub_wall / 1000.0),
        sub_throughput: if delivered == 0 { 0.0 } else { delivered as f64 / (sub_wall / 1000.0) },
        published: cfg.total_msgs,
        delivered,
        pub_wall_ms: pub_wall,
        sub_wall_ms: sub_wall,
        pub_replicas,
        sub_replicas,
    })
}
