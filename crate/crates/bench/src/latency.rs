//! Round-trip probe over an established overlay tunnel.

use std::net::Ipv4Addr;
use std::sync::Arc;

use edgefaas_overlay::latency::derive_seed;
use edgefaas_overlay::{respond, CertificateAuthority, DelayMode, InitiatorHandshake, LinkEmulator, Site, Tunnel};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::report::BenchReport;
use crate::scenario::Scenario;

pub const DEFAULT_REPETITIONS: usize = 500;

// Certificates are issued and checked against a fixed clock so that runs
// do not depend on the date.
const EPOCH_SECS: u64 = 1_700_000_000;
const PROBE: &[u8] = b"ping";

/// Handshakes two endpoints placed at `from` and `to`, then times
/// `repetitions` ping/pong exchanges over the tunnel pair. Samples are
/// round trips in milliseconds.
pub fn run_latency_bench(scenario: &Scenario, from: Site, to: Site, repetitions: usize) -> Result<BenchReport> {
    run_latency_bench_with(scenario, from, to, repetitions, DelayMode::Virtual)
}

pub fn run_latency_bench_with(
    scenario: &Scenario,
    from: Site,
    to: Site,
    repetitions: usize,
    mode: DelayMode,
) -> Result<BenchReport> {
    let profile = scenario.link(from, to).ok_or(Error::LinkDown(from, to))?;
    let (a, b) = tunnel_pair(scenario.seed, &format!("{from}-{to}"))?;
    let link = Arc::new(LinkEmulator::new(profile, derive_seed(scenario.seed, &format!("latency:{from}-{to}")), mode));
    let a = a.with_emulator(link.clone());
    let b = b.with_emulator(link);

    let mut samples = Vec::with_capacity(repetitions);
    let mut now = EPOCH_SECS * 1000;
    for _ in 0..repetitions {
        let ping = b.open_at(&a.seal_at(PROBE, now)?, now)?;
        let pong = a.open_at(&b.seal_at(&ping.payload, now)?, now)?;
        let rtt = ping.delay_ms + pong.delay_ms;
        samples.push(rtt);
        now += rtt.ceil() as u64 + 1;
    }
    BenchReport::new("latency", scenario.name.clone(), format!("{from}-{to}"), samples)
}

/// Runs the certificate handshake between two fresh identities and returns
/// the initiator and responder tunnels.
pub fn tunnel_pair(seed: u64, label: &str) -> Result<(Tunnel, Tunnel)> {
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, &format!("keys:{label}")));
    let mut ca = CertificateAuthority::generate("bench-ca", &mut rng);
    let validity = 86_400;
    let ip_a = Ipv4Addr::new(10, 99, 0, 1);
    let ip_b = Ipv4Addr::new(10, 99, 0, 2);
    let id_a = ca.issue_identity("probe-a", ip_a, &[], validity, EPOCH_SECS, &mut rng)?;
    let id_b = ca.issue_identity("probe-b", ip_b, &[], validity, EPOCH_SECS, &mut rng)?;
    let ca_public = ca.public_key();
    let now_ms = EPOCH_SECS * 1000;

    let init = InitiatorHandshake::start(&id_a, ip_b, 1, &mut rng);
    let (b, resp) = respond(&id_b, &ca_public, init.init_packet(), 1, EPOCH_SECS, now_ms, &mut rng)?;
    let a = init.complete(&resp, &ca_public, EPOCH_SECS, now_ms)?;
    Ok((a, b))
}
