//! Lighthouse: maps overlay addresses to underlay UDP endpoints.
//!
//! The lighthouse only answers discovery traffic; it never forwards data.
//!
//! Payloads:
//!
//! ```text
//! LH_REGISTER: u16 cert_len (BE) | cert | endpoint_list | sig[64]
//! LH_QUERY:    target_ip[4]
//! LH_REPLY:    target_ip[4] | endpoint_list          (empty list = unknown)
//! endpoint_list: u8 n | n * (ip[4] | port u16 BE)
//! ```
//!
//! The registration signature is made with the node's certificate key over
//! the big-endian packet counter followed by every payload byte before it.

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use parking_lot::{Mutex, RwLock};

use crate::cert::{unix_millis, unix_seconds, verify_certificate, Certificate, NodeIdentity, SIGNATURE_LEN};
use crate::error::{Error, Result};
use crate::packet::{OverlayPacket, PacketType};

pub const REGISTRATION_INTERVAL_MS: u64 = 15_000;
pub const RECORD_TTL_MS: u64 = 3 * REGISTRATION_INTERVAL_MS;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LighthouseRecord {
    pub overlay_ip: Ipv4Addr,
    pub endpoints: Vec<SocketAddrV4>,
    pub last_seen: u64,
}

#[derive(Debug, Default)]
pub struct Registry {
    records: HashMap<Ipv4Addr, LighthouseRecord>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, overlay_ip: Ipv4Addr, endpoints: Vec<SocketAddrV4>, now_ms: u64) {
        if endpoints.is_empty() {
            return;
        }
        self.records.insert(overlay_ip, LighthouseRecord { overlay_ip, endpoints, last_seen: now_ms });
    }

    pub fn lookup(&self, overlay_ip: Ipv4Addr, now_ms: u64) -> Option<&LighthouseRecord> {
        self.records.get(&overlay_ip).filter(|r| now_ms.saturating_sub(r.last_seen) <= RECORD_TTL_MS)
    }

    pub fn expire(&mut self, now_ms: u64) -> usize {
        let before = self.records.len();
        self.records.retain(|_, r| now_ms.saturating_sub(r.last_seen) <= RECORD_TTL_MS);
        before - self.records.len()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

pub(crate) fn encode_endpoints(out: &mut Vec<u8>, endpoints: &[SocketAddrV4]) {
    let n = endpoints.len().min(u8::MAX as usize);
    out.push(n as u8);
    for ep in &endpoints[..n] {
        out.extend_from_slice(&ep.ip().octets());
        out.extend_from_slice(&ep.port().to_be_bytes());
    }
}

pub(crate) fn decode_endpoints(buf: &[u8]) -> Result<(Vec<SocketAddrV4>, usize)> {
    let n = *buf.first().ok_or(Error::MalformedPayload("endpoint list"))? as usize;
    let need = 1 + 6 * n;
    if buf.len() < need {
        return Err(Error::MalformedPayload("endpoint list"));
    }
    let eps = buf[1..need]
        .chunks_exact(6)
        .map(|c| SocketAddrV4::new(Ipv4Addr::new(c[0], c[1], c[2], c[3]), u16::from_be_bytes([c[4], c[5]])))
        .collect();
    Ok((eps, need))
}

pub fn register_packet(identity: &NodeIdentity, endpoints: &[SocketAddrV4], counter: u64) -> OverlayPacket {
    let cert = identity.certificate.to_bytes();
    let mut payload = Vec::with_capacity(2 + cert.len() + 1 + 6 * endpoints.len() + SIGNATURE_LEN);
    payload.extend_from_slice(&(cert.len() as u16).to_be_bytes());
    payload.extend_from_slice(&cert);
    encode_endpoints(&mut payload, endpoints);
    let mut signed = counter.to_be_bytes().to_vec();
    signed.extend_from_slice(&payload);
    payload.extend_from_slice(&identity.sign(&signed));
    OverlayPacket::new(PacketType::LhRegister, identity.overlay_ip(), counter, payload)
}

/// Validates a registration and returns the announced endpoints.
pub fn verify_register(packet: &OverlayPacket, ca_public: &[u8; 32], now_secs: u64) -> Result<Vec<SocketAddrV4>> {
    let p = &packet.payload;
    if p.len() < 2 + SIGNATURE_LEN {
        return Err(Error::MalformedPayload("register"));
    }
    let cert_len = u16::from_be_bytes([p[0], p[1]]) as usize;
    let cert_end = 2 + cert_len;
    if p.len() < cert_end + 1 + SIGNATURE_LEN {
        return Err(Error::MalformedPayload("register"));
    }
    let cert = Certificate::from_bytes(&p[2..cert_end]).map_err(|_| Error::CertInvalid)?;
    let (endpoints, used) = decode_endpoints(&p[cert_end..p.len() - SIGNATURE_LEN])?;
    if cert_end + used + SIGNATURE_LEN != p.len() {
        return Err(Error::MalformedPayload("register"));
    }
    let body = &p[..p.len() - SIGNATURE_LEN];
    let mut signed = packet.counter.to_be_bytes().to_vec();
    signed.extend_from_slice(body);
    let ok = verify_certificate(&cert, ca_public, now_secs)
        && cert.overlay_ip == packet.sender_ip
        && cert.verify_signed_by_subject(&signed, &p[p.len() - SIGNATURE_LEN..]);
    if ok {
        Ok(endpoints)
    } else {
        Err(Error::CertInvalid)
    }
}

pub fn query_payload(target: Ipv4Addr) -> Vec<u8> {
    target.octets().to_vec()
}

pub fn reply_payload(target: Ipv4Addr, endpoints: &[SocketAddrV4]) -> Vec<u8> {
    let mut out = target.octets().to_vec();
    encode_endpoints(&mut out, endpoints);
    out
}

pub fn parse_reply(payload: &[u8]) -> Result<(Ipv4Addr, Vec<SocketAddrV4>)> {
    if payload.len() < 5 {
        return Err(Error::MalformedPayload("lighthouse reply"));
    }
    let target = Ipv4Addr::new(payload[0], payload[1], payload[2], payload[3]);
    let (eps, _) = decode_endpoints(&payload[4..])?;
    Ok((target, eps))
}

/// Per-type packet counters, used to check that data never transits the lighthouse.
#[derive(Debug, Default)]
pub struct LighthouseStats {
    by_type: [AtomicU64; 8],
    rejected: AtomicU64,
    queries_by_sender: Mutex<HashMap<Ipv4Addr, u64>>,
}

impl LighthouseStats {
    pub fn count(&self, ptype: PacketType) -> u64 {
        self.by_type[ptype as usize].load(Ordering::Relaxed)
    }

    pub fn rejected(&self) -> u64 {
        self.rejected.load(Ordering::Relaxed)
    }

    pub fn queries_from(&self, ip: Ipv4Addr) -> u64 {
        self.queries_by_sender.lock().get(&ip).copied().unwrap_or(0)
    }
}

pub struct Lighthouse {
    socket: UdpSocket,
    ca_public: [u8; 32],
    overlay_ip: Ipv4Addr,
    registry: RwLock<Registry>,
    stats: LighthouseStats,
    counter: AtomicU64,
    shutdown: AtomicBool,
}

impl Lighthouse {
    pub fn bind(listen: SocketAddr, ca_public: [u8; 32]) -> Result<Arc<Self>> {
        let socket = UdpSocket::bind(listen)?;
        socket.set_read_timeout(Some(Duration::from_millis(50)))?;
        Ok(Arc::new(Self {
            socket,
            ca_public,
            overlay_ip: Ipv4Addr::UNSPECIFIED,
            registry: RwLock::new(Registry::new()),
            stats: LighthouseStats::default(),
            counter: AtomicU64::new(0),
            shutdown: AtomicBool::new(false),
        }))
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.socket.local_addr()?)
    }

    pub fn stats(&self) -> &LighthouseStats {
        &self.stats
    }

    pub fn registry(&self) -> &RwLock<Registry> {
        &self.registry
    }

    /// Serves the socket from `workers` threads until [`LighthouseHandle::stop`].
    pub fn spawn(self: &Arc<Self>, workers: usize) -> Result<LighthouseHandle> {
        let mut threads = Vec::new();
        for i in 0..workers.max(1) {
            let lh = Arc::clone(self);
            threads.push(thread::Builder::new().name(format!("lighthouse-{i}")).spawn(move || lh.serve())?);
        }
        Ok(LighthouseHandle { lighthouse: Arc::clone(self), threads })
    }

    fn serve(&self) {
        let mut buf = vec![0u8; 65_535];
        while !self.shutdown.load(Ordering::Acquire) {
            let (n, src) = match self.socket.recv_from(&mut buf) {
                Ok(v) => v,
                Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => continue,
                Err(e) => {
                    tracing::warn!("lighthouse recv: {e}");
                    continue;
                }
            };
            if let Err(e) = self.handle(&buf[..n], src) {
                self.stats.rejected.fetch_add(1, Ordering::Relaxed);
                tracing::debug!("lighthouse dropped packet from {src}: {e}");
            }
        }
    }

    fn handle(&self, frame: &[u8], src: SocketAddr) -> Result<()> {
        let packet = OverlayPacket::decode(frame)?;
        self.stats.by_type[packet.ptype as usize].fetch_add(1, Ordering::Relaxed);
        match packet.ptype {
            PacketType::LhRegister => {
                let mut endpoints = verify_register(&packet, &self.ca_public, unix_seconds())?;
                if endpoints.is_empty() {
                    if let SocketAddr::V4(v4) = src {
                        endpoints.push(v4);
                    }
                }
                self.registry.write().register(packet.sender_ip, endpoints, unix_millis());
                Ok(())
            }
            PacketType::LhQuery => {
                if packet.payload.len() != 4 {
                    return Err(Error::MalformedPayload("lighthouse query"));
                }
                *self.stats.queries_by_sender.lock().entry(packet.sender_ip).or_default() += 1;
                let p = &packet.payload;
                let target = Ipv4Addr::new(p[0], p[1], p[2], p[3]);
                let endpoints =
                    self.registry.read().lookup(target, unix_millis()).map(|r| r.endpoints.clone()).unwrap_or_default();
                let counter = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
                let reply = OverlayPacket::new(
                    PacketType::LhReply,
                    self.overlay_ip,
                    counter,
                    reply_payload(target, &endpoints),
                );
                self.socket.send_to(&reply.encode()?, src)?;
                Ok(())
            }
            other => Err(Error::UnexpectedPacket(other)),
        }
    }
}

pub struct LighthouseHandle {
    lighthouse: Arc<Lighthouse>,
    threads: Vec<JoinHandle<()>>,
}

impl LighthouseHandle {
    pub fn lighthouse(&self) -> &Arc<Lighthouse> {
        &self.lighthouse
    }

    pub fn stop(self) {
        self.lighthouse.shutdown.store(true, Ordering::Release);
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Blocks until the serving threads exit.
    pub fn join(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cert::CertificateAuthority;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn record_expiry() {
        let mut r = Registry::new();
        let ip = Ipv4Addr::new(10, 42, 0, 2);
        let ep = SocketAddrV4::new(Ipv4Addr::LOCALHOST, 4242);
        r.register(ip, vec![ep], 1_000);
        assert!(r.lookup(ip, 1_000 + RECORD_TTL_MS).is_some());
        assert!(r.lookup(ip, 1_001 + RECORD_TTL_MS).is_none());
        assert_eq!(r.expire(1_001 + RECORD_TTL_MS), 1);
        assert!(r.is_empty());
    }

    #[test]
    fn empty_registration_ignored() {
        let mut r = Registry::new();
        r.register(Ipv4Addr::new(10, 42, 0, 2), vec![], 0);
        assert!(r.is_empty());
    }

    #[test]
    fn register_payload_verifies_and_rejects_tampering() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let now = unix_seconds();
        let mut ca = CertificateAuthority::generate("ca", &mut rng);
        let id = ca.issue_identity("n", Ipv4Addr::new(10, 42, 0, 2), &[], 3600, now, &mut rng).unwrap();
        let eps = vec![
            SocketAddrV4::new(Ipv4Addr::new(192, 168, 1, 2), 4242),
            SocketAddrV4::new(Ipv4Addr::new(203, 0, 113, 9), 31_000),
        ];
        let p = register_packet(&id, &eps, 3);
        assert_eq!(verify_register(&p, &ca.public_key(), now).unwrap(), eps);

        let mut t = p.clone();
        let last_ep_byte = t.payload.len() - SIGNATURE_LEN - 1;
        t.payload[last_ep_byte] ^= 1;
        assert!(verify_register(&t, &ca.public_key(), now).is_err());
        let mut t = p.clone();
        t.counter += 1;
        assert!(verify_register(&t, &ca.public_key(), now).is_err());
    }

    #[test]
    fn reply_round_trip() {
        let target = Ipv4Addr::new(10, 42, 0, 2);
        let eps = vec![SocketAddrV4::new(Ipv4Addr::LOCALHOST, 5)];
        assert_eq!(parse_reply(&reply_payload(target, &eps)).unwrap(), (target, eps));
        assert_eq!(parse_reply(&reply_payload(target, &[])).unwrap(), (target, vec![]));
        assert!(parse_reply(&[1, 2, 3]).is_err());
    }
}
