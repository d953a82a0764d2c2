//! Established encrypted sessions between two overlay addresses.

use std::net::Ipv4Addr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use parking_lot::Mutex;

use crate::cert::unix_millis;
use crate::error::{Error, Result};
use crate::latency::LinkEmulator;
use crate::packet::{header_bytes, OverlayPacket, PacketType, HEADER_LEN, MAX_PAYLOAD};
use crate::replay::ReplayWindow;

pub const TAG_LEN: usize = 16;
pub const DEFAULT_KEEPALIVE_INTERVAL_MS: u64 = 10_000;
pub const MISSED_KEEPALIVES_BEFORE_DEAD: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TunnelState {
    Negotiating,
    Established,
    Dead,
}

/// Directional AEAD keys from the local node's point of view.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionKeys {
    pub send: [u8; 32],
    pub recv: [u8; 32],
}

impl std::fmt::Debug for SessionKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SessionKeys { .. }")
    }
}

/// 12-byte nonce: sender overlay IP followed by the big-endian counter.
pub fn nonce_for(sender: Ipv4Addr, counter: u64) -> [u8; 12] {
    let mut n = [0u8; 12];
    n[..4].copy_from_slice(&sender.octets());
    n[4..].copy_from_slice(&counter.to_be_bytes());
    n
}

#[derive(Debug)]
struct Inner {
    window: ReplayWindow,
    state: TunnelState,
    last_activity: u64,
    last_inbound: u64,
}

/// Plaintext handed to the caller after [`Tunnel::open`].
#[derive(Debug, Clone, PartialEq)]
pub struct Received {
    pub payload: Vec<u8>,
    pub counter: u64,
    /// Emulated one-way delay applied before delivery (0 when emulation is off).
    pub delay_ms: f64,
}

pub struct Tunnel {
    local_ip: Ipv4Addr,
    peer_ip: Ipv4Addr,
    keys: SessionKeys,
    send_cipher: Aes256Gcm,
    recv_cipher: Aes256Gcm,
    send_counter: AtomicU64,
    keepalive_interval_ms: u64,
    emulator: Option<Arc<LinkEmulator>>,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for Tunnel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tunnel")
            .field("local_ip", &self.local_ip)
            .field("peer_ip", &self.peer_ip)
            .field("send_counter", &self.send_counter.load(Ordering::Relaxed))
            .field("state", &self.state())
            .finish()
    }
}

impl Tunnel {
    pub fn established(local_ip: Ipv4Addr, peer_ip: Ipv4Addr, keys: SessionKeys, now_ms: u64) -> Self {
        Self {
            local_ip,
            peer_ip,
            send_cipher: Aes256Gcm::new(&keys.send.into()),
            recv_cipher: Aes256Gcm::new(&keys.recv.into()),
            keys,
            send_counter: AtomicU64::new(0),
            keepalive_interval_ms: DEFAULT_KEEPALIVE_INTERVAL_MS,
            emulator: None,
            inner: Mutex::new(Inner {
                window: ReplayWindow::new(),
                state: TunnelState::Established,
                last_activity: now_ms,
                last_inbound: now_ms,
            }),
        }
    }

    pub fn with_emulator(mut self, emulator: Arc<LinkEmulator>) -> Self {
        self.emulator = Some(emulator);
        self
    }

    pub fn with_keepalive_interval(mut self, ms: u64) -> Self {
        self.keepalive_interval_ms = ms.max(1);
        self
    }

    pub fn local_ip(&self) -> Ipv4Addr {
        self.local_ip
    }

    pub fn peer_ip(&self) -> Ipv4Addr {
        self.peer_ip
    }

    pub fn send_key(&self) -> [u8; 32] {
        self.keys.send
    }

    pub fn recv_key(&self) -> [u8; 32] {
        self.keys.recv
    }

    pub fn send_counter(&self) -> u64 {
        self.send_counter.load(Ordering::Acquire)
    }

    pub fn highest_recv_counter(&self) -> u64 {
        self.inner.lock().window.highest()
    }

    pub fn state(&self) -> TunnelState {
        self.inner.lock().state
    }

    pub fn last_activity(&self) -> u64 {
        self.inner.lock().last_activity
    }

    fn next_counter(&self) -> u64 {
        self.send_counter.fetch_add(1, Ordering::AcqRel) + 1
    }

    /// Encrypts `payload` into a complete DATA frame.
    pub fn seal(&self, payload: &[u8]) -> Result<Vec<u8>> {
        self.seal_at(payload, unix_millis())
    }

    pub fn seal_at(&self, payload: &[u8], now_ms: u64) -> Result<Vec<u8>> {
        if payload.len() + TAG_LEN > MAX_PAYLOAD {
            return Err(Error::PayloadTooLarge(payload.len()));
        }
        {
            let mut inner = self.inner.lock();
            if inner.state == TunnelState::Dead {
                return Err(Error::TunnelDead);
            }
            inner.last_activity = inner.last_activity.max(now_ms);
        }
        let counter = self.next_counter();
        let header = header_bytes(PacketType::Data, self.local_ip, counter);
        let nonce = nonce_for(self.local_ip, counter);
        let ct = self
            .send_cipher
            .encrypt(Nonce::from_slice(&nonce), Payload { msg: payload, aad: &header })
            .map_err(|_| Error::AuthFail)?;
        let mut frame = Vec::with_capacity(HEADER_LEN + ct.len());
        frame.extend_from_slice(&header);
        frame.extend_from_slice(&ct);
        Ok(frame)
    }

    /// Authenticates and decrypts a DATA frame from the peer.
    pub fn open(&self, frame: &[u8]) -> Result<Received> {
        self.open_at(frame, unix_millis())
    }

    pub fn open_at(&self, frame: &[u8], now_ms: u64) -> Result<Received> {
        let packet = OverlayPacket::decode(frame)?;
        self.open_packet(&packet, now_ms)
    }

    pub fn open_packet(&self, packet: &OverlayPacket, now_ms: u64) -> Result<Received> {
        if packet.ptype != PacketType::Data {
            return Err(Error::UnexpectedPacket(packet.ptype));
        }
        if packet.sender_ip != self.peer_ip {
            return Err(Error::AuthFail);
        }
        let plaintext = {
            let mut inner = self.inner.lock();
            if inner.state == TunnelState::Dead {
                return Err(Error::TunnelDead);
            }
            if !inner.window.check(packet.counter) {
                return Err(Error::Replay(packet.counter));
            }
            let nonce = nonce_for(packet.sender_ip, packet.counter);
            let header = packet.header();
            let pt = self
                .recv_cipher
                .decrypt(Nonce::from_slice(&nonce), Payload { msg: &packet.payload, aad: &header })
                .map_err(|_| Error::AuthFail)?;
            inner.window.mark(packet.counter);
            inner.last_inbound = inner.last_inbound.max(now_ms);
            inner.last_activity = inner.last_activity.max(now_ms);
            pt
        };
        // The tunnel lock is released before the emulated delay.
        let delay_ms = self.emulator.as_ref().map_or(0.0, |e| e.one_way());
        Ok(Received { payload: plaintext, counter: packet.counter, delay_ms })
    }

    /// Records a keep-alive (or any other authenticated sign of life) from the peer.
    pub fn note_inbound(&self, now_ms: u64) {
        let mut inner = self.inner.lock();
        if inner.state == TunnelState::Established {
            inner.last_inbound = inner.last_inbound.max(now_ms);
        }
    }

    /// Emits a KEEPALIVE when the tunnel has been quiet for a full interval and
    /// declares it dead after three intervals without inbound traffic.
    pub fn keepalive_tick(&self, now_ms: u64) -> Option<OverlayPacket> {
        let mut inner = self.inner.lock();
        if inner.state != TunnelState::Established {
            return None;
        }
        let interval = self.keepalive_interval_ms;
        if now_ms.saturating_sub(inner.last_inbound) >= MISSED_KEEPALIVES_BEFORE_DEAD * interval {
            inner.state = TunnelState::Dead;
            return None;
        }
        if now_ms.saturating_sub(inner.last_activity) >= interval {
            inner.last_activity = now_ms;
            drop(inner);
            let counter = self.next_counter();
            return Some(OverlayPacket::new(PacketType::Keepalive, self.local_ip, counter, Vec::new()));
        }
        None
    }

    pub fn mark_dead(&self) {
        self.inner.lock().state = TunnelState::Dead;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: Ipv4Addr = Ipv4Addr::new(10, 42, 0, 1);
    const B: Ipv4Addr = Ipv4Addr::new(10, 42, 0, 2);

    fn pair() -> (Tunnel, Tunnel) {
        let k1 = [1u8; 32];
        let k2 = [2u8; 32];
        let a = Tunnel::established(A, B, SessionKeys { send: k1, recv: k2 }, 0);
        let b = Tunnel::established(B, A, SessionKeys { send: k2, recv: k1 }, 0);
        (a, b)
    }

    #[test]
    fn seal_open_round_trip() {
        let (a, b) = pair();
        let frame = a.seal_at(b"hello", 1).unwrap();
        assert_eq!(b.open_at(&frame, 2).unwrap().payload, b"hello");
        assert_eq!(a.send_counter(), 1);
        assert_eq!(b.highest_recv_counter(), 1);
    }

    #[test]
    fn replayed_frame_rejected() {
        let (a, b) = pair();
        let frame = a.seal_at(b"hello", 1).unwrap();
        b.open_at(&frame, 2).unwrap();
        assert!(matches!(b.open_at(&frame, 3), Err(Error::Replay(1))));
    }

    #[test]
    fn every_bit_flip_fails_authentication() {
        let (a, b) = pair();
        let frame = a.seal_at(b"attack at dawn", 1).unwrap();
        for i in 0..frame.len() * 8 {
            let mut m = frame.clone();
            m[i / 8] ^= 1 << (i % 8);
            let r = b.open_at(&m, 2);
            assert!(r.is_err(), "bit {i} flip accepted");
            // Header flips surface as codec, replay or auth errors; body flips must be AuthFail.
            if i / 8 >= HEADER_LEN {
                assert!(matches!(r, Err(Error::AuthFail)), "bit {i}: {r:?}");
            }
        }
        // The untouched frame still opens: failed attempts never advance the window.
        assert_eq!(b.open_at(&frame, 3).unwrap().payload, b"attack at dawn");
    }

    #[test]
    fn nonce_layout() {
        assert_eq!(nonce_for(A, 7), [10, 42, 0, 1, 0, 0, 0, 0, 0, 0, 0, 7]);
    }

    #[test]
    fn keepalive_threshold() {
        let (a, _) = pair();
        let now = 50_000;
        let t = Tunnel::established(A, B, a.keys.clone(), now);
        assert!(t.keepalive_tick(now).is_none());
        let t = Tunnel::established(A, B, a.keys.clone(), now - 10_001);
        let ka = t.keepalive_tick(now).expect("keepalive due");
        assert_eq!(ka.ptype, PacketType::Keepalive);
        assert_eq!(ka.sender_ip, A);
        assert!(ka.payload.is_empty());
    }

    #[test]
    fn dies_after_three_silent_intervals() {
        let (a, _) = pair();
        let t = Tunnel::established(A, B, a.keys.clone(), 0);
        let mut emitted = 0;
        for step in 1..=30 {
            let now = step * 1_000;
            if t.keepalive_tick(now).is_some() {
                emitted += 1;
            }
            if now < 30_000 {
                assert_eq!(t.state(), TunnelState::Established, "at {now}");
            }
        }
        assert_eq!(emitted, 2, "keepalives at 10 s and 20 s");
        assert_eq!(t.state(), TunnelState::Dead);
        assert!(matches!(t.seal_at(b"x", 31_000), Err(Error::TunnelDead)));
    }

    #[test]
    fn inbound_traffic_keeps_tunnel_alive() {
        let (a, _) = pair();
        let t = Tunnel::established(A, B, a.keys.clone(), 0);
        for step in 1..=10 {
            let now = step * 10_000;
            t.note_inbound(now);
            t.keepalive_tick(now);
        }
        assert_eq!(t.state(), TunnelState::Established);
    }

    #[test]
    fn foreign_sender_rejected() {
        let (a, b) = pair();
        let frame = a.seal_at(b"x", 1).unwrap();
        let mut p = OverlayPacket::decode(&frame).unwrap();
        p.sender_ip = Ipv4Addr::new(10, 42, 0, 9);
        assert!(matches!(b.open_packet(&p, 2), Err(Error::AuthFail)));
    }
}
