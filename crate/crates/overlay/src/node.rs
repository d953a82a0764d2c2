//! A mesh member bound to a UDP socket: registers with the lighthouse,
//! punches towards peers and carries encrypted data over direct tunnels.

use std::collections::HashMap;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use parking_lot::{Mutex, RwLock};
use rand::rngs::OsRng;

use crate::cert::{unix_millis, unix_seconds, NodeIdentity};
use crate::error::{Error, Result};
use crate::handshake::{ephemeral_of, respond, InitiatorHandshake};
use crate::latency::LinkEmulator;
use crate::lighthouse::{parse_reply, query_payload, register_packet};
use crate::packet::{OverlayPacket, PacketType};
use crate::tunnel::{Tunnel, TunnelState, DEFAULT_KEEPALIVE_INTERVAL_MS};

#[derive(Debug, Clone)]
pub struct NodeConfig {
    /// Probes sent to each endpoint before giving up on the punch.
    pub punch_probes: u32,
    pub probe_spacing: Duration,
    pub punch_timeout: Duration,
    pub lighthouse_timeout: Duration,
    pub keepalive_interval_ms: u64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            punch_probes: 5,
            probe_spacing: Duration::from_millis(200),
            punch_timeout: Duration::from_secs(2),
            lighthouse_timeout: Duration::from_secs(2),
            keepalive_interval_ms: DEFAULT_KEEPALIVE_INTERVAL_MS,
        }
    }
}

struct Peer {
    tunnel: Arc<Tunnel>,
    endpoint: Mutex<SocketAddr>,
}

struct Pending {
    handshake: InitiatorHandshake,
    done: Sender<Result<()>>,
}

type Answered = ([u8; 32], Vec<u8>);

pub struct OverlayNode {
    identity: NodeIdentity,
    ca_public: [u8; 32],
    socket: UdpSocket,
    lighthouse: SocketAddr,
    config: NodeConfig,
    emulator: Option<Arc<LinkEmulator>>,
    peers: RwLock<HashMap<Ipv4Addr, Arc<Peer>>>,
    pending: Mutex<HashMap<Ipv4Addr, Pending>>,
    pending_queries: Mutex<HashMap<Ipv4Addr, Sender<Vec<SocketAddrV4>>>>,
    // Last INIT ephemeral seen per peer and the RESP frame we answered it with.
    answered: Mutex<HashMap<Ipv4Addr, Answered>>,
    inbox_tx: Mutex<Sender<(Ipv4Addr, Vec<u8>)>>,
    inbox_rx: Mutex<Receiver<(Ipv4Addr, Vec<u8>)>>,
    counter: AtomicU64,
    shutdown: AtomicBool,
    receiver: Mutex<Option<JoinHandle<()>>>,
}

impl OverlayNode {
    pub fn bind(
        identity: NodeIdentity,
        ca_public: [u8; 32],
        bind: SocketAddr,
        lighthouse: SocketAddr,
        config: NodeConfig,
    ) -> Result<Arc<Self>> {
        Self::start(identity, ca_public, bind, lighthouse, config, None)
    }

    /// Like [`OverlayNode::bind`], with every tunnel delaying delivery through `emulator`.
    pub fn bind_emulated(
        identity: NodeIdentity,
        ca_public: [u8; 32],
        bind: SocketAddr,
        lighthouse: SocketAddr,
        config: NodeConfig,
        emulator: Arc<LinkEmulator>,
    ) -> Result<Arc<Self>> {
        Self::start(identity, ca_public, bind, lighthouse, config, Some(emulator))
    }

    fn start(
        identity: NodeIdentity,
        ca_public: [u8; 32],
        bind: SocketAddr,
        lighthouse: SocketAddr,
        config: NodeConfig,
        emulator: Option<Arc<LinkEmulator>>,
    ) -> Result<Arc<Self>> {
        let socket = UdpSocket::bind(bind)?;
        socket.set_read_timeout(Some(Duration::from_millis(20)))?;
        let (tx, rx) = mpsc::channel();
        let node = Arc::new(Self {
            identity,
            ca_public,
            socket,
            lighthouse,
            config,
            emulator,
            peers: RwLock::new(HashMap::new()),
            pending: Mutex::new(HashMap::new()),
            pending_queries: Mutex::new(HashMap::new()),
            answered: Mutex::new(HashMap::new()),
            inbox_tx: Mutex::new(tx),
            inbox_rx: Mutex::new(rx),
            counter: AtomicU64::new(0),
            shutdown: AtomicBool::new(false),
            receiver: Mutex::new(None),
        });
        let worker = Arc::clone(&node);
        let handle = thread::Builder::new()
            .name(format!("overlay-{}", node.overlay_ip()))
            .spawn(move || worker.receive_loop())?;
        *node.receiver.lock() = Some(handle);
        Ok(node)
    }

    pub fn overlay_ip(&self) -> Ipv4Addr {
        self.identity.overlay_ip()
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.socket.local_addr()?)
    }

    fn next_counter(&self) -> u64 {
        self.counter.fetch_add(1, Ordering::AcqRel) + 1
    }

    fn send_packet(&self, packet: &OverlayPacket, to: SocketAddr) -> Result<()> {
        self.socket.send_to(&packet.encode()?, to)?;
        Ok(())
    }

    /// Announces this node's underlay endpoints (or, if none are configured,
    /// the bound socket address) to the lighthouse.
    pub fn register(&self) -> Result<()> {
        let mut endpoints = self.identity.underlay_endpoints.clone();
        if endpoints.is_empty() {
            if let SocketAddr::V4(v4) = self.local_addr()? {
                endpoints.push(v4);
            }
        }
        let packet = register_packet(&self.identity, &endpoints, self.next_counter());
        self.send_packet(&packet, self.lighthouse)
    }

    pub fn tunnel(&self, peer: Ipv4Addr) -> Option<Arc<Tunnel>> {
        self.peers.read().get(&peer).map(|p| Arc::clone(&p.tunnel))
    }

    fn query_lighthouse(&self, target: Ipv4Addr) -> Result<Vec<SocketAddrV4>> {
        let (tx, rx) = mpsc::channel();
        self.pending_queries.lock().insert(target, tx);
        let packet =
            OverlayPacket::new(PacketType::LhQuery, self.overlay_ip(), self.next_counter(), query_payload(target));
        self.send_packet(&packet, self.lighthouse)?;
        let result = rx.recv_timeout(self.config.lighthouse_timeout);
        self.pending_queries.lock().remove(&target);
        result.map_err(|_| Error::LighthouseTimeout)
    }

    /// Looks the target up once, then probes every returned endpoint on the
    /// punch schedule until a handshake response arrives.
    pub fn establish_tunnel(&self, target: Ipv4Addr) -> Result<Arc<Tunnel>> {
        if let Some(t) = self.tunnel(target).filter(|t| t.state() == TunnelState::Established) {
            return Ok(t);
        }
        let endpoints = self.query_lighthouse(target)?;
        if endpoints.is_empty() {
            return Err(Error::PeerUnknown(target));
        }

        let handshake = InitiatorHandshake::start(&self.identity, target, self.next_counter(), &mut OsRng);
        let frame = handshake.init_packet().encode()?;
        let (tx, rx) = mpsc::channel();
        self.pending.lock().insert(target, Pending { handshake, done: tx });

        let started = Instant::now();
        let mut outcome = None;
        'probe: for _ in 0..self.config.punch_probes {
            for ep in &endpoints {
                self.socket.send_to(&frame, SocketAddr::V4(*ep))?;
            }
            match rx.recv_timeout(self.config.probe_spacing) {
                Ok(r) => {
                    outcome = Some(r);
                    break 'probe;
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break 'probe,
            }
        }
        if outcome.is_none() {
            let remaining = self.config.punch_timeout.saturating_sub(started.elapsed());
            outcome = rx.recv_timeout(remaining).ok();
        }
        self.pending.lock().remove(&target);
        match outcome {
            Some(Ok(())) => self.tunnel(target).ok_or(Error::NoTunnel(target)),
            Some(Err(e)) => Err(e),
            None => Err(Error::PunchTimeout(target)),
        }
    }

    /// Encrypts `payload` and sends it straight to the peer's endpoint.
    pub fn send(&self, peer: Ipv4Addr, payload: &[u8]) -> Result<()> {
        let p = self.peers.read().get(&peer).cloned().ok_or(Error::NoTunnel(peer))?;
        let frame = p.tunnel.seal(payload)?;
        let to = *p.endpoint.lock();
        self.socket.send_to(&frame, to)?;
        Ok(())
    }

    /// Next decrypted payload delivered to this node.
    pub fn recv_timeout(&self, timeout: Duration) -> Option<(Ipv4Addr, Vec<u8>)> {
        self.inbox_rx.lock().recv_timeout(timeout).ok()
    }

    /// Runs keep-alive bookkeeping on every tunnel.
    pub fn keepalive_tick(&self, now_ms: u64) -> Result<()> {
        let peers: Vec<_> = self.peers.read().values().cloned().collect();
        for p in peers {
            if let Some(ka) = p.tunnel.keepalive_tick(now_ms) {
                let to = *p.endpoint.lock();
                self.send_packet(&ka, to)?;
            }
        }
        Ok(())
    }

    pub fn shutdown(&self) {
        self.shutdown.store(true, Ordering::Release);
        if let Some(h) = self.receiver.lock().take() {
            let _ = h.join();
        }
    }

    fn install(&self, tunnel: Tunnel, endpoint: SocketAddr) -> Arc<Tunnel> {
        let tunnel = Arc::new(
            match &self.emulator {
                Some(e) => tunnel.with_emulator(Arc::clone(e)),
                None => tunnel,
            }
            .with_keepalive_interval(self.config.keepalive_interval_ms),
        );
        let peer = Arc::new(Peer { tunnel: Arc::clone(&tunnel), endpoint: Mutex::new(endpoint) });
        self.peers.write().insert(tunnel.peer_ip(), peer);
        tunnel
    }

    fn receive_loop(self: Arc<Self>) {
        let mut buf = vec![0u8; 65_535];
        while !self.shutdown.load(Ordering::Acquire) {
            let (n, src) = match self.socket.recv_from(&mut buf) {
                Ok(v) => v,
                Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => continue,
                Err(e) => {
                    tracing::warn!("overlay recv: {e}");
                    continue;
                }
            };
            let packet = match OverlayPacket::decode(&buf[..n]) {
                Ok(p) => p,
                Err(e) => {
                    tracing::debug!("undecodable frame from {src}: {e}");
                    continue;
                }
            };
            if let Err(e) = self.dispatch(packet, src) {
                tracing::debug!("dropped packet from {src}: {e}");
            }
        }
    }

    fn dispatch(&self, packet: OverlayPacket, src: SocketAddr) -> Result<()> {
        match packet.ptype {
            PacketType::HandshakeInit => self.on_init(packet, src),
            PacketType::HandshakeResp => {
                let Some(pending) = self.pending.lock().remove(&packet.sender_ip) else {
                    return Ok(());
                };
                let result =
                    pending.handshake.complete(&packet, &self.ca_public, unix_seconds(), unix_millis()).map(|t| {
                        self.install(t, src);
                    });
                let _ = pending.done.send(result);
                Ok(())
            }
            PacketType::Data => {
                let peer =
                    self.peers.read().get(&packet.sender_ip).cloned().ok_or(Error::NoTunnel(packet.sender_ip))?;
                let received = peer.tunnel.open_packet(&packet, unix_millis())?;
                *peer.endpoint.lock() = src;
                let _ = self.inbox_tx.lock().send((packet.sender_ip, received.payload));
                Ok(())
            }
            PacketType::Keepalive => {
                if let Some(peer) = self.peers.read().get(&packet.sender_ip) {
                    peer.tunnel.note_inbound(unix_millis());
                }
                Ok(())
            }
            PacketType::LhReply => {
                let (target, endpoints) = parse_reply(&packet.payload)?;
                if let Some(tx) = self.pending_queries.lock().remove(&target) {
                    let _ = tx.send(endpoints);
                }
                Ok(())
            }
            other => Err(Error::UnexpectedPacket(other)),
        }
    }

    fn on_init(&self, packet: OverlayPacket, src: SocketAddr) -> Result<()> {
        let eph = ephemeral_of(&packet).ok_or(Error::MalformedPayload("handshake"))?;
        // Retransmitted probe for a handshake we already answered.
        if let Some((seen, resp)) = self.answered.lock().get(&packet.sender_ip) {
            if *seen == eph {
                self.socket.send_to(resp, src)?;
                return Ok(());
            }
        }
        let (tunnel, resp) = respond(
            &self.identity,
            &self.ca_public,
            &packet,
            self.next_counter(),
            unix_seconds(),
            unix_millis(),
            &mut OsRng,
        )?;
        let frame = resp.encode()?;
        self.install(tunnel, src);
        self.answered.lock().insert(packet.sender_ip, (eph, frame.clone()));
        self.socket.send_to(&frame, src)?;
        Ok(())
    }
}

impl Drop for OverlayNode {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::Release);
    }
}
