use std::net::{Ipv4Addr, SocketAddr};
use std::sync::Arc;
use std::time::Duration;

use edgefaas_overlay::cert::{unix_millis, unix_seconds};
use edgefaas_overlay::lighthouse::LighthouseHandle;
use edgefaas_overlay::{CertificateAuthority, Error, Lighthouse, NodeConfig, NodeIdentity, OverlayNode, PacketType};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const LOOPBACK: &str = "127.0.0.1:0";

struct Mesh {
    ca: CertificateAuthority,
    lighthouse: LighthouseHandle,
    rng: ChaCha20Rng,
}

impl Mesh {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let ca = CertificateAuthority::generate("mesh-ca", &mut rng);
        let lh = Lighthouse::bind(LOOPBACK.parse().unwrap(), ca.public_key()).unwrap();
        let lighthouse = lh.spawn(2).unwrap();
        Self { ca, lighthouse, rng }
    }

    fn lh_addr(&self) -> SocketAddr {
        self.lighthouse.lighthouse().local_addr().unwrap()
    }

    fn identity(&mut self, name: &str, ip: Ipv4Addr) -> NodeIdentity {
        self.ca.issue_identity(name, ip, &[], 3600, unix_seconds() - 1, &mut self.rng).unwrap()
    }

    fn node(&mut self, name: &str, ip: Ipv4Addr, config: NodeConfig) -> Arc<OverlayNode> {
        let id = self.identity(name, ip);
        let ca = self.ca.public_key();
        OverlayNode::bind(id, ca, LOOPBACK.parse().unwrap(), self.lh_addr(), config).unwrap()
    }
}

fn wait_registered(mesh: &Mesh, ip: Ipv4Addr) {
    for _ in 0..200 {
        if mesh.lighthouse.lighthouse().registry().read().lookup(ip, unix_millis()).is_some() {
            return;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    panic!("{ip} never registered");
}

#[test]
fn direct_tunnel_carries_data_without_touching_lighthouse() {
    let mut mesh = Mesh::new(1);
    let a_ip = Ipv4Addr::new(10, 42, 0, 2);
    let b_ip = Ipv4Addr::new(10, 42, 0, 3);
    let a = mesh.node("worker-1", a_ip, NodeConfig::default());
    let b = mesh.node("worker-2", b_ip, NodeConfig::default());
    a.register().unwrap();
    b.register().unwrap();
    wait_registered(&mesh, a_ip);
    wait_registered(&mesh, b_ip);

    let ta = a.establish_tunnel(b_ip).unwrap();
    // Responder installs its side before answering.
    let tb = b.tunnel(a_ip).expect("responder tunnel");
    assert_eq!(ta.send_key(), tb.recv_key());
    assert_eq!(ta.recv_key(), tb.send_key());

    let k = 25;
    for i in 0..k {
        a.send(b_ip, format!("msg-{i}").as_bytes()).unwrap();
    }
    for i in 0..k {
        let (from, payload) = b.recv_timeout(Duration::from_secs(2)).expect("delivery");
        assert_eq!(from, a_ip);
        assert_eq!(payload, format!("msg-{i}").into_bytes());
    }
    b.send(a_ip, b"pong").unwrap();
    assert_eq!(a.recv_timeout(Duration::from_secs(2)).unwrap().1, b"pong");

    // A second establish reuses the tunnel instead of querying again.
    a.establish_tunnel(b_ip).unwrap();

    let stats = mesh.lighthouse.lighthouse().stats();
    assert_eq!(stats.queries_from(a_ip), 1);
    assert_eq!(stats.count(PacketType::LhQuery), 1);
    assert_eq!(stats.count(PacketType::Data), 0);
    assert_eq!(stats.count(PacketType::HandshakeInit), 0);

    a.shutdown();
    b.shutdown();
    mesh.lighthouse.stop();
}

#[test]
fn unknown_peer_reported() {
    let mut mesh = Mesh::new(2);
    let a = mesh.node("a", Ipv4Addr::new(10, 42, 0, 2), NodeConfig::default());
    let r = a.establish_tunnel(Ipv4Addr::new(10, 42, 0, 77));
    assert!(matches!(r, Err(Error::PeerUnknown(_))), "{r:?}");
    a.shutdown();
    mesh.lighthouse.stop();
}

#[test]
fn forged_responder_rejected() {
    let mut mesh = Mesh::new(3);
    let a_ip = Ipv4Addr::new(10, 42, 0, 2);
    let b_ip = Ipv4Addr::new(10, 42, 0, 3);
    let a = mesh.node("a", a_ip, NodeConfig::default());

    // B holds a certificate from a rogue CA but trusts the real one, so it answers.
    let mut rng = ChaCha20Rng::seed_from_u64(33);
    let mut rogue = CertificateAuthority::generate("rogue", &mut rng);
    let forged = rogue.issue_identity("b", b_ip, &[], 3600, unix_seconds() - 1, &mut rng).unwrap();
    let b = OverlayNode::bind(
        forged,
        mesh.ca.public_key(),
        LOOPBACK.parse().unwrap(),
        mesh.lh_addr(),
        NodeConfig::default(),
    )
    .unwrap();
    // The lighthouse refuses the forged registration, so plant the record directly.
    b.register().unwrap();
    std::thread::sleep(Duration::from_millis(50));
    assert!(mesh.lighthouse.lighthouse().registry().read().lookup(b_ip, unix_millis()).is_none());
    let SocketAddr::V4(b_addr) = b.local_addr().unwrap() else { unreachable!() };
    mesh.lighthouse.lighthouse().registry().write().register(b_ip, vec![b_addr], unix_millis());

    let r = a.establish_tunnel(b_ip);
    assert!(matches!(r, Err(Error::CertInvalid)), "{r:?}");
    assert!(a.tunnel(b_ip).is_none());
    a.shutdown();
    b.shutdown();
    mesh.lighthouse.stop();
}

#[test]
fn silent_endpoint_times_out() {
    let mut mesh = Mesh::new(4);
    let a = mesh.node(
        "a",
        Ipv4Addr::new(10, 42, 0, 2),
        NodeConfig {
            probe_spacing: Duration::from_millis(20),
            punch_timeout: Duration::from_millis(200),
            ..NodeConfig::default()
        },
    );
    // A bound socket that never answers.
    let sink = std::net::UdpSocket::bind(LOOPBACK).unwrap();
    let SocketAddr::V4(sink_addr) = sink.local_addr().unwrap() else { unreachable!() };
    let ghost = Ipv4Addr::new(10, 42, 0, 9);
    mesh.lighthouse.lighthouse().registry().write().register(ghost, vec![sink_addr], unix_millis());

    let started = std::time::Instant::now();
    let r = a.establish_tunnel(ghost);
    assert!(matches!(r, Err(Error::PunchTimeout(_))), "{r:?}");
    assert!(started.elapsed() >= Duration::from_millis(200));

    // Five probes reached the silent endpoint.
    sink.set_read_timeout(Some(Duration::from_millis(50))).unwrap();
    let mut buf = [0u8; 2048];
    let mut probes = 0;
    while sink.recv_from(&mut buf).is_ok() {
        assert_eq!(buf[2], PacketType::HandshakeInit as u8);
        probes += 1;
    }
    assert_eq!(probes, 5);
    a.shutdown();
    mesh.lighthouse.stop();
}
