//! Encrypted overlay mesh for edge nodes.
//!
//! Nodes hold a CA-signed [`Certificate`] binding them to an overlay address,
//! announce their UDP endpoints to a [`lighthouse`], and open direct AES-256-GCM
//! [`Tunnel`]s to each other after an X25519 handshake. The [`latency`] module
//! provides the seeded link-delay emulation used by every benchmark.

pub mod cert;
pub mod error;
pub mod handshake;
pub mod latency;
pub mod lighthouse;
pub mod node;
pub mod packet;
pub mod replay;
pub mod tunnel;

pub use cert::{issue_certificate, verify_certificate, Certificate, CertificateAuthority, NodeIdentity};
pub use error::{Error, Result};
pub use handshake::{derive_session_keys, respond, InitiatorHandshake};
pub use latency::{
    nebula_profile, sample_delay, DelayMode, DelaySampler, LatencyProfile, LinkEmulator, Site, SitePair,
};
pub use lighthouse::{Lighthouse, LighthouseRecord};
pub use node::{NodeConfig, OverlayNode};
pub use packet::{decode_packet, encode_packet, OverlayPacket, PacketType};
pub use replay::ReplayWindow;
pub use tunnel::{Received, SessionKeys, Tunnel, TunnelState};
