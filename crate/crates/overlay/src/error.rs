use std::io;
use std::net::Ipv4Addr;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("overlay address {0} was already issued by this CA")]
    DuplicateOverlayIp(Ipv4Addr),
    #[error("certificate validity must be positive")]
    InvalidValidity,
    #[error("signing secret does not match the certificate public key")]
    KeyMismatch,
    #[error("malformed certificate: {0}")]
    MalformedCertificate(&'static str),

    #[error("payload of {0} bytes exceeds the frame limit")]
    PayloadTooLarge(usize),
    #[error("bad magic byte {0:#04x}")]
    BadMagic(u8),
    #[error("unsupported version {0:#04x}")]
    BadVersion(u8),
    #[error("unknown packet type {0}")]
    UnknownType(u8),
    #[error("frame truncated: {0} bytes")]
    Truncated(usize),
    #[error("malformed {0} payload")]
    MalformedPayload(&'static str),

    #[error("peer certificate failed verification")]
    CertInvalid,
    #[error("no handshake response from {0} within the punch schedule")]
    PunchTimeout(Ipv4Addr),
    #[error("lighthouse has no record for {0}")]
    PeerUnknown(Ipv4Addr),
    #[error("lighthouse did not answer")]
    LighthouseTimeout,

    #[error("authentication tag mismatch")]
    AuthFail,
    #[error("counter {0} rejected by replay window")]
    Replay(u64),
    #[error("tunnel is dead")]
    TunnelDead,
    #[error("no tunnel to {0}")]
    NoTunnel(Ipv4Addr),
    #[error("unexpected packet type {0:?}")]
    UnexpectedPacket(crate::packet::PacketType),

    #[error(transparent)]
    Io(#[from] io::Error),
}
