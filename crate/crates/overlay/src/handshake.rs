//! Two-message authenticated key agreement.
//!
//! ```text
//! INIT  (initiator -> responder): eph_i[32] | sig_i[64] | certificate
//! RESP  (responder -> initiator): eph_r[32] | sig_r[64] | certificate
//! ```
//!
//! `sig_i` signs `"hs-init" | eph_i | responder_ip` and `sig_r` signs
//! `"hs-resp" | eph_r | eph_i`, each with the sender's certificate key.
//! Both sides run X25519 on the ephemerals and expand the shared secret with
//! HKDF-SHA256 into one key per direction. The first 32 output bytes protect
//! traffic from the numerically lower overlay IP to the higher one.

use std::net::Ipv4Addr;

use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use x25519_dalek::{PublicKey, StaticSecret};

use crate::cert::{verify_certificate, Certificate, NodeIdentity, SIGNATURE_LEN};
use crate::error::{Error, Result};
use crate::packet::{OverlayPacket, PacketType};
use crate::tunnel::{SessionKeys, Tunnel};

pub const HKDF_SALT: &[u8] = b"edgefaas-overlay-v1";
const INIT_LABEL: &[u8] = b"hs-init";
const RESP_LABEL: &[u8] = b"hs-resp";
const EPH_LEN: usize = 32;

/// Expands an X25519 shared secret into directional keys for `local`.
pub fn derive_session_keys(
    local: Ipv4Addr,
    peer: Ipv4Addr,
    shared: &[u8; 32],
    init_eph: &[u8; 32],
    resp_eph: &[u8; 32],
) -> SessionKeys {
    let (lo, hi) = if u32::from(local) < u32::from(peer) { (local, peer) } else { (peer, local) };
    let mut info = Vec::with_capacity(72);
    info.extend_from_slice(&lo.octets());
    info.extend_from_slice(&hi.octets());
    info.extend_from_slice(init_eph);
    info.extend_from_slice(resp_eph);
    let hk = Hkdf::<Sha256>::new(Some(HKDF_SALT), shared);
    let mut okm = [0u8; 64];
    hk.expand(&info, &mut okm).expect("64 bytes is a valid HKDF-SHA256 length");
    let mut lo_to_hi = [0u8; 32];
    let mut hi_to_lo = [0u8; 32];
    lo_to_hi.copy_from_slice(&okm[..32]);
    hi_to_lo.copy_from_slice(&okm[32..]);
    if local == lo {
        SessionKeys { send: lo_to_hi, recv: hi_to_lo }
    } else {
        SessionKeys { send: hi_to_lo, recv: lo_to_hi }
    }
}

struct HandshakeBody {
    eph: [u8; 32],
    sig: [u8; SIGNATURE_LEN],
    cert: Certificate,
}

fn encode_body(eph: &[u8; 32], sig: &[u8; SIGNATURE_LEN], cert: &Certificate) -> Vec<u8> {
    let mut out = Vec::with_capacity(EPH_LEN + SIGNATURE_LEN + 128);
    out.extend_from_slice(eph);
    out.extend_from_slice(sig);
    out.extend_from_slice(&cert.to_bytes());
    out
}

fn decode_body(payload: &[u8]) -> Result<HandshakeBody> {
    if payload.len() < EPH_LEN + SIGNATURE_LEN {
        return Err(Error::MalformedPayload("handshake"));
    }
    let mut eph = [0u8; 32];
    eph.copy_from_slice(&payload[..EPH_LEN]);
    let mut sig = [0u8; SIGNATURE_LEN];
    sig.copy_from_slice(&payload[EPH_LEN..EPH_LEN + SIGNATURE_LEN]);
    let cert = Certificate::from_bytes(&payload[EPH_LEN + SIGNATURE_LEN..]).map_err(|_| Error::CertInvalid)?;
    Ok(HandshakeBody { eph, sig, cert })
}

fn signed_msg(label: &[u8], a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut m = Vec::with_capacity(label.len() + a.len() + b.len());
    m.extend_from_slice(label);
    m.extend_from_slice(a);
    m.extend_from_slice(b);
    m
}

/// Peer certificate must chain to the CA, be current, match the claimed
/// sender address and the expected peer (if any), and the handshake
/// signature must be made with its key.
fn authenticate(
    body: &HandshakeBody,
    sender: Ipv4Addr,
    expected: Option<Ipv4Addr>,
    signed: &[u8],
    ca_public: &[u8; 32],
    now_secs: u64,
) -> Result<()> {
    let ok = verify_certificate(&body.cert, ca_public, now_secs)
        && body.cert.overlay_ip == sender
        && expected.map_or(true, |ip| ip == sender)
        && body.cert.verify_signed_by_subject(signed, &body.sig);
    if ok {
        Ok(())
    } else {
        Err(Error::CertInvalid)
    }
}

/// Initiator side of a handshake in flight. The same INIT packet is resent on
/// every punch probe so that any response completes it.
pub struct InitiatorHandshake {
    local_ip: Ipv4Addr,
    target_ip: Ipv4Addr,
    eph_secret: StaticSecret,
    eph_public: [u8; 32],
    packet: OverlayPacket,
}

impl InitiatorHandshake {
    pub fn start<R: RngCore + CryptoRng>(
        identity: &NodeIdentity,
        target_ip: Ipv4Addr,
        counter: u64,
        rng: &mut R,
    ) -> Self {
        let eph_secret = StaticSecret::random_from_rng(rng);
        let eph_public = PublicKey::from(&eph_secret).to_bytes();
        let sig = identity.sign(&signed_msg(INIT_LABEL, &eph_public, &target_ip.octets()));
        let packet = OverlayPacket::new(
            PacketType::HandshakeInit,
            identity.overlay_ip(),
            counter,
            encode_body(&eph_public, &sig, &identity.certificate),
        );
        Self { local_ip: identity.overlay_ip(), target_ip, eph_secret, eph_public, packet }
    }

    pub fn target_ip(&self) -> Ipv4Addr {
        self.target_ip
    }

    pub fn init_packet(&self) -> &OverlayPacket {
        &self.packet
    }

    pub fn ephemeral_public(&self) -> [u8; 32] {
        self.eph_public
    }

    #[doc(hidden)]
    pub fn ephemeral_secret(&self) -> [u8; 32] {
        self.eph_secret.to_bytes()
    }

    pub fn complete(&self, resp: &OverlayPacket, ca_public: &[u8; 32], now_secs: u64, now_ms: u64) -> Result<Tunnel> {
        if resp.ptype != PacketType::HandshakeResp {
            return Err(Error::UnexpectedPacket(resp.ptype));
        }
        let body = decode_body(&resp.payload)?;
        let signed = signed_msg(RESP_LABEL, &body.eph, &self.eph_public);
        authenticate(&body, resp.sender_ip, Some(self.target_ip), &signed, ca_public, now_secs)?;
        let shared = self.eph_secret.diffie_hellman(&PublicKey::from(body.eph)).to_bytes();
        let keys = derive_session_keys(self.local_ip, self.target_ip, &shared, &self.eph_public, &body.eph);
        Ok(Tunnel::established(self.local_ip, self.target_ip, keys, now_ms))
    }
}

/// Responder side: validates an INIT and produces the tunnel plus the RESP packet.
pub fn respond<R: RngCore + CryptoRng>(
    identity: &NodeIdentity,
    ca_public: &[u8; 32],
    init: &OverlayPacket,
    counter: u64,
    now_secs: u64,
    now_ms: u64,
    rng: &mut R,
) -> Result<(Tunnel, OverlayPacket)> {
    if init.ptype != PacketType::HandshakeInit {
        return Err(Error::UnexpectedPacket(init.ptype));
    }
    let local_ip = identity.overlay_ip();
    let body = decode_body(&init.payload)?;
    let signed = signed_msg(INIT_LABEL, &body.eph, &local_ip.octets());
    authenticate(&body, init.sender_ip, None, &signed, ca_public, now_secs)?;
    if init.sender_ip == local_ip {
        return Err(Error::CertInvalid);
    }

    let eph_secret = StaticSecret::random_from_rng(rng);
    let eph_public = PublicKey::from(&eph_secret).to_bytes();
    let shared = eph_secret.diffie_hellman(&PublicKey::from(body.eph)).to_bytes();
    let keys = derive_session_keys(local_ip, init.sender_ip, &shared, &body.eph, &eph_public);
    let sig = identity.sign(&signed_msg(RESP_LABEL, &eph_public, &body.eph));
    let resp = OverlayPacket::new(
        PacketType::HandshakeResp,
        local_ip,
        counter,
        encode_body(&eph_public, &sig, &identity.certificate),
    );
    Ok((Tunnel::established(local_ip, init.sender_ip, keys, now_ms), resp))
}

/// Ephemeral public key carried by an INIT or RESP packet.
pub fn ephemeral_of(packet: &OverlayPacket) -> Option<[u8; 32]> {
    packet.payload.get(..EPH_LEN).map(|s| {
        let mut k = [0u8; 32];
        k.copy_from_slice(s);
        k
    })
}
