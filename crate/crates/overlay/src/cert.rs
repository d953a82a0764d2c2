//! Overlay identities: a small certificate format signed with Ed25519.
//!
//! Canonical serialization (all integers little-endian):
//!
//! ```text
//! u16 name_len | name | ip[4] | u16 group_count | (u16 len | group)* |
//! u64 not_before | u64 not_after | public_key[32] | ca_signature[64]
//! ```
//!
//! The signature covers every byte before it.

use std::collections::HashSet;
use std::fs;
use std::net::{Ipv4Addr, SocketAddrV4};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};

use crate::error::{Error, Result};

pub const PUBLIC_KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject_name: String,
    pub overlay_ip: Ipv4Addr,
    pub groups: Vec<String>,
    pub not_before: u64,
    pub not_after: u64,
    pub public_key: [u8; PUBLIC_KEY_LEN],
    pub ca_signature: [u8; SIGNATURE_LEN],
}

impl Certificate {
    /// Bytes covered by the CA signature.
    pub fn tbs_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.subject_name.len());
        put_str(&mut out, &self.subject_name);
        out.extend_from_slice(&self.overlay_ip.octets());
        out.extend_from_slice(&(self.groups.len() as u16).to_le_bytes());
        for g in &self.groups {
            put_str(&mut out, g);
        }
        out.extend_from_slice(&self.not_before.to_le_bytes());
        out.extend_from_slice(&self.not_after.to_le_bytes());
        out.extend_from_slice(&self.public_key);
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.tbs_bytes();
        out.extend_from_slice(&self.ca_signature);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        let subject_name = r.string()?;
        let ip = r.take(4)?;
        let overlay_ip = Ipv4Addr::new(ip[0], ip[1], ip[2], ip[3]);
        let count = r.u16()? as usize;
        let mut groups = Vec::with_capacity(count.min(64));
        for _ in 0..count {
            groups.push(r.string()?);
        }
        let not_before = r.u64()?;
        let not_after = r.u64()?;
        let mut public_key = [0u8; PUBLIC_KEY_LEN];
        public_key.copy_from_slice(r.take(PUBLIC_KEY_LEN)?);
        let mut ca_signature = [0u8; SIGNATURE_LEN];
        ca_signature.copy_from_slice(r.take(SIGNATURE_LEN)?);
        if r.pos != bytes.len() {
            return Err(Error::MalformedCertificate("trailing bytes"));
        }
        Ok(Self { subject_name, overlay_ip, groups, not_before, not_after, public_key, ca_signature })
    }

    pub fn verify(&self, ca_public: &[u8; PUBLIC_KEY_LEN], now: u64) -> bool {
        verify_certificate(self, ca_public, now)
    }

    /// Checks a detached signature made with the certificate's own key.
    pub fn verify_signed_by_subject(&self, msg: &[u8], sig: &[u8]) -> bool {
        let Ok(key) = VerifyingKey::from_bytes(&self.public_key) else {
            return false;
        };
        let Ok(sig) = Signature::from_slice(sig) else {
            return false;
        };
        key.verify_strict(msg, &sig).is_ok()
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// True iff the CA signature is valid and `now` lies inside the validity window.
pub fn verify_certificate(cert: &Certificate, ca_public: &[u8; PUBLIC_KEY_LEN], now: u64) -> bool {
    if cert.not_before >= cert.not_after || now < cert.not_before || now > cert.not_after {
        return false;
    }
    let Ok(ca) = VerifyingKey::from_bytes(ca_public) else {
        return false;
    };
    let sig = Signature::from_bytes(&cert.ca_signature);
    ca.verify_strict(&cert.tbs_bytes(), &sig).is_ok()
}

pub struct CertificateAuthority {
    name: String,
    key: SigningKey,
    issued: HashSet<Ipv4Addr>,
}

impl CertificateAuthority {
    pub fn generate<R: RngCore + CryptoRng>(name: impl Into<String>, rng: &mut R) -> Self {
        Self::from_secret(name, SigningKey::generate(rng).to_bytes())
    }

    pub fn from_secret(name: impl Into<String>, secret: [u8; 32]) -> Self {
        Self { name: name.into(), key: SigningKey::from_bytes(&secret), issued: HashSet::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn public_key(&self) -> [u8; PUBLIC_KEY_LEN] {
        self.key.verifying_key().to_bytes()
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.key.to_bytes()
    }

    /// Self-signed certificate carrying the CA public key; this is what
    /// lighthouses and nodes load as their trust anchor.
    pub fn root_certificate(&self, now: u64, validity: u64) -> Result<Certificate> {
        if validity == 0 {
            return Err(Error::InvalidValidity);
        }
        let mut cert = Certificate {
            subject_name: self.name.clone(),
            overlay_ip: Ipv4Addr::UNSPECIFIED,
            groups: Vec::new(),
            not_before: now,
            not_after: now.saturating_add(validity),
            public_key: self.public_key(),
            ca_signature: [0; SIGNATURE_LEN],
        };
        cert.ca_signature = self.key.sign(&cert.tbs_bytes()).to_bytes();
        Ok(cert)
    }

    pub fn issue(
        &mut self,
        subject: &str,
        overlay_ip: Ipv4Addr,
        groups: &[String],
        validity: u64,
        subject_public: [u8; PUBLIC_KEY_LEN],
        now: u64,
    ) -> Result<Certificate> {
        if validity == 0 {
            return Err(Error::InvalidValidity);
        }
        if self.issued.contains(&overlay_ip) {
            return Err(Error::DuplicateOverlayIp(overlay_ip));
        }
        let mut cert = Certificate {
            subject_name: subject.to_owned(),
            overlay_ip,
            groups: groups.to_vec(),
            not_before: now,
            not_after: now.saturating_add(validity),
            public_key: subject_public,
            ca_signature: [0; SIGNATURE_LEN],
        };
        cert.ca_signature = self.key.sign(&cert.tbs_bytes()).to_bytes();
        self.issued.insert(overlay_ip);
        Ok(cert)
    }

    /// Generates a fresh node key pair and issues its certificate.
    pub fn issue_identity<R: RngCore + CryptoRng>(
        &mut self,
        subject: &str,
        overlay_ip: Ipv4Addr,
        groups: &[String],
        validity: u64,
        now: u64,
        rng: &mut R,
    ) -> Result<NodeIdentity> {
        let key = SigningKey::generate(rng);
        let cert = self.issue(subject, overlay_ip, groups, validity, key.verifying_key().to_bytes(), now)?;
        NodeIdentity::new(cert, key.to_bytes(), Vec::new())
    }
}

/// Free-function form of [`CertificateAuthority::issue`] for callers holding the raw CA secret.
pub fn issue_certificate(
    ca: &mut CertificateAuthority,
    subject: &str,
    overlay_ip: Ipv4Addr,
    groups: &[String],
    validity: u64,
    subject_public: [u8; PUBLIC_KEY_LEN],
) -> Result<Certificate> {
    ca.issue(subject, overlay_ip, groups, validity, subject_public, unix_seconds())
}

#[derive(Clone)]
pub struct NodeIdentity {
    pub certificate: Certificate,
    signing_secret: [u8; 32],
    pub underlay_endpoints: Vec<SocketAddrV4>,
}

impl std::fmt::Debug for NodeIdentity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NodeIdentity")
            .field("certificate", &self.certificate)
            .field("underlay_endpoints", &self.underlay_endpoints)
            .finish_non_exhaustive()
    }
}

impl NodeIdentity {
    pub fn new(
        certificate: Certificate,
        signing_secret: [u8; 32],
        underlay_endpoints: Vec<SocketAddrV4>,
    ) -> Result<Self> {
        let derived = SigningKey::from_bytes(&signing_secret).verifying_key().to_bytes();
        if derived != certificate.public_key {
            return Err(Error::KeyMismatch);
        }
        Ok(Self { certificate, signing_secret, underlay_endpoints })
    }

    pub fn overlay_ip(&self) -> Ipv4Addr {
        self.certificate.overlay_ip
    }

    pub fn signing_secret(&self) -> [u8; 32] {
        self.signing_secret
    }

    pub fn sign(&self, msg: &[u8]) -> [u8; SIGNATURE_LEN] {
        SigningKey::from_bytes(&self.signing_secret).sign(msg).to_bytes()
    }

    pub fn with_endpoints(mut self, endpoints: Vec<SocketAddrV4>) -> Self {
        self.underlay_endpoints = endpoints;
        self
    }

    /// Loads `<stem>.crt` and `<stem>.key` written by [`NodeIdentity::save`].
    pub fn load(cert_path: impl AsRef<Path>, key_path: impl AsRef<Path>) -> Result<Self> {
        let cert = Certificate::read_from(cert_path)?;
        let key = fs::read(key_path)?;
        let secret: [u8; 32] =
            key.as_slice().try_into().map_err(|_| Error::MalformedCertificate("key file must hold 32 bytes"))?;
        Self::new(cert, secret, Vec::new())
    }

    pub fn save(&self, cert_path: impl AsRef<Path>, key_path: impl AsRef<Path>) -> Result<()> {
        self.certificate.write_to(cert_path)?;
        fs::write(key_path, self.signing_secret)?;
        Ok(())
    }
}

pub fn unix_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn unix_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    let bytes = s.as_bytes();
    let len = bytes.len().min(u16::MAX as usize);
    out.extend_from_slice(&(len as u16).to_le_bytes());
    out.extend_from_slice(&bytes[..len]);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(Error::MalformedCertificate("truncated"))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        b.copy_from_slice(self.take(8)?);
        Ok(u64::from_le_bytes(b))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::MalformedCertificate("non-utf8 string"))
    }
}
