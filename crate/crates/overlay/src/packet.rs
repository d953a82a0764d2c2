//! Bit-exact UDP framing shared by every overlay message.
//!
//! ```text
//!  0      1        2       3..7          7..15          15..
//! +------+--------+-------+-------------+--------------+---------+
//! | 0xE6 | 0x01   | ptype | sender_ip   | counter (BE) | payload |
//! +------+--------+-------+-------------+--------------+---------+
//! ```

use std::net::Ipv4Addr;

use crate::error::{Error, Result};

pub const MAGIC: u8 = 0xE6;
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 15;
pub const MAX_PAYLOAD: usize = 65_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PacketType {
    HandshakeInit = 1,
    HandshakeResp = 2,
    Data = 3,
    Keepalive = 4,
    LhQuery = 5,
    LhReply = 6,
    LhRegister = 7,
}

impl PacketType {
    pub const ALL: [PacketType; 7] = [
        PacketType::HandshakeInit,
        PacketType::HandshakeResp,
        PacketType::Data,
        PacketType::Keepalive,
        PacketType::LhQuery,
        PacketType::LhReply,
        PacketType::LhRegister,
    ];
}

impl TryFrom<u8> for PacketType {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Ok(match value {
            1 => PacketType::HandshakeInit,
            2 => PacketType::HandshakeResp,
            3 => PacketType::Data,
            4 => PacketType::Keepalive,
            5 => PacketType::LhQuery,
            6 => PacketType::LhReply,
            7 => PacketType::LhRegister,
            other => return Err(Error::UnknownType(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayPacket {
    pub ptype: PacketType,
    pub sender_ip: Ipv4Addr,
    pub counter: u64,
    pub payload: Vec<u8>,
}

impl OverlayPacket {
    pub fn new(ptype: PacketType, sender_ip: Ipv4Addr, counter: u64, payload: Vec<u8>) -> Self {
        Self { ptype, sender_ip, counter, payload }
    }

    pub fn header(&self) -> [u8; HEADER_LEN] {
        header_bytes(self.ptype, self.sender_ip, self.counter)
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(Error::PayloadTooLarge(self.payload.len()));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.header());
        out.extend_from_slice(&self.payload);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated(bytes.len()));
        }
        if bytes[0] != MAGIC {
            return Err(Error::BadMagic(bytes[0]));
        }
        if bytes[1] != VERSION {
            return Err(Error::BadVersion(bytes[1]));
        }
        let ptype = PacketType::try_from(bytes[2])?;
        let sender_ip = Ipv4Addr::new(bytes[3], bytes[4], bytes[5], bytes[6]);
        let mut counter = [0u8; 8];
        counter.copy_from_slice(&bytes[7..15]);
        Ok(Self { ptype, sender_ip, counter: u64::from_be_bytes(counter), payload: bytes[HEADER_LEN..].to_vec() })
    }
}

pub(crate) fn header_bytes(ptype: PacketType, sender_ip: Ipv4Addr, counter: u64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0] = MAGIC;
    h[1] = VERSION;
    h[2] = ptype as u8;
    h[3..7].copy_from_slice(&sender_ip.octets());
    h[7..15].copy_from_slice(&counter.to_be_bytes());
    h
}

pub fn encode_packet(p: &OverlayPacket) -> Result<Vec<u8>> {
    p.encode()
}

pub fn decode_packet(bytes: &[u8]) -> Result<OverlayPacket> {
    OverlayPacket::decode(bytes)
}
