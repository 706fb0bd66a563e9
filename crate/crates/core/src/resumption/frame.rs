use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use thiserror::Error;

use super::varint::{decode_varint, encode_varint, varint_len, VARINT_MAX};
use crate::MSS;

/// Frame type carried in the first varint.
pub const FRAME_TYPE: u64 = 0x2A;

/// Path characteristics saved from a completed session.
///
/// Wire layout:
///
/// ```text
/// [type = 0x2A][lifetime_s][saved_capacity_bytes][saved_min_rtt_us]  (varints)
/// [ip_version: 4 | 6][ip: 4 | 16 bytes]
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BdpFrame {
    pub lifetime_s: u64,
    pub saved_capacity_bytes: u64,
    pub saved_min_rtt_us: u64,
    pub client_ip: IpAddr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MalformedReason {
    Truncated,
    UnknownType,
    BadIpVersion(u8),
    ZeroValue,
    CapacityBelowMinimum,
    NonCanonicalVarint,
    TrailingBytes,
}

impl fmt::Display for MalformedReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MalformedReason::Truncated => f.write_str("truncated"),
            MalformedReason::UnknownType => f.write_str("unknown frame type"),
            MalformedReason::BadIpVersion(v) => write!(f, "bad ip version {v}"),
            MalformedReason::ZeroValue => f.write_str("zero-valued field"),
            MalformedReason::CapacityBelowMinimum => f.write_str("capacity below two MSS"),
            MalformedReason::NonCanonicalVarint => f.write_str("non-minimal varint"),
            MalformedReason::TrailingBytes => f.write_str("trailing bytes"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("malformed frame at byte {offset}: {reason}")]
    Malformed {
        offset: usize,
        reason: MalformedReason,
    },
    #[error("invalid frame field: {0}")]
    Invalid(&'static str),
}

impl FrameError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            FrameError::Malformed { offset, .. } => Some(*offset),
            FrameError::Invalid(_) => None,
        }
    }
}

impl BdpFrame {
    pub fn new(
        lifetime_s: u64,
        saved_capacity_bytes: u64,
        saved_min_rtt_us: u64,
        client_ip: IpAddr,
    ) -> Result<Self, FrameError> {
        if saved_capacity_bytes < 2 * MSS {
            return Err(FrameError::Invalid("saved capacity below two MSS"));
        }
        if saved_min_rtt_us == 0 {
            return Err(FrameError::Invalid("saved min RTT must be positive"));
        }
        if [lifetime_s, saved_capacity_bytes, saved_min_rtt_us]
            .iter()
            .any(|&v| v > VARINT_MAX)
        {
            return Err(FrameError::Invalid("field exceeds varint range"));
        }
        Ok(Self {
            lifetime_s,
            saved_capacity_bytes,
            saved_min_rtt_us,
            client_ip,
        })
    }

    /// Bandwidth-delay product implied by the frame, bits per second.
    pub fn implied_rate_bps(&self) -> u64 {
        self.saved_capacity_bytes * 8 * crate::MICROS_PER_SEC / self.saved_min_rtt_us
    }
}

pub fn encode_frame(frame: &BdpFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(32);
    encode_varint(FRAME_TYPE, &mut out);
    encode_varint(frame.lifetime_s, &mut out);
    encode_varint(frame.saved_capacity_bytes, &mut out);
    encode_varint(frame.saved_min_rtt_us, &mut out);
    match frame.client_ip {
        IpAddr::V4(ip) => {
            out.push(4);
            out.extend_from_slice(&ip.octets());
        }
        IpAddr::V6(ip) => {
            out.push(6);
            out.extend_from_slice(&ip.octets());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn malformed(&self, reason: MalformedReason) -> FrameError {
        FrameError::Malformed {
            offset: self.pos,
            reason,
        }
    }

    fn varint(&mut self) -> Result<u64, FrameError> {
        let (v, len) = decode_varint(&self.buf[self.pos..])
            .ok_or_else(|| self.malformed(MalformedReason::Truncated))?;
        if varint_len(v) != Some(len) {
            return Err(self.malformed(MalformedReason::NonCanonicalVarint));
        }
        self.pos += len;
        Ok(v)
    }

    fn take(&mut self, n: usize) -> Result<&[u8], FrameError> {
        let bytes = self
            .buf
            .get(self.pos..self.pos + n)
            .ok_or_else(|| self.malformed(MalformedReason::Truncated))?;
        self.pos += n;
        Ok(bytes)
    }
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<BdpFrame, FrameError> {
    let mut r = Reader { buf: bytes, pos: 0 };

    let start = r.pos;
    if r.varint()? != FRAME_TYPE {
        return Err(FrameError::Malformed {
            offset: start,
            reason: MalformedReason::UnknownType,
        });
    }
    let lifetime_s = r.varint()?;

    let at = r.pos;
    let saved_capacity_bytes = r.varint()?;
    if saved_capacity_bytes == 0 {
        return Err(FrameError::Malformed {
            offset: at,
            reason: MalformedReason::ZeroValue,
        });
    }
    if saved_capacity_bytes < 2 * MSS {
        return Err(FrameError::Malformed {
            offset: at,
            reason: MalformedReason::CapacityBelowMinimum,
        });
    }

    let at = r.pos;
    let saved_min_rtt_us = r.varint()?;
    if saved_min_rtt_us == 0 {
        return Err(FrameError::Malformed {
            offset: at,
            reason: MalformedReason::ZeroValue,
        });
    }

    let at = r.pos;
    let version = r.take(1)?[0];
    let client_ip = match version {
        4 => {
            let b: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
            IpAddr::V4(Ipv4Addr::from(b))
        }
        6 => {
            let b: [u8; 16] = r.take(16)?.try_into().expect("16 bytes");
            IpAddr::V6(Ipv6Addr::from(b))
        }
        v => {
            return Err(FrameError::Malformed {
                offset: at,
                reason: MalformedReason::BadIpVersion(v),
            })
        }
    };
    if r.pos != bytes.len() {
        return Err(r.malformed(MalformedReason::TrailingBytes));
    }
    Ok(BdpFrame {
        lifetime_s,
        saved_capacity_bytes,
        saved_min_rtt_us,
        client_ip,
    })
}
