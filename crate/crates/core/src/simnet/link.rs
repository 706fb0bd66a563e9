use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::{Micros, MICROS_PER_SEC, MTU};

/// Smallest default queue, in packets. A drop-tail buffer shorter than the
/// initial window drops part of the very first burst.
pub const MIN_QUEUE_PKTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkConfigError {
    #[error("link rate must be positive")]
    ZeroRate,
    #[error("queue capacity must be at least one packet")]
    ZeroQueue,
}

/// One direction of a bottleneck: serialization rate, propagation delay and
/// a drop-tail queue counted in packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkConfig {
    pub rate_bps: u64,
    pub one_way_delay_us: Micros,
    pub queue_capacity_pkts: usize,
}

impl LinkConfig {
    pub fn new(
        rate_bps: u64,
        one_way_delay_us: Micros,
        queue_capacity_pkts: usize,
    ) -> Result<Self, LinkConfigError> {
        if rate_bps == 0 {
            return Err(LinkConfigError::ZeroRate);
        }
        if queue_capacity_pkts == 0 {
            return Err(LinkConfigError::ZeroQueue);
        }
        Ok(Self {
            rate_bps,
            one_way_delay_us,
            queue_capacity_pkts,
        })
    }

    /// A link whose queue holds one bandwidth-delay product worth of MTU
    /// packets for the given round-trip time (never fewer than
    /// [`MIN_QUEUE_PKTS`]).
    pub fn with_bdp_queue(rate_bps: u64, one_way_delay_us: Micros, rtt_us: Micros) -> Self {
        Self {
            rate_bps: rate_bps.max(1),
            one_way_delay_us,
            queue_capacity_pkts: bdp_packets(rate_bps, rtt_us).max(MIN_QUEUE_PKTS),
        }
    }

    /// Serialization time of `size_bytes`, in nanoseconds (rounded up).
    pub fn serialization_ns(&self, size_bytes: u64) -> u64 {
        (size_bytes * 8 * 1_000_000_000).div_ceil(self.rate_bps)
    }

    /// Serialization time of `size_bytes`, in microseconds (rounded up).
    pub fn serialization_us(&self, size_bytes: u64) -> Micros {
        (size_bytes * 8 * MICROS_PER_SEC).div_ceil(self.rate_bps)
    }
}

/// Bandwidth-delay product in MTU-sized packets, rounded up.
pub fn bdp_packets(rate_bps: u64, rtt_us: Micros) -> usize {
    let bdp_bytes = (rate_bps as u128 * rtt_us as u128).div_ceil(8 * MICROS_PER_SEC as u128);
    bdp_bytes.div_ceil(MTU as u128) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PacketKind {
    Handshake,
    Data,
    Ack,
    Token,
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PacketKind::Handshake => "HANDSHAKE",
            PacketKind::Data => "DATA",
            PacketKind::Ack => "ACK",
            PacketKind::Token => "TOKEN",
        })
    }
}

/// Unit of simulated transmission. Payload contents are carried separately
/// by the endpoint layer; the link only needs the size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub id: u64,
    pub flow_id: u32,
    pub size_bytes: u32,
    pub kind: PacketKind,
    pub enqueue_time_us: Micros,
    pub deliver_time_us: Micros,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Server to client.
    Forward,
    /// Client to server.
    Return,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "fwd",
            Direction::Return => "ret",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransmitOutcome {
    Delivered(Micros),
    Dropped,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub offered: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub bytes_delivered: u64,
}

/// FIFO bottleneck. Delivery time is computed analytically when the packet
/// is offered, so the link itself needs no events.
#[derive(Debug, Clone)]
pub struct Link {
    config: LinkConfig,
    busy_until_ns: u64,
    // serialization finish time of every packet still in the system
    in_system: VecDeque<u64>,
    stats: LinkStats,
}

impl Link {
    pub fn new(config: LinkConfig) -> Self {
        Self {
            config,
            busy_until_ns: 0,
            in_system: VecDeque::new(),
            stats: LinkStats::default(),
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.config
    }

    pub fn stats(&self) -> LinkStats {
        self.stats
    }

    /// Packets queued or being serialized at time `at`.
    pub fn depth(&mut self, at: Micros) -> usize {
        let at_ns = at * 1000;
        while self.in_system.front().is_some_and(|&done| done <= at_ns) {
            self.in_system.pop_front();
        }
        self.in_system.len()
    }

    /// Offers `pkt` to the link at time `at`. `at` must not decrease between
    /// calls.
    pub fn transmit(&mut self, pkt: &Packet, at: Micros) -> TransmitOutcome {
        debug_assert!(u64::from(pkt.size_bytes) <= MTU && pkt.size_bytes > 0);
        self.stats.offered += 1;
        if self.depth(at) >= self.config.queue_capacity_pkts {
            self.stats.dropped += 1;
            return TransmitOutcome::Dropped;
        }
        let start = self.busy_until_ns.max(at * 1000);
        let done = start + self.config.serialization_ns(u64::from(pkt.size_bytes));
        self.busy_until_ns = done;
        self.in_system.push_back(done);
        self.stats.delivered += 1;
        self.stats.bytes_delivered += u64::from(pkt.size_bytes);
        TransmitOutcome::Delivered(done.div_ceil(1000) + self.config.one_way_delay_us)
    }
}
