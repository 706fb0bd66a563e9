use std::fmt::Write as _;

use super::{Direction, Packet, PacketKind};
use crate::Micros;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    /// Packet offered to a link and accepted.
    Enqueue,
    /// Packet rejected by a full queue.
    Drop,
    /// Packet arrived at the far end of a link.
    Deliver,
}

impl TraceKind {
    fn as_str(self) -> &'static str {
        match self {
            TraceKind::Enqueue => "enq",
            TraceKind::Drop => "drop",
            TraceKind::Deliver => "dlv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub t_us: Micros,
    pub kind: TraceKind,
    pub direction: Direction,
    pub packet_id: u64,
    pub flow_id: u32,
    pub packet_kind: PacketKind,
    pub size_bytes: u32,
}

impl TraceEvent {
    pub fn new(t_us: Micros, kind: TraceKind, direction: Direction, pkt: &Packet) -> Self {
        Self {
            t_us,
            kind,
            direction,
            packet_id: pkt.id,
            flow_id: pkt.flow_id,
            packet_kind: pkt.kind,
            size_bytes: pkt.size_bytes,
        }
    }
}

/// Append-only packet event log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceLog {
    events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// One line per event: `t_us,event,dir,packet_id,flow_id,kind,size`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::with_capacity(self.events.len() * 40);
        for e in &self.events {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.t_us,
                e.kind.as_str(),
                e.direction,
                e.packet_id,
                e.flow_id,
                e.packet_kind,
                e.size_bytes
            );
        }
        out.into_bytes()
    }
}
