//! Reliable byte-stream transport state: handshake modes, RTT estimation,
//! congestion control and transfer bookkeeping.

mod bbr;
mod connection;
mod newreno;
mod ranges;
mod rtt;

pub use bbr::BbrLite;
pub use connection::{
    AckSample, CongestionAlgorithm, ConnState, Connection, OpenInfo, ResumeMode, SeedState,
};
pub use newreno::NewReno;
pub use ranges::RangeSet;
pub use rtt::RttEstimator;

use crate::Micros;

/// How a transfer ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferOutcome {
    Completed,
    /// The simulation horizon passed before the last byte was acknowledged.
    Timeout,
}

/// Per-flow result of `send_file`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferResult {
    pub flow_id: u32,
    pub file_size_bytes: u64,
    /// Time the client opened the connection.
    pub start_us: Micros,
    /// First payload byte received by the client.
    pub first_byte_us: Option<Micros>,
    /// Last byte acknowledged at the server (or the horizon on timeout).
    pub completion_us: Micros,
    /// Time the client held every byte.
    pub client_complete_us: Option<Micros>,
    pub delivered_bytes: u64,
    pub retransmitted_bytes: u64,
    pub outcome: TransferOutcome,
    /// Mode requested by the flow.
    pub requested_mode: ResumeMode,
    /// Mode the connection actually ran in.
    pub effective_mode: ResumeMode,
    /// A resume mode was requested but the client had nothing to resume with.
    pub fallback: bool,
    pub congestion_events: u32,
    pub seed_discards: u32,
    pub decision: Option<crate::SeedDecision>,
}

impl TransferResult {
    pub fn transfer_time_us(&self) -> Micros {
        self.completion_us.saturating_sub(self.start_us)
    }

    pub fn transfer_time_s(&self) -> f64 {
        self.transfer_time_us() as f64 / crate::MICROS_PER_SEC as f64
    }

    pub fn is_complete(&self) -> bool {
        self.outcome == TransferOutcome::Completed
    }
}
