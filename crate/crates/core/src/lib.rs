//! Deterministic transport simulator for studying congestion-control
//! convergence on long-delay paths and session resumption that reuses
//! path characteristics learned by a previous connection.
//!
//! The crate is organised bottom-up:
//!
//! * [`simnet`]: event queue, bottleneck links and the packet trace.
//! * [`transport`]: connection state, NewReno / BBR-lite controllers and
//!   the RTT estimator.
//! * [`resumption`]: the `BDP_FRAME` codec, the token store and the safety
//!   checks that decide whether a resumed connection may be seeded.
//! * [`world`]: the simulation that runs server/client endpoints over a
//!   shared forward/return bottleneck.
//! * [`scenarios`]: the experiment runners and their metrics.

pub mod resumption;
pub mod scenarios;
pub mod simnet;
pub mod transport;
pub mod world;

/// Simulated time and durations, in microseconds.
pub type Micros = u64;

/// Maximum payload carried by one data packet.
pub const MSS: u64 = 1460;
/// Largest packet put on a link.
pub const MTU: u64 = 1500;
/// Initial congestion window.
pub const INITIAL_WINDOW: u64 = 10 * MSS;
/// Per-packet header overhead of data packets.
pub const HEADER_BYTES: u64 = MTU - MSS;

pub const MICROS_PER_SEC: u64 = 1_000_000;

pub use resumption::{
    capture_bdp, decode_frame, encode_frame, validate_and_seed, BdpFrame, FrameError, SeedDecision,
    SeedOutcome, SeedPolicy, TokenMode, TokenRecord, TokenStore,
};
pub use scenarios::{
    compute_utilization, run_contention, run_convergence_grid, run_resumption_comparison,
    ContentionResult, FlowMetrics, GridCell, RunMetrics, ScenarioConfig,
};
pub use simnet::{EventQueue, LinkConfig, Packet, PacketKind};
pub use transport::{
    CongestionAlgorithm, ConnState, Connection, ResumeMode, TransferOutcome, TransferResult,
};
pub use world::{FlowSpec, World, WorldConfig};
