//! Discrete-event engine and bottleneck link model.

mod clock;
mod link;
mod trace;

pub use clock::{EventHandle, EventQueue};
pub use link::{Direction, Link, LinkConfig, LinkStats, Packet, PacketKind, TransmitOutcome};
pub use trace::{TraceEvent, TraceKind, TraceLog};
