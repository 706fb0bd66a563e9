//! Saved path characteristics: capture, wire codec, token storage and the
//! safety checks applied before a resumed connection is seeded.

mod frame;
pub(crate) mod policy;
mod store;
mod varint;

pub use frame::{decode_frame, encode_frame, BdpFrame, FrameError, FRAME_TYPE};
pub use policy::{
    capture_bdp, check_rtt, precheck, seeded_cwnd, validate_and_seed, CaptureError, SeedDecision,
    SeedOutcome, SeedPolicy,
};
pub use store::{StoreError, TokenMode, TokenRecord, TokenStore};
pub use varint::{decode_varint, encode_varint, varint_len, VARINT_MAX};
