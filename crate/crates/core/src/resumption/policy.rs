use std::fmt;
use std::net::IpAddr;

use thiserror::Error;

use super::{BdpFrame, TokenRecord};
use crate::transport::{ConnState, Connection};
use crate::{Micros, INITIAL_WINDOW};

/// Safety checks and caps applied before saved parameters are reused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedPolicy {
    pub require_ip_match: bool,
    /// The first RTT sample must lie within `[saved / f, saved * f]`.
    pub rtt_tolerance_factor: f64,
    /// Seeded window as a fraction of the saved capacity, in `(0, 1]`.
    pub capacity_cap_fraction: f64,
    pub min_lifetime_remaining_s: u64,
    /// Pace the seeded window at `cwnd / srtt` until it is confirmed.
    pub pacing_required: bool,
}

impl Default for SeedPolicy {
    fn default() -> Self {
        Self {
            require_ip_match: true,
            rtt_tolerance_factor: 2.0,
            capacity_cap_fraction: 0.5,
            min_lifetime_remaining_s: 0,
            pacing_required: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeedOutcome {
    Seeded,
    RejectedIp,
    RejectedExpired,
    RejectedRttMismatch,
    RejectedMalformed,
}

impl SeedOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            SeedOutcome::Seeded => "SEEDED",
            SeedOutcome::RejectedIp => "REJECTED_IP",
            SeedOutcome::RejectedExpired => "REJECTED_EXPIRED",
            SeedOutcome::RejectedRttMismatch => "REJECTED_RTT_MISMATCH",
            SeedOutcome::RejectedMalformed => "REJECTED_MALFORMED",
        }
    }
}

impl fmt::Display for SeedOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedDecision {
    pub outcome: SeedOutcome,
    pub seeded_cwnd_bytes: Option<u64>,
    pub seeded_srtt_us: Option<Micros>,
}

impl SeedDecision {
    pub fn rejected(outcome: SeedOutcome) -> Self {
        debug_assert_ne!(outcome, SeedOutcome::Seeded);
        Self {
            outcome,
            seeded_cwnd_bytes: None,
            seeded_srtt_us: None,
        }
    }

    pub fn is_seeded(&self) -> bool {
        self.outcome == SeedOutcome::Seeded
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CaptureError {
    #[error("no RTT sample or delivered window to capture")]
    NoSample,
}

/// Records the connection's minimum RTT and current congestion window.
pub fn capture_bdp(
    conn: &Connection,
    client_ip: IpAddr,
    lifetime_s: u64,
) -> Result<BdpFrame, CaptureError> {
    if !matches!(conn.state, ConnState::Established | ConnState::Closed) {
        return Err(CaptureError::NoSample);
    }
    let min_rtt = conn.min_rtt_us().ok_or(CaptureError::NoSample)?;
    if conn.delivered() < INITIAL_WINDOW {
        return Err(CaptureError::NoSample);
    }
    BdpFrame::new(lifetime_s, conn.cwnd(), min_rtt, client_ip).map_err(|_| CaptureError::NoSample)
}

/// Window a passing frame seeds: `cap * saved`, never below the initial
/// window nor above the saved capacity.
pub fn seeded_cwnd(frame: &BdpFrame, policy: &SeedPolicy) -> u64 {
    let capped = (frame.saved_capacity_bytes as f64 * policy.capacity_cap_fraction) as u64;
    capped.min(frame.saved_capacity_bytes).max(INITIAL_WINDOW)
}

/// Checks that need no RTT sample: readable frame, expiry, address.
pub fn precheck(
    record: &TokenRecord,
    observed_client_ip: IpAddr,
    now_s: u64,
    policy: &SeedPolicy,
) -> Result<BdpFrame, SeedOutcome> {
    let frame = record
        .server_view()
        .map_err(|_| SeedOutcome::RejectedMalformed)?;
    let expires_at = record.issued_at_s.saturating_add(frame.lifetime_s);
    if now_s > expires_at || expires_at - now_s < policy.min_lifetime_remaining_s {
        return Err(SeedOutcome::RejectedExpired);
    }
    if policy.require_ip_match && frame.client_ip != observed_client_ip {
        return Err(SeedOutcome::RejectedIp);
    }
    Ok(frame)
}

/// RTT plausibility: the first sample of the resumed connection lies within
/// the tolerance band around the saved minimum.
pub fn check_rtt(frame: &BdpFrame, handshake_rtt_us: Micros, policy: &SeedPolicy) -> bool {
    let saved = frame.saved_min_rtt_us as f64;
    let sample = handshake_rtt_us as f64;
    let f = policy.rtt_tolerance_factor;
    sample >= saved / f && sample <= saved * f
}

/// Runs the full check pipeline (expiry, address, RTT plausibility) and,
/// when everything passes, installs the seeded window and RTT on `conn`.
/// A rejected connection is left untouched.
pub fn validate_and_seed(
    conn: &mut Connection,
    record: &TokenRecord,
    observed_client_ip: IpAddr,
    policy: &SeedPolicy,
    handshake_rtt_us: Micros,
    now_s: u64,
) -> SeedDecision {
    let frame = match precheck(record, observed_client_ip, now_s, policy) {
        Ok(frame) => frame,
        Err(outcome) => return SeedDecision::rejected(outcome),
    };
    if !check_rtt(&frame, handshake_rtt_us, policy) {
        return SeedDecision::rejected(SeedOutcome::RejectedRttMismatch);
    }
    apply(conn, &frame, policy, conn.delivered_time())
}

pub(crate) fn apply(
    conn: &mut Connection,
    frame: &BdpFrame,
    policy: &SeedPolicy,
    now: Micros,
) -> SeedDecision {
    let cwnd = seeded_cwnd(frame, policy);
    conn.apply_seed(
        now,
        cwnd,
        frame.saved_min_rtt_us,
        frame.saved_capacity_bytes,
        policy.pacing_required,
    );
    SeedDecision {
        outcome: SeedOutcome::Seeded,
        seeded_cwnd_bytes: Some(conn.cwnd()),
        seeded_srtt_us: conn.srtt_us(),
    }
}
