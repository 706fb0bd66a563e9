//! Shared fixtures for the criterion benchmarks.

use std::net::{IpAddr, Ipv4Addr};

use bdpsim_core::scenarios::ScenarioConfig;
use bdpsim_core::BdpFrame;

/// The frame a 50 Mbps / 500 ms path leaves behind.
pub fn satellite_frame() -> BdpFrame {
    BdpFrame::new(
        600,
        3_125_000,
        500_000,
        IpAddr::V4(Ipv4Addr::new(192, 0, 2, 1)),
    )
    .expect("valid frame")
}

/// Default satellite path carrying `size_bytes`.
pub fn satellite_config(size_bytes: u64) -> ScenarioConfig {
    ScenarioConfig {
        file_size_bytes: size_bytes,
        ..ScenarioConfig::default()
    }
}
