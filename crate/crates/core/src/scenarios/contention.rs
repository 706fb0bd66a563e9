use std::net::{IpAddr, Ipv4Addr};

use super::{FlowMetrics, ScenarioConfig};
use crate::transport::{CongestionAlgorithm, ResumeMode};
use crate::world::{FlowSpec, World};
use crate::MICROS_PER_SEC;

pub const PRIME_FLOW: u32 = 1;
pub const COMPETITOR_FLOW: u32 = 2;
pub const RESUMED_FLOW: u32 = 3;

/// Long enough that the competitor never finishes inside the horizon.
const LONG_LIVED_BYTES: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct ContentionResult {
    pub mode: ResumeMode,
    pub flows: Vec<FlowMetrics>,
    pub bin_s: f64,
}

impl ContentionResult {
    pub fn flow(&self, flow_id: u32) -> Option<&FlowMetrics> {
        self.flows.iter().find(|f| f.flow_id() == flow_id)
    }

    /// Mean received rate of `flow_id` over `[from_s, to_s)`.
    pub fn goodput_bps(&self, flow_id: u32, from_s: f64, to_s: f64) -> f64 {
        self.flow(flow_id).map_or(0.0, |f| {
            f.bytes_between(from_s, to_s, self.bin_s) * 8.0 / (to_s - from_s)
        })
    }

    pub fn resumed_congestion_events(&self) -> u32 {
        self.flow(RESUMED_FLOW)
            .map_or(0, |f| f.result.congestion_events)
    }
}

/// A priming transfer at t=0, a long-lived fresh NewReno competitor from a
/// second client, and a resumed transfer from the first client, all on one
/// bottleneck.
pub fn run_contention(cfg: &ScenarioConfig, mode: ResumeMode) -> ContentionResult {
    let mut wcfg = cfg.world_config();
    wcfg.horizon_us = cfg.contention_horizon_s * MICROS_PER_SEC;
    let client_a = cfg.client_ip();
    let client_b = IpAddr::V4(Ipv4Addr::new(198, 51, 100, 7));

    let mut prime = FlowSpec::new(PRIME_FLOW, cfg.prime_size_bytes)
        .with_algorithm(cfg.controller)
        .with_client_ip(client_a)
        .issuing_token();
    let mut competitor = FlowSpec::new(COMPETITOR_FLOW, LONG_LIVED_BYTES)
        .starting_at(cfg.contention_competitor_start_s * MICROS_PER_SEC)
        .with_algorithm(CongestionAlgorithm::NewReno)
        .with_client_ip(client_b);
    let mut resumed = FlowSpec::new(RESUMED_FLOW, cfg.prime_size_bytes)
        .starting_at(cfg.contention_resume_start_s * MICROS_PER_SEC)
        .with_mode(mode)
        .with_algorithm(cfg.controller)
        .with_client_ip(client_a);
    for f in [&mut prime, &mut competitor, &mut resumed] {
        f.handshake_rtts = cfg.handshake_rtts;
    }

    let bin_s = wcfg.rate_bin_us as f64 / 1e6;
    let mut world = World::new(wcfg, vec![prime, competitor, resumed]);
    world.run();
    let flows = [PRIME_FLOW, COMPETITOR_FLOW, RESUMED_FLOW]
        .iter()
        .filter_map(|&id| FlowMetrics::from_world(&world, id))
        .collect();
    ContentionResult { mode, flows, bin_s }
}
