use std::net::{IpAddr, Ipv4Addr};

use crate::resumption::{SeedPolicy, TokenMode};
use crate::simnet::LinkConfig;
use crate::transport::{CongestionAlgorithm, ResumeMode};
use crate::world::{CrossTraffic, WorldConfig};
use crate::{Micros, MICROS_PER_SEC};

/// Decimal megabyte, the unit file sizes are quoted in.
pub const MB: u64 = 1_000_000;

/// Axes of the convergence grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub rtts_us: Vec<Micros>,
    /// (forward, return) rates in bits per second.
    pub rate_pairs: Vec<(u64, u64)>,
    pub sizes_bytes: Vec<u64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            rtts_us: [100, 200, 300, 400, 500]
                .iter()
                .map(|ms| ms * 1000)
                .collect(),
            rate_pairs: vec![
                (1_000_000, 100_000),
                (10_000_000, 2_000_000),
                (50_000_000, 25_000_000),
                (200_000_000, 100_000_000),
            ],
            sizes_bytes: vec![MB / 2, MB, 10 * MB, 100 * MB],
        }
    }
}

/// Everything a scenario run needs. Link delays are derived from `rtt_us`,
/// split evenly between the two directions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub forward_rate_bps: u64,
    pub return_rate_bps: u64,
    pub rtt_us: Micros,
    /// Queue sizes in packets; `None` means one bandwidth-delay product.
    pub forward_queue_pkts: Option<usize>,
    pub return_queue_pkts: Option<usize>,
    pub file_size_bytes: u64,
    pub mode: ResumeMode,
    pub controller: CongestionAlgorithm,
    pub handshake_rtts: u32,
    pub seed: u64,
    pub token_mode: TokenMode,
    pub token_lifetime_s: u64,
    pub policy: SeedPolicy,
    /// Size of the transfer that primes the token store.
    pub prime_size_bytes: u64,
    /// Idle time between the priming transfer and the resumed one.
    pub resume_gap_s: u64,
    /// Offered load of background traffic on the forward link, as a
    /// fraction of its rate. Zero disables it.
    pub jitter_load: f64,
    pub repetitions: u32,
    pub horizon_s: u64,
    pub contention_competitor_start_s: u64,
    pub contention_resume_start_s: u64,
    pub contention_horizon_s: u64,
    pub grid: GridSpec,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            forward_rate_bps: 50_000_000,
            return_rate_bps: 10_000_000,
            rtt_us: 500_000,
            forward_queue_pkts: None,
            return_queue_pkts: None,
            file_size_bytes: MB / 2,
            mode: ResumeMode::Fresh,
            controller: CongestionAlgorithm::NewReno,
            handshake_rtts: 1,
            seed: 1,
            token_mode: TokenMode::BdpFrame,
            token_lifetime_s: 600,
            policy: SeedPolicy::default(),
            prime_size_bytes: 100 * MB,
            resume_gap_s: 10,
            jitter_load: 0.0,
            repetitions: 50,
            horizon_s: 3_600,
            contention_competitor_start_s: 45,
            contention_resume_start_s: 60,
            contention_horizon_s: 120,
            grid: GridSpec::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn forward_link(&self) -> LinkConfig {
        link(self.forward_rate_bps, self.rtt_us, self.forward_queue_pkts)
    }

    pub fn return_link(&self) -> LinkConfig {
        link(self.return_rate_bps, self.rtt_us, self.return_queue_pkts)
    }

    /// Same configuration with another path.
    pub fn with_path(&self, rtt_us: Micros, forward_bps: u64, return_bps: u64) -> Self {
        Self {
            rtt_us,
            forward_rate_bps: forward_bps,
            return_rate_bps: return_bps,
            ..self.clone()
        }
    }

    pub fn world_config(&self) -> WorldConfig {
        let mut cfg = WorldConfig::new(self.forward_link(), self.return_link());
        cfg.token_mode = self.token_mode;
        cfg.token_lifetime_s = self.token_lifetime_s;
        cfg.policy = self.policy;
        cfg.horizon_us = self.horizon_s * MICROS_PER_SEC;
        cfg.seed = self.seed;
        if self.jitter_load > 0.0 {
            cfg.cross_traffic = Some(CrossTraffic {
                load: self.jitter_load,
            });
        }
        cfg
    }

    /// Address of the client that primes and later resumes.
    pub fn client_ip(&self) -> IpAddr {
        IpAddr::V4(Ipv4Addr::new(192, 0, 2, 1))
    }
}

fn link(rate_bps: u64, rtt_us: Micros, queue: Option<usize>) -> LinkConfig {
    let one_way = rtt_us / 2;
    let mut cfg = LinkConfig::with_bdp_queue(rate_bps, one_way, rtt_us);
    if let Some(q) = queue {
        cfg.queue_capacity_pkts = q.max(1);
    }
    cfg
}
