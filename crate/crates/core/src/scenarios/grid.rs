use rayon::prelude::*;

use super::{RunMetrics, ScenarioConfig};
use crate::transport::ResumeMode;
use crate::world::{FlowSpec, World};
use crate::Micros;

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub rtt_us: Micros,
    pub fwd_rate_bps: u64,
    pub ret_rate_bps: u64,
    pub size_bytes: u64,
    pub metrics: RunMetrics,
}

/// One fresh transfer per (rtt, rate pair, size) cell of `cfg.grid`, using
/// the controller and seed of `cfg`. Cells run in parallel; the result is
/// ordered by rate pair, then RTT, then size.
pub fn run_convergence_grid(cfg: &ScenarioConfig) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for &(fwd, ret) in &cfg.grid.rate_pairs {
        for &rtt in &cfg.grid.rtts_us {
            for &size in &cfg.grid.sizes_bytes {
                cells.push((rtt, fwd, ret, size));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(rtt, fwd, ret, size)| {
            let cell_cfg = cfg.with_path(rtt, fwd, ret);
            let flow = FlowSpec::new(1, size)
                .with_mode(ResumeMode::Fresh)
                .with_algorithm(cfg.controller)
                .with_client_ip(cfg.client_ip());
            let mut flow = flow;
            flow.handshake_rtts = cfg.handshake_rtts;
            let mut world = World::new(cell_cfg.world_config(), vec![flow]);
            world.run();
            GridCell {
                rtt_us: rtt,
                fwd_rate_bps: fwd,
                ret_rate_bps: ret,
                size_bytes: size,
                metrics: RunMetrics::from_world(&world),
            }
        })
        .collect()
}
