use rayon::prelude::*;

use super::{RunMetrics, ScenarioConfig};
use crate::transport::{ResumeMode, TransferResult};
use crate::world::{FlowSpec, ResumptionState, World, WorldConfig};
use crate::MICROS_PER_SEC;

/// Token and ticket state left behind by a completed priming transfer.
#[derive(Debug, Clone)]
pub struct Primed {
    pub result: TransferResult,
    pub state: ResumptionState,
    /// Wall-clock second at which the resumed connection starts.
    pub resume_at_s: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRun {
    pub mode: ResumeMode,
    pub metrics: RunMetrics,
}

#[derive(Debug, Clone)]
pub struct ComparisonResult {
    pub prime: TransferResult,
    pub runs: Vec<ModeRun>,
}

impl ComparisonResult {
    pub fn run(&self, mode: ResumeMode) -> Option<&ModeRun> {
        self.runs.iter().find(|r| r.mode == mode)
    }

    pub fn time_s(&self, mode: ResumeMode) -> Option<f64> {
        self.run(mode).map(|r| r.metrics.transfer_time_s)
    }
}

/// Download-time statistics of one mode over repeated runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub size_bytes: u64,
    pub mode: ResumeMode,
    pub min_s: f64,
    pub avg_s: f64,
    pub max_s: f64,
    pub samples: usize,
}

/// Runs the priming transfer that leaves a token behind.
pub fn prime(cfg: &ScenarioConfig) -> Primed {
    let wcfg = cfg.world_config();
    let origin = wcfg.wall_clock_origin_s;
    let mut flow = FlowSpec::new(1, cfg.prime_size_bytes)
        .with_algorithm(cfg.controller)
        .with_client_ip(cfg.client_ip())
        .issuing_token();
    flow.handshake_rtts = cfg.handshake_rtts;
    let mut world = World::new(wcfg, vec![flow]);
    world.run();
    let result = world.result(1).expect("priming flow exists");
    let end_s = origin + world.now().div_ceil(MICROS_PER_SEC);
    Primed {
        result,
        state: world.into_resumption_state(),
        resume_at_s: end_s + cfg.resume_gap_s,
    }
}

/// Builds the world of the resumed transfer. `adjust` may tweak the world
/// and flow before it is created.
pub fn resumed_world(
    cfg: &ScenarioConfig,
    primed: &Primed,
    mode: ResumeMode,
    adjust: impl FnOnce(&mut WorldConfig, &mut FlowSpec),
) -> World {
    let mut wcfg = cfg.world_config();
    wcfg.wall_clock_origin_s = primed.resume_at_s;
    let mut flow = FlowSpec::new(1, cfg.file_size_bytes)
        .with_mode(mode)
        .with_algorithm(cfg.controller)
        .with_client_ip(cfg.client_ip());
    flow.handshake_rtts = cfg.handshake_rtts;
    adjust(&mut wcfg, &mut flow);
    World::with_state(wcfg, vec![flow], primed.state.clone())
}

/// Primes once, then downloads `cfg.file_size_bytes` once per mode from the
/// same starting state.
pub fn run_resumption_comparison(cfg: &ScenarioConfig, modes: &[ResumeMode]) -> ComparisonResult {
    let primed = prime(cfg);
    let runs = modes
        .iter()
        .map(|&mode| {
            let mut world = resumed_world(cfg, &primed, mode, |_, _| {});
            world.run();
            ModeRun {
                mode,
                metrics: RunMetrics::from_world(&world),
            }
        })
        .collect();
    ComparisonResult {
        prime: primed.result,
        runs,
    }
}

/// Repeats the comparison `cfg.repetitions` times with seeds
/// `cfg.seed, cfg.seed + 1, ...` for every size, and summarises the
/// download times per (size, mode).
pub fn run_repetitions(
    cfg: &ScenarioConfig,
    sizes: &[u64],
    modes: &[ResumeMode],
) -> Vec<SummaryRow> {
    let reps: Vec<Vec<(u64, ResumeMode, f64)>> = (0..u64::from(cfg.repetitions))
        .into_par_iter()
        .map(|r| {
            let rep_cfg = ScenarioConfig {
                seed: cfg.seed.wrapping_add(r),
                ..cfg.clone()
            };
            let primed = prime(&rep_cfg);
            let mut times = Vec::new();
            for &size in sizes {
                let size_cfg = ScenarioConfig {
                    file_size_bytes: size,
                    ..rep_cfg.clone()
                };
                for &mode in modes {
                    let mut world = resumed_world(&size_cfg, &primed, mode, |_, _| {});
                    world.run();
                    let t = world.result(1).map_or(f64::NAN, |r| r.transfer_time_s());
                    times.push((size, mode, t));
                }
            }
            times
        })
        .collect();

    let mut rows = Vec::new();
    for &size in sizes {
        for &mode in modes {
            let samples: Vec<f64> = reps
                .iter()
                .flatten()
                .filter(|(s, m, _)| *s == size && *m == mode)
                .map(|&(_, _, t)| t)
                .collect();
            if samples.is_empty() {
                continue;
            }
            let min_s = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let max_s = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let avg_s = samples.iter().sum::<f64>() / samples.len() as f64;
            rows.push(SummaryRow {
                size_bytes: size,
                mode,
                min_s,
                avg_s,
                max_s,
                samples: samples.len(),
            });
        }
    }
    rows
}
