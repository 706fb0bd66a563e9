use super::AckSample;
use crate::{Micros, INITIAL_WINDOW, MICROS_PER_SEC, MSS};

const STARTUP_GAIN: f64 = 2.77;
const PROBE_CWND_GAIN: f64 = 2.0;
const PROBE_GAINS: [f64; 8] = [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
const BW_WINDOW_ROUNDS: u64 = 10;
const FULL_BW_GROWTH: f64 = 1.25;
const FULL_BW_ROUNDS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BbrPhase {
    Startup,
    Drain,
    ProbeBw,
}

/// Reduced BBR: startup at gain 2.77, drain, then pacing at the estimated
/// bottleneck rate with a short gain cycle. No ProbeRTT, no loss response
/// beyond discarding a seeded start.
#[derive(Debug, Clone)]
pub struct BbrLite {
    phase: BbrPhase,
    // (round, bytes/s) samples kept for the windowed max
    bw_samples: Vec<(u64, f64)>,
    btl_bw: f64,
    min_rtt: Option<Micros>,
    round: u64,
    next_round_delivered: u64,
    full_bw: f64,
    full_bw_count: u32,
    cycle_index: usize,
    cycle_start: Micros,
    cwnd: u64,
}

impl BbrLite {
    pub fn new() -> Self {
        Self {
            phase: BbrPhase::Startup,
            bw_samples: Vec::new(),
            btl_bw: 0.0,
            min_rtt: None,
            round: 0,
            next_round_delivered: 0,
            full_bw: 0.0,
            full_bw_count: 0,
            cycle_index: 0,
            cycle_start: 0,
            cwnd: INITIAL_WINDOW,
        }
    }

    pub fn phase(&self) -> BbrPhase {
        self.phase
    }

    pub fn cwnd(&self) -> u64 {
        self.cwnd
    }

    pub fn in_slow_start(&self) -> bool {
        self.phase == BbrPhase::Startup
    }

    /// Bottleneck bandwidth estimate, bytes per second.
    pub fn btl_bw(&self) -> f64 {
        self.btl_bw
    }

    fn bdp(&self) -> Option<f64> {
        let rtt = self.min_rtt?;
        (self.btl_bw > 0.0).then(|| self.btl_bw * rtt as f64 / MICROS_PER_SEC as f64)
    }

    fn pacing_gain(&self) -> f64 {
        match self.phase {
            BbrPhase::Startup => STARTUP_GAIN,
            BbrPhase::Drain => 1.0 / STARTUP_GAIN,
            BbrPhase::ProbeBw => PROBE_GAINS[self.cycle_index],
        }
    }

    fn cwnd_gain(&self) -> f64 {
        match self.phase {
            BbrPhase::Startup | BbrPhase::Drain => STARTUP_GAIN,
            BbrPhase::ProbeBw => PROBE_CWND_GAIN,
        }
    }

    pub fn pacing_rate_bps(&self) -> Option<u64> {
        (self.btl_bw > 0.0).then(|| (self.pacing_gain() * self.btl_bw * 8.0) as u64)
    }

    pub fn on_ack(&mut self, ack: &AckSample, delivered: u64, bytes_in_flight: u64) {
        if let Some(rtt) = ack.rtt_sample_us {
            self.min_rtt = Some(self.min_rtt.map_or(rtt, |m| m.min(rtt)));
        }

        let round_start = ack.delivered_at_send >= self.next_round_delivered;
        if round_start {
            self.round += 1;
            self.next_round_delivered = delivered;
        }

        let elapsed = ack.now.saturating_sub(ack.delivered_time_at_send);
        if elapsed > 0 {
            let rate =
                (delivered - ack.delivered_at_send) as f64 * MICROS_PER_SEC as f64 / elapsed as f64;
            self.bw_samples.push((self.round, rate));
        }
        let oldest = self.round.saturating_sub(BW_WINDOW_ROUNDS);
        self.bw_samples.retain(|&(r, _)| r > oldest);
        self.btl_bw = self.bw_samples.iter().map(|&(_, b)| b).fold(0.0, f64::max);

        match self.phase {
            BbrPhase::Startup if round_start => {
                if self.btl_bw >= self.full_bw * FULL_BW_GROWTH {
                    self.full_bw = self.btl_bw;
                    self.full_bw_count = 0;
                } else {
                    self.full_bw_count += 1;
                    if self.full_bw_count >= FULL_BW_ROUNDS {
                        self.phase = BbrPhase::Drain;
                    }
                }
            }
            BbrPhase::Drain => {
                if self
                    .bdp()
                    .is_some_and(|bdp| (bytes_in_flight as f64) <= bdp)
                {
                    self.enter_probe_bw(ack.now);
                }
            }
            BbrPhase::ProbeBw => {
                if let Some(rtt) = self.min_rtt {
                    if ack.now.saturating_sub(self.cycle_start) >= rtt {
                        self.cycle_index = (self.cycle_index + 1) % PROBE_GAINS.len();
                        self.cycle_start = ack.now;
                    }
                }
            }
            _ => {}
        }

        match self.bdp() {
            Some(bdp) => {
                let target = (self.cwnd_gain() * bdp) as u64;
                if self.phase == BbrPhase::Startup {
                    if self.cwnd < target {
                        self.cwnd += ack.acked_bytes;
                    }
                } else {
                    self.cwnd = (self.cwnd + ack.acked_bytes).min(target);
                }
            }
            None => self.cwnd += ack.acked_bytes,
        }
        self.cwnd = self.cwnd.max(4 * MSS);
    }

    fn enter_probe_bw(&mut self, now: Micros) {
        self.phase = BbrPhase::ProbeBw;
        self.cycle_index = 2;
        self.cycle_start = now;
    }

    /// Starts from a remembered path: bandwidth `cwnd / srtt`, straight into
    /// steady-state pacing.
    pub fn seed(&mut self, cwnd: u64, srtt: Micros, now: Micros) {
        self.btl_bw = cwnd as f64 * MICROS_PER_SEC as f64 / srtt.max(1) as f64;
        self.bw_samples = vec![(self.round, self.btl_bw)];
        self.min_rtt = Some(self.min_rtt.map_or(srtt, |m| m.min(srtt)));
        self.cwnd = cwnd.max(4 * MSS);
        self.enter_probe_bw(now);
    }

    /// Drops a seeded estimate and restarts from startup.
    pub fn discard_seed(&mut self) {
        let min_rtt = self.min_rtt;
        *self = Self::new();
        self.min_rtt = min_rtt;
    }
}

impl Default for BbrLite {
    fn default() -> Self {
        Self::new()
    }
}
