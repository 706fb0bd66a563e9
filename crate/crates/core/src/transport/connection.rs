use std::fmt;
use std::str::FromStr;

use super::{BbrLite, NewReno, RttEstimator};
use crate::{Micros, INITIAL_WINDOW, MICROS_PER_SEC, MSS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConnState {
    Idle,
    Handshaking,
    Established,
    Closed,
}

/// How a connection is opened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ResumeMode {
    /// Full handshake, default congestion state.
    Fresh,
    /// Session resumption with application data in the first flight.
    Resume0Rtt,
    /// 0-RTT resumption that also offers saved path characteristics.
    ResumeBdp,
}

impl ResumeMode {
    pub const ALL: [ResumeMode; 3] = [
        ResumeMode::Fresh,
        ResumeMode::Resume0Rtt,
        ResumeMode::ResumeBdp,
    ];

    pub fn is_resume(self) -> bool {
        self != ResumeMode::Fresh
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ResumeMode::Fresh => "fresh",
            ResumeMode::Resume0Rtt => "0rtt",
            ResumeMode::ResumeBdp => "bdp",
        }
    }
}

impl fmt::Display for ResumeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ResumeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fresh" => Ok(ResumeMode::Fresh),
            "0rtt" | "resume_0rtt" => Ok(ResumeMode::Resume0Rtt),
            "bdp" | "resume_bdp" | "bdp_frame" => Ok(ResumeMode::ResumeBdp),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CongestionAlgorithm {
    #[default]
    NewReno,
    BbrLite,
}

impl fmt::Display for CongestionAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CongestionAlgorithm::NewReno => "newreno",
            CongestionAlgorithm::BbrLite => "bbr",
        })
    }
}

impl FromStr for CongestionAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "newreno" | "reno" => Ok(CongestionAlgorithm::NewReno),
            "bbr" | "bbr_lite" | "bbrlite" => Ok(CongestionAlgorithm::BbrLite),
            other => Err(format!("unknown controller `{other}`")),
        }
    }
}

/// One acknowledged packet as seen by the congestion controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckSample {
    pub now: Micros,
    pub pn: u64,
    pub acked_bytes: u64,
    pub sent_at: Micros,
    pub rtt_sample_us: Option<Micros>,
    /// Connection-wide delivered bytes when the packet was sent.
    pub delivered_at_send: u64,
    pub delivered_time_at_send: Micros,
}

impl AckSample {
    /// A plain sample for driving the controller directly.
    pub fn simple(now: Micros, pn: u64, acked_bytes: u64, rtt_sample_us: Option<Micros>) -> Self {
        Self {
            now,
            pn,
            acked_bytes,
            sent_at: now.saturating_sub(rtt_sample_us.unwrap_or(0)),
            rtt_sample_us,
            delivered_at_send: 0,
            delivered_time_at_send: 0,
        }
    }
}

/// A congestion window installed from saved path characteristics, still
/// unvalidated by the current path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedState {
    pub seeded_cwnd: u64,
    /// The seed is confirmed once a packet numbered at least this is acked.
    pub end_pn: u64,
    pub pacing_required: bool,
}

#[derive(Debug, Clone)]
enum Controller {
    NewReno(NewReno),
    Bbr(BbrLite),
}

/// What `open` decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenInfo {
    pub effective_mode: ResumeMode,
    pub fallback: bool,
    /// Full round trips before application data may enter the network.
    pub rtts_before_data: u32,
}

/// Transport endpoint state on the sending side.
#[derive(Debug, Clone)]
pub struct Connection {
    pub state: ConnState,
    pub mode: ResumeMode,
    controller: Controller,
    rtt: RttEstimator,
    pub bytes_in_flight: u64,
    pub next_seq: u64,
    pub highest_acked: Option<u64>,
    delivered: u64,
    delivered_time: Micros,
    recovery_start: Option<Micros>,
    seed: Option<SeedState>,
    congestion_events: u32,
    seed_discards: u32,
}

impl Connection {
    pub fn new(algorithm: CongestionAlgorithm) -> Self {
        let controller = match algorithm {
            CongestionAlgorithm::NewReno => Controller::NewReno(NewReno::new(INITIAL_WINDOW)),
            CongestionAlgorithm::BbrLite => Controller::Bbr(BbrLite::new()),
        };
        Self {
            state: ConnState::Idle,
            mode: ResumeMode::Fresh,
            controller,
            rtt: RttEstimator::new(),
            bytes_in_flight: 0,
            next_seq: 0,
            highest_acked: None,
            delivered: 0,
            delivered_time: 0,
            recovery_start: None,
            seed: None,
            congestion_events: 0,
            seed_discards: 0,
        }
    }

    /// Opens a connection. Resume modes need something to resume with;
    /// without it the connection falls back to a fresh handshake.
    pub fn open(
        mode: ResumeMode,
        handshake_rtts: u32,
        resumable: bool,
        algorithm: CongestionAlgorithm,
    ) -> (Self, OpenInfo) {
        let fallback = mode.is_resume() && !resumable;
        let effective_mode = if fallback { ResumeMode::Fresh } else { mode };
        let mut conn = Self::new(algorithm);
        conn.state = ConnState::Handshaking;
        conn.mode = effective_mode;
        let info = OpenInfo {
            effective_mode,
            fallback,
            rtts_before_data: if effective_mode.is_resume() {
                0
            } else {
                handshake_rtts
            },
        };
        (conn, info)
    }

    pub fn algorithm(&self) -> CongestionAlgorithm {
        match self.controller {
            Controller::NewReno(_) => CongestionAlgorithm::NewReno,
            Controller::Bbr(_) => CongestionAlgorithm::BbrLite,
        }
    }

    pub fn cwnd(&self) -> u64 {
        match &self.controller {
            Controller::NewReno(cc) => cc.cwnd(),
            Controller::Bbr(cc) => cc.cwnd(),
        }
    }

    /// `None` stands for an unbounded slow-start threshold.
    pub fn ssthresh(&self) -> Option<u64> {
        match &self.controller {
            Controller::NewReno(cc) => Some(cc.ssthresh()).filter(|&s| s != u64::MAX),
            Controller::Bbr(_) => None,
        }
    }

    pub fn in_slow_start(&self) -> bool {
        match &self.controller {
            Controller::NewReno(cc) => cc.in_slow_start(),
            Controller::Bbr(cc) => cc.in_slow_start(),
        }
    }

    pub fn rtt(&self) -> &RttEstimator {
        &self.rtt
    }

    pub fn srtt_us(&self) -> Option<Micros> {
        self.rtt.srtt()
    }

    pub fn rttvar_us(&self) -> Micros {
        self.rtt.rttvar()
    }

    pub fn min_rtt_us(&self) -> Option<Micros> {
        self.rtt.min_rtt()
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn delivered_time(&self) -> Micros {
        self.delivered_time
    }

    pub fn congestion_events(&self) -> u32 {
        self.congestion_events
    }

    pub fn seed_discards(&self) -> u32 {
        self.seed_discards
    }

    pub fn seed_state(&self) -> Option<SeedState> {
        self.seed
    }

    pub fn seed_active(&self) -> bool {
        self.seed.is_some()
    }

    pub fn in_recovery(&self, sent_at: Micros) -> bool {
        self.recovery_start.is_some_and(|r| sent_at <= r)
    }

    pub fn can_send(&self) -> bool {
        self.bytes_in_flight < self.cwnd()
    }

    /// Pacing rate in payload bits per second; `None` before the first RTT
    /// sample.
    pub fn pacing_rate_bps(&self) -> Option<u64> {
        let srtt = self.rtt.srtt()?.max(1);
        let window_rate = |cwnd: u64| cwnd * 8 * MICROS_PER_SEC / srtt;
        if let Some(seed) = self.seed {
            if seed.pacing_required {
                return Some(window_rate(self.cwnd()));
            }
        }
        match &self.controller {
            Controller::NewReno(cc) => {
                let base = window_rate(cc.cwnd());
                Some(if cc.in_slow_start() {
                    base + base / 4
                } else {
                    base
                })
            }
            Controller::Bbr(cc) => cc
                .pacing_rate_bps()
                .or_else(|| Some(window_rate(cc.cwnd()) * 277 / 100)),
        }
    }

    pub fn establish(&mut self) {
        if self.state != ConnState::Closed {
            self.state = ConnState::Established;
        }
    }

    pub fn close(&mut self) {
        self.state = ConnState::Closed;
    }

    /// Accounts a packet of `bytes` as in flight and returns its number.
    pub fn on_packet_sent(&mut self, bytes: u64) -> u64 {
        let pn = self.next_seq;
        self.next_seq += 1;
        self.bytes_in_flight += bytes;
        pn
    }

    pub fn on_ack(&mut self, ack: &AckSample) {
        debug_assert!(ack.acked_bytes > 0);
        self.bytes_in_flight = self.bytes_in_flight.saturating_sub(ack.acked_bytes);
        self.highest_acked = Some(self.highest_acked.map_or(ack.pn, |h| h.max(ack.pn)));
        self.delivered += ack.acked_bytes;
        self.delivered_time = ack.now;
        if let Some(sample) = ack.rtt_sample_us {
            self.rtt.update(sample);
        }
        if self.seed.is_some_and(|s| ack.pn >= s.end_pn) {
            self.seed = None;
        }
        let in_recovery = self.in_recovery(ack.sent_at);
        match &mut self.controller {
            Controller::NewReno(cc) => {
                if !in_recovery {
                    cc.on_ack(ack.acked_bytes);
                }
            }
            Controller::Bbr(cc) => cc.on_ack(ack, self.delivered, self.bytes_in_flight),
        }
    }

    /// Handles lost packets. `lost_sent_at` is the send time of the most
    /// recent lost packet; losses of packets sent before the current
    /// recovery period started do not reduce the window again. Returns
    /// whether this was a new congestion event.
    pub fn on_loss_detected(&mut self, now: Micros, lost_bytes: u64, lost_sent_at: Micros) -> bool {
        self.bytes_in_flight = self.bytes_in_flight.saturating_sub(lost_bytes);
        if self.in_recovery(lost_sent_at) {
            return false;
        }
        self.recovery_start = Some(now);
        self.congestion_events += 1;
        let discard = self.seed.take().is_some();
        if discard {
            self.seed_discards += 1;
        }
        match &mut self.controller {
            Controller::NewReno(cc) => cc.on_congestion_event(),
            Controller::Bbr(cc) => {
                if discard {
                    cc.discard_seed();
                }
            }
        }
        true
    }

    /// Removes bytes from flight without a congestion signal.
    pub fn on_bytes_abandoned(&mut self, bytes: u64) {
        self.bytes_in_flight = self.bytes_in_flight.saturating_sub(bytes);
    }

    /// Installs a remembered window and RTT. The seed stays active until the
    /// window sent under it is acknowledged or a loss discards it.
    pub fn apply_seed(
        &mut self,
        now: Micros,
        cwnd: u64,
        srtt: Micros,
        saved_capacity: u64,
        pacing_required: bool,
    ) {
        self.rtt.seed(srtt);
        let srtt = self.rtt.srtt().unwrap_or(srtt);
        match &mut self.controller {
            Controller::NewReno(cc) => cc.seed(cwnd, saved_capacity),
            Controller::Bbr(cc) => cc.seed(cwnd, srtt, now),
        }
        self.seed = Some(SeedState {
            seeded_cwnd: self.cwnd(),
            end_pn: self.next_seq + self.cwnd().div_ceil(MSS),
            pacing_required,
        });
    }

    /// Test and oracle hook: a NewReno connection in a given window state.
    pub fn with_newreno_state(cwnd: u64, ssthresh: Option<u64>) -> Self {
        let mut conn = Self::new(CongestionAlgorithm::NewReno);
        conn.controller =
            Controller::NewReno(NewReno::with_state(cwnd, ssthresh.unwrap_or(u64::MAX)));
        conn.state = ConnState::Established;
        conn
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ack(now: Micros, pn: u64, bytes: u64, rtt: Option<Micros>) -> AckSample {
        AckSample::simple(now, pn, bytes, rtt)
    }

    #[test]
    fn fresh_open_waits_handshake() {
        let (conn, info) =
            Connection::open(ResumeMode::Fresh, 1, false, CongestionAlgorithm::NewReno);
        assert_eq!(conn.state, ConnState::Handshaking);
        assert_eq!(info.rtts_before_data, 1);
        assert!(!info.fallback);
    }

    #[test]
    fn resume_open_sends_in_first_flight() {
        let (_, info) = Connection::open(
            ResumeMode::Resume0Rtt,
            1,
            true,
            CongestionAlgorithm::NewReno,
        );
        assert_eq!(info.rtts_before_data, 0);
        assert_eq!(info.effective_mode, ResumeMode::Resume0Rtt);
    }

    #[test]
    fn resume_without_token_falls_back() {
        let (conn, info) = Connection::open(
            ResumeMode::ResumeBdp,
            1,
            false,
            CongestionAlgorithm::NewReno,
        );
        assert!(info.fallback);
        assert_eq!(info.effective_mode, ResumeMode::Fresh);
        assert_eq!(conn.mode, ResumeMode::Fresh);
        assert_eq!(info.rtts_before_data, 1);
    }

    #[test]
    fn slow_start_ack_doubles_window() {
        let mut c = Connection::new(CongestionAlgorithm::NewReno);
        assert_eq!(c.cwnd(), 14_600);
        c.on_packet_sent(14_600);
        c.on_ack(&ack(500_000, 0, 14_600, Some(500_000)));
        assert_eq!(c.cwnd(), 29_200);
        assert_eq!(c.bytes_in_flight, 0);
    }

    #[test]
    fn loss_halves_and_floors() {
        let mut c = Connection::with_newreno_state(200 * MSS, None);
        assert!(c.on_loss_detected(1, MSS, 1));
        assert_eq!((c.cwnd(), c.ssthresh()), (100 * MSS, Some(100 * MSS)));

        let mut c = Connection::with_newreno_state(3 * MSS, None);
        c.on_loss_detected(1, MSS, 1);
        assert_eq!(c.cwnd(), 2 * MSS);
    }

    #[test]
    fn one_reduction_per_recovery_period() {
        let mut c = Connection::with_newreno_state(200 * MSS, None);
        assert!(c.on_loss_detected(1_000, MSS, 900));
        // lost packet sent before recovery started: same event
        assert!(!c.on_loss_detected(1_100, MSS, 950));
        assert_eq!(c.cwnd(), 100 * MSS);
        assert!(c.on_loss_detected(2_000, MSS, 1_500));
        assert_eq!(c.cwnd(), 50 * MSS);
        assert_eq!(c.congestion_events(), 2);
    }

    #[test]
    fn no_growth_for_acks_from_recovery() {
        let mut c = Connection::with_newreno_state(100 * MSS, None);
        c.on_loss_detected(1_000, MSS, 900);
        let before = c.cwnd();
        c.on_ack(&AckSample {
            sent_at: 999,
            ..ack(1_200, 5, MSS, None)
        });
        assert_eq!(c.cwnd(), before);
    }

    #[test]
    fn pacing_gain_depends_on_phase() {
        let mut c = Connection::new(CongestionAlgorithm::NewReno);
        assert_eq!(c.pacing_rate_bps(), None);
        c.on_packet_sent(MSS);
        c.on_ack(&ack(100_000, 0, MSS, Some(100_000)));
        let cwnd = c.cwnd();
        let base = cwnd * 8 * MICROS_PER_SEC / 100_000;
        assert_eq!(c.pacing_rate_bps(), Some(base + base / 4));

        let mut c = Connection::with_newreno_state(100 * MSS, Some(50 * MSS));
        c.on_packet_sent(MSS);
        c.on_ack(&ack(100_000, 0, MSS, Some(100_000)));
        assert_eq!(
            c.pacing_rate_bps(),
            Some(c.cwnd() * 8 * MICROS_PER_SEC / 100_000)
        );
    }

    #[test]
    fn seeded_loss_discards_seed() {
        let mut c = Connection::new(CongestionAlgorithm::NewReno);
        c.on_packet_sent(1200);
        c.on_ack(&ack(510_000, 0, 1200, Some(510_000)));
        c.apply_seed(510_000, 1_562_500, 500_000, 3_125_000, true);
        assert!(c.seed_active());
        assert_eq!(c.cwnd(), 1_562_500);
        assert_eq!(
            c.pacing_rate_bps(),
            Some(1_562_500 * 8 * MICROS_PER_SEC / 510_000)
        );
        c.on_packet_sent(MSS);
        c.on_loss_detected(600_000, MSS, 520_000);
        assert!(!c.seed_active());
        assert_eq!(c.seed_discards(), 1);
        assert_eq!(c.cwnd(), (1_562_500 / 2).max(2 * MSS));
    }

    #[test]
    fn seed_is_confirmed_after_its_window() {
        let mut c = Connection::new(CongestionAlgorithm::NewReno);
        c.on_packet_sent(1200);
        c.on_ack(&ack(500_000, 0, 1200, Some(500_000)));
        c.apply_seed(500_000, 20 * MSS, 500_000, 40 * MSS, true);
        let end = c.seed_state().unwrap().end_pn;
        assert_eq!(end, 1 + 20);
        for pn in 1..=end {
            c.on_packet_sent(MSS);
            c.on_ack(&ack(1_000_000 + pn, pn, MSS, Some(500_000)));
        }
        assert!(!c.seed_active());
        // slow start continued toward the saved capacity
        assert!(c.cwnd() > 20 * MSS && c.cwnd() <= 40 * MSS + MSS);
    }

    #[test]
    fn bbr_converges_on_constant_rate() {
        let mut c = Connection::new(CongestionAlgorithm::BbrLite);
        // 1 packet per ms delivered, RTT 100 ms -> ~1.46 MB/s
        for i in 0..5_000u64 {
            let now = 100_000 + i * 1_000;
            c.on_packet_sent(MSS);
            let delivered_at_send = c.delivered().saturating_sub(100 * MSS);
            c.on_ack(&AckSample {
                now,
                pn: i,
                acked_bytes: MSS,
                sent_at: now - 100_000,
                rtt_sample_us: Some(100_000),
                delivered_at_send,
                delivered_time_at_send: now - 100_000,
            });
        }
        let rate = c.pacing_rate_bps().unwrap() as f64;
        let bw = MSS as f64 * 8.0 * 1_000.0;
        assert!(rate > 0.5 * bw && rate < 3.0 * bw, "rate {rate} vs {bw}");
    }
}
