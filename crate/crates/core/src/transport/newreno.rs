use crate::MSS;

/// Window-based NewReno: slow start grows by the bytes acknowledged,
/// congestion avoidance by one MSS per window, halving on loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewReno {
    cwnd: u64,
    ssthresh: u64,
    // bytes acked in avoidance not yet converted into window growth
    acked_in_avoidance: u64,
}

impl NewReno {
    pub fn new(initial_window: u64) -> Self {
        Self {
            cwnd: initial_window,
            ssthresh: u64::MAX,
            acked_in_avoidance: 0,
        }
    }

    pub fn with_state(cwnd: u64, ssthresh: u64) -> Self {
        Self {
            cwnd: cwnd.max(2 * MSS),
            ssthresh,
            acked_in_avoidance: 0,
        }
    }

    pub fn cwnd(&self) -> u64 {
        self.cwnd
    }

    /// `u64::MAX` until the first congestion event.
    pub fn ssthresh(&self) -> u64 {
        self.ssthresh
    }

    pub fn in_slow_start(&self) -> bool {
        self.cwnd < self.ssthresh
    }

    pub fn on_ack(&mut self, acked_bytes: u64) {
        let mut remaining = acked_bytes;
        if self.in_slow_start() {
            let grow = remaining.min(self.ssthresh - self.cwnd);
            self.cwnd += grow;
            remaining -= grow;
        }
        if remaining > 0 {
            self.acked_in_avoidance += remaining;
            while self.acked_in_avoidance >= self.cwnd {
                self.acked_in_avoidance -= self.cwnd;
                self.cwnd += MSS;
            }
        }
    }

    pub fn on_congestion_event(&mut self) {
        self.ssthresh = (self.cwnd / 2).max(2 * MSS);
        self.cwnd = self.ssthresh;
        self.acked_in_avoidance = 0;
    }

    /// Jumps to a remembered window; slow start continues up to `ssthresh`.
    pub fn seed(&mut self, cwnd: u64, ssthresh: u64) {
        self.cwnd = cwnd.max(2 * MSS);
        self.ssthresh = ssthresh.max(self.cwnd);
        self.acked_in_avoidance = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::INITIAL_WINDOW;

    #[test]
    fn slow_start_doubles() {
        let mut cc = NewReno::new(INITIAL_WINDOW);
        cc.on_ack(14_600);
        assert_eq!(cc.cwnd(), 29_200);
    }

    #[test]
    fn avoidance_adds_one_mss_per_window() {
        let mut cc = NewReno::with_state(100 * MSS, 50 * MSS);
        for _ in 0..100 {
            cc.on_ack(MSS);
        }
        assert_eq!(cc.cwnd(), 101 * MSS);
    }

    #[test]
    fn halves_on_loss() {
        let mut cc = NewReno::with_state(200 * MSS, u64::MAX);
        cc.on_congestion_event();
        assert_eq!((cc.ssthresh(), cc.cwnd()), (100 * MSS, 100 * MSS));
    }

    #[test]
    fn loss_floor_is_two_mss() {
        let mut cc = NewReno::with_state(3 * MSS, u64::MAX);
        cc.on_congestion_event();
        assert_eq!(cc.cwnd(), 2 * MSS);
    }

    #[test]
    fn slow_start_stops_at_ssthresh() {
        let mut cc = NewReno::with_state(10 * MSS, 15 * MSS);
        cc.on_ack(10 * MSS);
        // 5 MSS fill slow start, the other 5 go to avoidance (< one window)
        assert_eq!(cc.cwnd(), 15 * MSS);
        assert!(!cc.in_slow_start());
    }
}
