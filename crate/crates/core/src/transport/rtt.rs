use crate::Micros;

/// Smoothed RTT estimator (EWMA with gains 1/8 and 1/4) plus the running
/// minimum.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RttEstimator {
    srtt: Option<Micros>,
    rttvar: Micros,
    min_rtt: Option<Micros>,
    latest: Option<Micros>,
    samples: u64,
}

impl RttEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, sample: Micros) {
        self.samples += 1;
        self.latest = Some(sample);
        self.min_rtt = Some(self.min_rtt.map_or(sample, |m| m.min(sample)));
        match self.srtt {
            None => {
                self.srtt = Some(sample);
                self.rttvar = sample / 2;
            }
            Some(srtt) => {
                let dev = srtt.abs_diff(sample);
                self.rttvar = (3 * self.rttvar + dev) / 4;
                self.srtt = Some((7 * srtt + sample) / 8);
            }
        }
    }

    /// Overrides the smoothed estimate with a remembered value, keeping
    /// `min_rtt <= srtt`.
    pub fn seed(&mut self, srtt: Micros) {
        let srtt = self.min_rtt.map_or(srtt, |m| srtt.max(m));
        self.srtt = Some(srtt);
        self.rttvar = srtt / 4;
    }

    pub fn srtt(&self) -> Option<Micros> {
        self.srtt
    }

    pub fn rttvar(&self) -> Micros {
        self.rttvar
    }

    pub fn min_rtt(&self) -> Option<Micros> {
        self.min_rtt
    }

    pub fn latest(&self) -> Option<Micros> {
        self.latest
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Retransmission timeout: `srtt + 4 * rttvar`, or one second before
    /// the first sample.
    pub fn rto(&self) -> Micros {
        match self.srtt {
            Some(srtt) => (srtt + 4 * self.rttvar).max(1_000),
            None => 1_000_000,
        }
    }
}
