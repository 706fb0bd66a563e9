use crate::transport::TransferResult;
use crate::world::World;
use crate::Micros;

/// Goodput of a completed transfer as a fraction of the bottleneck rate.
pub fn compute_utilization(result: &TransferResult, bottleneck_bps: u64) -> f64 {
    let secs = result.transfer_time_s();
    if secs <= 0.0 || bottleneck_bps == 0 {
        return 0.0;
    }
    result.file_size_bytes as f64 * 8.0 / secs / bottleneck_bps as f64
}

/// Received rate per bin as `(bin start in seconds, bits per second)`.
pub fn rate_series(bins: &[u64], bin_us: Micros) -> Vec<(f64, f64)> {
    let bin_s = bin_us as f64 / 1e6;
    bins.iter()
        .enumerate()
        .map(|(i, &bytes)| (i as f64 * bin_s, bytes as f64 * 8.0 / bin_s))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowMetrics {
    pub result: TransferResult,
    pub transfer_time_s: f64,
    pub goodput_bps: f64,
    pub utilization: f64,
    pub rate_series: Vec<(f64, f64)>,
}

impl FlowMetrics {
    pub fn from_world(world: &World, flow_id: u32) -> Option<Self> {
        let result = world.result(flow_id)?;
        let bottleneck = world.config().forward.rate_bps;
        let transfer_time_s = result.transfer_time_s();
        let goodput_bps = if transfer_time_s > 0.0 {
            result.delivered_bytes as f64 * 8.0 / transfer_time_s
        } else {
            0.0
        };
        Some(Self {
            utilization: compute_utilization(&result, bottleneck),
            rate_series: rate_series(world.received_bins(flow_id), world.config().rate_bin_us),
            result,
            transfer_time_s,
            goodput_bps,
        })
    }

    pub fn flow_id(&self) -> u32 {
        self.result.flow_id
    }

    /// Bytes received in `[from_s, to_s)`, summed over whole bins.
    pub fn bytes_between(&self, from_s: f64, to_s: f64, bin_s: f64) -> f64 {
        self.rate_series
            .iter()
            .filter(|(t, _)| *t >= from_s - 1e-9 && *t < to_s - 1e-9)
            .map(|(_, r)| r * bin_s / 8.0)
            .sum()
    }
}

/// Metrics of one run. The headline fields describe the first flow.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub transfer_time_s: f64,
    pub goodput_bps: f64,
    pub utilization: f64,
    pub rate_series: Vec<(f64, f64)>,
    pub per_flow: Vec<FlowMetrics>,
}

impl RunMetrics {
    pub fn from_world(world: &World) -> Self {
        let per_flow: Vec<FlowMetrics> = world
            .results()
            .iter()
            .filter_map(|r| FlowMetrics::from_world(world, r.flow_id))
            .collect();
        let head = per_flow.first();
        Self {
            transfer_time_s: head.map_or(0.0, |f| f.transfer_time_s),
            goodput_bps: head.map_or(0.0, |f| f.goodput_bps),
            utilization: head.map_or(0.0, |f| f.utilization),
            rate_series: head.map_or_else(Vec::new, |f| f.rate_series.clone()),
            per_flow,
        }
    }

    pub fn result(&self) -> Option<&TransferResult> {
        self.per_flow.first().map(|f| &f.result)
    }
}
