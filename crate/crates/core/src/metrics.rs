//! Delay, jitter, goodput and control-vs-experiment statistics.

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::net::{FlowId, Qci, UeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("measurement window is empty")]
    ZeroWindow,
    #[error("control value is zero")]
    ZeroBaseline,
}

/// Per-packet one-way delays in milliseconds, in arrival order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelaySeries(Vec<f64>);

impl DelaySeries {
    pub fn new(delays_ms: Vec<f64>) -> Self {
        debug_assert!(delays_ms.iter().all(|d| *d >= 0.0));
        Self(delays_ms)
    }

    pub fn from_times(delays: impl IntoIterator<Item = SimTime>) -> Self {
        Self(delays.into_iter().map(SimTime::as_millis_f64).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Each sample rounded to the nearest whole millisecond.
    pub fn rounded_ms(&self) -> DelaySeries {
        DelaySeries(self.0.iter().map(|d| d.round()).collect())
    }
}

/// Mean absolute difference between consecutive delays:
/// `sum |d[i+1] - d[i]| / (N - 1)`.
pub fn jitter(series: &DelaySeries) -> Result<f64, MetricsError> {
    let d = series.as_slice();
    if d.len() < 2 {
        return Err(MetricsError::TooFewSamples {
            needed: 2,
            got: d.len(),
        });
    }
    let total: f64 = d.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok(total / (d.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation.
    pub stddev: f64,
}

pub fn delay_stats(series: &DelaySeries) -> Result<DelayStats, MetricsError> {
    let d = series.as_slice();
    if d.is_empty() {
        return Err(MetricsError::TooFewSamples { needed: 1, got: 0 });
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DelayStats {
        mean,
        min,
        max,
        stddev: var.sqrt(),
    })
}

/// In-order bytes over `[t_first, t_last]`, in Mbit/s.
pub fn goodput(bytes: u64, t_first: SimTime, t_last: SimTime) -> Result<f64, MetricsError> {
    if t_last <= t_first {
        return Err(MetricsError::ZeroWindow);
    }
    let secs = (t_last - t_first).as_secs_f64();
    Ok(bytes as f64 * 8.0 / secs / 1e6)
}

pub fn percent_change(control: f64, experiment: f64) -> Result<f64, MetricsError> {
    if control == 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok(100.0 * (experiment - control) / control)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Tcp,
    Cbr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub flow: FlowId,
    pub ue: UeId,
    pub kind: FlowKind,
    /// Bearer the flow's packets are classified into.
    pub qci: Qci,
    pub marked: bool,
    pub delay: Option<DelayStats>,
    /// Stats over per-packet delays rounded to whole ms.
    pub delay_rounded: Option<DelayStats>,
    pub jitter_ms: Option<f64>,
    pub goodput_mbps: f64,
    pub retransmissions: Option<u64>,
    pub drops: u64,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub bytes_delivered: u64,
}
