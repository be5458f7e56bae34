use serde::{Deserialize, Serialize};

use super::config::Arm;
use crate::metrics::FlowReport;
use crate::net::{FlowId, Qci, QueueStats, UeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueReport {
    pub ue: UeId,
    pub qci: Qci,
    #[serde(skip)]
    pub stats: QueueStats,
    pub residual: u64,
    pub residual_bytes: u64,
}

impl QueueReport {
    /// `arrivals == dequeued + dropped + residual`.
    pub fn is_conserved(&self) -> bool {
        self.stats.arrivals == self.stats.dequeued + self.stats.dropped + self.residual
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RanReport {
    pub ttis: u64,
    pub tti_budget_bytes: u64,
    pub max_tti_allocation_bytes: u64,
    pub priority_violations: u64,
    pub granted_bytes: Vec<u64>,
    pub served_bytes: Vec<u64>,
}

/// Post-run checks on one TCP flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TcpAudit {
    pub flow: FlowId,
    pub retransmit_count: u64,
    /// Retransmissions recomputed from the raw send trace.
    pub trace_retransmits: u64,
    pub segments_sent: u64,
    pub timeouts: u64,
    pub fast_retransmits: u64,
    pub delivered_bytes: u64,
    pub acked_bytes: u64,
    pub gap_free: bool,
    pub greedy_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSet {
    pub scenario: String,
    pub arm: Arm,
    pub seed: u64,
    pub flows: Vec<FlowReport>,
    pub queues: Vec<QueueReport>,
    pub ran: RanReport,
    pub tcp: Vec<TcpAudit>,
    pub unmarked_in_low_latency: u64,
}

impl ReportSet {
    pub fn flow(&self, id: FlowId) -> Option<&FlowReport> {
        self.flows.iter().find(|f| f.flow == id)
    }

    pub fn queue(&self, ue: UeId, qci: Qci) -> Option<&QueueReport> {
        self.queues.iter().find(|q| q.ue == ue && q.qci == qci)
    }

    pub fn total_drops(&self) -> u64 {
        self.queues.iter().map(|q| q.stats.dropped).sum()
    }
}
