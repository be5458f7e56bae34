//! eNodeB downlink: per-UE bearer queues and a proportional-fair TTI
//! scheduler.
//!
//! No channel model is applied, so every UE sees the cell peak rate and the
//! PF metric reduces to "smallest average throughput wins". A grant gives the
//! whole TTI budget to one UE. Packets are served whole; budget that does not
//! cover the head-of-line packet is carried as per-UE credit to the UE's next
//! grant, which stands in for RLC segmentation across TTIs. Credit is dropped
//! once the UE has nothing queued.

use serde::{Deserialize, Serialize};

use super::packet::{Packet, Qci, UeId};
use super::queue::{BearerQueue, EnqueueOutcome};
use crate::engine::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RanConfig {
    pub tti: SimTime,
    pub cell_rate_bps: u64,
    pub baseline_latency: SimTime,
    pub ewma_alpha: f64,
    pub qci7_capacity_bytes: u64,
    pub qci9_capacity_bytes: u64,
}

impl Default for RanConfig {
    fn default() -> Self {
        Self {
            tti: SimTime::from_millis(1),
            cell_rate_bps: 4_400_000,
            baseline_latency: SimTime::from_millis(3),
            ewma_alpha: 0.01,
            qci7_capacity_bytes: 11_000,
            qci9_capacity_bytes: 165_000,
        }
    }
}

impl RanConfig {
    /// Bytes the cell can carry in one TTI.
    pub fn tti_budget_bytes(&self) -> u64 {
        (self.cell_rate_bps as u128 * self.tti.as_micros() as u128 / 8_000_000) as u64
    }
}

/// Average-throughput estimate seeded at 1 bit/s so the PF ratio is finite.
const INITIAL_AVG_BPS: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct UeBearers {
    pub low_latency: BearerQueue,
    pub default: BearerQueue,
    avg_bps: f64,
    credit_bytes: u64,
    granted_bytes: u64,
    served_bytes: u64,
}

impl UeBearers {
    fn new(cfg: &RanConfig) -> Self {
        Self {
            low_latency: BearerQueue::new(Qci::Qci7, cfg.qci7_capacity_bytes),
            default: BearerQueue::new(Qci::Qci9, cfg.qci9_capacity_bytes),
            avg_bps: INITIAL_AVG_BPS,
            credit_bytes: 0,
            granted_bytes: 0,
            served_bytes: 0,
        }
    }

    pub fn queue(&self, qci: Qci) -> &BearerQueue {
        match qci {
            Qci::Qci7 => &self.low_latency,
            Qci::Qci9 => &self.default,
        }
    }

    fn queue_mut(&mut self, qci: Qci) -> &mut BearerQueue {
        match qci {
            Qci::Qci7 => &mut self.low_latency,
            Qci::Qci9 => &mut self.default,
        }
    }

    pub fn is_backlogged(&self) -> bool {
        !self.low_latency.is_empty() || !self.default.is_empty()
    }

    pub fn avg_bps(&self) -> f64 {
        self.avg_bps
    }

    pub fn granted_bytes(&self) -> u64 {
        self.granted_bytes
    }

    pub fn served_bytes(&self) -> u64 {
        self.served_bytes
    }
}

/// One TTI's grant decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub grants: Vec<(UeId, u64)>,
}

impl Allocation {
    pub fn total_bytes(&self) -> u64 {
        self.grants.iter().map(|(_, b)| b).sum()
    }
}

#[derive(Debug, Clone)]
pub struct RanScheduler {
    cfg: RanConfig,
    ues: Vec<UeBearers>,
    ttis: u64,
    max_tti_allocation: u64,
    priority_violations: u64,
}

impl RanScheduler {
    pub fn new(cfg: RanConfig, n_ues: usize) -> Self {
        Self {
            ues: (0..n_ues).map(|_| UeBearers::new(&cfg)).collect(),
            cfg,
            ttis: 0,
            max_tti_allocation: 0,
            priority_violations: 0,
        }
    }

    pub fn config(&self) -> &RanConfig {
        &self.cfg
    }

    pub fn ue(&self, ue: UeId) -> &UeBearers {
        &self.ues[ue.0 as usize]
    }

    pub fn ues(&self) -> impl Iterator<Item = (UeId, &UeBearers)> {
        self.ues
            .iter()
            .enumerate()
            .map(|(i, u)| (UeId(i as u32), u))
    }

    pub fn ttis(&self) -> u64 {
        self.ttis
    }

    pub fn max_tti_allocation(&self) -> u64 {
        self.max_tti_allocation
    }

    /// Count of QCI 9 packets served while the same UE's QCI 7 queue was
    /// non-empty. Always zero under strict priority.
    pub fn priority_violations(&self) -> u64 {
        self.priority_violations
    }

    pub fn enqueue(&mut self, qci: Qci, packet: Packet) -> (EnqueueOutcome, Option<Packet>) {
        let ue = packet.ue.0 as usize;
        self.ues[ue].queue_mut(qci).enqueue(packet)
    }

    pub fn backlogged(&self) -> Vec<UeId> {
        self.ues()
            .filter(|(_, u)| u.is_backlogged())
            .map(|(id, _)| id)
            .collect()
    }

    /// Grants the TTI budget to the backlogged UE with the smallest average
    /// throughput (lowest id on ties) and updates every UE's average.
    pub fn pf_allocate(&mut self, backlogged: &[UeId]) -> Allocation {
        let budget = self.cfg.tti_budget_bytes();
        let winner = backlogged.iter().copied().min_by(|a, b| {
            let (ta, tb) = (
                self.ues[a.0 as usize].avg_bps,
                self.ues[b.0 as usize].avg_bps,
            );
            ta.total_cmp(&tb).then(a.cmp(b))
        });

        let alpha = self.cfg.ewma_alpha;
        let peak_bps = budget as f64 * 8.0 / self.cfg.tti.as_secs_f64();
        for (i, ue) in self.ues.iter_mut().enumerate() {
            let rate = if winner == Some(UeId(i as u32)) {
                peak_bps
            } else {
                0.0
            };
            ue.avg_bps = (1.0 - alpha) * ue.avg_bps + alpha * rate;
        }

        self.ttis += 1;
        let grants = match winner {
            Some(ue) => {
                self.ues[ue.0 as usize].granted_bytes += budget;
                vec![(ue, budget)]
            }
            None => vec![],
        };
        let alloc = Allocation { grants };
        self.max_tti_allocation = self.max_tti_allocation.max(alloc.total_bytes());
        alloc
    }

    /// Dequeues whole packets for `ue` within `budget` plus carried credit,
    /// QCI 7 strictly before QCI 9. Each packet is stamped as delivered at
    /// `now + baseline_latency`.
    pub fn serve_ue(&mut self, ue: UeId, budget: u64, now: SimTime) -> Vec<Packet> {
        let deliver_at = now + self.cfg.baseline_latency;
        let state = &mut self.ues[ue.0 as usize];
        state.credit_bytes += budget;
        let mut out = Vec::new();
        loop {
            let qci = if !state.low_latency.is_empty() {
                Qci::Qci7
            } else if !state.default.is_empty() {
                Qci::Qci9
            } else {
                state.credit_bytes = 0;
                break;
            };
            let head = state.queue(qci).head().expect("non-empty").size_bytes as u64;
            if head > state.credit_bytes {
                break;
            }
            if qci == Qci::Qci9 && !state.low_latency.is_empty() {
                self.priority_violations += 1;
            }
            let mut pkt = state.queue_mut(qci).dequeue().expect("non-empty");
            state.credit_bytes -= head;
            state.served_bytes += head;
            pkt.mark_delivered(deliver_at);
            out.push(pkt);
        }
        out
    }

    /// One full TTI: allocate among currently backlogged UEs, then serve.
    pub fn tick(&mut self, now: SimTime) -> Vec<Packet> {
        let backlogged = self.backlogged();
        let alloc = self.pf_allocate(&backlogged);
        let mut out = Vec::new();
        for (ue, budget) in alloc.grants {
            out.extend(self.serve_ue(ue, budget, now));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::packet::{Dscp, FlowId, PacketKind};

    fn pkt(id: u64, ue: u32, size: u32) -> Packet {
        Packet {
            id,
            flow: FlowId(0),
            ue: UeId(ue),
            size_bytes: size,
            dscp: Dscp::DEFAULT,
            kind: PacketKind::UdpCbr,
            seq: 0,
            payload_bytes: 0,
            created_at: SimTime::ZERO,
            delivered_at: None,
        }
    }

    #[test]
    fn budget_from_peak_rate() {
        // 4.4 Mbit/s * 1 ms / 8 = 550 B
        assert_eq!(RanConfig::default().tti_budget_bytes(), 550);
    }

    #[test]
    fn single_backlogged_ue_gets_full_budget() {
        let mut s = RanScheduler::new(RanConfig::default(), 3);
        let alloc = s.pf_allocate(&[UeId(1)]);
        assert_eq!(alloc.grants, vec![(UeId(1), 550)]);
    }

    #[test]
    fn empty_backlog_still_decays_average() {
        let mut s = RanScheduler::new(RanConfig::default(), 2);
        let alloc = s.pf_allocate(&[]);
        assert!(alloc.grants.is_empty());
        assert!(s.ue(UeId(0)).avg_bps() < INITIAL_AVG_BPS);
        assert!(s.ue(UeId(0)).avg_bps() > 0.0);
    }

    #[test]
    fn two_equal_ues_alternate() {
        let mut s = RanScheduler::new(RanConfig::default(), 2);
        let mut wins = [0u32; 2];
        let mut last = None;
        for _ in 0..1000 {
            let alloc = s.pf_allocate(&[UeId(0), UeId(1)]);
            let (ue, _) = alloc.grants[0];
            assert_ne!(Some(ue), last, "grants should alternate");
            last = Some(ue);
            wins[ue.0 as usize] += 1;
        }
        let share = wins[0] as f64 / 1000.0;
        assert!((share - 0.5).abs() <= 0.01, "share {share}");
    }

    #[test]
    fn strict_priority_within_budget() {
        let mut s = RanScheduler::new(RanConfig::default(), 1);
        s.enqueue(Qci::Qci7, pkt(1, 0, 180));
        s.enqueue(Qci::Qci9, pkt(2, 0, 1340));
        let out = s.serve_ue(UeId(0), 550, SimTime::from_millis(5));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, 1);
        assert_eq!(out[0].delivered_at, Some(SimTime::from_millis(8)));
        assert_eq!(s.ue(UeId(0)).default.len(), 1);
    }

    #[test]
    fn empty_queues_serve_nothing() {
        let mut s = RanScheduler::new(RanConfig::default(), 1);
        assert!(s.serve_ue(UeId(0), 550, SimTime::ZERO).is_empty());
    }

    #[test]
    fn large_budget_drains_qci7_first() {
        let mut s = RanScheduler::new(RanConfig::default(), 1);
        s.enqueue(Qci::Qci9, pkt(10, 0, 1340));
        s.enqueue(Qci::Qci7, pkt(20, 0, 180));
        s.enqueue(Qci::Qci9, pkt(11, 0, 1340));
        s.enqueue(Qci::Qci7, pkt(21, 0, 180));
        let out = s.serve_ue(UeId(0), 10_000, SimTime::ZERO);
        let ids: Vec<u64> = out.iter().map(|p| p.id).collect();
        assert_eq!(ids, vec![20, 21, 10, 11]);
        assert_eq!(s.priority_violations(), 0);
    }

    #[test]
    fn oversize_head_waits_for_credit() {
        let mut s = RanScheduler::new(RanConfig::default(), 1);
        s.enqueue(Qci::Qci9, pkt(1, 0, 1400));
        assert!(s.serve_ue(UeId(0), 550, SimTime::ZERO).is_empty());
        assert!(s.serve_ue(UeId(0), 550, SimTime::ZERO).is_empty());
        let out = s.serve_ue(UeId(0), 550, SimTime::ZERO);
        assert_eq!(out.len(), 1);
        // 1650 - 1400 left, but queue is empty so the credit is dropped.
        s.enqueue(Qci::Qci9, pkt(2, 0, 550));
        assert_eq!(s.serve_ue(UeId(0), 549, SimTime::ZERO).len(), 0);
    }

    #[test]
    fn served_never_exceeds_granted() {
        let mut s = RanScheduler::new(RanConfig::default(), 2);
        let mut id = 0;
        for t in 0..500u64 {
            for ue in 0..2 {
                if t % (ue as u64 + 2) == 0 {
                    id += 1;
                    s.enqueue(Qci::Qci9, pkt(id, ue, 1400));
                }
            }
            s.tick(SimTime::from_millis(t));
            for (_, u) in s.ues() {
                assert!(u.served_bytes() <= u.granted_bytes());
            }
        }
        assert!(s.max_tti_allocation() <= 550);
    }
}
