//! Drop-tail bearer queue.

use std::collections::VecDeque;

use super::packet::{Dscp, Packet, Qci};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted,
    Dropped,
}

/// Per-queue counters. `arrivals == dequeued + dropped + residual` holds at
/// all times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub arrivals: u64,
    pub accepted: u64,
    pub dropped: u64,
    pub dequeued: u64,
    pub dropped_bytes: u64,
    pub max_occupancy_bytes: u64,
    /// Bit `i` is set once a packet with DSCP `i` has been accepted.
    pub dscp_seen: u64,
}

impl QueueStats {
    pub fn saw_dscp(&self, dscp: Dscp) -> bool {
        self.dscp_seen & (1 << dscp.value()) != 0
    }
}

#[derive(Debug, Clone)]
pub struct BearerQueue {
    qci: Qci,
    capacity_bytes: u64,
    occupancy_bytes: u64,
    fifo: VecDeque<Packet>,
    stats: QueueStats,
}

impl BearerQueue {
    pub fn new(qci: Qci, capacity_bytes: u64) -> Self {
        Self {
            qci,
            capacity_bytes,
            occupancy_bytes: 0,
            fifo: VecDeque::new(),
            stats: QueueStats::default(),
        }
    }

    pub fn qci(&self) -> Qci {
        self.qci
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn occupancy_bytes(&self) -> u64 {
        self.occupancy_bytes
    }

    pub fn len(&self) -> usize {
        self.fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fifo.is_empty()
    }

    pub fn stats(&self) -> &QueueStats {
        &self.stats
    }

    pub fn head(&self) -> Option<&Packet> {
        self.fifo.front()
    }

    /// Drop-tail admission. A rejected packet is returned to the caller
    /// alongside the outcome so it can be accounted against its flow.
    pub fn enqueue(&mut self, packet: Packet) -> (EnqueueOutcome, Option<Packet>) {
        self.stats.arrivals += 1;
        let size = packet.size_bytes as u64;
        if self.occupancy_bytes + size > self.capacity_bytes {
            self.stats.dropped += 1;
            self.stats.dropped_bytes += size;
            return (EnqueueOutcome::Dropped, Some(packet));
        }
        self.occupancy_bytes += size;
        self.stats.accepted += 1;
        self.stats.dscp_seen |= 1 << packet.dscp.value();
        self.stats.max_occupancy_bytes = self.stats.max_occupancy_bytes.max(self.occupancy_bytes);
        self.fifo.push_back(packet);
        (EnqueueOutcome::Accepted, None)
    }

    pub fn dequeue(&mut self) -> Option<Packet> {
        let pkt = self.fifo.pop_front()?;
        self.occupancy_bytes -= pkt.size_bytes as u64;
        self.stats.dequeued += 1;
        Some(pkt)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Packet> {
        self.fifo.iter()
    }
}
