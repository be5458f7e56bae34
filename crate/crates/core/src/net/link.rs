use serde::{Deserialize, Serialize};

use crate::engine::SimTime;

/// Static description of a point-to-point segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub rate_bps: u64,
    pub prop_delay: SimTime,
}

impl LinkSpec {
    pub const fn new(rate_bps: u64, prop_delay: SimTime) -> Self {
        Self {
            rate_bps,
            prop_delay,
        }
    }
}

/// Store-and-forward link with an unbounded transmit FIFO.
///
/// The serializer is tracked in nanoseconds so that sub-microsecond
/// serialization times (1500 B at 10 Gbit/s is 1.2 µs) do not accumulate
/// rounding error across back-to-back packets. Delivery instants handed to
/// the engine are rounded up to the next microsecond.
#[derive(Debug, Clone)]
pub struct Link {
    spec: LinkSpec,
    busy_until_ns: u64,
    packets: u64,
    bytes: u64,
}

impl Link {
    pub fn new(spec: LinkSpec) -> Self {
        assert!(spec.rate_bps > 0, "link rate must be positive");
        Self {
            spec,
            busy_until_ns: 0,
            packets: 0,
            bytes: 0,
        }
    }

    pub fn spec(&self) -> LinkSpec {
        self.spec
    }

    pub fn serialization_ns(&self, size_bytes: u32) -> u64 {
        let bits = size_bytes as u128 * 8 * 1_000_000_000;
        bits.div_ceil(self.spec.rate_bps as u128) as u64
    }

    pub fn busy_until_ns(&self) -> u64 {
        self.busy_until_ns
    }

    /// Queues a packet of `size_bytes` at `now` and returns the exact arrival
    /// instant at the far end, in nanoseconds.
    pub fn transmit_ns(&mut self, size_bytes: u32, now: SimTime) -> u64 {
        let now_ns = now.as_micros() * 1_000;
        let start = now_ns.max(self.busy_until_ns);
        self.busy_until_ns = start + self.serialization_ns(size_bytes);
        self.packets += 1;
        self.bytes += size_bytes as u64;
        self.busy_until_ns + self.spec.prop_delay.as_micros() * 1_000
    }

    /// Same as [`Link::transmit_ns`], rounded up to the engine's time unit.
    pub fn transmit(&mut self, size_bytes: u32, now: SimTime) -> SimTime {
        SimTime::from_micros(self.transmit_ns(size_bytes, now).div_ceil(1_000))
    }

    pub fn packets_sent(&self) -> u64 {
        self.packets
    }

    pub fn bytes_sent(&self) -> u64 {
        self.bytes
    }
}
