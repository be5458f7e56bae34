use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct FlowId(pub u32);

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct UeId(pub u32);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for UeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A 6-bit DiffServ codepoint.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(try_from = "u8", into = "u8")]
pub struct Dscp(u8);

impl Dscp {
    pub const DEFAULT: Dscp = Dscp(0);
    /// Low-latency codepoint used when a scenario does not pick one.
    pub const LLT: Dscp = Dscp(0b000001);

    pub fn new(value: u8) -> Option<Self> {
        (value < 64).then_some(Dscp(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Dscp {
    type Error = String;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Dscp::new(value).ok_or_else(|| format!("dscp {value} does not fit in 6 bits"))
    }
}

impl From<Dscp> for u8 {
    fn from(d: Dscp) -> u8 {
        d.0
    }
}

/// Bearer QoS class. Only the two classes the model uses are representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Qci {
    /// Dedicated low-latency bearer, shallow buffer.
    Qci7,
    /// Default best-effort bearer, deep buffer.
    Qci9,
}

impl Qci {
    pub fn number(self) -> u8 {
        match self {
            Qci::Qci7 => 7,
            Qci::Qci9 => 9,
        }
    }
}

impl TryFrom<u8> for Qci {
    type Error = String;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            7 => Ok(Qci::Qci7),
            9 => Ok(Qci::Qci9),
            other => Err(format!("unsupported qci {other} (expected 7 or 9)")),
        }
    }
}

impl From<Qci> for u8 {
    fn from(q: Qci) -> u8 {
        q.number()
    }
}

impl fmt::Display for Qci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketKind {
    TcpData,
    TcpAck,
    UdpCbr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub flow: FlowId,
    pub ue: UeId,
    /// IP-layer size.
    pub size_bytes: u32,
    pub dscp: Dscp,
    pub kind: PacketKind,
    /// TCP: first payload byte (data) or cumulative ack. CBR: emission index.
    pub seq: u64,
    /// TCP payload length; zero for other kinds.
    pub payload_bytes: u32,
    pub created_at: SimTime,
    pub delivered_at: Option<SimTime>,
}

impl Packet {
    pub fn mark_delivered(&mut self, at: SimTime) {
        debug_assert!(at >= self.created_at);
        self.delivered_at = Some(at);
    }

    pub fn one_way_delay(&self) -> Option<SimTime> {
        self.delivered_at.map(|d| d - self.created_at)
    }
}
