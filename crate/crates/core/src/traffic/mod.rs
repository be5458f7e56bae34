//! Traffic endpoints: greedy TCP and timestamped CBR.

pub mod cbr;
pub mod tcp;

pub use cbr::{CbrProfile, CbrRecord, CbrSink, CbrSource};
pub use tcp::{CcState, Segment, TcpActions, TcpConfig, TcpReceiver, TcpSender, TimerRequest};

use crate::net::FlowId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TrafficError {
    #[error("invalid CBR profile {0:?}")]
    BadProfile(CbrProfile),
    #[error("flow {0} has already started emitting")]
    FlowStarted(FlowId),
    #[error("stale ack {ack} below snd_una {snd_una}")]
    StaleAck { ack: u64, snd_una: u64 },
    #[error("ack {ack} beyond highest sent byte {high}")]
    AckBeyondSent { ack: u64, high: u64 },
}
