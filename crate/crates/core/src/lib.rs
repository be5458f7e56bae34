//! Discrete-event model of an LTE downlink carrying a deep-buffer default
//! bearer (QCI 9) and a shallow-buffer low-latency bearer (QCI 7), with the
//! traffic, metrics and experiment builders used to compare marked and
//! unmarked runs.

pub mod config;
pub mod engine;
pub mod metrics;
pub mod net;
pub mod scenario;
pub mod traffic;

pub use engine::{Engine, EngineError, EventHandle, SimRng, SimTime};
pub use metrics::{DelaySeries, FlowReport, MetricsError};
pub use net::{Dscp, FlowId, Packet, PacketKind, Qci, UeId};
pub use scenario::{
    build_exp1, build_exp2, build_exp3, run_scenario, Arm, ReportSet, ScenarioConfig,
    ScenarioError, StreamKind,
};
