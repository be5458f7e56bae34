//! Experiment definitions and the scenario runtime.

pub mod builders;
pub mod config;
pub mod report;
pub mod sim;

pub use builders::{build_exp1, build_exp2, build_exp3};
pub use config::{
    Arm, Bearers, FlowSpec, FlowType, ScenarioConfig, StartTime, StreamKind, Topology,
};
pub use report::{QueueReport, RanReport, ReportSet, TcpAudit};
pub use sim::{run_scenario, Simulation};

use crate::engine::EngineError;
use crate::net::FlowId;
use crate::traffic::TrafficError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("n_marked {n_marked} out of range 0..={max}")]
    BadCount { n_marked: u32, max: u32 },
    #[error("unknown flow {0}")]
    UnknownFlow(FlowId),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}
