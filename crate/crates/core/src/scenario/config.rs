use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::engine::SimTime;
use crate::net::{Dscp, FlowId, LinkSpec, Qci, RanConfig, Tft, UeId};
use crate::traffic::{CbrProfile, TcpConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Experiment,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Experiment => "experiment",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Audio,
    Video,
}

impl StreamKind {
    pub fn profile(self) -> CbrProfile {
        match self {
            StreamKind::Audio => CbrProfile::AUDIO,
            StreamKind::Video => CbrProfile::VIDEO,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StreamKind::Audio => "audio",
            StreamKind::Video => "video",
        }
    }
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Server → PGW → SGW → eNodeB → UE path parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub sgi: LinkSpec,
    pub s5: LinkSpec,
    pub s1: LinkSpec,
    pub cell_rate_bps: u64,
    pub baseline_latency: SimTime,
    pub tti: SimTime,
    pub pf_ewma_alpha: f64,
}

impl Default for Topology {
    fn default() -> Self {
        Self {
            sgi: LinkSpec::new(10_000_000_000, SimTime::from_millis(1)),
            s5: LinkSpec::new(5_000_000, SimTime::ZERO),
            s1: LinkSpec::new(5_000_000, SimTime::ZERO),
            cell_rate_bps: 4_400_000,
            baseline_latency: SimTime::from_millis(3),
            tti: SimTime::from_millis(1),
            pf_ewma_alpha: 0.01,
        }
    }
}

impl Topology {
    pub fn core_links(&self) -> [LinkSpec; 3] {
        [self.sgi, self.s5, self.s1]
    }

    pub fn set_core_rate(&mut self, rate_bps: u64) {
        self.s5.rate_bps = rate_bps;
        self.s1.rate_bps = rate_bps;
    }

    /// One-way latency of the queue-free uplink used by ACKs.
    pub fn uplink_delay(&self) -> SimTime {
        self.baseline_latency + self.sgi.prop_delay + self.s5.prop_delay + self.s1.prop_delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bearers {
    pub qci7_capacity_bytes: u64,
    pub qci9_capacity_bytes: u64,
}

impl Default for Bearers {
    fn default() -> Self {
        // ~20 ms and ~300 ms of the 4.4 Mbit/s cell.
        Self {
            qci7_capacity_bytes: 11_000,
            qci9_capacity_bytes: 165_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StartTime {
    At(SimTime),
    /// Drawn from the run's generator, uniform over `[lo, hi]`.
    Uniform {
        lo: SimTime,
        hi: SimTime,
    },
}

impl StartTime {
    pub fn latest(&self) -> SimTime {
        match *self {
            StartTime::At(t) => t,
            StartTime::Uniform { hi, .. } => hi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowType {
    /// Greedy, unbounded download running until the end of the run.
    Tcp,
    Cbr {
        profile: CbrProfile,
        duration: SimTime,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub id: FlowId,
    pub ue: UeId,
    pub kind: FlowType,
    pub dscp: Dscp,
    pub start: StartTime,
}

impl FlowSpec {
    pub fn is_tcp(&self) -> bool {
        matches!(self.kind, FlowType::Tcp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub arm: Arm,
    pub seed: u64,
    pub sim_end: SimTime,
    pub llt_dscp: Dscp,
    pub ues: u32,
    pub topology: Topology,
    pub bearers: Bearers,
    pub tcp: TcpConfig,
    pub flows: Vec<FlowSpec>,
    pub tfts: Vec<Tft>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "custom".to_string(),
            arm: Arm::Control,
            seed: 1,
            sim_end: SimTime::from_secs(14),
            llt_dscp: Dscp::LLT,
            ues: 1,
            topology: Topology::default(),
            bearers: Bearers::default(),
            tcp: TcpConfig::default(),
            flows: Vec::new(),
            tfts: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn ran_config(&self) -> RanConfig {
        RanConfig {
            tti: self.topology.tti,
            cell_rate_bps: self.topology.cell_rate_bps,
            baseline_latency: self.topology.baseline_latency,
            ewma_alpha: self.topology.pf_ewma_alpha,
            qci7_capacity_bytes: self.bearers.qci7_capacity_bytes,
            qci9_capacity_bytes: self.bearers.qci9_capacity_bytes,
        }
    }

    pub fn flow(&self, id: FlowId) -> Option<&FlowSpec> {
        self.flows.iter().find(|f| f.id == id)
    }

    /// Bearer a flow's packets land in under this config's TFTs.
    pub fn flow_qci(&self, flow: &FlowSpec) -> Qci {
        self.tfts
            .iter()
            .find(|t| t.ue == flow.ue && t.match_dscp == flow.dscp)
            .map_or(Qci::Qci9, |t| t.target_qci)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |what: String| Err(ScenarioError::Invalid(what));
        let topo = &self.topology;
        for (name, link) in [("sgi", topo.sgi), ("s5", topo.s5), ("s1", topo.s1)] {
            if link.rate_bps == 0 {
                return bad(format!("{name} link rate must be positive"));
            }
        }
        if topo.cell_rate_bps == 0 {
            return bad("cell rate must be positive".into());
        }
        if topo.tti == SimTime::ZERO {
            return bad("tti must be positive".into());
        }
        if !(topo.pf_ewma_alpha > 0.0 && topo.pf_ewma_alpha <= 1.0) {
            return bad(format!(
                "pf_ewma_alpha {} outside (0, 1]",
                topo.pf_ewma_alpha
            ));
        }
        let b = &self.bearers;
        if b.qci7_capacity_bytes == 0 {
            return bad("qci7 capacity must be positive".into());
        }
        if b.qci7_capacity_bytes >= b.qci9_capacity_bytes {
            return bad(format!(
                "qci7 capacity {} must be smaller than qci9 capacity {}",
                b.qci7_capacity_bytes, b.qci9_capacity_bytes
            ));
        }
        if self.tcp.mss == 0 || self.tcp.segment_bytes() > 1500 {
            return bad(format!(
                "tcp segment of {} bytes must be in 1..=1500",
                self.tcp.segment_bytes()
            ));
        }
        if self.tcp.segment_bytes() as u64 > b.qci7_capacity_bytes {
            return bad("qci7 capacity cannot hold one tcp segment".into());
        }
        if self.tcp.min_rto == SimTime::ZERO || self.tcp.min_rto > self.tcp.max_rto {
            return bad("tcp rto bounds must satisfy 0 < min <= max".into());
        }
        if self.ues == 0 {
            return bad("at least one ue is required".into());
        }

        let mut ids = HashSet::new();
        for f in &self.flows {
            if !ids.insert(f.id) {
                return bad(format!("duplicate flow id {}", f.id));
            }
            if f.ue.0 >= self.ues {
                return bad(format!("flow {} refers to unknown ue {}", f.id, f.ue));
            }
            if let StartTime::Uniform { lo, hi } = f.start {
                if lo > hi {
                    return bad(format!("flow {} start range is inverted", f.id));
                }
            }
            if let FlowType::Cbr { profile, duration } = f.kind {
                profile
                    .validate()
                    .map_err(|e| ScenarioError::Invalid(format!("flow {}: {e}", f.id)))?;
                if f.start.latest() + duration > self.sim_end {
                    return bad(format!("flow {} ends after sim_end", f.id));
                }
            } else if f.start.latest() > self.sim_end {
                return bad(format!("flow {} starts after sim_end", f.id));
            }
        }

        let mut rules = HashSet::new();
        for t in &self.tfts {
            if t.ue.0 >= self.ues {
                return bad(format!("tft refers to unknown ue {}", t.ue));
            }
            if !rules.insert((t.ue, t.match_dscp)) {
                return bad(format!(
                    "duplicate tft for ue {} dscp {}",
                    t.ue,
                    t.match_dscp.value()
                ));
            }
        }
        Ok(())
    }

    /// Changes the codepoint a declared flow will carry.
    pub fn set_flow_marking(&mut self, flow: FlowId, dscp: Dscp) -> Result<(), ScenarioError> {
        let spec = self
            .flows
            .iter_mut()
            .find(|f| f.id == flow)
            .ok_or(ScenarioError::UnknownFlow(flow))?;
        spec.dscp = dscp;
        Ok(())
    }
}
