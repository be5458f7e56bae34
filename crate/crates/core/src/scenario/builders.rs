//! Builders for the three experiments, each with a control and an
//! experiment arm.

use super::config::{Arm, FlowSpec, FlowType, ScenarioConfig, StartTime, StreamKind};
use super::ScenarioError;
use crate::engine::SimTime;
use crate::net::{Dscp, FlowId, Qci, Tft, UeId};

/// Real-time stream start in experiments 1 and 2. The core links are still
/// draining the downloads' slow-start backlog until roughly 2 s.
pub const CBR_START: SimTime = SimTime::from_secs(3);
pub const CBR_DURATION: SimTime = SimTime::from_secs(10);
pub const SIM_END: SimTime = SimTime::from_secs(14);
pub const EXP3_CORE_RATE_BPS: u64 = 50_000_000;

pub const AUDIO_UES: u32 = 20;
pub const VIDEO_UES: u32 = 10;

pub fn exp3_population(stream: StreamKind) -> u32 {
    match stream {
        StreamKind::Audio => AUDIO_UES,
        StreamKind::Video => VIDEO_UES,
    }
}

/// Default `n_marked` sweep for experiment 3.
pub fn exp3_sweep(stream: StreamKind) -> &'static [u32] {
    match stream {
        StreamKind::Audio => &[0, 5, 10, 15, 20],
        StreamKind::Video => &[0, 2, 5, 8, 10],
    }
}

fn tcp(id: u32, ue: u32, dscp: Dscp) -> FlowSpec {
    FlowSpec {
        id: FlowId(id),
        ue: UeId(ue),
        kind: FlowType::Tcp,
        dscp,
        start: StartTime::At(SimTime::ZERO),
    }
}

fn cbr(id: u32, ue: u32, stream: StreamKind, dscp: Dscp, start: StartTime) -> FlowSpec {
    FlowSpec {
        id: FlowId(id),
        ue: UeId(ue),
        kind: FlowType::Cbr {
            profile: stream.profile(),
            duration: CBR_DURATION,
        },
        dscp,
        start,
    }
}

fn llt_tft(ue: u32, llt: Dscp) -> Tft {
    Tft {
        ue: UeId(ue),
        match_dscp: llt,
        target_qci: Qci::Qci7,
    }
}

/// One UE with a greedy download and a real-time stream. With `marking` the
/// stream carries the LLT codepoint and a TFT steers it onto QCI 7;
/// without it both flows share the default bearer.
pub fn build_exp1(marking: bool, stream: StreamKind) -> ScenarioConfig {
    let base = ScenarioConfig::default();
    let llt = base.llt_dscp;
    let (dscp, tfts) = if marking {
        (llt, vec![llt_tft(0, llt)])
    } else {
        (Dscp::DEFAULT, vec![])
    };
    ScenarioConfig {
        name: format!("exp1-{stream}"),
        arm: if marking {
            Arm::Experiment
        } else {
            Arm::Control
        },
        ues: 1,
        flows: vec![
            tcp(0, 0, Dscp::DEFAULT),
            cbr(1, 0, stream, dscp, StartTime::At(CBR_START)),
        ],
        tfts,
        ..base
    }
}

/// UE ids in experiment 2.
pub const EXP2_HONEST_UE: UeId = UeId(0);
pub const EXP2_CHEATER_UE: UeId = UeId(1);
pub const EXP2_REALTIME_UE: UeId = UeId(2);
pub const EXP2_HONEST_FLOW: FlowId = FlowId(0);
pub const EXP2_CHEATER_FLOW: FlowId = FlowId(1);
pub const EXP2_CBR_FLOW: FlowId = FlowId(2);

/// Two greedy downloads plus a marked audio stream that uses the
/// low-latency bearer in both arms. With `cheating` the cheater's download
/// is marked LLT as well and lands in the shallow QCI 7 queue.
pub fn build_exp2(cheating: bool) -> ScenarioConfig {
    let base = ScenarioConfig::default();
    let llt = base.llt_dscp;
    let cheater_dscp = if cheating { llt } else { Dscp::DEFAULT };
    ScenarioConfig {
        name: "exp2".to_string(),
        arm: if cheating {
            Arm::Experiment
        } else {
            Arm::Control
        },
        ues: 3,
        flows: vec![
            tcp(EXP2_HONEST_FLOW.0, EXP2_HONEST_UE.0, Dscp::DEFAULT),
            tcp(EXP2_CHEATER_FLOW.0, EXP2_CHEATER_UE.0, cheater_dscp),
            cbr(
                EXP2_CBR_FLOW.0,
                EXP2_REALTIME_UE.0,
                StreamKind::Audio,
                llt,
                StartTime::At(CBR_START),
            ),
        ],
        tfts: vec![
            llt_tft(EXP2_CHEATER_UE.0, llt),
            llt_tft(EXP2_REALTIME_UE.0, llt),
        ],
        ..base
    }
}

/// A cell of 20 (audio) or 10 (video) UEs, each with a greedy download and
/// a CBR stream starting uniformly in [1 s, 3 s]. The first `n_marked` UEs
/// mark their stream. Core links run at 50 Mbit/s.
pub fn build_exp3(stream: StreamKind, n_marked: u32) -> Result<ScenarioConfig, ScenarioError> {
    let n = exp3_population(stream);
    if n_marked > n {
        return Err(ScenarioError::BadCount { n_marked, max: n });
    }
    let mut cfg = ScenarioConfig::default();
    let llt = cfg.llt_dscp;
    cfg.name = format!("exp3-{stream}-m{n_marked}");
    cfg.arm = if n_marked > 0 {
        Arm::Experiment
    } else {
        Arm::Control
    };
    cfg.ues = n;
    cfg.topology.set_core_rate(EXP3_CORE_RATE_BPS);
    let start = StartTime::Uniform {
        lo: SimTime::from_secs(1),
        hi: SimTime::from_secs(3),
    };
    for ue in 0..n {
        let marked = ue < n_marked;
        cfg.flows.push(tcp(2 * ue, ue, Dscp::DEFAULT));
        let dscp = if marked { llt } else { Dscp::DEFAULT };
        cfg.flows.push(cbr(2 * ue + 1, ue, stream, dscp, start));
        if marked {
            cfg.tfts.push(llt_tft(ue, llt));
        }
    }
    Ok(cfg)
}
