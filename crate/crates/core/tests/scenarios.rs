use std::collections::HashSet;

use rdsim_core::metrics::{delay_stats, FlowKind};
use rdsim_core::net::Qci;
use rdsim_core::scenario::builders::{
    exp3_sweep, EXP2_CBR_FLOW, EXP2_CHEATER_FLOW, EXP2_HONEST_FLOW,
};
use rdsim_core::scenario::{FlowType, Simulation, StartTime};
use rdsim_core::traffic::{CbrProfile, TrafficError};
use rdsim_core::*;

fn all_builds() -> Vec<ScenarioConfig> {
    let mut v = Vec::new();
    for s in [StreamKind::Audio, StreamKind::Video] {
        v.push(build_exp1(false, s));
        v.push(build_exp1(true, s));
    }
    v.push(build_exp2(false));
    v.push(build_exp2(true));
    for s in [StreamKind::Audio, StreamKind::Video] {
        for &n in exp3_sweep(s) {
            v.push(build_exp3(s, n).unwrap());
        }
    }
    v
}

/// Strips what an arm is allowed to change.
fn arm_neutral(cfg: &ScenarioConfig) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.arm = Arm::Control;
    c.name.clear();
    c.tfts.clear();
    for f in &mut c.flows {
        f.dscp = Dscp::DEFAULT;
    }
    c
}

fn solo_audio(marked: bool) -> ScenarioConfig {
    let mut cfg = build_exp1(marked, StreamKind::Audio);
    cfg.flows.retain(|f| !f.is_tcp());
    cfg
}

#[test]
fn queues_conserve_packets_in_every_build() {
    for cfg in all_builds() {
        let r = run_scenario(&cfg).unwrap();
        for q in &r.queues {
            assert!(q.is_conserved(), "{} {:?}", cfg.name, q);
            assert_eq!(q.stats.accepted, q.stats.dequeued + q.residual);
        }
        assert!(r.ran.max_tti_allocation_bytes <= 550, "{}", cfg.name);
        assert_eq!(r.ran.priority_violations, 0);
        for t in &r.tcp {
            assert!(t.gap_free, "{} flow {}", cfg.name, t.flow);
            assert_eq!(t.retransmit_count, t.trace_retransmits);
            assert_eq!(t.greedy_violations, 0);
            assert!(t.delivered_bytes >= t.acked_bytes);
        }
    }
}

#[test]
fn cbr_is_never_duplicated_or_reordered() {
    for cfg in [build_exp1(false, StreamKind::Video), build_exp2(true)] {
        let mut sim = Simulation::new(cfg.clone()).unwrap();
        sim.run();
        let report = sim.report();
        for f in cfg.flows.iter().filter(|f| !f.is_tcp()) {
            let seqs = sim.cbr_arrivals(f.id).unwrap();
            assert!(seqs.windows(2).all(|w| w[0] < w[1]));
            let fr = report.flow(f.id).unwrap();
            assert_eq!(fr.packets_delivered + fr.drops, fr.packets_sent);
            assert_eq!(seqs.len() as u64, fr.packets_delivered);
        }
    }
}

#[test]
fn retransmissions_match_trace_replay() {
    let mut sim = Simulation::new(build_exp2(true)).unwrap();
    sim.run();
    let trace = sim.tcp_trace(EXP2_CHEATER_FLOW).unwrap();
    let mut seen = HashSet::new();
    let repeats = trace.iter().filter(|s| !seen.insert(**s)).count() as u64;
    let fr = sim.report();
    let fr = fr.flow(EXP2_CHEATER_FLOW).unwrap();
    assert!(repeats > 0);
    assert_eq!(fr.retransmissions, Some(repeats));
}

#[test]
fn lossless_path_needs_no_retransmission() {
    let mut cfg = build_exp1(false, StreamKind::Audio);
    cfg.flows.retain(|f| f.is_tcp());
    cfg.bearers.qci9_capacity_bytes = u64::MAX / 2;
    cfg.bearers.qci7_capacity_bytes = u64::MAX / 4;
    let r = run_scenario(&cfg).unwrap();
    let tcp = &r.tcp[0];
    assert_eq!(tcp.retransmit_count, 0);
    assert_eq!(tcp.timeouts, 0);
    let g = r.flows[0].goodput_mbps;
    assert!(g > 3.5 && g < 4.4, "goodput {g}");
}

#[test]
fn no_unmarked_packet_uses_low_latency_bearer() {
    for cfg in all_builds() {
        let r = run_scenario(&cfg).unwrap();
        assert_eq!(r.unmarked_in_low_latency, 0, "{}", cfg.name);
        for q in r.queues.iter().filter(|q| q.qci == Qci::Qci7) {
            let mask = q.stats.dscp_seen;
            assert!(mask & !(1u64 << cfg.llt_dscp.value()) == 0, "{}", cfg.name);
        }
    }
}

#[test]
fn uncontended_marked_audio_delay() {
    let r = run_scenario(&solo_audio(true)).unwrap();
    let d = r.flows[0].delay.unwrap();
    assert!(d.min >= 4.0 && d.max <= 6.0, "{d:?}");
    assert_eq!(r.flows[0].packets_delivered, 500);
}

#[test]
fn runs_are_deterministic() {
    for cfg in [build_exp2(true), build_exp3(StreamKind::Audio, 5).unwrap()] {
        assert_eq!(run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
    }
}

#[test]
fn seed_moves_exp3_start_times() {
    let mut a = build_exp3(StreamKind::Video, 2).unwrap();
    let mut b = a.clone();
    a.seed = 1;
    b.seed = 2;
    assert_ne!(
        run_scenario(&a).unwrap().flows,
        run_scenario(&b).unwrap().flows
    );
}

#[test]
fn arms_differ_only_in_marking() {
    for s in [StreamKind::Audio, StreamKind::Video] {
        assert_eq!(
            arm_neutral(&build_exp1(false, s)),
            arm_neutral(&build_exp1(true, s))
        );
        let base = arm_neutral(&build_exp3(s, 0).unwrap());
        for &n in exp3_sweep(s) {
            assert_eq!(arm_neutral(&build_exp3(s, n).unwrap()), base);
        }
    }
    assert_eq!(
        arm_neutral(&build_exp2(false)),
        arm_neutral(&build_exp2(true))
    );
}

#[test]
fn builder_layouts() {
    let c = build_exp1(true, StreamKind::Audio);
    let cbr = c.flows.iter().find(|f| !f.is_tcp()).unwrap();
    let tcp = c.flows.iter().find(|f| f.is_tcp()).unwrap();
    assert_eq!(c.flow_qci(cbr), Qci::Qci7);
    assert_eq!(c.flow_qci(tcp), Qci::Qci9);

    let c = build_exp1(true, StreamKind::Video);
    let cbr = c.flows.iter().find(|f| !f.is_tcp()).unwrap();
    assert!(matches!(cbr.kind, FlowType::Cbr { profile, .. } if profile == CbrProfile::VIDEO));

    let honest = build_exp2(false);
    let cheat = build_exp2(true);
    for c in [&honest, &cheat] {
        assert_eq!(c.flow_qci(c.flow(EXP2_CBR_FLOW).unwrap()), Qci::Qci7);
        assert_eq!(c.flow_qci(c.flow(EXP2_HONEST_FLOW).unwrap()), Qci::Qci9);
    }
    assert_eq!(
        honest.flow_qci(honest.flow(EXP2_CHEATER_FLOW).unwrap()),
        Qci::Qci9
    );
    assert_eq!(
        cheat.flow_qci(cheat.flow(EXP2_CHEATER_FLOW).unwrap()),
        Qci::Qci7
    );

    let c = build_exp3(StreamKind::Audio, 7).unwrap();
    assert_eq!(c.ues, 20);
    assert_eq!(c.topology.s1.rate_bps, 50_000_000);
    assert_eq!(c.topology.s5.rate_bps, 50_000_000);
    let marked = c.flows.iter().filter(|f| f.dscp == c.llt_dscp).count();
    assert_eq!(marked, 7);
    assert_eq!(build_exp3(StreamKind::Video, 3).unwrap().ues, 10);
    assert!(matches!(
        build_exp3(StreamKind::Video, 11),
        Err(ScenarioError::BadCount {
            n_marked: 11,
            max: 10
        })
    ));
    assert!(build_exp3(StreamKind::Audio, 21).is_err());
}

#[test]
fn exp3_starts_fall_in_window() {
    let sim = Simulation::new(build_exp3(StreamKind::Audio, 20).unwrap()).unwrap();
    let cfg = sim.config();
    let starts: Vec<SimTime> = cfg
        .flows
        .iter()
        .filter(|f| !f.is_tcp())
        .map(|f| sim.flow_start(f.id).unwrap())
        .collect();
    assert_eq!(starts.len(), 20);
    for t in &starts {
        assert!(
            *t >= SimTime::from_secs(1) && *t <= SimTime::from_secs(3),
            "{t}"
        );
    }
    assert!(starts.windows(2).any(|w| w[0] != w[1]));
    for f in cfg.flows.iter().filter(|f| f.is_tcp()) {
        assert_eq!(sim.flow_start(f.id), Some(SimTime::ZERO));
    }
    assert_eq!(cfg.sim_end, SimTime::from_secs(14));
}

#[test]
fn exp3_marked_load_fits_the_cell() {
    let c = build_exp3(StreamKind::Audio, 20).unwrap();
    let load: u64 = c
        .flows
        .iter()
        .filter(|f| f.dscp == c.llt_dscp)
        .map(|f| match f.kind {
            FlowType::Cbr { profile, .. } => profile.ip_bps(),
            FlowType::Tcp => 0,
        })
        .sum();
    assert_eq!(load, 1_600_000);
    assert!(load <= c.topology.cell_rate_bps);
}

#[test]
fn marking_is_rejected_once_flows_run() {
    let mut sim = Simulation::new(build_exp1(false, StreamKind::Audio)).unwrap();
    assert!(sim.set_flow_marking(FlowId(9), Dscp::LLT).is_err());
    sim.set_flow_marking(FlowId(1), Dscp::LLT).unwrap();
    assert_eq!(sim.config().flows[1].dscp, Dscp::LLT);
    sim.run();
    assert_eq!(
        sim.set_flow_marking(FlowId(1), Dscp::DEFAULT),
        Err(ScenarioError::Traffic(TrafficError::FlowStarted(FlowId(1))))
    );
}

#[test]
fn marking_leaves_emission_schedule_alone() {
    let plain = run_scenario(&solo_audio(false)).unwrap();
    let marked = run_scenario(&solo_audio(true)).unwrap();
    assert_eq!(plain.flows[0].packets_sent, marked.flows[0].packets_sent);
    assert_eq!(plain.flows[0].qci, Qci::Qci9);
    assert_eq!(marked.flows[0].qci, Qci::Qci7);
    // On an otherwise idle cell the bearer makes no difference.
    assert_eq!(plain.flows[0].delay, marked.flows[0].delay);
}

#[test]
fn marked_audio_beats_control() {
    let c = run_scenario(&build_exp1(false, StreamKind::Audio)).unwrap();
    let e = run_scenario(&build_exp1(true, StreamKind::Audio)).unwrap();
    let mean = |r: &ReportSet| {
        r.flows
            .iter()
            .find(|f| f.kind == FlowKind::Cbr)
            .and_then(|f| f.delay)
            .unwrap()
            .mean
    };
    assert!(mean(&e) < mean(&c));
}

#[test]
fn cheater_retransmits_more_than_honest() {
    let r = run_scenario(&build_exp2(true)).unwrap();
    let rtx = |id| r.flow(id).unwrap().retransmissions.unwrap();
    assert!(rtx(EXP2_CHEATER_FLOW) > rtx(EXP2_HONEST_FLOW));
}

#[test]
fn rounded_stats_track_raw_stats() {
    let mut sim = Simulation::new(build_exp2(false)).unwrap();
    sim.run();
    let raw = sim.cbr_delays(EXP2_CBR_FLOW).unwrap();
    let s = delay_stats(&raw.rounded_ms()).unwrap();
    let fr = sim.report();
    assert_eq!(fr.flow(EXP2_CBR_FLOW).unwrap().delay_rounded, Some(s));
}
