//! Scenario runtime: wires flows, core links and the eNodeB onto the engine.

use std::collections::HashSet;

use super::config::{FlowType, ScenarioConfig, StartTime};
use super::report::{QueueReport, RanReport, ReportSet, TcpAudit};
use super::ScenarioError;
use crate::engine::{Engine, SimRng, SimTime};
use crate::metrics::{self, DelaySeries, FlowKind, FlowReport};
use crate::net::{
    Dscp, EnqueueOutcome, FlowId, Link, Packet, PacketKind, Qci, RanScheduler, TftTable,
};
use crate::traffic::cbr::packet_id;
use crate::traffic::{CbrSink, CbrSource, TcpActions, TcpReceiver, TcpSender};

const CORE_HOPS: usize = 3;

#[derive(Debug)]
enum Event {
    TcpStart(usize),
    CbrEmit {
        flow: usize,
        k: u64,
    },
    /// Packet reaches the ingress of core hop `hop`; `hop == CORE_HOPS` is
    /// the eNodeB.
    Hop {
        hop: usize,
        pkt: Packet,
    },
    Tti,
    Deliver(Packet),
    Ack {
        flow: usize,
        ack: u64,
    },
    Timer {
        flow: usize,
        token: u64,
    },
}

#[derive(Debug)]
struct TcpFlow {
    sender: TcpSender,
    receiver: TcpReceiver,
    start: SimTime,
    /// Every seq handed to the network, in send order.
    trace: Vec<u64>,
    greedy_violations: u64,
    tx_counter: u64,
}

#[derive(Debug)]
struct CbrFlow {
    source: CbrSource,
    sink: CbrSink,
    sent: u64,
}

#[derive(Debug)]
enum FlowState {
    Tcp(Box<TcpFlow>),
    Cbr(CbrFlow),
}

#[derive(Debug)]
struct FlowSlot {
    id: FlowId,
    state: FlowState,
    drops: u64,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    engine: Engine<Event>,
    links: Vec<Link>,
    tfts: TftTable,
    ran: RanScheduler,
    flows: Vec<FlowSlot>,
    uplink_delay: SimTime,
    started: bool,
    /// Non-LLT-marked packets accepted into a QCI 7 queue.
    unmarked_in_low_latency: u64,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, ScenarioError> {
        cfg.validate()?;
        let mut rng = SimRng::new(cfg.seed);
        let tfts =
            TftTable::from_rules(&cfg.tfts).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let mut flows = Vec::with_capacity(cfg.flows.len());
        for spec in &cfg.flows {
            let start = match spec.start {
                StartTime::At(t) => t,
                StartTime::Uniform { lo, hi } => rng.uniform(lo, hi)?,
            };
            let state = match spec.kind {
                FlowType::Tcp => {
                    let mut sender = TcpSender::new(spec.id, cfg.tcp);
                    sender.set_marking(spec.dscp)?;
                    FlowState::Tcp(Box::new(TcpFlow {
                        sender,
                        receiver: TcpReceiver::new(),
                        start,
                        trace: Vec::new(),
                        greedy_violations: 0,
                        tx_counter: 0,
                    }))
                }
                FlowType::Cbr { profile, duration } => {
                    let mut source = CbrSource::new(spec.id, spec.ue, profile, start, duration);
                    source.set_marking(spec.dscp)?;
                    FlowState::Cbr(CbrFlow {
                        source,
                        sink: CbrSink::default(),
                        sent: 0,
                    })
                }
            };
            flows.push(FlowSlot {
                id: spec.id,
                state,
                drops: 0,
            });
        }
        Ok(Self {
            links: cfg
                .topology
                .core_links()
                .into_iter()
                .map(Link::new)
                .collect(),
            ran: RanScheduler::new(cfg.ran_config(), cfg.ues as usize),
            uplink_delay: cfg.topology.uplink_delay(),
            engine: Engine::new(),
            tfts,
            flows,
            started: false,
            unmarked_in_low_latency: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Re-marks a flow before it has emitted anything.
    pub fn set_flow_marking(&mut self, flow: FlowId, dscp: Dscp) -> Result<(), ScenarioError> {
        let slot = self
            .flows
            .iter_mut()
            .find(|f| f.id == flow)
            .ok_or(ScenarioError::UnknownFlow(flow))?;
        match &mut slot.state {
            FlowState::Tcp(t) => t.sender.set_marking(dscp)?,
            FlowState::Cbr(c) => c.source.set_marking(dscp)?,
        }
        self.cfg.set_flow_marking(flow, dscp)
    }

    fn bootstrap(&mut self) {
        self.started = true;
        let mut eng = std::mem::take(&mut self.engine);
        for (i, slot) in self.flows.iter().enumerate() {
            match &slot.state {
                FlowState::Tcp(t) => {
                    eng.schedule(t.start, Event::TcpStart(i)).expect("future");
                }
                FlowState::Cbr(c) if c.source.packet_count() > 0 => {
                    eng.schedule(c.source.emission_time(0), Event::CbrEmit { flow: i, k: 0 })
                        .expect("future");
                }
                FlowState::Cbr(_) => {}
            }
        }
        eng.schedule(SimTime::ZERO, Event::Tti).expect("future");
        self.engine = eng;
    }

    /// Runs the scenario to `sim_end`. Returns the number of events handled.
    pub fn run(&mut self) -> u64 {
        if !self.started {
            self.bootstrap();
        }
        let end = self.cfg.sim_end;
        let mut eng = std::mem::take(&mut self.engine);
        let n = eng.run_until(end, |eng, ev| self.handle(eng, ev));
        self.engine = eng;
        n
    }

    fn handle(&mut self, eng: &mut Engine<Event>, ev: Event) {
        let now = eng.now();
        match ev {
            Event::TcpStart(i) => {
                let actions = self.tcp_mut(i).sender.start(now);
                self.apply_tcp(eng, i, actions);
            }
            Event::CbrEmit { flow, k } => {
                let FlowState::Cbr(c) = &mut self.flows[flow].state else {
                    unreachable!("cbr event for tcp flow")
                };
                c.source.mark_started();
                let pkt = c.source.packet(k);
                c.sent += 1;
                if k + 1 < c.source.packet_count() {
                    let next = c.source.emission_time(k + 1);
                    eng.schedule(next, Event::CbrEmit { flow, k: k + 1 })
                        .expect("emission times increase");
                }
                self.forward(eng, 0, pkt);
            }
            Event::Hop { hop, pkt } => self.forward(eng, hop, pkt),
            Event::Tti => {
                for pkt in self.ran.tick(now) {
                    let at = pkt.delivered_at.expect("stamped by the scheduler");
                    eng.schedule(at, Event::Deliver(pkt)).expect("future");
                }
                let next = now + self.cfg.topology.tti;
                if next <= self.cfg.sim_end {
                    eng.schedule(next, Event::Tti).expect("future");
                }
            }
            Event::Deliver(pkt) => self.deliver(eng, pkt),
            Event::Ack { flow, ack } => {
                // Stale ACKs can only arrive reordered, which the ideal uplink
                // never does; ignore them either way.
                if let Ok(actions) = self.tcp_mut(flow).sender.on_ack(ack, now) {
                    self.apply_tcp(eng, flow, actions);
                }
            }
            Event::Timer { flow, token } => {
                let actions = self.tcp_mut(flow).sender.on_timer(token, now);
                self.apply_tcp(eng, flow, actions);
            }
        }
    }

    fn tcp_mut(&mut self, i: usize) -> &mut TcpFlow {
        match &mut self.flows[i].state {
            FlowState::Tcp(t) => t,
            FlowState::Cbr(_) => unreachable!("tcp event for cbr flow"),
        }
    }

    fn flow_index(&self, id: FlowId) -> usize {
        self.flows
            .iter()
            .position(|f| f.id == id)
            .expect("packet of a declared flow")
    }

    fn apply_tcp(&mut self, eng: &mut Engine<Event>, i: usize, actions: TcpActions) {
        let now = eng.now();
        let ue = self.cfg.flows[i].ue;
        let seg_overhead = self.cfg.tcp.header_bytes;
        let flow = self.flows[i].id;
        let t = self.tcp_mut(i);
        let dscp = t.sender.dscp();
        let mut pkts = Vec::with_capacity(actions.segments.len());
        for seg in &actions.segments {
            t.trace.push(seg.seq);
            pkts.push(Packet {
                id: packet_id(flow, t.tx_counter),
                flow,
                ue,
                size_bytes: seg.len + seg_overhead,
                dscp,
                kind: PacketKind::TcpData,
                seq: seg.seq,
                payload_bytes: seg.len,
                created_at: now,
                delivered_at: None,
            });
            t.tx_counter += 1;
        }
        let s = &t.sender;
        if s.state() != crate::traffic::CcState::FastRecovery {
            let flight = s.bytes_in_flight();
            let mss = s.config().mss as u64;
            // Window room for a full segment left unused.
            if flight < s.cwnd() && s.cwnd() - flight >= mss {
                t.greedy_violations += 1;
            }
        }
        if let Some(req) = actions.timer {
            eng.schedule(
                req.at,
                Event::Timer {
                    flow: i,
                    token: req.token,
                },
            )
            .expect("timer in the future");
        }
        for pkt in pkts {
            self.forward(eng, 0, pkt);
        }
    }

    fn forward(&mut self, eng: &mut Engine<Event>, hop: usize, pkt: Packet) {
        let now = eng.now();
        if hop < CORE_HOPS {
            let at = self.links[hop].transmit(pkt.size_bytes, now);
            eng.schedule(at, Event::Hop { hop: hop + 1, pkt })
                .expect("links deliver in the future");
            return;
        }
        let qci = self.tfts.classify(&pkt);
        let unmarked = pkt.dscp != self.cfg.llt_dscp;
        let flow = pkt.flow;
        match self.ran.enqueue(qci, pkt) {
            (EnqueueOutcome::Accepted, _) => {
                if qci == Qci::Qci7 && unmarked {
                    self.unmarked_in_low_latency += 1;
                }
            }
            (EnqueueOutcome::Dropped, _) => {
                let i = self.flow_index(flow);
                self.flows[i].drops += 1;
            }
        }
    }

    fn deliver(&mut self, eng: &mut Engine<Event>, pkt: Packet) {
        let now = eng.now();
        let i = self.flow_index(pkt.flow);
        match &mut self.flows[i].state {
            FlowState::Tcp(t) => {
                debug_assert_eq!(pkt.kind, PacketKind::TcpData);
                let ack = t.receiver.on_segment(pkt.seq, pkt.payload_bytes, now);
                eng.schedule(now + self.uplink_delay, Event::Ack { flow: i, ack })
                    .expect("future");
            }
            FlowState::Cbr(c) => c.sink.receive(&pkt),
        }
    }

    pub fn report(&self) -> ReportSet {
        let flows = self
            .cfg
            .flows
            .iter()
            .zip(&self.flows)
            .map(|(spec, slot)| self.flow_report(spec, slot))
            .collect();

        let mut queues = Vec::new();
        for (ue, bearers) in self.ran.ues() {
            for q in [&bearers.low_latency, &bearers.default] {
                queues.push(QueueReport {
                    ue,
                    qci: q.qci(),
                    stats: *q.stats(),
                    residual: q.len() as u64,
                    residual_bytes: q.occupancy_bytes(),
                });
            }
        }

        let tcp = self
            .flows
            .iter()
            .filter_map(|slot| match &slot.state {
                FlowState::Tcp(t) => Some(TcpAudit {
                    flow: slot.id,
                    retransmit_count: t.sender.retransmit_count(),
                    trace_retransmits: count_repeats(&t.trace),
                    segments_sent: t.sender.segments_sent(),
                    timeouts: t.sender.timeouts(),
                    fast_retransmits: t.sender.fast_retransmits(),
                    delivered_bytes: t.receiver.delivered_bytes(),
                    acked_bytes: t.sender.snd_una(),
                    gap_free: t.receiver.stream_is_gap_free(),
                    greedy_violations: t.greedy_violations,
                }),
                FlowState::Cbr(_) => None,
            })
            .collect();

        ReportSet {
            scenario: self.cfg.name.clone(),
            arm: self.cfg.arm,
            seed: self.cfg.seed,
            flows,
            queues,
            ran: RanReport {
                ttis: self.ran.ttis(),
                tti_budget_bytes: self.cfg.ran_config().tti_budget_bytes(),
                max_tti_allocation_bytes: self.ran.max_tti_allocation(),
                priority_violations: self.ran.priority_violations(),
                granted_bytes: self.ran.ues().map(|(_, u)| u.granted_bytes()).collect(),
                served_bytes: self.ran.ues().map(|(_, u)| u.served_bytes()).collect(),
            },
            tcp,
            unmarked_in_low_latency: self.unmarked_in_low_latency,
        }
    }

    fn flow_report(&self, spec: &super::config::FlowSpec, slot: &FlowSlot) -> FlowReport {
        let qci = self.cfg.flow_qci(spec);
        let marked = spec.dscp == self.cfg.llt_dscp;
        match &slot.state {
            FlowState::Tcp(t) => {
                let bytes = t.receiver.delivered_bytes();
                let goodput = match (t.sender.first_send_at(), t.receiver.last_delivery_at()) {
                    (Some(a), Some(b)) => metrics::goodput(bytes, a, b).unwrap_or(0.0),
                    _ => 0.0,
                };
                FlowReport {
                    flow: slot.id,
                    ue: spec.ue,
                    kind: FlowKind::Tcp,
                    qci,
                    marked,
                    delay: None,
                    delay_rounded: None,
                    jitter_ms: None,
                    goodput_mbps: goodput,
                    retransmissions: Some(t.sender.retransmit_count()),
                    drops: slot.drops,
                    packets_sent: t.sender.segments_sent(),
                    packets_delivered: bytes / t.sender.config().mss as u64,
                    bytes_delivered: bytes,
                }
            }
            FlowState::Cbr(c) => {
                let log = c.sink.log();
                let series = DelaySeries::from_times(log.iter().map(|r| r.delay()));
                let goodput = match (log.first(), log.last()) {
                    (Some(a), Some(b)) => {
                        metrics::goodput(c.sink.payload_bytes(), a.created_at, b.delivered_at)
                            .unwrap_or(0.0)
                    }
                    _ => 0.0,
                };
                FlowReport {
                    flow: slot.id,
                    ue: spec.ue,
                    kind: FlowKind::Cbr,
                    qci,
                    marked,
                    delay: metrics::delay_stats(&series).ok(),
                    delay_rounded: metrics::delay_stats(&series.rounded_ms()).ok(),
                    jitter_ms: metrics::jitter(&series).ok(),
                    goodput_mbps: goodput,
                    retransmissions: None,
                    drops: slot.drops,
                    packets_sent: c.sent,
                    packets_delivered: log.len() as u64,
                    bytes_delivered: c.sink.payload_bytes(),
                }
            }
        }
    }

    /// Resolved start time of a flow, after any random draw.
    pub fn flow_start(&self, flow: FlowId) -> Option<SimTime> {
        let slot = self.flows.iter().find(|f| f.id == flow)?;
        Some(match &slot.state {
            FlowState::Tcp(t) => t.start,
            FlowState::Cbr(c) => c.source.start_at,
        })
    }

    /// One-way delays of a CBR flow in arrival order.
    pub fn cbr_delays(&self, flow: FlowId) -> Option<DelaySeries> {
        let slot = self.flows.iter().find(|f| f.id == flow)?;
        match &slot.state {
            FlowState::Cbr(c) => Some(DelaySeries::from_times(
                c.sink.log().iter().map(|r| r.delay()),
            )),
            FlowState::Tcp(_) => None,
        }
    }

    /// Sequence numbers received by a CBR sink, in arrival order.
    pub fn cbr_arrivals(&self, flow: FlowId) -> Option<Vec<u64>> {
        let slot = self.flows.iter().find(|f| f.id == flow)?;
        match &slot.state {
            FlowState::Cbr(c) => Some(c.sink.log().iter().map(|r| r.seq).collect()),
            FlowState::Tcp(_) => None,
        }
    }

    /// Data segment seqs a TCP flow put on the wire, in order.
    pub fn tcp_trace(&self, flow: FlowId) -> Option<&[u64]> {
        let slot = self.flows.iter().find(|f| f.id == flow)?;
        match &slot.state {
            FlowState::Tcp(t) => Some(&t.trace),
            FlowState::Cbr(_) => None,
        }
    }
}

/// Number of sends whose seq had already been sent earlier.
fn count_repeats(trace: &[u64]) -> u64 {
    let mut seen = HashSet::with_capacity(trace.len());
    trace.iter().filter(|s| !seen.insert(**s)).count() as u64
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ReportSet, ScenarioError> {
    let mut sim = Simulation::new(cfg.clone())?;
    sim.run();
    Ok(sim.report())
}
