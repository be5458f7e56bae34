//! Greedy Reno-style TCP sender and cumulative-ACK receiver.
//!
//! The sender always has data to send. Congestion control is slow start,
//! additive increase, fast retransmit on the third duplicate ACK and Reno
//! fast recovery (window inflation, exit on the first new ACK). Timeouts
//! collapse the window to one segment and go back to the oldest unacked
//! byte. RTO follows Jacobson/Karn with exponential backoff.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TrafficError;
use crate::engine::SimTime;
use crate::net::{Dscp, FlowId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcpConfig {
    /// Payload bytes per segment.
    pub mss: u32,
    /// IP + TCP header bytes added to each data segment.
    pub header_bytes: u32,
    pub ack_bytes: u32,
    pub initial_cwnd_segments: u32,
    pub initial_ssthresh_bytes: u64,
    pub initial_rto: SimTime,
    pub min_rto: SimTime,
    pub max_rto: SimTime,
}

impl Default for TcpConfig {
    fn default() -> Self {
        Self {
            mss: 1_340,
            header_bytes: 60,
            ack_bytes: 60,
            initial_cwnd_segments: 1,
            initial_ssthresh_bytes: 65_535,
            initial_rto: SimTime::from_secs(1),
            min_rto: SimTime::from_millis(200),
            max_rto: SimTime::from_secs(60),
        }
    }
}

impl TcpConfig {
    pub fn segment_bytes(&self) -> u32 {
        self.mss + self.header_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcState {
    SlowStart,
    CongestionAvoidance,
    FastRecovery,
}

/// A data segment the sender wants on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub seq: u64,
    pub len: u32,
    pub retransmission: bool,
}

/// Request to deliver a timer event back to the sender at `at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimerRequest {
    pub at: SimTime,
    pub token: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TcpActions {
    pub segments: Vec<Segment>,
    pub timer: Option<TimerRequest>,
}

#[derive(Debug, Clone)]
pub struct TcpSender {
    flow: FlowId,
    cfg: TcpConfig,
    dscp: Dscp,
    started: bool,

    cwnd: u64,
    ssthresh: u64,
    state: CcState,
    snd_una: u64,
    snd_nxt: u64,
    high_tx: u64,
    dup_acks: u32,

    srtt_us: Option<f64>,
    rttvar_us: f64,
    rto: SimTime,
    rtt_probe: Option<(u64, SimTime)>,

    // Retransmission timer. `deadline` is the logical expiry; `pending` is
    // the one engine event currently outstanding for it.
    deadline: Option<SimTime>,
    pending: Option<TimerRequest>,
    next_token: u64,

    retransmit_count: u64,
    timeouts: u64,
    fast_retransmits: u64,
    segments_sent: u64,
    first_send_at: Option<SimTime>,
}

impl TcpSender {
    pub fn new(flow: FlowId, cfg: TcpConfig) -> Self {
        Self {
            flow,
            dscp: Dscp::DEFAULT,
            started: false,
            cwnd: cfg.initial_cwnd_segments.max(1) as u64 * cfg.mss as u64,
            ssthresh: cfg.initial_ssthresh_bytes,
            state: CcState::SlowStart,
            snd_una: 0,
            snd_nxt: 0,
            high_tx: 0,
            dup_acks: 0,
            srtt_us: None,
            rttvar_us: 0.0,
            rto: cfg.initial_rto,
            rtt_probe: None,
            deadline: None,
            pending: None,
            next_token: 0,
            retransmit_count: 0,
            timeouts: 0,
            fast_retransmits: 0,
            segments_sent: 0,
            first_send_at: None,
            cfg,
        }
    }

    pub fn flow(&self) -> FlowId {
        self.flow
    }

    pub fn config(&self) -> &TcpConfig {
        &self.cfg
    }

    pub fn dscp(&self) -> Dscp {
        self.dscp
    }

    pub fn set_marking(&mut self, dscp: Dscp) -> Result<(), TrafficError> {
        if self.started {
            return Err(TrafficError::FlowStarted(self.flow));
        }
        self.dscp = dscp;
        Ok(())
    }

    pub fn cwnd(&self) -> u64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> u64 {
        self.ssthresh
    }

    pub fn state(&self) -> CcState {
        self.state
    }

    pub fn rto(&self) -> SimTime {
        self.rto
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn snd_nxt(&self) -> u64 {
        self.snd_nxt
    }

    pub fn bytes_in_flight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    pub fn retransmit_count(&self) -> u64 {
        self.retransmit_count
    }

    pub fn timeouts(&self) -> u64 {
        self.timeouts
    }

    pub fn fast_retransmits(&self) -> u64 {
        self.fast_retransmits
    }

    pub fn segments_sent(&self) -> u64 {
        self.segments_sent
    }

    pub fn first_send_at(&self) -> Option<SimTime> {
        self.first_send_at
    }

    pub fn start(&mut self, now: SimTime) -> TcpActions {
        self.started = true;
        let mut actions = TcpActions::default();
        self.fill_window(now, &mut actions);
        actions
    }

    pub fn on_ack(&mut self, ack: u64, now: SimTime) -> Result<TcpActions, TrafficError> {
        if ack < self.snd_una {
            return Err(TrafficError::StaleAck {
                ack,
                snd_una: self.snd_una,
            });
        }
        if ack > self.high_tx {
            return Err(TrafficError::AckBeyondSent {
                ack,
                high: self.high_tx,
            });
        }
        let mut actions = TcpActions::default();
        let mss = self.cfg.mss as u64;

        if ack == self.snd_una {
            if self.snd_nxt > self.snd_una {
                self.dup_acks += 1;
                if self.state == CcState::FastRecovery {
                    self.cwnd += mss;
                } else if self.dup_acks == 3 {
                    self.ssthresh = (self.cwnd / 2).max(2 * mss);
                    self.fast_retransmits += 1;
                    self.retransmit_head(&mut actions);
                    self.cwnd = self.ssthresh + 3 * mss;
                    self.state = CcState::FastRecovery;
                }
            }
            self.fill_window(now, &mut actions);
            return Ok(actions);
        }

        self.snd_una = ack;
        self.snd_nxt = self.snd_nxt.max(ack);
        self.dup_acks = 0;
        if let Some((end, sent_at)) = self.rtt_probe {
            if ack >= end {
                self.sample_rtt(now - sent_at);
                self.rtt_probe = None;
            }
        }
        match self.state {
            CcState::FastRecovery => {
                self.cwnd = self.ssthresh;
                self.state = CcState::CongestionAvoidance;
            }
            CcState::SlowStart => {
                self.cwnd += mss;
                if self.cwnd >= self.ssthresh {
                    self.state = CcState::CongestionAvoidance;
                }
            }
            CcState::CongestionAvoidance => {
                self.cwnd += (mss * mss / self.cwnd).max(1);
            }
        }

        if self.snd_una == self.high_tx {
            self.deadline = None;
        } else {
            self.arm_timer(now + self.rto, &mut actions);
        }
        self.fill_window(now, &mut actions);
        Ok(actions)
    }

    /// Handles a timer event previously requested through [`TcpActions`].
    pub fn on_timer(&mut self, token: u64, now: SimTime) -> TcpActions {
        let mut actions = TcpActions::default();
        if self.pending.map(|p| p.token) != Some(token) {
            return actions;
        }
        self.pending = None;
        match self.deadline {
            None => actions,
            Some(d) if d > now => {
                self.arm_timer(d, &mut actions);
                actions
            }
            Some(_) => {
                self.deadline = None;
                self.on_timeout(now)
            }
        }
    }

    /// Retransmission timeout: collapse to one segment and go back to
    /// `snd_una`. No-op when nothing is outstanding.
    pub fn on_timeout(&mut self, now: SimTime) -> TcpActions {
        let mut actions = TcpActions::default();
        if self.high_tx == self.snd_una {
            return actions;
        }
        let mss = self.cfg.mss as u64;
        self.timeouts += 1;
        self.ssthresh = (self.cwnd / 2).max(2 * mss);
        self.cwnd = mss;
        self.state = CcState::SlowStart;
        self.dup_acks = 0;
        self.rto = (self.rto.saturating_mul(2)).min(self.cfg.max_rto);
        self.rtt_probe = None;
        self.snd_nxt = self.snd_una;
        self.fill_window(now, &mut actions);
        self.arm_timer(now + self.rto, &mut actions);
        actions
    }

    fn sample_rtt(&mut self, rtt: SimTime) {
        let r = rtt.as_micros() as f64;
        match self.srtt_us {
            None => {
                self.srtt_us = Some(r);
                self.rttvar_us = r / 2.0;
            }
            Some(srtt) => {
                self.rttvar_us = 0.75 * self.rttvar_us + 0.25 * (srtt - r).abs();
                self.srtt_us = Some(0.875 * srtt + 0.125 * r);
            }
        }
        let srtt = self.srtt_us.expect("set above");
        let rto_us = (srtt + (4.0 * self.rttvar_us).max(1_000.0)).ceil() as u64;
        self.rto = SimTime::from_micros(rto_us).clamp(self.cfg.min_rto, self.cfg.max_rto);
    }

    fn retransmit_head(&mut self, actions: &mut TcpActions) {
        let seq = self.snd_una;
        self.rtt_probe = None;
        self.retransmit_count += 1;
        self.segments_sent += 1;
        actions.segments.push(Segment {
            seq,
            len: self.cfg.mss,
            retransmission: true,
        });
    }

    fn fill_window(&mut self, now: SimTime, actions: &mut TcpActions) {
        let mss = self.cfg.mss as u64;
        while self.snd_nxt + mss <= self.snd_una + self.cwnd {
            let seq = self.snd_nxt;
            let retransmission = seq < self.high_tx;
            self.snd_nxt += mss;
            self.segments_sent += 1;
            if retransmission {
                self.retransmit_count += 1;
                self.rtt_probe = None;
            } else {
                self.high_tx = self.snd_nxt;
                if self.rtt_probe.is_none() {
                    self.rtt_probe = Some((self.snd_nxt, now));
                }
            }
            self.first_send_at.get_or_insert(now);
            actions.segments.push(Segment {
                seq,
                len: self.cfg.mss,
                retransmission,
            });
        }
        if self.deadline.is_none() && self.high_tx > self.snd_una {
            self.arm_timer(now + self.rto, actions);
        }
    }

    fn arm_timer(&mut self, at: SimTime, actions: &mut TcpActions) {
        self.deadline = Some(at);
        if self.pending.is_some_and(|p| p.at <= at) {
            return;
        }
        let req = TimerRequest {
            at,
            token: self.next_token,
        };
        self.next_token += 1;
        self.pending = Some(req);
        actions.timer = Some(req);
    }
}

/// Cumulative-ACK receiver with out-of-order buffering.
#[derive(Debug, Clone, Default)]
pub struct TcpReceiver {
    rcv_nxt: u64,
    out_of_order: BTreeMap<u64, u32>,
    delivered_bytes: u64,
    duplicate_segments: u64,
    last_delivery_at: Option<SimTime>,
    gap_violations: u64,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts a segment and returns the cumulative ACK to send back.
    pub fn on_segment(&mut self, seq: u64, len: u32, now: SimTime) -> u64 {
        let end = seq + len as u64;
        if end <= self.rcv_nxt {
            self.duplicate_segments += 1;
        } else if seq <= self.rcv_nxt {
            self.release(end, now);
            while let Some((&s, &l)) = self.out_of_order.first_key_value() {
                if s > self.rcv_nxt {
                    break;
                }
                self.out_of_order.pop_first();
                let e = s + l as u64;
                if e > self.rcv_nxt {
                    self.release(e, now);
                }
            }
        } else if self.out_of_order.insert(seq, len).is_some() {
            self.duplicate_segments += 1;
        }
        self.rcv_nxt
    }

    fn release(&mut self, new_end: u64, now: SimTime) {
        // Bytes are handed up strictly in order from rcv_nxt.
        let chunk_start = self.rcv_nxt;
        if new_end <= chunk_start {
            self.gap_violations += 1;
            return;
        }
        self.delivered_bytes += new_end - chunk_start;
        self.rcv_nxt = new_end;
        self.last_delivery_at = Some(now);
    }

    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    /// In-order payload bytes handed to the application.
    pub fn delivered_bytes(&self) -> u64 {
        self.delivered_bytes
    }

    pub fn duplicate_segments(&self) -> u64 {
        self.duplicate_segments
    }

    pub fn last_delivery_at(&self) -> Option<SimTime> {
        self.last_delivery_at
    }

    /// True when the delivered byte stream is exactly `[0, rcv_nxt)`.
    pub fn stream_is_gap_free(&self) -> bool {
        self.gap_violations == 0 && self.delivered_bytes == self.rcv_nxt
    }

    pub fn buffered_segments(&self) -> usize {
        self.out_of_order.len()
    }
}
