//! Constant-bit-rate UDP source and timestamping sink.

use serde::{Deserialize, Serialize};

use super::TrafficError;
use crate::engine::SimTime;
use crate::net::{Dscp, FlowId, Packet, PacketKind, UeId};

/// Stream shape: application payload, packet rate and the resulting
/// IP-layer packet size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CbrProfile {
    pub payload_bytes: u32,
    pub pps: u32,
    pub ip_bytes: u32,
}

impl CbrProfile {
    /// 160 B @ 50 pps: 64 kbit/s payload, 80 kbit/s at the IP layer.
    pub const AUDIO: CbrProfile = CbrProfile {
        payload_bytes: 160,
        pps: 50,
        ip_bytes: 200,
    };
    /// 100 B @ 400 pps: 320 kbit/s payload, 352 kbit/s at the IP layer.
    pub const VIDEO: CbrProfile = CbrProfile {
        payload_bytes: 100,
        pps: 400,
        ip_bytes: 110,
    };

    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.pps == 0 || self.payload_bytes == 0 || self.ip_bytes == 0 {
            return Err(TrafficError::BadProfile(*self));
        }
        if self.ip_bytes < self.payload_bytes || self.ip_bytes > 1500 {
            return Err(TrafficError::BadProfile(*self));
        }
        Ok(())
    }

    pub fn payload_bps(&self) -> u64 {
        self.payload_bytes as u64 * 8 * self.pps as u64
    }

    pub fn ip_bps(&self) -> u64 {
        self.ip_bytes as u64 * 8 * self.pps as u64
    }
}

#[derive(Debug, Clone)]
pub struct CbrSource {
    pub flow: FlowId,
    pub ue: UeId,
    pub profile: CbrProfile,
    pub start_at: SimTime,
    pub duration: SimTime,
    dscp: Dscp,
    started: bool,
}

impl CbrSource {
    pub fn new(
        flow: FlowId,
        ue: UeId,
        profile: CbrProfile,
        start_at: SimTime,
        duration: SimTime,
    ) -> Self {
        Self {
            flow,
            ue,
            profile,
            start_at,
            duration,
            dscp: Dscp::DEFAULT,
            started: false,
        }
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

    pub fn mark_started(&mut self) {
        self.started = true;
    }

    pub fn packet_count(&self) -> u64 {
        self.duration.as_micros() * self.profile.pps as u64 / 1_000_000
    }

    /// Emission instant of the k-th packet: `start + floor(k * 1e6 / pps)` µs,
    /// so spacing errors never accumulate when `pps` does not divide 10^6.
    pub fn emission_time(&self, k: u64) -> SimTime {
        self.start_at + SimTime::from_micros(k * 1_000_000 / self.profile.pps as u64)
    }

    /// The k-th packet, stamped with its emission time and the current marking.
    pub fn packet(&self, k: u64) -> Packet {
        Packet {
            id: packet_id(self.flow, k),
            flow: self.flow,
            ue: self.ue,
            size_bytes: self.profile.ip_bytes,
            dscp: self.dscp,
            kind: PacketKind::UdpCbr,
            seq: k,
            payload_bytes: self.profile.payload_bytes,
            created_at: self.emission_time(k),
            delivered_at: None,
        }
    }

    pub fn emit_schedule(&self) -> Result<Vec<(SimTime, Packet)>, TrafficError> {
        self.profile.validate()?;
        Ok((0..self.packet_count())
            .map(|k| (self.emission_time(k), self.packet(k)))
            .collect())
    }
}

pub(crate) fn packet_id(flow: FlowId, n: u64) -> u64 {
    ((flow.0 as u64) << 40) | n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CbrRecord {
    pub seq: u64,
    pub created_at: SimTime,
    pub delivered_at: SimTime,
}

impl CbrRecord {
    pub fn delay(&self) -> SimTime {
        self.delivered_at - self.created_at
    }
}

#[derive(Debug, Clone, Default)]
pub struct CbrSink {
    log: Vec<CbrRecord>,
    bytes: u64,
}

impl CbrSink {
    pub fn receive(&mut self, pkt: &Packet) {
        let delivered_at = pkt.delivered_at.expect("sink packets are stamped");
        debug_assert!(self
            .log
            .last()
            .is_none_or(|r| r.delivered_at <= delivered_at));
        self.log.push(CbrRecord {
            seq: pkt.seq,
            created_at: pkt.created_at,
            delivered_at,
        });
        self.bytes += pkt.payload_bytes as u64;
    }

    pub fn log(&self) -> &[CbrRecord] {
        &self.log
    }

    pub fn payload_bytes(&self) -> u64 {
        self.bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn src(profile: CbrProfile, dur: SimTime) -> CbrSource {
        CbrSource::new(FlowId(1), UeId(0), profile, SimTime::from_secs(1), dur)
    }

    #[test]
    fn audio_schedule() {
        let s = src(CbrProfile::AUDIO, SimTime::from_secs(10));
        let sched = s.emit_schedule().unwrap();
        assert_eq!(sched.len(), 500);
        assert_eq!(sched[0].0, SimTime::from_secs(1));
        for w in sched.windows(2) {
            assert_eq!(w[1].0 - w[0].0, SimTime::from_micros(20_000));
        }
        assert_eq!(CbrProfile::AUDIO.payload_bps(), 64_000);
        assert_eq!(CbrProfile::AUDIO.ip_bps(), 80_000);
    }

    #[test]
    fn video_schedule() {
        let s = src(CbrProfile::VIDEO, SimTime::from_secs(10));
        let sched = s.emit_schedule().unwrap();
        assert_eq!(sched.len(), 4_000);
        for w in sched.windows(2) {
            assert_eq!(w[1].0 - w[0].0, SimTime::from_micros(2_500));
        }
        assert_eq!(CbrProfile::VIDEO.payload_bps(), 320_000);
        assert_eq!(CbrProfile::VIDEO.ip_bps(), 352_000);
    }

    #[test]
    fn zero_duration_is_empty() {
        assert!(src(CbrProfile::AUDIO, SimTime::ZERO)
            .emit_schedule()
            .unwrap()
            .is_empty());
    }

    #[test]
    fn non_dividing_rate_has_no_drift() {
        let p = CbrProfile {
            payload_bytes: 100,
            pps: 3,
            ip_bytes: 128,
        };
        let sched = src(p, SimTime::from_secs(2)).emit_schedule().unwrap();
        let offsets: Vec<u64> = sched
            .iter()
            .map(|(t, _)| t.as_micros() - 1_000_000)
            .collect();
        assert_eq!(
            offsets,
            vec![0, 333_333, 666_666, 1_000_000, 1_333_333, 1_666_666]
        );
    }

    #[test]
    fn bad_profiles_rejected() {
        for p in [
            CbrProfile {
                pps: 0,
                ..CbrProfile::AUDIO
            },
            CbrProfile {
                payload_bytes: 0,
                ..CbrProfile::AUDIO
            },
            CbrProfile {
                ip_bytes: 0,
                ..CbrProfile::AUDIO
            },
        ] {
            assert!(matches!(
                src(p, SimTime::from_secs(1)).emit_schedule(),
                Err(TrafficError::BadProfile(_))
            ));
        }
    }

    #[test]
    fn marking_only_touches_dscp() {
        let plain = src(CbrProfile::AUDIO, SimTime::from_secs(10));
        let mut marked = plain.clone();
        marked.set_marking(Dscp::LLT).unwrap();
        let a = plain.emit_schedule().unwrap();
        let b = marked.emit_schedule().unwrap();
        assert_eq!(a.len(), b.len());
        for ((ta, pa), (tb, pb)) in a.iter().zip(&b) {
            assert_eq!(ta, tb);
            assert_eq!(pb.dscp, Dscp::LLT);
            assert_eq!(
                Packet {
                    dscp: pb.dscp,
                    ..pa.clone()
                },
                *pb
            );
        }
    }

    #[test]
    fn marking_after_start_fails() {
        let mut s = src(CbrProfile::AUDIO, SimTime::from_secs(10));
        s.mark_started();
        assert_eq!(
            s.set_marking(Dscp::LLT),
            Err(TrafficError::FlowStarted(FlowId(1)))
        );
    }
}
