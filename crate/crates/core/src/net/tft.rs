//! Traffic flow templates: per-UE DSCP match rules selecting a bearer.

use serde::{Deserialize, Serialize};

use super::packet::{Dscp, Packet, Qci, UeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tft {
    pub ue: UeId,
    pub match_dscp: Dscp,
    pub target_qci: Qci,
}

/// Returns the bearer for `packet`: the first TFT matching its `(ue, dscp)`,
/// otherwise `default_qci`.
pub fn classify(packet: &Packet, tfts: &[Tft], default_qci: Qci) -> Qci {
    tfts.iter()
        .find(|t| t.ue == packet.ue && t.match_dscp == packet.dscp)
        .map_or(default_qci, |t| t.target_qci)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ue {ue} already has a TFT for dscp {dscp}")]
pub struct DuplicateTft {
    pub ue: UeId,
    pub dscp: u8,
}

/// The eNodeB's installed TFT set; at most one rule per `(ue, dscp)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TftTable {
    rules: Vec<Tft>,
}

impl TftTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rules(rules: &[Tft]) -> Result<Self, DuplicateTft> {
        let mut table = Self::new();
        for r in rules {
            table.install(*r)?;
        }
        Ok(table)
    }

    pub fn install(&mut self, tft: Tft) -> Result<(), DuplicateTft> {
        if self
            .rules
            .iter()
            .any(|t| t.ue == tft.ue && t.match_dscp == tft.match_dscp)
        {
            return Err(DuplicateTft {
                ue: tft.ue,
                dscp: tft.match_dscp.value(),
            });
        }
        self.rules.push(tft);
        Ok(())
    }

    pub fn remove(&mut self, ue: UeId, dscp: Dscp) -> Option<Tft> {
        let idx = self
            .rules
            .iter()
            .position(|t| t.ue == ue && t.match_dscp == dscp)?;
        Some(self.rules.remove(idx))
    }

    pub fn rules(&self) -> &[Tft] {
        &self.rules
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn classify(&self, packet: &Packet) -> Qci {
        classify(packet, &self.rules, Qci::Qci9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimTime;
    use crate::net::packet::{FlowId, PacketKind};

    fn pkt(ue: u32, dscp: Dscp) -> Packet {
        Packet {
            id: 0,
            flow: FlowId(0),
            ue: UeId(ue),
            size_bytes: 200,
            dscp,
            kind: PacketKind::UdpCbr,
            seq: 0,
            payload_bytes: 0,
            created_at: SimTime::ZERO,
            delivered_at: None,
        }
    }

    fn llt_rule(ue: u32) -> Tft {
        Tft {
            ue: UeId(ue),
            match_dscp: Dscp::LLT,
            target_qci: Qci::Qci7,
        }
    }

    #[test]
    fn marked_packet_hits_low_latency_bearer() {
        let tfts = [llt_rule(0)];
        assert_eq!(classify(&pkt(0, Dscp::LLT), &tfts, Qci::Qci9), Qci::Qci7);
    }

    #[test]
    fn unmarked_falls_to_default() {
        let tfts = [llt_rule(0), llt_rule(1)];
        assert_eq!(
            classify(&pkt(0, Dscp::DEFAULT), &tfts, Qci::Qci9),
            Qci::Qci9
        );
    }

    #[test]
    fn no_tfts_means_default_bearer() {
        assert_eq!(classify(&pkt(0, Dscp::LLT), &[], Qci::Qci9), Qci::Qci9);
    }

    #[test]
    fn tft_is_per_ue() {
        let tfts = [llt_rule(1)];
        assert_eq!(classify(&pkt(0, Dscp::LLT), &tfts, Qci::Qci9), Qci::Qci9);
        assert_eq!(classify(&pkt(1, Dscp::LLT), &tfts, Qci::Qci9), Qci::Qci7);
    }

    #[test]
    fn install_then_remove_restores_default() {
        let mut table = TftTable::new();
        let p = pkt(3, Dscp::LLT);
        let before = table.classify(&p);
        table.install(llt_rule(3)).unwrap();
        assert_eq!(table.classify(&p), Qci::Qci7);
        assert_eq!(table.classify(&p), Qci::Qci7);
        table.remove(UeId(3), Dscp::LLT).unwrap();
        assert_eq!(table.classify(&p), before);
    }

    #[test]
    fn duplicate_rule_rejected() {
        let mut table = TftTable::new();
        table.install(llt_rule(0)).unwrap();
        assert!(table.install(llt_rule(0)).is_err());
    }
}
