//! Structured-text scenario files.
//!
//! A file is TOML with top-level run keys, `[topology]`, `[bearers]` and
//! `[tcp]` sections of flat keys, and repeated `[[flow]]` / `[[tft]]`
//! tables. Every key is optional; omitted keys take the default cell
//! parameters (5 Mbit/s core, 4.4 Mbit/s cell, 3 ms radio latency, 1 ms TTI,
//! 11 000 B / 165 000 B bearer buffers). Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::net::{Dscp, FlowId, LinkSpec, Qci, Tft, UeId};
use crate::scenario::{Arm, FlowSpec, FlowType, ScenarioConfig, StartTime, StreamKind};
use crate::traffic::CbrProfile;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm: Option<Arm>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim_end_us: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llt_dscp: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ues: Option<i64>,
    #[serde(default)]
    pub topology: RawTopology,
    #[serde(default)]
    pub bearers: RawBearers,
    #[serde(default)]
    pub tcp: RawTcp,
    #[serde(default, rename = "flow", skip_serializing_if = "Vec::is_empty")]
    pub flows: Vec<RawFlow>,
    #[serde(default, rename = "tft", skip_serializing_if = "Vec::is_empty")]
    pub tfts: Vec<RawTft>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTopology {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sgi_rate_bps: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sgi_delay_us: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s5_rate_bps: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s5_delay_us: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s1_rate_bps: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s1_delay_us: Option<i64>,
    /// Shorthand setting both S1 and S5/S8 rates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core_rate_bps: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_rate_bps: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_latency_us: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tti_us: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pf_ewma_alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBearers {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qci7_capacity_bytes: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qci9_capacity_bytes: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTcp {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mss_bytes: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub header_bytes: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ack_bytes: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_cwnd_segments: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_ssthresh_bytes: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_rto_us: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_rto_us: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rto_us: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RawFlowType {
    Tcp,
    Cbr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawFlow {
    pub id: i64,
    pub ue: i64,
    #[serde(rename = "type")]
    pub kind: RawFlowType,
    /// Preset CBR profile; explicit size/rate keys override it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payload_bytes: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ip_bytes: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pps: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dscp: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_us: Option<i64>,
    /// When set, the start is drawn uniformly from `[start_us, start_max_us]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_max_us: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_us: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTft {
    pub ue: i64,
    pub dscp: i64,
    pub qci: i64,
}

fn parse_error(content: &str, err: toml::de::Error) -> ConfigError {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &content[..span.start.min(content.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    ConfigError::Parse {
        line,
        column,
        message: err.message().trim().to_string(),
    }
}

pub fn parse_raw(content: &str) -> Result<RawConfig, ConfigError> {
    toml::from_str(content).map_err(|e| parse_error(content, e))
}

pub fn parse_config(content: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw = parse_raw(content)?;
    let mut cfg = ScenarioConfig::default();
    raw.apply_to(&mut cfg)?;
    cfg.validate()
        .map_err(|e| ConfigError::Validation(e.to_string()))?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig, ConfigError> {
    parse_config(&read(path.as_ref())?)
}

pub fn load_raw(path: impl AsRef<Path>) -> Result<RawConfig, ConfigError> {
    parse_raw(&read(path.as_ref())?)
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn non_negative(field: &str, v: i64) -> Result<u64, ConfigError> {
    u64::try_from(v)
        .map_err(|_| ConfigError::Validation(format!("{field} must be non-negative, got {v}")))
}

fn small(field: &str, v: i64) -> Result<u32, ConfigError> {
    let v = non_negative(field, v)?;
    u32::try_from(v).map_err(|_| ConfigError::Validation(format!("{field} is too large: {v}")))
}

fn dscp(field: &str, v: i64) -> Result<Dscp, ConfigError> {
    u8::try_from(v)
        .ok()
        .and_then(Dscp::new)
        .ok_or_else(|| ConfigError::Validation(format!("{field} must be in 0..=63, got {v}")))
}

fn us(field: &str, v: i64) -> Result<SimTime, ConfigError> {
    non_negative(field, v).map(SimTime::from_micros)
}

macro_rules! set {
    ($target:expr, $value:expr, $conv:expr, $name:literal) => {
        if let Some(v) = $value {
            $target = $conv($name, v)?;
        }
    };
}

impl RawConfig {
    /// Overlays every key present in the file onto `cfg`. Flow and TFT
    /// lists replace the existing ones only when the file declares any.
    pub fn apply_to(&self, cfg: &mut ScenarioConfig) -> Result<(), ConfigError> {
        if let Some(n) = &self.name {
            cfg.name = n.clone();
        }
        if let Some(a) = self.arm {
            cfg.arm = a;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        set!(cfg.sim_end, self.sim_end_us, us, "sim_end_us");
        set!(cfg.llt_dscp, self.llt_dscp, dscp, "llt_dscp");
        set!(cfg.ues, self.ues, small, "ues");
        self.topology.apply_to(cfg)?;

        let b = &self.bearers;
        set!(
            cfg.bearers.qci7_capacity_bytes,
            b.qci7_capacity_bytes,
            non_negative,
            "bearers.qci7_capacity_bytes"
        );
        set!(
            cfg.bearers.qci9_capacity_bytes,
            b.qci9_capacity_bytes,
            non_negative,
            "bearers.qci9_capacity_bytes"
        );

        let t = &self.tcp;
        set!(cfg.tcp.mss, t.mss_bytes, small, "tcp.mss_bytes");
        set!(
            cfg.tcp.header_bytes,
            t.header_bytes,
            small,
            "tcp.header_bytes"
        );
        set!(cfg.tcp.ack_bytes, t.ack_bytes, small, "tcp.ack_bytes");
        set!(
            cfg.tcp.initial_cwnd_segments,
            t.initial_cwnd_segments,
            small,
            "tcp.initial_cwnd_segments"
        );
        set!(
            cfg.tcp.initial_ssthresh_bytes,
            t.initial_ssthresh_bytes,
            non_negative,
            "tcp.initial_ssthresh_bytes"
        );
        set!(
            cfg.tcp.initial_rto,
            t.initial_rto_us,
            us,
            "tcp.initial_rto_us"
        );
        set!(cfg.tcp.min_rto, t.min_rto_us, us, "tcp.min_rto_us");
        set!(cfg.tcp.max_rto, t.max_rto_us, us, "tcp.max_rto_us");

        if !self.flows.is_empty() {
            cfg.flows = self
                .flows
                .iter()
                .map(RawFlow::to_spec)
                .collect::<Result<_, _>>()?;
        }
        if !self.tfts.is_empty() {
            cfg.tfts = self
                .tfts
                .iter()
                .map(|t| {
                    Ok(Tft {
                        ue: UeId(small("tft.ue", t.ue)?),
                        match_dscp: dscp("tft.dscp", t.dscp)?,
                        target_qci: u8::try_from(t.qci)
                            .ok()
                            .and_then(|q| Qci::try_from(q).ok())
                            .ok_or_else(|| {
                                ConfigError::Validation(format!(
                                    "tft.qci must be 7 or 9, got {}",
                                    t.qci
                                ))
                            })?,
                    })
                })
                .collect::<Result<_, ConfigError>>()?;
        }
        Ok(())
    }

    /// Full description of `cfg`; parsing it back yields an equal config.
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        let t = &cfg.topology;
        let i = |v: u64| Some(v as i64);
        let time = |v: SimTime| Some(v.as_micros() as i64);
        RawConfig {
            name: Some(cfg.name.clone()),
            arm: Some(cfg.arm),
            seed: Some(cfg.seed),
            sim_end_us: time(cfg.sim_end),
            llt_dscp: Some(cfg.llt_dscp.value() as i64),
            ues: Some(cfg.ues as i64),
            topology: RawTopology {
                sgi_rate_bps: i(t.sgi.rate_bps),
                sgi_delay_us: time(t.sgi.prop_delay),
                s5_rate_bps: i(t.s5.rate_bps),
                s5_delay_us: time(t.s5.prop_delay),
                s1_rate_bps: i(t.s1.rate_bps),
                s1_delay_us: time(t.s1.prop_delay),
                core_rate_bps: None,
                cell_rate_bps: i(t.cell_rate_bps),
                baseline_latency_us: time(t.baseline_latency),
                tti_us: time(t.tti),
                pf_ewma_alpha: Some(t.pf_ewma_alpha),
            },
            bearers: RawBearers {
                qci7_capacity_bytes: i(cfg.bearers.qci7_capacity_bytes),
                qci9_capacity_bytes: i(cfg.bearers.qci9_capacity_bytes),
            },
            tcp: RawTcp {
                mss_bytes: i(cfg.tcp.mss as u64),
                header_bytes: i(cfg.tcp.header_bytes as u64),
                ack_bytes: i(cfg.tcp.ack_bytes as u64),
                initial_cwnd_segments: i(cfg.tcp.initial_cwnd_segments as u64),
                initial_ssthresh_bytes: i(cfg.tcp.initial_ssthresh_bytes),
                initial_rto_us: time(cfg.tcp.initial_rto),
                min_rto_us: time(cfg.tcp.min_rto),
                max_rto_us: time(cfg.tcp.max_rto),
            },
            flows: cfg.flows.iter().map(RawFlow::from_spec).collect(),
            tfts: cfg
                .tfts
                .iter()
                .map(|t| RawTft {
                    ue: t.ue.0 as i64,
                    dscp: t.match_dscp.value() as i64,
                    qci: t.target_qci.number() as i64,
                })
                .collect(),
        }
    }
}

impl RawTopology {
    fn apply_to(&self, cfg: &mut ScenarioConfig) -> Result<(), ConfigError> {
        let t = &mut cfg.topology;
        if let Some(r) = self.core_rate_bps {
            let r = non_negative("topology.core_rate_bps", r)?;
            t.set_core_rate(r);
        }
        let link = |spec: &mut LinkSpec, rate: Option<i64>, delay: Option<i64>, name: &str| {
            if let Some(r) = rate {
                spec.rate_bps = non_negative(&format!("topology.{name}_rate_bps"), r)?;
            }
            if let Some(d) = delay {
                spec.prop_delay = us(&format!("topology.{name}_delay_us"), d)?;
            }
            Ok::<_, ConfigError>(())
        };
        link(&mut t.sgi, self.sgi_rate_bps, self.sgi_delay_us, "sgi")?;
        link(&mut t.s5, self.s5_rate_bps, self.s5_delay_us, "s5")?;
        link(&mut t.s1, self.s1_rate_bps, self.s1_delay_us, "s1")?;
        set!(
            t.cell_rate_bps,
            self.cell_rate_bps,
            non_negative,
            "topology.cell_rate_bps"
        );
        set!(
            t.baseline_latency,
            self.baseline_latency_us,
            us,
            "topology.baseline_latency_us"
        );
        set!(t.tti, self.tti_us, us, "topology.tti_us");
        if let Some(a) = self.pf_ewma_alpha {
            t.pf_ewma_alpha = a;
        }
        Ok(())
    }
}

impl RawFlow {
    fn to_spec(&self) -> Result<FlowSpec, ConfigError> {
        let id = FlowId(small("flow.id", self.id)?);
        let start = match (self.start_us, self.start_max_us) {
            (lo, Some(hi)) => StartTime::Uniform {
                lo: us("flow.start_us", lo.unwrap_or(0))?,
                hi: us("flow.start_max_us", hi)?,
            },
            (lo, None) => StartTime::At(us("flow.start_us", lo.unwrap_or(0))?),
        };
        let kind = match self.kind {
            RawFlowType::Tcp => {
                if self.stream.is_some() || self.pps.is_some() || self.duration_us.is_some() {
                    return Err(ConfigError::Validation(format!(
                        "flow {id}: tcp flows take no stream, pps or duration keys"
                    )));
                }
                FlowType::Tcp
            }
            RawFlowType::Cbr => {
                let mut profile = self.stream.map(StreamKind::profile).unwrap_or(CbrProfile {
                    payload_bytes: 0,
                    pps: 0,
                    ip_bytes: 0,
                });
                set!(
                    profile.payload_bytes,
                    self.payload_bytes,
                    small,
                    "flow.payload_bytes"
                );
                set!(profile.ip_bytes, self.ip_bytes, small, "flow.ip_bytes");
                set!(profile.pps, self.pps, small, "flow.pps");
                let duration = us(
                    "flow.duration_us",
                    self.duration_us.ok_or_else(|| {
                        ConfigError::Validation(format!("flow {id}: cbr flows need duration_us"))
                    })?,
                )?;
                FlowType::Cbr { profile, duration }
            }
        };
        Ok(FlowSpec {
            id,
            ue: UeId(small("flow.ue", self.ue)?),
            kind,
            dscp: dscp("flow.dscp", self.dscp.unwrap_or(0))?,
            start,
        })
    }

    fn from_spec(spec: &FlowSpec) -> Self {
        let (start_us, start_max_us) = match spec.start {
            StartTime::At(t) => (Some(t.as_micros() as i64), None),
            StartTime::Uniform { lo, hi } => {
                (Some(lo.as_micros() as i64), Some(hi.as_micros() as i64))
            }
        };
        let mut raw = RawFlow {
            id: spec.id.0 as i64,
            ue: spec.ue.0 as i64,
            kind: RawFlowType::Tcp,
            stream: None,
            payload_bytes: None,
            ip_bytes: None,
            pps: None,
            dscp: Some(spec.dscp.value() as i64),
            start_us,
            start_max_us,
            duration_us: None,
        };
        if let FlowType::Cbr { profile, duration } = spec.kind {
            raw.kind = RawFlowType::Cbr;
            raw.payload_bytes = Some(profile.payload_bytes as i64);
            raw.ip_bytes = Some(profile.ip_bytes as i64);
            raw.pps = Some(profile.pps as i64);
            raw.duration_us = Some(duration.as_micros() as i64);
        }
        raw
    }
}

/// Serializes a config to the file format.
pub fn to_config_string(cfg: &ScenarioConfig) -> String {
    toml::to_string(&RawConfig::from_config(cfg)).expect("config types always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_exp1, build_exp2, build_exp3};

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.topology.s5.rate_bps, 5_000_000);
        assert_eq!(cfg.topology.s1.rate_bps, 5_000_000);
        assert_eq!(cfg.topology.sgi.rate_bps, 10_000_000_000);
        assert_eq!(cfg.topology.sgi.prop_delay, SimTime::from_millis(1));
        assert_eq!(cfg.topology.cell_rate_bps, 4_400_000);
        assert_eq!(cfg.topology.baseline_latency, SimTime::from_millis(3));
        assert_eq!(cfg.bearers.qci7_capacity_bytes, 11_000);
        assert_eq!(cfg.bearers.qci9_capacity_bytes, 165_000);
    }

    #[test]
    fn core_rate_override() {
        let cfg = parse_config("[topology]\ncore_rate_bps = 50_000_000\n").unwrap();
        assert_eq!(cfg.topology.s5.rate_bps, 50_000_000);
        assert_eq!(cfg.topology.s1.rate_bps, 50_000_000);
        let exp3 = build_exp3(StreamKind::Audio, 0).unwrap();
        assert_eq!(cfg.topology, exp3.topology);
    }

    #[test]
    fn negative_rate_is_a_validation_error() {
        let err = parse_config("[topology]\ns1_rate_bps = -5\n").unwrap_err();
        assert!(
            matches!(err, ConfigError::Validation(ref m) if m.contains("s1_rate_bps")),
            "{err}"
        );
    }

    #[test]
    fn zero_rate_is_a_validation_error() {
        let err = parse_config("[topology]\ns5_rate_bps = 0\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config("seed = 3\n[bearers]\nqci8_capacity_bytes = 10\n").unwrap_err();
        match err {
            ConfigError::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("qci8_capacity_bytes"), "{message}");
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn flows_from_file() {
        let text = r#"
ues = 2
[[flow]]
id = 0
ue = 0
type = "tcp"

[[flow]]
id = 1
ue = 1
type = "cbr"
stream = "audio"
dscp = 1
start_us = 1_000_000
start_max_us = 3_000_000
duration_us = 10_000_000

[[tft]]
ue = 1
dscp = 1
qci = 7
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.flows.len(), 2);
        assert_eq!(
            cfg.flows[1].kind,
            FlowType::Cbr {
                profile: CbrProfile::AUDIO,
                duration: SimTime::from_secs(10)
            }
        );
        assert_eq!(cfg.flow_qci(&cfg.flows[1]), Qci::Qci7);
    }

    #[test]
    fn flow_on_missing_ue_rejected() {
        let text = "ues = 1\n[[flow]]\nid = 0\nue = 4\ntype = \"tcp\"\n";
        assert!(matches!(
            parse_config(text),
            Err(ConfigError::Validation(_))
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_config("/nonexistent/scenario.toml"),
            Err(ConfigError::Io { .. })
        ));
    }

    #[test]
    fn builders_round_trip() {
        let cfgs = [
            build_exp1(false, StreamKind::Audio),
            build_exp1(true, StreamKind::Video),
            build_exp2(true),
            build_exp3(StreamKind::Audio, 7).unwrap(),
        ];
        for cfg in cfgs {
            let text = to_config_string(&cfg);
            assert_eq!(parse_config(&text).unwrap(), cfg, "{text}");
        }
    }
}
