//! Experiment configuration: structured text config with `[phy]`, `[net]`,
//! `[flows]`, `[scheduler]` and `[output]` sections, CLI-style overrides, and
//! the resolved, hashable run specification.
//!
//! Conventional units appear only here: dBm for powers, microseconds for the
//! slot, bytes for the packet. Everything downstream runs on milliwatts,
//! seconds and bits.

use std::path::PathBuf;

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{dbm_to_mw, ModelError, NodeId, PhyConfig, RateTable};
use crate::scalar::Float;
use crate::topology::GatewayMode;
use crate::weights::Policy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config field {field}: {reason}")]
    Field { field: &'static str, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("unknown policy {0}")]
    Policy(String),
}

fn field_err(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field,
        reason: reason.into(),
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub phy: RawPhy,
    #[serde(default)]
    pub net: RawNet,
    #[serde(default)]
    pub flows: RawFlows,
    #[serde(default)]
    pub scheduler: RawScheduler,
    #[serde(default)]
    pub output: RawOutput,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawPhy {
    pub noise_dbm: f64,
    pub max_power_dbm: f64,
    pub path_loss_exponent: f64,
    pub reference_distance_m: f64,
    pub slot_us: f64,
    pub packet_bytes: u64,
    /// Optional rate-table override: `[mbps, threshold_db]` pairs, highest
    /// rate first.
    pub rate_table: Option<Vec<[f64; 2]>>,
}

impl Default for RawPhy {
    fn default() -> Self {
        Self {
            noise_dbm: -90.0,
            max_power_dbm: 20.0,
            path_loss_exponent: 3.0,
            reference_distance_m: 10.0,
            slot_us: 625.0,
            packet_bytes: 1470,
            rate_table: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawNet {
    pub nodes: usize,
    pub area_m: f64,
    pub seed: u64,
    pub slots: u64,
    /// "max-distance" or an explicit id list.
    pub gateways: GatewaySpec,
    pub topology_file: Option<PathBuf>,
}

impl Default for RawNet {
    fn default() -> Self {
        Self {
            nodes: 10,
            area_m: 350.0,
            seed: 1,
            slots: 10_000,
            gateways: GatewaySpec::default(),
            topology_file: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GatewaySpec {
    Mode(String),
    Ids(Vec<u32>),
}

impl Default for GatewaySpec {
    fn default() -> Self {
        GatewaySpec::Mode("max-distance".to_string())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawFlows {
    /// "first" (lowest non-gateway node ids), "random", or "explicit".
    pub mode: String,
    pub count: usize,
    pub sources: Option<Vec<u32>>,
    pub v: f64,
    pub max_rate: f64,
}

impl Default for RawFlows {
    fn default() -> Self {
        Self {
            mode: "first".to_string(),
            count: 8,
            sources: None,
            v: 30.0,
            max_rate: 10.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawScheduler {
    pub policy: String,
    /// Schedules built per slot; defaults to one more than the gateway count.
    pub schedules: Option<usize>,
    pub channels: usize,
    pub radios: usize,
}

impl Default for RawScheduler {
    fn default() -> Self {
        Self {
            policy: "W".to_string(),
            schedules: None,
            channels: 1,
            radios: 1,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RawOutput {
    pub dir: PathBuf,
    pub trace: bool,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trace: false,
        }
    }
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }
}

/// Values a front end may override on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub policy: Option<Policy>,
    pub seed: Option<u64>,
    pub slots: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub channels: Option<usize>,
    pub schedules: Option<usize>,
    pub trace: Option<bool>,
}

/// How flow sources are chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowMode {
    /// The lowest `count` non-gateway node ids.
    FirstNonGateway { count: usize },
    /// `count` distinct non-gateway nodes drawn with the run seed.
    Random { count: usize },
    Explicit(Vec<NodeId>),
}

/// Fully resolved, validated run description. Every run is reproducible from
/// this value alone; `config_hash` fingerprints it for the output manifests.
#[derive(Clone, Debug)]
pub struct RunSpec<F: Float = f64> {
    pub phy: PhyConfig<F>,
    pub rates: RateTable<F>,
    pub nodes: usize,
    pub area_side_m: F,
    pub seed: u64,
    pub slots: u64,
    pub topology_file: Option<PathBuf>,
    pub gateway_mode: GatewayMode,
    pub flow_mode: FlowMode,
    pub v_param: F,
    pub max_rate_pkts: F,
    pub policy: Policy,
    pub num_schedules: Option<usize>,
    pub channels: usize,
    pub radios: usize,
    pub trace: bool,
    pub out_dir: PathBuf,
}

impl<F: Float> RunSpec<F> {
    pub fn resolve(raw: &RawConfig, overrides: &Overrides) -> Result<Self, ConfigError> {
        let phy = PhyConfig::new(
            dbm_to_mw(F::of(raw.phy.noise_dbm)),
            dbm_to_mw(F::of(raw.phy.max_power_dbm)),
            F::of(raw.phy.path_loss_exponent),
            F::of(raw.phy.reference_distance_m),
            F::of(raw.phy.slot_us * 1e-6),
            F::of(raw.phy.packet_bytes as f64 * 8.0),
        )?;
        let rates = match &raw.phy.rate_table {
            None => RateTable::default(),
            Some(pairs) => {
                let pairs: Vec<(F, F)> = pairs
                    .iter()
                    .map(|&[mbps, db]| (F::of(mbps * 1e6), F::of(db)))
                    .collect();
                RateTable::new(&pairs)?
            }
        };

        if raw.net.nodes < 4 {
            return Err(field_err("net.nodes", "need at least 4 nodes"));
        }
        if raw.net.area_m <= 0.0 {
            return Err(field_err("net.area_m", "must be positive"));
        }

        let gateway_mode = match &raw.net.gateways {
            GatewaySpec::Mode(s) if s == "max-distance" => GatewayMode::MaxDistancePair,
            GatewaySpec::Mode(s) => {
                return Err(field_err(
                    "net.gateways",
                    format!("unknown mode {s:?}; expected \"max-distance\" or an id list"),
                ))
            }
            GatewaySpec::Ids(ids) => {
                GatewayMode::Explicit(ids.iter().map(|&i| NodeId(i)).collect())
            }
        };

        let flow_mode = match raw.flows.mode.as_str() {
            "first" => FlowMode::FirstNonGateway {
                count: raw.flows.count,
            },
            "random" => FlowMode::Random {
                count: raw.flows.count,
            },
            "explicit" => {
                let sources = raw.flows.sources.clone().ok_or_else(|| {
                    field_err("flows.sources", "required when flows.mode = \"explicit\"")
                })?;
                FlowMode::Explicit(sources.into_iter().map(NodeId).collect())
            }
            other => {
                return Err(field_err(
                    "flows.mode",
                    format!("unknown mode {other:?}; expected first, random or explicit"),
                ))
            }
        };
        if raw.flows.v <= 0.0 {
            return Err(field_err("flows.v", "must be positive"));
        }
        if raw.flows.max_rate <= 0.0 {
            return Err(field_err("flows.max_rate", "must be positive"));
        }

        let policy = match &overrides.policy {
            Some(p) => *p,
            None => raw
                .scheduler
                .policy
                .parse()
                .map_err(|_| ConfigError::Policy(raw.scheduler.policy.clone()))?,
        };
        let channels = overrides.channels.unwrap_or(raw.scheduler.channels);
        let radios = if overrides.channels.is_some() && raw.scheduler.radios < channels {
            // Channel overrides imply the matching radio count.
            channels
        } else {
            raw.scheduler.radios
        };
        if channels == 0 {
            return Err(field_err("scheduler.channels", "must be at least 1"));
        }

        Ok(Self {
            phy,
            rates,
            nodes: raw.net.nodes,
            area_side_m: F::of(raw.net.area_m),
            seed: overrides.seed.unwrap_or(raw.net.seed),
            slots: overrides.slots.unwrap_or(raw.net.slots),
            topology_file: raw.net.topology_file.clone(),
            gateway_mode,
            flow_mode,
            v_param: F::of(raw.flows.v),
            max_rate_pkts: F::of(raw.flows.max_rate),
            policy,
            num_schedules: overrides.schedules.or(raw.scheduler.schedules),
            channels,
            radios,
            trace: overrides.trace.unwrap_or(raw.output.trace),
            out_dir: overrides
                .out_dir
                .clone()
                .unwrap_or_else(|| raw.output.dir.clone()),
        })
    }

    /// The default experiment: 10 nodes in a 350 m square, max-distance
    /// gateway pair, 8 flows from the lowest non-gateway ids, 10^4 slots.
    pub fn default_experiment() -> Self {
        Self::resolve(&RawConfig::default(), &Overrides::default())
            .expect("default config is valid")
    }

    /// Short label used in output file names: policy, size, seed, slots and
    /// (when multi-channel) the channel count.
    pub fn run_label(&self) -> String {
        let mut label = format!(
            "{}_n{}_seed{}_t{}",
            self.policy, self.nodes, self.seed, self.slots
        );
        if self.channels > 1 {
            label.push_str(&format!("_c{}", self.channels));
        }
        label
    }

    /// Canonical serialization of everything that determines results.
    fn canonical_string(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let phy = &self.phy;
        let _ = writeln!(s, "noise_mw={:e}", phy.noise_mw.as_f64());
        let _ = writeln!(s, "max_power_mw={:e}", phy.max_power_mw.as_f64());
        let _ = writeln!(s, "alpha={:e}", phy.path_loss_exponent.as_f64());
        let _ = writeln!(s, "d0_m={:e}", phy.reference_distance_m.as_f64());
        let _ = writeln!(s, "slot_s={:e}", phy.slot_seconds.as_f64());
        let _ = writeln!(s, "packet_bits={:e}", phy.packet_bits.as_f64());
        let rates: Vec<String> = self
            .rates
            .entries()
            .iter()
            .map(|e| format!("{:e}:{:e}", e.rate_bps.as_f64(), e.threshold_db.as_f64()))
            .collect();
        let _ = writeln!(s, "rates={}", rates.join(","));
        let _ = writeln!(s, "nodes={}", self.nodes);
        let _ = writeln!(s, "area_m={:e}", self.area_side_m.as_f64());
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "slots={}", self.slots);
        let _ = writeln!(
            s,
            "topology_file={}",
            self.topology_file
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "none".to_string())
        );
        let gw = match &self.gateway_mode {
            GatewayMode::MaxDistancePair => "max-distance".to_string(),
            GatewayMode::Explicit(ids) => ids
                .iter()
                .map(|id| id.0.to_string())
                .collect::<Vec<_>>()
                .join(","),
        };
        let _ = writeln!(s, "gateways={gw}");
        let fm = match &self.flow_mode {
            FlowMode::FirstNonGateway { count } => format!("first:{count}"),
            FlowMode::Random { count } => format!("random:{count}"),
            FlowMode::Explicit(ids) => format!(
                "explicit:{}",
                ids.iter()
                    .map(|id| id.0.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
        };
        let _ = writeln!(s, "flows={fm}");
        let _ = writeln!(s, "v={:e}", self.v_param.as_f64());
        let _ = writeln!(s, "max_rate={:e}", self.max_rate_pkts.as_f64());
        let _ = writeln!(s, "policy={}", self.policy);
        let _ = writeln!(
            s,
            "schedules={}",
            self.num_schedules
                .map(|m| m.to_string())
                .unwrap_or_else(|| "auto".to_string())
        );
        let _ = writeln!(s, "channels={}", self.channels);
        let _ = writeln!(s, "radios={}", self.radios);
        s
    }

    /// Hex SHA-256 fingerprint of the resolved configuration (first 16
    /// characters).
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        hex[..16].to_string()
    }
}
