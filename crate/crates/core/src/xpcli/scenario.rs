use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airlink::StbcLayout;
use crate::receivers::{CombinerMode, RlsParams};

/// Receiver algorithms the harness can run side by side on the same data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ccm,
    Cmv,
    Trained,
    Mmse,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Ccm, Algorithm::Cmv, Algorithm::Trained, Algorithm::Mmse];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Ccm => "ccm",
            Algorithm::Cmv => "cmv",
            Algorithm::Trained => "trained",
            Algorithm::Mmse => "mmse",
        }
    }

    pub fn is_blind(self) -> bool {
        matches!(self, Algorithm::Ccm | Algorithm::Cmv)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.label().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Channel vector handed to the blind receivers' constraints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelEstimate {
    /// Tracked blindly from the receiver statistics.
    #[default]
    Blind,
    /// The true channel (genie).
    Ideal,
}

/// A single value or a list, accepted interchangeably in scenario files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Users entering the system at a given symbol, with a new interferer power spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicEvent {
    pub symbol_index: usize,
    pub users_added: usize,
    pub new_spread_db: f64,
}

/// Complete description of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "K", default = "defaults::users")]
    pub users: usize,
    #[serde(rename = "N", default = "defaults::chips")]
    pub chips: usize,
    #[serde(rename = "Nt", default = "defaults::tx")]
    pub tx_antennas: usize,
    #[serde(rename = "Nr", default = "defaults::rx")]
    pub rx_antennas: usize,
    #[serde(rename = "Lp", default = "defaults::lp")]
    pub lp: usize,
    /// Symbols per packet.
    #[serde(rename = "P", default = "defaults::packet")]
    pub packet: usize,
    #[serde(default = "defaults::snr")]
    pub snr_db: OneOrMany<f64>,
    /// Sweep over the user count; when present each point uses the first SNR value.
    #[serde(rename = "K_sweep", default, skip_serializing_if = "Option::is_none")]
    pub users_sweep: Option<Vec<usize>>,
    #[serde(rename = "fdT", default)]
    pub fdt: f64,
    #[serde(default = "defaults::profile")]
    pub power_profile_db: Vec<f64>,
    #[serde(default = "defaults::spread")]
    pub interferer_spread_db: f64,
    #[serde(default = "defaults::nu")]
    pub nu: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    /// Power of the subspace estimator used by `analyze`.
    #[serde(default = "defaults::power")]
    pub p: u32,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    #[serde(default = "defaults::modes")]
    pub receiver_mode: OneOrMany<Algorithm>,
    #[serde(default = "defaults::combiner")]
    pub combiner: CombinerMode,
    #[serde(default)]
    pub channel_estimate: ChannelEstimate,
    #[serde(default)]
    pub dynamic_events: Vec<DynamicEvent>,
    /// Window length, in symbols, of BER-versus-symbol curves.
    #[serde(default = "defaults::window")]
    pub ber_window: usize,
    /// First symbol counted in the BER of SNR and K sweeps; earlier symbols
    /// are left to the blind acquisition.
    #[serde(default)]
    pub ber_from_symbol: usize,
    #[serde(default = "defaults::trials")]
    pub trials: usize,
    #[serde(default = "defaults::seed")]
    pub base_seed: u64,
}

mod defaults {
    use super::{Algorithm, OneOrMany};
    use crate::receivers::CombinerMode;

    pub fn users() -> usize {
        4
    }
    pub fn chips() -> usize {
        16
    }
    pub fn tx() -> usize {
        2
    }
    pub fn rx() -> usize {
        1
    }
    pub fn lp() -> usize {
        6
    }
    pub fn packet() -> usize {
        1000
    }
    pub fn snr() -> OneOrMany<f64> {
        OneOrMany::One(15.0)
    }
    pub fn profile() -> Vec<f64> {
        vec![0.0, -3.0, -6.0]
    }
    pub fn spread() -> f64 {
        3.0
    }
    pub fn nu() -> f64 {
        1.0
    }
    pub fn alpha() -> f64 {
        0.998
    }
    pub fn power() -> u32 {
        2
    }
    pub fn delta() -> f64 {
        0.01
    }
    pub fn modes() -> OneOrMany<Algorithm> {
        OneOrMany::Many(vec![Algorithm::Ccm, Algorithm::Cmv])
    }
    pub fn combiner() -> CombinerMode {
        CombinerMode::Mrc
    }
    pub fn window() -> usize {
        100
    }
    pub fn trials() -> usize {
        50
    }
    pub fn seed() -> u64 {
        1
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

/// One offending field of a scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<FieldError>),
}

impl ScenarioConfig {
    pub fn layout(&self) -> StbcLayout {
        StbcLayout::from_tx_antennas(self.tx_antennas).unwrap_or(StbcLayout::Alamouti)
    }

    pub fn algorithms(&self) -> Vec<Algorithm> {
        let mut algos = self.receiver_mode.to_vec();
        algos.sort();
        algos.dedup();
        algos
    }

    pub fn snr_points(&self) -> Vec<f64> {
        self.snr_db.to_vec()
    }

    pub fn rls_params(&self) -> RlsParams {
        RlsParams {
            nu: self.nu,
            alpha: self.alpha,
            delta: self.delta,
        }
    }

    /// Largest user count reached during a packet.
    pub fn peak_users(&self) -> usize {
        self.users + self.dynamic_events.iter().map(|e| e.users_added).sum::<usize>()
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut errs = Vec::new();
        let mut bad = |field: &str, message: String| {
            errs.push(FieldError {
                field: field.to_string(),
                message,
            })
        };
        if self.users == 0 {
            bad("K", "need at least one user".into());
        }
        if self.chips < 2 {
            bad("N", format!("spreading gain {} must be ≥ 2", self.chips));
        }
        if !(1..=2).contains(&self.tx_antennas) {
            bad("Nt", format!("{} transmit antennas; only 1 or 2 are supported", self.tx_antennas));
        }
        if !(1..=2).contains(&self.rx_antennas) {
            bad("Nr", format!("{} receive antennas; only 1 or 2 are supported", self.rx_antennas));
        }
        if self.lp == 0 || self.lp > self.chips + 1 {
            bad("Lp", format!("channel order {} must lie in 1..=N+1", self.lp));
        }
        if self.packet < 2 || self.packet % 2 != 0 {
            bad("P", format!("packet length {} must be even and ≥ 2", self.packet));
        }
        let snr = self.snr_points();
        if snr.is_empty() || snr.iter().any(|s| !s.is_finite()) {
            bad("snr_db", "need one or more finite values".into());
        }
        if let Some(sweep) = &self.users_sweep {
            if sweep.is_empty() || sweep.contains(&0) {
                bad("K_sweep", "need one or more positive user counts".into());
            }
        }
        if !(self.fdt >= 0.0) || !self.fdt.is_finite() {
            bad("fdT", format!("normalized Doppler {} must be finite and ≥ 0", self.fdt));
        }
        if self.power_profile_db.is_empty() || self.power_profile_db.len() > self.lp.max(1) {
            bad("power_profile_db", format!("need between 1 and Lp = {} path powers", self.lp));
        } else if self.power_profile_db.iter().any(|p| !p.is_finite()) {
            bad("power_profile_db", "path powers must be finite".into());
        }
        if !(self.interferer_spread_db >= 0.0) || !self.interferer_spread_db.is_finite() {
            bad("interferer_spread_db", "must be finite and ≥ 0".into());
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            bad("nu", format!("constraint scale {} must be > 0", self.nu));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            bad("alpha", format!("forgetting factor {} outside (0, 1]", self.alpha));
        }
        if !(1..=3).contains(&self.p) {
            bad("p", format!("subspace power {} must be 1, 2 or 3", self.p));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            bad("delta", format!("regularization {} must be > 0", self.delta));
        }
        if self.receiver_mode.to_vec().is_empty() {
            bad("receiver_mode", "need at least one algorithm".into());
        }
        if self.ber_window == 0 || self.ber_window > self.packet.max(1) {
            bad("ber_window", format!("window {} must lie in 1..=P", self.ber_window));
        }
        if self.ber_from_symbol >= self.packet.max(1) {
            bad("ber_from_symbol", format!("{} leaves no symbol of the packet to score", self.ber_from_symbol));
        }
        if self.trials == 0 {
            bad("trials", "need at least one trial".into());
        }
        for (i, e) in self.dynamic_events.iter().enumerate() {
            let field = format!("dynamic_events[{i}]");
            if e.symbol_index == 0 || e.symbol_index >= self.packet {
                bad(&field, format!("symbol index {} must lie inside the packet", e.symbol_index));
            } else if e.symbol_index % self.tx_antennas.max(1) != 0 {
                bad(&field, format!("symbol index {} must start a space-time block", e.symbol_index));
            }
            if !(e.new_spread_db >= 0.0) || !e.new_spread_db.is_finite() {
                bad(&field, "new_spread_db must be finite and ≥ 0".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Validation(errs))
        }
    }

    /// Short stable fingerprint of the configuration (FNV-1a over its canonical JSON).
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("scenario serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{:012x}", h >> 16)
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(json: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = serde_json::from_str(json).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Loads a scenario from a JSON file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Resolves a preset name or a file path.
pub fn resolve_scenario(spec: &str) -> Result<ScenarioConfig, ScenarioError> {
    match preset(spec) {
        Some(cfg) => Ok(cfg),
        None => load_scenario(Path::new(spec)),
    }
}

pub const PRESETS: [(&str, &str); 6] = [
    ("desk", "small static downlink: N=16, K=4, P=1000, CCM and CMV"),
    ("fig2", "BER vs symbol: 10 users, 6 more at symbol 1500, spread 3 → 6 dB, SNR 15 dB"),
    ("fig3", "channel MSE vs symbol, two transmit antennas, same dynamic scenario as fig2"),
    ("fig3-1tx", "channel MSE vs symbol, single transmit antenna, same dynamic scenario"),
    ("fig4a", "BER vs SNR: N=32, K=10, P=1500, 2Tx/2Rx, CCM, CMV and MMSE"),
    ("fig4b", "BER vs K at SNR 15 dB: N=32, P=1500, 2Tx/2Rx, CCM, CMV and MMSE"),
];

/// Constraint scale of the presets. Channels have unit energy on average,
/// so with `ν = 1` a weaker-than-average antenna leaves the constrained
/// output below unit modulus and the CM cost then favours adding interference.
pub const PRESET_NU: f64 = 1.5;

/// Built-in scenario by name.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let base = || ScenarioConfig {
        users: 10,
        chips: 32,
        tx_antennas: 2,
        rx_antennas: 1,
        lp: 6,
        nu: PRESET_NU,
        trials: 200,
        ..ScenarioConfig::default()
    };
    let dynamic = || ScenarioConfig {
        packet: 3000,
        dynamic_events: vec![DynamicEvent {
            symbol_index: 1500,
            users_added: 6,
            new_spread_db: 6.0,
        }],
        ..base()
    };
    let cfg = match name {
        "desk" => ScenarioConfig::default(),
        "fig2" => ScenarioConfig {
            receiver_mode: OneOrMany::Many(vec![Algorithm::Ccm, Algorithm::Cmv]),
            ..dynamic()
        },
        "fig3" => ScenarioConfig {
            receiver_mode: OneOrMany::One(Algorithm::Ccm),
            ..dynamic()
        },
        "fig3-1tx" => ScenarioConfig {
            tx_antennas: 1,
            receiver_mode: OneOrMany::One(Algorithm::Ccm),
            ..dynamic()
        },
        "fig4a" => ScenarioConfig {
            rx_antennas: 2,
            packet: 1500,
            ber_from_symbol: 750,
            snr_db: OneOrMany::Many(vec![5.0, 10.0, 15.0, 20.0, 25.0]),
            receiver_mode: OneOrMany::Many(vec![Algorithm::Ccm, Algorithm::Cmv, Algorithm::Mmse]),
            ..base()
        },
        "fig4b" => ScenarioConfig {
            rx_antennas: 2,
            packet: 1500,
            ber_from_symbol: 750,
            users_sweep: Some(vec![4, 8, 12, 16, 20, 24]),
            receiver_mode: OneOrMany::Many(vec![Algorithm::Ccm, Algorithm::Cmv, Algorithm::Mmse]),
            ..base()
        },
        _ => return None,
    };
    Some(cfg)
}
