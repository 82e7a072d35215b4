//! Experiment configuration.
//!
//! A [`ScenarioConfig`] is the complete description of one experiment: radio
//! parameters, traffic, HARQ, MDP shaping and agent hyperparameters, plus the
//! seed. Every other module is a pure function of a config and the random
//! streams derived from its seed, so two equal configs always reproduce the
//! same run.
//!
//! The on-disk format is TOML with one table per section. Every key is
//! optional and falls back to the reference scenario; unknown keys are
//! rejected. See `configs/reference.toml` at the repository root for an
//! annotated example.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Current version of the config file format.
pub const FORMAT_VERSION: u32 = 1;

/// Environment variable that overrides the seed of a loaded scenario.
pub const SEED_ENV_VAR: &str = "SLICEQ_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialization error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

fn check_rate(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} is outside [0, 1]")))
    }
}

fn check_finite(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} is not finite")))
    }
}

fn check_positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("{v} must be finite and > 0")))
    }
}

/// Radio and propagation parameters shared by all eNBs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub cell_radius_m: f64,
    /// Nominal channel bandwidth. Descriptive: the allocatable grid is
    /// `num_rbg` resource block groups of `subcarriers_per_rb` subcarriers.
    pub bandwidth_hz: f64,
    pub num_rbg: usize,
    pub subcarrier_spacing_hz: f64,
    pub subcarriers_per_rb: usize,
    pub tx_power_per_rb_dbm: f64,
    pub antenna_gain_db: f64,
    pub carrier_freq_hz: f64,
    /// Thermal noise power spectral density N0.
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub penetration_loss_db: f64,
    pub shadowing_sigma_db: f64,
    pub path_loss_intercept_db: f64,
    /// Path loss slope per decade of distance in km.
    pub path_loss_slope_db: f64,
    pub num_enb: usize,
    pub tti_ms: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            cell_radius_m: 125.0,
            bandwidth_hz: 20e6,
            num_rbg: 13,
            subcarrier_spacing_hz: 15e3,
            subcarriers_per_rb: 12,
            tx_power_per_rb_dbm: 40.0,
            antenna_gain_db: 15.0,
            carrier_freq_hz: 30e9,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 5.0,
            penetration_loss_db: 5.0,
            shadowing_sigma_db: 8.0,
            path_loss_intercept_db: 128.1,
            path_loss_slope_db: 37.6,
            num_enb: 3,
            tti_ms: 0.1429,
        }
    }
}

impl RadioConfig {
    /// Bandwidth of one allocatable resource block (b_RB).
    pub fn rb_bandwidth_hz(&self) -> f64 {
        self.subcarriers_per_rb as f64 * self.subcarrier_spacing_hz
    }

    /// Noise power over one resource block, including the receiver noise figure.
    pub fn noise_per_rb_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * self.rb_bandwidth_hz().log10() + self.noise_figure_db
    }

    pub fn tti_seconds(&self) -> f64 {
        self.tti_ms * 1e-3
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.num_rbg == 0 {
            return Err(invalid("radio.num_rbg", "must be >= 1"));
        }
        if self.subcarriers_per_rb == 0 {
            return Err(invalid("radio.subcarriers_per_rb", "must be >= 1"));
        }
        if self.num_enb == 0 {
            return Err(invalid("radio.num_enb", "must be >= 1"));
        }
        check_positive("radio.cell_radius_m", self.cell_radius_m)?;
        check_positive("radio.bandwidth_hz", self.bandwidth_hz)?;
        check_positive("radio.subcarrier_spacing_hz", self.subcarrier_spacing_hz)?;
        check_positive("radio.carrier_freq_hz", self.carrier_freq_hz)?;
        check_positive("radio.tti_ms", self.tti_ms)?;
        check_finite("radio.tx_power_per_rb_dbm", self.tx_power_per_rb_dbm)?;
        check_finite("radio.antenna_gain_db", self.antenna_gain_db)?;
        check_finite("radio.noise_density_dbm_hz", self.noise_density_dbm_hz)?;
        check_finite("radio.noise_figure_db", self.noise_figure_db)?;
        check_finite("radio.penetration_loss_db", self.penetration_loss_db)?;
        check_finite("radio.path_loss_intercept_db", self.path_loss_intercept_db)?;
        check_positive("radio.path_loss_slope_db", self.path_loss_slope_db)?;
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(invalid("radio.shadowing_sigma_db", "must be finite and >= 0"));
        }
        // The allocatable grid must fit inside the nominal bandwidth (with 10% slack).
        let grid = self.num_rbg as f64 * self.rb_bandwidth_hz();
        if grid > self.bandwidth_hz * 1.1 {
            return Err(invalid(
                "radio.num_rbg",
                format!(
                    "resource grid of {grid} Hz does not fit in bandwidth {} Hz",
                    self.bandwidth_hz
                ),
            ));
        }
        Ok(())
    }
}

/// Poisson packet arrivals per UE and slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub urllc_ues: usize,
    pub embb_ues: usize,
    pub urllc_pkt_bytes: usize,
    pub embb_pkt_bytes: usize,
    /// Mean packet arrivals per TTI per URLLC UE.
    pub urllc_rate: f64,
    /// Mean packet arrivals per TTI per eMBB UE.
    pub embb_rate: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            urllc_ues: 10,
            embb_ues: 5,
            urllc_pkt_bytes: 50,
            embb_pkt_bytes: 100,
            urllc_rate: 0.1,
            embb_rate: 0.2,
        }
    }
}

impl TrafficConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.urllc_ues == 0 {
            return Err(invalid("traffic.urllc_ues", "must be >= 1"));
        }
        if self.embb_ues == 0 {
            return Err(invalid("traffic.embb_ues", "must be >= 1"));
        }
        if self.urllc_pkt_bytes == 0 {
            return Err(invalid("traffic.urllc_pkt_bytes", "must be > 0"));
        }
        if self.embb_pkt_bytes == 0 {
            return Err(invalid("traffic.embb_pkt_bytes", "must be > 0"));
        }
        check_positive("traffic.urllc_rate", self.urllc_rate)?;
        check_positive("traffic.embb_rate", self.embb_rate)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarqConfig {
    pub rtt_ttis: u64,
    pub num_processes: usize,
    pub max_retx: u32,
    /// Block error probability of every transmission attempt.
    pub initial_bler: f64,
}

impl Default for HarqConfig {
    fn default() -> Self {
        Self {
            rtt_ttis: 4,
            num_processes: 6,
            max_retx: 1,
            initial_bler: 0.1,
        }
    }
}

impl HarqConfig {
    /// Largest number of transmission attempts a packet may record.
    pub fn max_attempts(&self) -> u32 {
        1 + self.max_retx
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.rtt_ttis == 0 {
            return Err(invalid("harq.rtt_ttis", "must be >= 1"));
        }
        if self.num_processes == 0 {
            return Err(invalid("harq.num_processes", "must be >= 1"));
        }
        check_rate("harq.initial_bler", self.initial_bler)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MdpConfig {
    /// Queue lengths above this are clamped in the observation.
    pub queue_cap: usize,
    /// Target URLLC delay D^tar.
    pub d_target_ms: f64,
    /// Weight of the eMBB throughput term, per Mbps.
    pub w_embb: f64,
    /// Weight of the URLLC delay term, per ms.
    pub w_urllc: f64,
    /// A queued URLLC packet older than this is dropped.
    pub urllc_delay_budget_ms: f64,
    /// Fixed MEC processing delay added to every delivered packet.
    pub edge_delay_ms: f64,
    pub ttis_per_episode: u64,
    pub num_episodes: usize,
}

impl Default for MdpConfig {
    fn default() -> Self {
        Self {
            queue_cap: 10,
            d_target_ms: 2.0,
            w_embb: 1.0,
            w_urllc: 5.0,
            urllc_delay_budget_ms: 2.0,
            edge_delay_ms: 0.1,
            ttis_per_episode: 200,
            num_episodes: 300,
        }
    }
}

impl MdpConfig {
    /// Number of distinct observations, `(queue_cap + 1)^2`.
    pub fn num_states(&self) -> usize {
        (self.queue_cap + 1) * (self.queue_cap + 1)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.queue_cap == 0 {
            return Err(invalid("mdp.queue_cap", "must be >= 1"));
        }
        check_positive("mdp.d_target_ms", self.d_target_ms)?;
        check_positive("mdp.w_embb", self.w_embb)?;
        check_positive("mdp.w_urllc", self.w_urllc)?;
        check_finite("mdp.urllc_delay_budget_ms", self.urllc_delay_budget_ms)?;
        if self.urllc_delay_budget_ms < self.d_target_ms {
            return Err(invalid(
                "mdp.urllc_delay_budget_ms",
                format!(
                    "{} is below d_target_ms {}",
                    self.urllc_delay_budget_ms, self.d_target_ms
                ),
            ));
        }
        if !(self.edge_delay_ms.is_finite() && self.edge_delay_ms >= 0.0) {
            return Err(invalid("mdp.edge_delay_ms", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Learning algorithm driving the inter-slice split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    QLearning,
    DoubleQ,
    EnsembleMv,
    SelfPlayEnsemble,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::QLearning,
        Algorithm::DoubleQ,
        Algorithm::EnsembleMv,
        Algorithm::SelfPlayEnsemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::QLearning => "q_learning",
            Algorithm::DoubleQ => "double_q",
            Algorithm::EnsembleMv => "ensemble_mv",
            Algorithm::SelfPlayEnsemble => "self_play_ensemble",
        }
    }

    pub fn is_ensemble(self) -> bool {
        matches!(self, Algorithm::EnsembleMv | Algorithm::SelfPlayEnsemble)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown algorithm `{0}` (expected one of q_learning, double_q, ensemble_mv, self_play_ensemble)")]
pub struct UnknownAlgorithm(pub String);

impl FromStr for Algorithm {
    type Err = UnknownAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    /// Learning rate of the single- and two-table learners.
    pub alpha: f64,
    /// Learning rate of each ensemble table.
    pub per_table_alpha: Vec<f64>,
    /// Weight of the past snapshot in the self-play blend.
    pub beta: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Optional per-table exploration rates. When set, each ensemble table
    /// votes epsilon-greedily with its own rate instead of the ensemble
    /// drawing a single exploration decision.
    pub per_table_epsilon: Option<Vec<f64>>,
    pub num_tables: usize,
    /// Index of the table whose updates are corrupted by the adversary.
    pub adversarial_table: Option<usize>,
    /// Episodes between self-play snapshots.
    pub snapshot_every: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::SelfPlayEnsemble,
            alpha: 0.5,
            per_table_alpha: vec![0.7, 0.8, 0.9],
            beta: 0.5,
            gamma: 0.2,
            epsilon: 0.3,
            per_table_epsilon: None,
            num_tables: 3,
            adversarial_table: None,
            snapshot_every: 1,
        }
    }
}

impl AgentConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        check_rate("agent.alpha", self.alpha)?;
        check_rate("agent.beta", self.beta)?;
        check_rate("agent.gamma", self.gamma)?;
        check_rate("agent.epsilon", self.epsilon)?;
        for &a in &self.per_table_alpha {
            check_rate("agent.per_table_alpha", a)?;
        }
        if self.num_tables == 0 {
            return Err(invalid("agent.num_tables", "must be >= 1"));
        }
        if self.algorithm.is_ensemble() && self.num_tables.is_multiple_of(2) {
            return Err(invalid(
                "agent.num_tables",
                format!("ensemble size {} must be odd", self.num_tables),
            ));
        }
        if self.per_table_alpha.len() != self.num_tables {
            return Err(invalid(
                "agent.per_table_alpha",
                format!(
                    "has {} entries but num_tables is {}",
                    self.per_table_alpha.len(),
                    self.num_tables
                ),
            ));
        }
        if let Some(eps) = &self.per_table_epsilon {
            if eps.len() != self.num_tables {
                return Err(invalid(
                    "agent.per_table_epsilon",
                    format!(
                        "has {} entries but num_tables is {}",
                        eps.len(),
                        self.num_tables
                    ),
                ));
            }
            for &e in eps {
                check_rate("agent.per_table_epsilon", e)?;
            }
        }
        if self.snapshot_every == 0 {
            return Err(invalid("agent.snapshot_every", "must be >= 1"));
        }
        if let Some(idx) = self.adversarial_table {
            let tables = match self.algorithm {
                Algorithm::QLearning => {
                    return Err(invalid(
                        "agent.adversarial_table",
                        "q_learning has a single table and no partner for the adversary",
                    ))
                }
                Algorithm::DoubleQ => 2,
                Algorithm::EnsembleMv | Algorithm::SelfPlayEnsemble => self.num_tables,
            };
            if tables < 2 {
                return Err(invalid(
                    "agent.adversarial_table",
                    "the adversary needs at least two tables",
                ));
            }
            if idx >= tables {
                return Err(invalid(
                    "agent.adversarial_table",
                    format!("index {idx} out of range for {tables} tables"),
                ));
            }
        }
        Ok(())
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub format_version: u32,
    pub seed: u64,
    pub radio: RadioConfig,
    pub traffic: TrafficConfig,
    pub harq: HarqConfig,
    pub mdp: MdpConfig,
    pub agent: AgentConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            seed: 0,
            radio: RadioConfig::default(),
            traffic: TrafficConfig::default(),
            harq: HarqConfig::default(),
            mdp: MdpConfig::default(),
            agent: AgentConfig::default(),
        }
    }
}

/// The reference scenario: three eNBs, 13 RBGs, 10 URLLC and 5 eMBB UEs.
pub fn default_scenario() -> ScenarioConfig {
    ScenarioConfig::default()
}

/// Parses and validates a TOML scenario. Missing keys take their defaults.
pub fn load_scenario(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

/// Reads a scenario file, then applies the `SLICEQ_SEED` override if set.
pub fn load_scenario_file(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut config = load_scenario(&text)?;
    apply_env_overrides(&mut config)?;
    Ok(config)
}

/// Applies the seed override from the environment, if present.
pub fn apply_env_overrides(config: &mut ScenarioConfig) -> Result<(), ConfigError> {
    if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
        config.seed = raw
            .trim()
            .parse()
            .map_err(|e| invalid("seed", format!("{SEED_ENV_VAR}={raw:?}: {e}")))?;
        config.validate()?;
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.format_version != FORMAT_VERSION {
            return Err(invalid(
                "format_version",
                format!(
                    "unsupported version {} (expected {FORMAT_VERSION})",
                    self.format_version
                ),
            ));
        }
        // TOML integers are signed 64-bit.
        if self.seed > i64::MAX as u64 {
            return Err(invalid("seed", "must fit in a signed 64-bit integer"));
        }
        self.radio.validate()?;
        self.traffic.validate()?;
        self.harq.validate()?;
        self.mdp.validate()?;
        self.agent.validate()
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// Number of inter-slice actions, `num_rbg + 1`.
    pub fn num_actions(&self) -> usize {
        self.radio.num_rbg + 1
    }

    /// Hex SHA-256 of the canonical TOML serialization.
    pub fn digest(&self) -> String {
        let text = self
            .to_toml()
            .expect("validated configs always serialize");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn with_algorithm(&self, algorithm: Algorithm) -> Self {
        let mut c = self.clone();
        c.agent.algorithm = algorithm;
        c
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }
}
