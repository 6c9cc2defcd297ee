//! System, class and resource-grid parameters, plus the grid arithmetic
//! shared by every other module.
//!
//! LTE numerology is hard-coded: 15 kHz subcarrier spacing, a PRB of
//! 12 subcarriers x 14 OFDM symbols (168 REs) over 180 kHz x 1 ms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SUBCARRIERS_PER_PRB: usize = 12;
pub const SYMBOLS_PER_TTI: usize = 14;
pub const RES_PER_PRB: usize = SUBCARRIERS_PER_PRB * SYMBOLS_PER_TTI;
pub const SUBCARRIER_SPACING_HZ: f64 = 15_000.0;
pub const TTI_DURATION_MS: f64 = 1.0;
/// Default regulatory cap on UE transmit power.
pub const TX_POWER_CAP_DBM: f64 = 23.0;
/// TTI bundling sends four redundancy versions over four consecutive TTIs.
pub const BUNDLE_TTIS: usize = 4;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("spread chips do not tile the class bandwidth: {chips} chips of length {spread_len} vs {res} REs")]
    NonTiling {
        chips: usize,
        spread_len: usize,
        res: usize,
    },
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    /// 1.4 MHz device bandwidth; the spread classes occupy 6 PRBs (1.08 MHz).
    Wide1M4,
    /// 200 kHz device bandwidth; the spread classes occupy 1 PRB (180 kHz).
    Narrow200K,
}

impl BandwidthMode {
    pub fn prb_count(self) -> usize {
        match self {
            BandwidthMode::Wide1M4 => 6,
            BandwidthMode::Narrow200K => 1,
        }
    }

    pub fn lmd_bandwidth_hz(self) -> f64 {
        self.prb_count() as f64 * 180_000.0
    }
}

/// Cell-level parameters. Immutable after construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    pub num_bs_antennas: usize,
    pub bandwidth_mode: BandwidthMode,
    pub total_bandwidth_hz: f64,
    pub hd_bandwidth_hz: f64,
    pub lmd_bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub carrier_freq_hz: f64,
    pub subcarrier_spacing_hz: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            num_bs_antennas: 64,
            bandwidth_mode: BandwidthMode::Wide1M4,
            total_bandwidth_hz: 10.0e6,
            hd_bandwidth_hz: 10.0e6 - 1.08e6,
            lmd_bandwidth_hz: 1.08e6,
            tx_power_dbm: 23.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 5.0,
            carrier_freq_hz: 2.0e9,
            subcarrier_spacing_hz: SUBCARRIER_SPACING_HZ,
        }
    }
}

impl SystemConfig {
    /// Default narrowband (200 kHz) variant.
    pub fn narrow() -> Self {
        SystemConfig {
            bandwidth_mode: BandwidthMode::Narrow200K,
            total_bandwidth_hz: 10.0e6,
            hd_bandwidth_hz: 10.0e6 - 180e3,
            lmd_bandwidth_hz: 180e3,
            ..Default::default()
        }
    }

    /// Subcarriers occupied by the spread (MD/LD) classes.
    pub fn lmd_subcarriers(&self) -> usize {
        self.bandwidth_mode.prb_count() * SUBCARRIERS_PER_PRB
    }

    pub fn tx_power_w(&self) -> f64 {
        10f64.powf((self.tx_power_dbm - 30.0) / 10.0)
    }

    /// Transmit power per occupied RE: the device power spread uniformly over
    /// the class band's subcarriers.
    pub fn tx_power_per_re_w(&self) -> f64 {
        self.tx_power_w() / self.lmd_subcarriers() as f64
    }

    /// Receiver noise power in one RE (one subcarrier bandwidth), linear W.
    pub fn noise_variance_per_re_w(&self) -> f64 {
        let dbm = self.noise_psd_dbm_hz
            + 10.0 * self.subcarrier_spacing_hz.log10()
            + self.noise_figure_db;
        10f64.powf((dbm - 30.0) / 10.0)
    }
}

/// Per-class spreading and overloading parameters (L = 3: HD out of scope,
/// MD and LD spread over the shared band).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassPlan {
    pub spreading_factor: usize,
    pub n_md: usize,
    pub n_ld: usize,
    pub k_md: usize,
    pub k_ld: usize,
    pub r_md_kbps: f64,
    pub r_ld_kbps: f64,
    pub tti_bundling: bool,
}

impl Default for ClassPlan {
    fn default() -> Self {
        ClassPlan {
            spreading_factor: 6,
            n_md: 2,
            n_ld: 4,
            k_md: 4,
            k_ld: 16,
            r_md_kbps: 45.0,
            r_ld_kbps: 17.0,
            tti_bundling: false,
        }
    }
}

/// Resource-grid geometry derived from a validated (config, plan) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub subcarriers_per_prb: usize,
    pub symbols_per_tti: usize,
    pub prb_count: usize,
    pub res_per_prb: usize,
    /// Chips per data symbol: N, or 4N with TTI bundling.
    pub spread_len: usize,
    /// TTIs covered by one transmission unit (4 with bundling, else 1).
    pub bundle_len: usize,
    /// Data symbols per user per TTI bundle.
    pub symbols_per_user: usize,
    /// The plan's N (without the bundling factor).
    pub base_spreading_factor: usize,
}

impl GridSpec {
    pub fn subcarriers(&self) -> usize {
        self.prb_count * self.subcarriers_per_prb
    }

    pub fn total_symbols(&self) -> usize {
        self.symbols_per_tti * self.bundle_len
    }

    /// REs in one TTI bundle.
    pub fn total_res(&self) -> usize {
        self.prb_count * self.res_per_prb * self.bundle_len
    }

    /// One spread block per data symbol.
    pub fn num_blocks(&self) -> usize {
        self.symbols_per_user
    }

    /// RE index -> (tti, OFDM symbol within bundle, subcarrier).
    /// Chips are laid frequency-first within an OFDM symbol, then across
    /// symbols, then across the TTIs of a bundle.
    pub fn re_coords(&self, re: usize) -> (usize, usize, usize) {
        let f = re % self.subcarriers();
        let sym = re / self.subcarriers();
        (sym / self.symbols_per_tti, sym, f)
    }

    /// Data symbol rate a served rate is quoted against, in ksymbols/s.
    ///
    /// This is the nominal (unbundled) rate prb_count*168/N per 1 ms. A TTI
    /// bundle delivers its transport block over four TTIs with four redundancy
    /// versions; its rate is quoted per TTI as LTE quotes MCS rates. The
    /// physical symbol rate of a bundled user is 1/4 of this.
    pub fn nominal_symbol_rate_ksps(&self) -> f64 {
        (self.prb_count * RES_PER_PRB) as f64 / self.base_spreading_factor as f64 / TTI_DURATION_MS
    }

    /// Physical data symbol rate in ksymbols/s (accounts for bundling).
    pub fn physical_symbol_rate_ksps(&self) -> f64 {
        self.symbols_per_user as f64 / (self.bundle_len as f64 * TTI_DURATION_MS)
    }
}

/// A named invariant violation. Violations are data, not failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub name: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationResult {
    pub violations: Vec<Violation>,
}

impl ValidationResult {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, name: &'static str, detail: String) {
        self.violations.push(Violation { name, detail });
    }

    pub fn summary(&self) -> String {
        self.violations
            .iter()
            .map(|v| format!("{}: {}", v.name, v.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Checks every type invariant of `cfg` and `plan`.
pub fn validate_plan(cfg: &SystemConfig, plan: &ClassPlan) -> ValidationResult {
    let mut r = ValidationResult::default();

    if cfg.num_bs_antennas < 1 {
        r.push("antennas", "num_bs_antennas must be >= 1".into());
    }
    if (cfg.hd_bandwidth_hz + cfg.lmd_bandwidth_hz - cfg.total_bandwidth_hz).abs() > 0.0 {
        r.push(
            "bandwidth split",
            format!(
                "B_HD + B_LMD = {} must equal B = {}",
                cfg.hd_bandwidth_hz + cfg.lmd_bandwidth_hz,
                cfg.total_bandwidth_hz
            ),
        );
    }
    let expected_lmd = cfg.bandwidth_mode.lmd_bandwidth_hz();
    if (cfg.lmd_bandwidth_hz - expected_lmd).abs() > 1e-6 {
        r.push(
            "bandwidth mode",
            format!(
                "{:?} requires B_LMD = {} Hz, got {}",
                cfg.bandwidth_mode, expected_lmd, cfg.lmd_bandwidth_hz
            ),
        );
    }
    if cfg.tx_power_dbm > TX_POWER_CAP_DBM {
        r.push(
            "tx power",
            format!("{} dBm exceeds the {} dBm cap", cfg.tx_power_dbm, TX_POWER_CAP_DBM),
        );
    }
    if (cfg.subcarrier_spacing_hz - SUBCARRIER_SPACING_HZ).abs() > 0.0 {
        r.push("subcarrier spacing", "fixed at 15 kHz".into());
    }

    if plan.spreading_factor < 2 {
        r.push("spreading factor", "N must be >= 2".into());
    }
    if plan.n_md == 0 || plan.n_ld == 0 {
        r.push("partition", "N_MD and N_LD must be positive".into());
    }
    if plan.n_md + plan.n_ld != plan.spreading_factor {
        r.push(
            "partition",
            format!(
                "N_MD + N_LD = {} must equal N = {}",
                plan.n_md + plan.n_ld,
                plan.spreading_factor
            ),
        );
    }
    if plan.k_md == 0 || plan.k_ld == 0 {
        r.push("users", "K_MD and K_LD must be positive".into());
    }
    if plan.n_md > 0 && plan.n_ld > 0 {
        let md = plan.k_md as f64 / plan.n_md as f64;
        let ld = plan.k_ld as f64 / plan.n_ld as f64;
        if ld <= md {
            r.push(
                "class ordering",
                format!("K_LD/N_LD = {ld} must strictly exceed K_MD/N_MD = {md}"),
            );
        }
    }
    if !(plan.r_md_kbps > plan.r_ld_kbps && plan.r_ld_kbps > 0.0) {
        r.push(
            "rates",
            format!(
                "require r_md > r_ld > 0, got r_md = {}, r_ld = {}",
                plan.r_md_kbps, plan.r_ld_kbps
            ),
        );
    }

    r
}

/// Derives the grid geometry. Pure: identical inputs give identical output.
pub fn derive_grid(cfg: &SystemConfig, plan: &ClassPlan) -> Result<GridSpec, ConfigError> {
    let v = validate_plan(cfg, plan);
    if !v.is_ok() {
        return Err(ConfigError::Invalid(v.summary()));
    }

    let prb_count = cfg.bandwidth_mode.prb_count();
    let bundle_len = if plan.tti_bundling { BUNDLE_TTIS } else { 1 };
    let spread_len = plan.spreading_factor * bundle_len;
    let total_res = prb_count * RES_PER_PRB * bundle_len;

    if total_res % spread_len != 0 {
        return Err(ConfigError::NonTiling {
            chips: total_res / spread_len + 1,
            spread_len,
            res: total_res,
        });
    }

    Ok(GridSpec {
        subcarriers_per_prb: SUBCARRIERS_PER_PRB,
        symbols_per_tti: SYMBOLS_PER_TTI,
        prb_count,
        res_per_prb: RES_PER_PRB,
        spread_len,
        bundle_len,
        symbols_per_user: total_res / spread_len,
        base_spreading_factor: plan.spreading_factor,
    })
}

/// (K_MD/N_MD, K_LD/N_LD).
pub fn overloading_factors(plan: &ClassPlan) -> (f64, f64) {
    (
        plan.k_md as f64 / plan.n_md as f64,
        plan.k_ld as f64 / plan.n_ld as f64,
    )
}

// ---------------------------------------------------------------------------
// Experiment config file
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelSection {
    /// One of "etu", "eva", "epa", "flat".
    pub profile: String,
    pub doppler_hz: f64,
    /// "block_per_tti" or "jakes_sos".
    pub evolution: String,
    /// "log_distance" or "free_space".
    pub pathloss_model: String,
    pub pathloss_ref_db: f64,
    pub pathloss_exponent: f64,
    pub min_distance_m: f64,
    pub max_distance_m: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            profile: "eva".into(),
            doppler_hz: 70.0,
            evolution: "block_per_tti".into(),
            pathloss_model: "log_distance".into(),
            pathloss_ref_db: 30.0,
            pathloss_exponent: 3.76,
            min_distance_m: 25.0,
            max_distance_m: 100.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsSection {
    pub outage_eps: f64,
    pub mc_runs: usize,
    /// Upper bound of the doubling search on the served-user count.
    pub k_search_cap: usize,
    pub md_rate_min_kbps: f64,
    pub md_rate_max_kbps: f64,
    pub ld_rate_min_kbps: f64,
    pub ld_rate_max_kbps: f64,
    pub rate_steps: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            outage_eps: 0.1,
            mc_runs: 100,
            k_search_cap: 128,
            md_rate_min_kbps: 30.0,
            md_rate_max_kbps: 60.0,
            ld_rate_min_kbps: 10.0,
            ld_rate_max_kbps: 25.0,
            rate_steps: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RaSection {
    /// "contention_free", "contention_based" or "hybrid".
    pub scheme: String,
    pub pool_md: usize,
    pub pool_ld: usize,
    pub arrivals_md: usize,
    pub arrivals_ld: usize,
    pub rounds: usize,
}

impl Default for RaSection {
    fn default() -> Self {
        RaSection {
            scheme: "hybrid".into(),
            pool_md: 4,
            pool_ld: 16,
            arrivals_md: 3,
            arrivals_ld: 10,
            rounds: 100_000,
        }
    }
}

/// The full experiment configuration: one section per module, one scalar per
/// key, TOML on disk. Missing keys take the printed defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub plan: ClassPlan,
    pub channel: ChannelSection,
    pub metrics: MetricsSection,
    pub ra: RaSection,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Fully-resolved config with every default materialized.
    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// FNV-1a hash of the resolved config, for output provenance headers.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_toml_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}
