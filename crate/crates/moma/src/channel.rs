//! Multi-antenna tapped-delay-line channels (ETU/EVA/EPA/flat), large-scale
//! pathloss and channel-hardening statistics.
//!
//! Taps are i.i.d. circularly-symmetric complex Gaussian per antenna, scaled
//! by the profile's (normalized) tap powers; the frequency response is the
//! discrete-frequency transform of the taps at the grid's subcarriers. The
//! 3GPP delay profiles ship as CSV data files next to the crate sources.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;
use thiserror::Error;

use crate::config::{GridSpec, TTI_DURATION_MS};
use crate::seed;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error("malformed tap table: {0}")]
    MalformedTaps(String),
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileName {
    Etu,
    Eva,
    Epa,
    Flat,
}

/// A tapped-delay-line power-delay profile. Linear tap powers sum to one.
#[derive(Debug, Clone)]
pub struct TapProfile {
    pub name: ProfileName,
    pub tap_delays_ns: Vec<f64>,
    pub tap_powers_db: Vec<f64>,
    /// Normalized linear powers.
    pub tap_powers_lin: Vec<f64>,
}

impl TapProfile {
    fn from_csv(name: ProfileName, text: &str) -> Result<Self, ChannelError> {
        let mut delays = Vec::new();
        let mut powers = Vec::new();
        for line in text.lines().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let d: f64 = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| ChannelError::MalformedTaps(line.into()))?;
            let p: f64 = it
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| ChannelError::MalformedTaps(line.into()))?;
            delays.push(d);
            powers.push(p);
        }
        Self::new(name, delays, powers)
    }

    pub fn new(
        name: ProfileName,
        tap_delays_ns: Vec<f64>,
        tap_powers_db: Vec<f64>,
    ) -> Result<Self, ChannelError> {
        if tap_delays_ns.is_empty() || tap_delays_ns.len() != tap_powers_db.len() {
            return Err(ChannelError::MalformedTaps("empty or ragged tap table".into()));
        }
        if tap_delays_ns[0] < 0.0 || tap_delays_ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ChannelError::MalformedTaps(
                "delays must be non-negative and strictly increasing".into(),
            ));
        }
        let lin: Vec<f64> = tap_powers_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        Ok(TapProfile {
            name,
            tap_delays_ns,
            tap_powers_db,
            tap_powers_lin: lin.into_iter().map(|p| p / total).collect(),
        })
    }

    pub fn etu() -> Self {
        Self::from_csv(ProfileName::Etu, include_str!("../data/etu.csv")).expect("shipped table")
    }

    pub fn eva() -> Self {
        Self::from_csv(ProfileName::Eva, include_str!("../data/eva.csv")).expect("shipped table")
    }

    pub fn epa() -> Self {
        Self::from_csv(ProfileName::Epa, include_str!("../data/epa.csv")).expect("shipped table")
    }

    /// Single tap at 0 ns: frequency-flat fading.
    pub fn flat() -> Self {
        Self::new(ProfileName::Flat, vec![0.0], vec![0.0]).expect("flat profile")
    }

    pub fn by_name(name: &str) -> Result<Self, ChannelError> {
        match name.to_ascii_lowercase().as_str() {
            "etu" => Ok(Self::etu()),
            "eva" => Ok(Self::eva()),
            "epa" => Ok(Self::epa()),
            "flat" => Ok(Self::flat()),
            other => Err(ChannelError::UnknownProfile(other.into())),
        }
    }

    pub fn num_taps(&self) -> usize {
        self.tap_delays_ns.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evolution {
    /// Taps constant within a TTI; independent redraw per TTI when the
    /// Doppler is nonzero ("fast-varying" worst case).
    BlockPerTti,
    /// Sum-of-sinusoids Jakes process sampled per OFDM symbol.
    JakesSos,
}

#[derive(Debug, Clone, Copy)]
pub struct FadingProcess {
    pub doppler_hz: f64,
    pub evolution: Evolution,
}

impl FadingProcess {
    pub fn block_fast() -> Self {
        FadingProcess {
            doppler_hz: 70.0,
            evolution: Evolution::BlockPerTti,
        }
    }

    pub fn block_static() -> Self {
        FadingProcess {
            doppler_hz: 0.0,
            evolution: Evolution::BlockPerTti,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeGranularity {
    PerTti,
    PerSymbol,
}

/// One user's channel over a TTI bundle: frequency response per antenna,
/// subcarrier and time block, plus the large-scale gain.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub num_antennas: usize,
    pub subcarriers: usize,
    pub num_ttis: usize,
    pub symbols_per_tti: usize,
    pub granularity: TimeGranularity,
    pub large_scale_gain: f64,
    /// Layout: ((time_block * M + antenna) * F + subcarrier).
    h: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn num_time_blocks(&self) -> usize {
        match self.granularity {
            TimeGranularity::PerTti => self.num_ttis,
            TimeGranularity::PerSymbol => self.num_ttis * self.symbols_per_tti,
        }
    }

    /// Time block holding the given OFDM symbol (symbol counted across the bundle).
    pub fn time_block_of(&self, symbol: usize) -> usize {
        match self.granularity {
            TimeGranularity::PerTti => symbol / self.symbols_per_tti,
            TimeGranularity::PerSymbol => symbol,
        }
    }

    #[inline]
    pub fn at_block(&self, time_block: usize, antenna: usize, subcarrier: usize) -> Complex64 {
        self.h[(time_block * self.num_antennas + antenna) * self.subcarriers + subcarrier]
    }

    /// h(a, f, t) with t an OFDM symbol index across the bundle.
    #[inline]
    pub fn at(&self, antenna: usize, subcarrier: usize, symbol: usize) -> Complex64 {
        self.at_block(self.time_block_of(symbol), antenna, subcarrier)
    }

    /// All antennas' responses at one (time_block, subcarrier), as a slice stride.
    #[inline]
    pub fn norm_sq(&self, time_block: usize, subcarrier: usize) -> f64 {
        (0..self.num_antennas)
            .map(|a| self.at_block(time_block, a, subcarrier).norm_sqr())
            .sum()
    }
}

/// Draws one channel realization; bit-deterministic under the seed.
pub fn sample_channel(
    profile: &TapProfile,
    fading: &FadingProcess,
    num_antennas: usize,
    grid: &GridSpec,
    seed_val: u64,
) -> ChannelRealization {
    let f_count = grid.subcarriers();
    let num_ttis = grid.bundle_len;
    let taps = profile.num_taps();
    // Phase ramps exp(-j 2 pi f tau) per (subcarrier, tap).
    let ramp: Vec<Complex64> = (0..f_count)
        .flat_map(|f| {
            let freq = f as f64 * crate::config::SUBCARRIER_SPACING_HZ;
            profile
                .tap_delays_ns
                .iter()
                .map(move |&d| Complex64::from_polar(1.0, -2.0 * PI * freq * d * 1e-9))
        })
        .collect();

    let mut rng = seed::rng(seed_val, &[seed::domain::CHANNEL]);
    let mut cn = |p: f64| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * (p / 2.0).sqrt()
    };

    match fading.evolution {
        Evolution::BlockPerTti => {
            let redraw = fading.doppler_hz > 0.0;
            let mut h = vec![Complex64::ZERO; num_ttis * num_antennas * f_count];
            let mut first: Vec<Complex64> = Vec::new();
            for tti in 0..num_ttis {
                for a in 0..num_antennas {
                    let g: Vec<Complex64> = if tti == 0 || redraw {
                        (0..taps).map(|l| cn(profile.tap_powers_lin[l])).collect()
                    } else {
                        first[a * taps..(a + 1) * taps].to_vec()
                    };
                    if tti == 0 {
                        first.extend_from_slice(&g);
                    }
                    for f in 0..f_count {
                        let base = f * taps;
                        let mut acc = Complex64::ZERO;
                        for l in 0..taps {
                            acc += g[l] * ramp[base + l];
                        }
                        h[(tti * num_antennas + a) * f_count + f] = acc;
                    }
                }
            }
            ChannelRealization {
                num_antennas,
                subcarriers: f_count,
                num_ttis,
                symbols_per_tti: grid.symbols_per_tti,
                granularity: TimeGranularity::PerTti,
                large_scale_gain: 1.0,
                h,
            }
        }
        Evolution::JakesSos => {
            // Per (antenna, tap): a sum of NS complex sinusoids with random
            // arrival angles and phases, unit average power.
            const NS: usize = 16;
            let symbols = num_ttis * grid.symbols_per_tti;
            let sym_dt_s = TTI_DURATION_MS * 1e-3 / grid.symbols_per_tti as f64;
            let mut h = vec![Complex64::ZERO; symbols * num_antennas * f_count];
            for a in 0..num_antennas {
                let params: Vec<(f64, f64)> = (0..taps * NS)
                    .map(|_| {
                        let alpha: f64 = rng.random_range(0.0..2.0 * PI);
                        let phi: f64 = rng.random_range(0.0..2.0 * PI);
                        (2.0 * PI * fading.doppler_hz * alpha.cos(), phi)
                    })
                    .collect();
                for s in 0..symbols {
                    let t = (s as f64 + 0.5) * sym_dt_s;
                    let g: Vec<Complex64> = (0..taps)
                        .map(|l| {
                            let mut acc = Complex64::ZERO;
                            for n in 0..NS {
                                let (w, phi) = params[l * NS + n];
                                acc += Complex64::from_polar(1.0, w * t + phi);
                            }
                            acc * (profile.tap_powers_lin[l] / NS as f64).sqrt()
                        })
                        .collect();
                    for f in 0..f_count {
                        let base = f * taps;
                        let mut acc = Complex64::ZERO;
                        for l in 0..taps {
                            acc += g[l] * ramp[base + l];
                        }
                        h[(s * num_antennas + a) * f_count + f] = acc;
                    }
                }
            }
            ChannelRealization {
                num_antennas,
                subcarriers: f_count,
                num_ttis,
                symbols_per_tti: grid.symbols_per_tti,
                granularity: TimeGranularity::PerSymbol,
                large_scale_gain: 1.0,
                h,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathlossModel {
    /// PL(d) = pl0_db + 10 * exponent * log10(d / 1 m).
    LogDistance { pl0_db: f64, exponent: f64 },
    /// Free-space loss at the given carrier.
    FreeSpace { carrier_freq_hz: f64 },
}

/// Deterministic linear power gain (<= 1 in any sane geometry).
pub fn pathloss(distance_m: f64, model: PathlossModel) -> Result<f64, ChannelError> {
    if distance_m <= 0.0 {
        return Err(ChannelError::NonPositiveDistance(distance_m));
    }
    let loss_db = match model {
        PathlossModel::LogDistance { pl0_db, exponent } => {
            pl0_db + 10.0 * exponent * distance_m.log10()
        }
        PathlossModel::FreeSpace { carrier_freq_hz } => {
            let c = 299_792_458.0;
            20.0 * (4.0 * PI * distance_m * carrier_freq_hz / c).log10()
        }
    };
    Ok(10f64.powf(-loss_db / 10.0))
}

/// Post-MRC effective gain field g(f, t) = ||h(f, t)||^2, indexed [symbol][subcarrier].
pub fn mrc_effective_response(ch: &ChannelRealization) -> Vec<Vec<f64>> {
    let symbols = ch.num_ttis * ch.symbols_per_tti;
    (0..symbols)
        .map(|s| {
            let tb = ch.time_block_of(s);
            (0..ch.subcarriers).map(|f| ch.norm_sq(tb, f)).collect()
        })
        .collect()
}

/// Coefficient of variation of g(f, t) over the grid, per realization.
pub fn effective_gain_cv(ch: &ChannelRealization) -> f64 {
    let g = mrc_effective_response(ch);
    let values: Vec<f64> = g.into_iter().flatten().collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean == 0.0 {
        return 0.0;
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

#[derive(Debug, Clone)]
pub struct HardeningStats {
    pub m_values: Vec<usize>,
    /// Per-realization CVs, one inner vector per antenna count.
    pub cvs: Vec<Vec<f64>>,
    pub median_cv: Vec<f64>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// CV of the post-MRC effective channel vs. antenna count: the channel
/// hardening curve. Paired seeds across antenna counts.
pub fn hardening_stats(
    profile: &TapProfile,
    m_values: &[usize],
    realizations: usize,
    grid: &GridSpec,
    seed_val: u64,
) -> HardeningStats {
    use rayon::prelude::*;
    let fading = FadingProcess::block_static();
    let cvs: Vec<Vec<f64>> = m_values
        .iter()
        .map(|&m| {
            (0..realizations)
                .into_par_iter()
                .map(|r| {
                    let ch = sample_channel(
                        profile,
                        &fading,
                        m,
                        grid,
                        seed::derive(seed_val, &[r as u64]),
                    );
                    effective_gain_cv(&ch)
                })
                .collect()
        })
        .collect();
    let median_cv = cvs.iter().map(|v| median(&mut v.clone())).collect();
    HardeningStats {
        m_values: m_values.to_vec(),
        cvs,
        median_cv,
    }
}
