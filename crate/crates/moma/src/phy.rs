//! Chip-level uplink PHY: spreading onto the resource grid, received-signal
//! synthesis, MRC despreading, decision gains, SINR-to-rate mapping and the
//! SIC detection pass.
//!
//! Chips are laid frequency-first within an OFDM symbol, then across symbols.
//! With TTI bundling a block's 4N chips repeat the same N-chip footprint in
//! each of the four TTIs, so every data symbol sees all four TTIs.
//!
//! The per-user transmit amplitude is sqrt(p_re * spread_len), which keeps the
//! average transmit power per occupied RE at p_re regardless of the spreading
//! factor; the large-scale gain is folded into the same amplitude.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::channel::ChannelRealization;
use crate::codes::{Signature, UserClass};
use crate::config::GridSpec;
use crate::seed;

/// Per-block SINR values are clamped here (60 dB) so that noiseless or
/// interference-free constructions stay finite and comparable.
pub const SINR_CAP: f64 = 1e6;
/// Spectral-efficiency ceiling, in bit/s/Hz per data symbol (256-QAM-ish).
pub const SE_CAP: f64 = 6.0;

/// One active uplink user: identity, signature, channel and link budget.
#[derive(Debug, Clone)]
pub struct UserState {
    pub id: usize,
    pub class: UserClass,
    pub signature: Signature,
    pub channel: ChannelRealization,
    /// Transmit power per occupied RE, linear W.
    pub tx_power_per_re_w: f64,
    pub distance_m: f64,
}

impl UserState {
    /// Data-symbol amplitude including the large-scale (pathloss) gain.
    pub fn symbol_amplitude(&self, spread_len: usize) -> f64 {
        (self.tx_power_per_re_w * spread_len as f64 * self.channel.large_scale_gain).sqrt()
    }
}

/// RE carrying chip `chip` of data symbol `block`.
#[inline]
pub fn chip_re(grid: &GridSpec, block: usize, chip: usize) -> usize {
    let n = grid.base_spreading_factor;
    let res_per_tti = grid.subcarriers() * grid.symbols_per_tti;
    (chip / n) * res_per_tti + block * n + (chip % n)
}

/// Spreads a user's data symbols onto a single-antenna transmit grid.
pub fn spread_and_map(
    sig: &Signature,
    symbols: &[Complex64],
    grid: &GridSpec,
) -> Vec<Complex64> {
    assert_eq!(symbols.len(), grid.symbols_per_user, "one symbol per block");
    assert_eq!(sig.chips.len(), grid.spread_len, "signature length");
    let mut tx = vec![Complex64::ZERO; grid.total_res()];
    for (b, &x) in symbols.iter().enumerate() {
        for (p, &c) in sig.chips.iter().enumerate() {
            tx[chip_re(grid, b, p)] = c * x;
        }
    }
    tx
}

/// The received multi-antenna grid over one TTI bundle.
#[derive(Debug, Clone)]
pub struct RxGrid {
    pub num_antennas: usize,
    pub total_res: usize,
    pub noise_variance: f64,
    /// Layout: antenna * total_res + re.
    y: Vec<Complex64>,
}

impl RxGrid {
    #[inline]
    pub fn at(&self, antenna: usize, re: usize) -> Complex64 {
        self.y[antenna * self.total_res + re]
    }
}

/// Unit-power circularly-symmetric Gaussian data symbols for one user.
pub fn draw_symbols(master: u64, user_id: usize, count: usize) -> Vec<Complex64> {
    let mut rng = seed::rng(master, &[seed::domain::SYMBOLS, user_id as u64]);
    (0..count)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
        })
        .collect()
}

/// Superimposes every user's faded transmission plus AWGN. The symbol and
/// noise streams are derived from `master`, per-user, so adding a user never
/// perturbs the others' streams.
pub fn synthesize_rx(
    users: &[UserState],
    grid: &GridSpec,
    noise_variance: f64,
    master: u64,
) -> (RxGrid, Vec<Vec<Complex64>>) {
    let symbols: Vec<Vec<Complex64>> = users
        .iter()
        .map(|u| draw_symbols(master, u.id, grid.symbols_per_user))
        .collect();
    let rx = synthesize_rx_with_symbols(users, &symbols, grid, noise_variance, master);
    (rx, symbols)
}

/// As [`synthesize_rx`] but with caller-chosen data symbols.
pub fn synthesize_rx_with_symbols(
    users: &[UserState],
    symbols: &[Vec<Complex64>],
    grid: &GridSpec,
    noise_variance: f64,
    master: u64,
) -> RxGrid {
    let m = users
        .first()
        .map(|u| u.channel.num_antennas)
        .unwrap_or(1);
    let total = grid.total_res();
    let mut y = vec![Complex64::ZERO; m * total];

    for (u, syms) in users.iter().zip(symbols) {
        assert_eq!(u.channel.num_antennas, m, "all users share the array size");
        let amp = u.symbol_amplitude(grid.spread_len);
        for (b, &x) in syms.iter().enumerate() {
            for (p, &c) in u.signature.chips.iter().enumerate() {
                let re = chip_re(grid, b, p);
                let (_, sym, f) = grid.re_coords(re);
                let chip = amp * c * x;
                for a in 0..m {
                    y[a * total + re] += chip * u.channel.at(a, f, sym);
                }
            }
        }
    }

    if noise_variance > 0.0 {
        let sigma = (noise_variance / 2.0).sqrt();
        let mut rng = seed::rng(master, &[seed::domain::NOISE]);
        for v in &mut y {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re, im) * sigma;
        }
    }

    RxGrid {
        num_antennas: m,
        total_res: total,
        noise_variance,
        y,
    }
}

/// Chip-level MRC combine with the user's own channel, then despread: one
/// complex decision statistic per data symbol.
pub fn mrc_despread(rx: &RxGrid, user: &UserState, grid: &GridSpec) -> Vec<Complex64> {
    (0..grid.symbols_per_user)
        .map(|b| {
            let mut d = Complex64::ZERO;
            for (p, &c) in user.signature.chips.iter().enumerate() {
                let re = chip_re(grid, b, p);
                let (_, sym, f) = grid.re_coords(re);
                let mut z = Complex64::ZERO;
                for a in 0..rx.num_antennas {
                    z += user.channel.at(a, f, sym).conj() * rx.at(a, re);
                }
                d += c.conj() * z;
            }
            d
        })
        .collect()
}

/// Post-combining decision gains for a user set: per-block cross powers
/// |g_{k,j,b}|^2 and effective noise powers, the sufficient statistics for
/// SINR, rate and SIC bookkeeping.
#[derive(Debug, Clone)]
pub struct DecisionGains {
    pub num_users: usize,
    pub num_blocks: usize,
    /// Layout: (k * K + j) * B + b.
    block_power: Vec<f64>,
    /// Layout: k * B + b.
    block_noise: Vec<f64>,
}

impl DecisionGains {
    #[inline]
    pub fn power(&self, k: usize, j: usize, b: usize) -> f64 {
        self.block_power[(k * self.num_users + j) * self.num_blocks + b]
    }

    #[inline]
    pub fn noise(&self, k: usize, b: usize) -> f64 {
        self.block_noise[k * self.num_blocks + b]
    }

    /// Per-block SINR of detector `k`; `active[j]` marks users that still
    /// interfere (cancelled users carry `false`; `k` itself is skipped).
    pub fn sinr_blocks(&self, k: usize, active: &[bool]) -> Vec<f64> {
        (0..self.num_blocks)
            .map(|b| {
                let signal = self.power(k, k, b);
                let mut denom = self.noise(k, b);
                for j in 0..self.num_users {
                    if j != k && active[j] {
                        denom += self.power(k, j, b);
                    }
                }
                (signal / denom).min(SINR_CAP)
            })
            .collect()
    }

    /// (intra-class, inter-class, noise) powers at detector `k`, each averaged
    /// over blocks, with every user active.
    pub fn power_split(&self, k: usize, classes: &[UserClass]) -> (f64, f64, f64) {
        let inv_b = 1.0 / self.num_blocks as f64;
        let mut intra = 0.0;
        let mut inter = 0.0;
        for j in 0..self.num_users {
            if j == k {
                continue;
            }
            let p: f64 = (0..self.num_blocks).map(|b| self.power(k, j, b)).sum::<f64>() * inv_b;
            if classes[j] == classes[k] {
                intra += p;
            } else {
                inter += p;
            }
        }
        let noise = (0..self.num_blocks).map(|b| self.noise(k, b)).sum::<f64>() * inv_b;
        (intra, inter, noise)
    }
}

/// Arithmetic mean of the per-block SINRs (already capped per block).
pub fn mean_sinr(blocks: &[f64]) -> f64 {
    blocks.iter().sum::<f64>() / blocks.len() as f64
}

/// Mean over blocks of min(log2(1 + SINR_b), SE_CAP), in bit/symbol.
pub fn spectral_efficiency(blocks: &[f64]) -> f64 {
    blocks
        .iter()
        .map(|&s| (1.0 + s).log2().min(SE_CAP))
        .sum::<f64>()
        / blocks.len() as f64
}

/// Served rate in kb/s, quoted against the nominal (per-TTI) symbol rate.
pub fn rate_kbps(blocks: &[f64], grid: &GridSpec) -> f64 {
    spectral_efficiency(blocks) * grid.nominal_symbol_rate_ksps()
}

/// Fast path: exact decision gains without synthesizing a grid. For each pair
/// of users the spatial product S_kj(t, f) = h_k^H h_j is computed once per
/// time block, then accumulated over each block's chips.
pub fn decision_gains(users: &[UserState], grid: &GridSpec, noise_variance: f64) -> DecisionGains {
    let k_total = users.len();
    let blocks = grid.symbols_per_user;
    let spread = grid.spread_len;
    let f_count = grid.subcarriers();
    let m = users.first().map(|u| u.channel.num_antennas).unwrap_or(0);

    // Joint time granularity: per-symbol if any channel needs it.
    let per_symbol = users.iter().any(|u| {
        u.channel.num_time_blocks() > u.channel.num_ttis
    });
    let ntb = if per_symbol {
        grid.total_symbols()
    } else {
        grid.bundle_len
    };
    let tb_of_sym = |sym: usize| if per_symbol { sym } else { sym / grid.symbols_per_tti };

    // Dense per-user channel copies at the joint granularity:
    // hflat[u][(tb * M + a) * F + f].
    let hflat: Vec<Vec<Complex64>> = users
        .iter()
        .map(|u| {
            let mut v = vec![Complex64::ZERO; ntb * m * f_count];
            for tb in 0..ntb {
                let sym = if per_symbol { tb } else { tb * grid.symbols_per_tti };
                for a in 0..m {
                    for f in 0..f_count {
                        v[(tb * m + a) * f_count + f] = u.channel.at(a, f, sym);
                    }
                }
            }
            v
        })
        .collect();

    // Per chip position (b, p): index tb * F + f into the spatial products.
    let chip_cell: Vec<usize> = (0..blocks * spread)
        .map(|i| {
            let re = chip_re(grid, i / spread, i % spread);
            let (_, sym, f) = grid.re_coords(re);
            tb_of_sym(sym) * f_count + f
        })
        .collect();

    let amps: Vec<f64> = users.iter().map(|u| u.symbol_amplitude(spread)).collect();

    let mut block_power = vec![0.0f64; k_total * k_total * blocks];
    let mut block_noise = vec![0.0f64; k_total * blocks];
    let mut s_cell = vec![Complex64::ZERO; ntb * f_count];

    for k in 0..k_total {
        let sk = &users[k].signature.chips;
        let hk = &hflat[k];

        // Noise: sigma^2 * sum_p |s_k[p]|^2 * ||h_k||^2 at the chip's cell.
        for cell in s_cell.iter_mut() {
            *cell = Complex64::ZERO;
        }
        let mut normsq = vec![0.0f64; ntb * f_count];
        for tb in 0..ntb {
            for f in 0..f_count {
                let mut acc = 0.0;
                for a in 0..m {
                    acc += hk[(tb * m + a) * f_count + f].norm_sqr();
                }
                normsq[tb * f_count + f] = acc;
            }
        }
        for b in 0..blocks {
            let mut acc = 0.0;
            for (p, &c) in sk.iter().enumerate() {
                acc += c.norm_sqr() * normsq[chip_cell[b * spread + p]];
            }
            block_noise[k * blocks + b] = noise_variance * acc;
        }

        for j in 0..k_total {
            let hj = &hflat[j];
            for tb in 0..ntb {
                for f in 0..f_count {
                    let mut acc = Complex64::ZERO;
                    for a in 0..m {
                        let idx = (tb * m + a) * f_count + f;
                        acc += hk[idx].conj() * hj[idx];
                    }
                    s_cell[tb * f_count + f] = acc;
                }
            }
            let sj = &users[j].signature.chips;
            for b in 0..blocks {
                let mut g = Complex64::ZERO;
                for p in 0..spread {
                    g += sk[p].conj() * sj[p] * s_cell[chip_cell[b * spread + p]];
                }
                block_power[(k * k_total + j) * blocks + b] = (amps[j] * g.norm()).powi(2);
            }
        }
    }

    DecisionGains {
        num_users: k_total,
        num_blocks: blocks,
        block_power,
        block_noise,
    }
}

/// Reference path: g_{k,j,b} obtained by synthesizing user j's noiseless solo
/// grid with all-ones data symbols and despreading it at detector k. Slow;
/// kept as an independent cross-check of [`decision_gains`].
pub fn decision_gains_reference(
    users: &[UserState],
    grid: &GridSpec,
) -> Vec<Vec<Vec<Complex64>>> {
    let ones = vec![vec![Complex64::ONE; grid.symbols_per_user]];
    users
        .iter()
        .map(|k| {
            users
                .iter()
                .map(|j| {
                    let solo = synthesize_rx_with_symbols(
                        std::slice::from_ref(j),
                        &ones,
                        grid,
                        0.0,
                        0,
                    );
                    mrc_despread(&solo, k, grid)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct UserReport {
    pub id: usize,
    pub class: UserClass,
    /// SINR with every user treated as interference (no cancellation).
    pub sinr_pre: f64,
    /// SINR at the detection stage actually used for the rate.
    pub sinr: f64,
    pub rate_kbps: f64,
    pub served: bool,
    /// Cancellation order for MD users removed by SIC.
    pub sic_rank: Option<usize>,
    pub intra_power: f64,
    pub inter_power: f64,
    pub noise_power: f64,
}

#[derive(Debug, Clone)]
pub struct DetectionReport {
    pub users: Vec<UserReport>,
}

impl DetectionReport {
    pub fn served_count(&self, class: UserClass) -> usize {
        self.users
            .iter()
            .filter(|u| u.class == class && u.served)
            .count()
    }
}

/// One TTI(-bundle) detection pass.
///
/// MD users are decoded in descending pre-SIC SINR order; each one whose rate
/// meets `r_md_kbps` is cancelled (genie-aided, perfect) before the next is
/// decoded. LD users are then decoded single-user against the residual.
pub fn detect_tti(
    users: &[UserState],
    grid: &GridSpec,
    noise_variance: f64,
    r_md_kbps: f64,
    r_ld_kbps: f64,
) -> DetectionReport {
    let dg = decision_gains(users, grid, noise_variance);
    let classes: Vec<UserClass> = users.iter().map(|u| u.class).collect();
    let k_total = users.len();

    let mut active = vec![true; k_total];
    let pre: Vec<f64> = (0..k_total)
        .map(|i| mean_sinr(&dg.sinr_blocks(i, &active)))
        .collect();

    let mut order: Vec<usize> = (0..k_total)
        .filter(|&i| classes[i] == UserClass::Md)
        .collect();
    order.sort_by(|&a, &b| pre[b].partial_cmp(&pre[a]).unwrap());

    let mut sinr = pre.clone();
    let mut rate = vec![0.0f64; k_total];
    let mut served = vec![false; k_total];
    let mut sic_rank = vec![None; k_total];
    let mut rank = 0usize;

    for &i in &order {
        let blocks = dg.sinr_blocks(i, &active);
        sinr[i] = mean_sinr(&blocks);
        rate[i] = rate_kbps(&blocks, grid);
        if rate[i] >= r_md_kbps {
            served[i] = true;
            sic_rank[i] = Some(rank);
            rank += 1;
            active[i] = false;
        }
    }

    for i in (0..k_total).filter(|&i| classes[i] == UserClass::Ld) {
        let blocks = dg.sinr_blocks(i, &active);
        sinr[i] = mean_sinr(&blocks);
        rate[i] = rate_kbps(&blocks, grid);
        served[i] = rate[i] >= r_ld_kbps;
    }

    let users_out = (0..k_total)
        .map(|i| {
            let (intra, inter, noise) = dg.power_split(i, &classes);
            UserReport {
                id: users[i].id,
                class: classes[i],
                sinr_pre: pre[i],
                sinr: sinr[i],
                rate_kbps: rate[i],
                served: served[i],
                sic_rank: sic_rank[i],
                intra_power: intra,
                inter_power: inter,
                noise_power: noise,
            }
        })
        .collect();

    DetectionReport { users: users_out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channel, FadingProcess, TapProfile};
    use crate::codes::{
        build_code_matrix, build_overloading, partition, signatures, CodeKind, Generation,
    };
    use crate::config::{derive_grid, ClassPlan, SystemConfig};

    fn wide_grid() -> GridSpec {
        derive_grid(&SystemConfig::default(), &ClassPlan::default()).unwrap()
    }

    /// Default 4 MD + 16 LD population on ETU with M antennas, unit pathloss.
    fn build_users(m: usize, profile: &TapProfile, grid: &GridSpec, seed_val: u64) -> Vec<UserState> {
        let u = build_code_matrix(CodeKind::Dft, grid.spread_len).unwrap();
        let p = partition(&u, 2 * grid.bundle_len).unwrap();
        let w_md = build_overloading(UserClass::Md, p.u_md.len(), 4, Generation::RandomSphere, seed_val).unwrap();
        let w_ld = build_overloading(UserClass::Ld, p.u_ld.len(), 16, Generation::RandomSphere, seed_val).unwrap();
        let set = signatures(&p, &w_md, &w_ld).unwrap();
        set.signatures
            .into_iter()
            .map(|sig| {
                let ch = sample_channel(
                    profile,
                    &FadingProcess::block_static(),
                    m,
                    grid,
                    seed::derive(seed_val, &[seed::domain::CHANNEL, sig.user as u64]),
                );
                UserState {
                    id: sig.user,
                    class: sig.class,
                    signature: sig,
                    channel: ch,
                    tx_power_per_re_w: 1.0,
                    distance_m: 1.0,
                }
            })
            .collect()
    }

    #[test]
    fn chip_mapping_tiles_the_grid() {
        for plan in [
            ClassPlan::default(),
            ClassPlan { tti_bundling: true, ..Default::default() },
        ] {
            let grid = derive_grid(&SystemConfig::default(), &plan).unwrap();
            let mut hits = vec![0usize; grid.total_res()];
            for b in 0..grid.symbols_per_user {
                for p in 0..grid.spread_len {
                    hits[chip_re(&grid, b, p)] += 1;
                }
            }
            assert!(hits.iter().all(|&h| h == 1), "each RE used exactly once");
        }
    }

    #[test]
    fn chip_mapping_is_frequency_first() {
        let grid = wide_grid();
        // Block 0 occupies subcarriers 0..6 of OFDM symbol 0.
        for p in 0..6 {
            assert_eq!(chip_re(&grid, 0, p), p);
        }
        // Block 12 starts at RE 72: subcarrier 0 of OFDM symbol 1.
        assert_eq!(chip_re(&grid, 12, 0), 72);
    }

    #[test]
    fn bundled_chips_visit_all_four_ttis() {
        let plan = ClassPlan { tti_bundling: true, ..Default::default() };
        let grid = derive_grid(&SystemConfig::default(), &plan).unwrap();
        let ttis: std::collections::HashSet<usize> = (0..grid.spread_len)
            .map(|p| grid.re_coords(chip_re(&grid, 0, p)).0)
            .collect();
        assert_eq!(ttis.len(), 4);
    }

    #[test]
    fn spread_places_chips_scaled_by_symbol() {
        let grid = wide_grid();
        let u = build_code_matrix(CodeKind::Dft, 6).unwrap();
        let sig = Signature {
            user: 0,
            class: UserClass::Md,
            chips: u.column(0).to_vec(),
        };
        let mut symbols = vec![Complex64::ZERO; grid.symbols_per_user];
        symbols[0] = Complex64::new(2.0, 0.0);
        let tx = spread_and_map(&sig, &symbols, &grid);
        for p in 0..6 {
            assert!((tx[p] - sig.chips[p] * 2.0).norm() < 1e-15);
        }
        assert!(tx[6..].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn noise_only_grid_has_requested_variance() {
        let grid = wide_grid();
        let sigma2 = 0.37;
        let mut acc = 0.0;
        let trials = 50;
        for t in 0..trials {
            let rx = synthesize_rx_with_symbols(&[], &[], &grid, sigma2, t);
            acc += (0..grid.total_res()).map(|re| rx.at(0, re).norm_sqr()).sum::<f64>();
        }
        let mean = acc / (trials as usize * grid.total_res()) as f64;
        assert!((mean - sigma2).abs() < 0.02 * sigma2, "mean = {mean}");
    }

    #[test]
    fn synthesis_is_linear_in_users() {
        let grid = wide_grid();
        let users = build_users(2, &TapProfile::etu(), &grid, 5);
        let pair = &users[..2];
        let (rx_both, symbols) = synthesize_rx(pair, &grid, 0.0, 9);
        let rx_a = synthesize_rx_with_symbols(&pair[..1], &symbols[..1], &grid, 0.0, 9);
        let rx_b = synthesize_rx_with_symbols(&pair[1..2], &symbols[1..2], &grid, 0.0, 9);
        for a in 0..2 {
            for re in 0..grid.total_res() {
                let sum = rx_a.at(a, re) + rx_b.at(a, re);
                assert!((rx_both.at(a, re) - sum).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn solo_flat_despread_is_channel_norm_times_symbol() {
        let grid = wide_grid();
        let mut users = build_users(4, &TapProfile::flat(), &grid, 3);
        let user = users.remove(0);
        let norm_sq = user.channel.norm_sq(0, 0); // flat: same everywhere
        let amp = user.symbol_amplitude(grid.spread_len);
        let (rx, symbols) = synthesize_rx(std::slice::from_ref(&user), &grid, 0.0, 21);
        let d = mrc_despread(&rx, &user, &grid);
        for b in 0..grid.symbols_per_user {
            let expect = amp * norm_sq * symbols[0][b];
            assert!((d[b] - expect).norm() < 1e-9 * expect.norm().max(1.0));
        }
    }

    #[test]
    fn flat_channel_kills_inter_class_gains() {
        let grid = wide_grid();
        let users = build_users(8, &TapProfile::flat(), &grid, 17);
        let dg = decision_gains(&users, &grid, 0.0);
        for k in 0..users.len() {
            for j in 0..users.len() {
                if users[k].class != users[j].class {
                    for b in 0..grid.symbols_per_user {
                        assert!(
                            dg.power(k, j, b) < 1e-10 * dg.power(k, k, b),
                            "cross-class leakage at ({k},{j},{b})"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn overloading_cross_gain_has_known_ratio() {
        // Two MD users on N_MD = 2 columns with w1 = (1,0), w2 = (1/s2, 1/s2)
        // over an identical flat channel: |G12|^2 / |G11|^2 = 1/2.
        let grid = wide_grid();
        let u = build_code_matrix(CodeKind::Dft, 6).unwrap();
        let p = partition(&u, 2).unwrap();
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let mk = |w: [Complex64; 2]| {
            let mut chips = vec![Complex64::ZERO; 6];
            for (col, coef) in p.u_md.iter().zip(w) {
                for (c, &v) in chips.iter_mut().zip(col) {
                    *c += coef * v;
                }
            }
            chips
        };
        let ch = sample_channel(&TapProfile::flat(), &FadingProcess::block_static(), 4, &grid, 1);
        let users: Vec<UserState> = [
            mk([Complex64::ONE, Complex64::ZERO]),
            mk([Complex64::new(s2, 0.0), Complex64::new(s2, 0.0)]),
        ]
        .into_iter()
        .enumerate()
        .map(|(i, chips)| UserState {
            id: i,
            class: UserClass::Md,
            signature: Signature { user: i, class: UserClass::Md, chips },
            channel: ch.clone(),
            tx_power_per_re_w: 1.0,
            distance_m: 1.0,
        })
        .collect();
        let dg = decision_gains(&users, &grid, 0.0);
        let ratio = dg.power(0, 1, 0) / dg.power(0, 0, 0);
        assert!((ratio - 0.5).abs() < 1e-10, "ratio = {ratio}");
    }

    #[test]
    fn fast_gains_match_reference_despread() {
        let grid = wide_grid();
        let users = build_users(3, &TapProfile::etu(), &grid, 29);
        let subset = &users[..6];
        let dg = decision_gains(subset, &grid, 0.0);
        let reference = decision_gains_reference(subset, &grid);
        for k in 0..subset.len() {
            for j in 0..subset.len() {
                for b in 0..grid.symbols_per_user {
                    let want = reference[k][j][b].norm_sqr();
                    let got = dg.power(k, j, b);
                    assert!(
                        (got - want).abs() <= 1e-9 * want.max(1.0),
                        "({k},{j},{b}): {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn measured_noise_matches_predicted_noise_gain() {
        // Solo ETU user with AWGN: the empirical variance of the despread
        // error d_b - g_kk,b x_b must match block_noise.
        let grid = wide_grid();
        let users = build_users(4, &TapProfile::etu(), &grid, 41);
        let user = users[0].clone();
        let sigma2 = 1e-2;
        let dg = decision_gains(std::slice::from_ref(&user), &grid, sigma2);
        let reference = decision_gains_reference(std::slice::from_ref(&user), &grid);
        let mut err_acc = 0.0;
        let mut pred_acc = 0.0;
        let trials = 200;
        for t in 0..trials {
            let (rx, symbols) =
                synthesize_rx(std::slice::from_ref(&user), &grid, sigma2, 1000 + t);
            let d = mrc_despread(&rx, &user, &grid);
            for b in 0..grid.symbols_per_user {
                let e = d[b] - reference[0][0][b] * symbols[0][b];
                err_acc += e.norm_sqr();
                pred_acc += dg.noise(0, b);
            }
        }
        let ratio = err_acc / pred_acc;
        assert!((ratio - 1.0).abs() < 0.05, "noise ratio = {ratio}");
    }

    #[test]
    fn sinr_cap_applies_in_noiseless_solo_case() {
        let grid = wide_grid();
        let users = build_users(2, &TapProfile::flat(), &grid, 3);
        let dg = decision_gains(&users[..1], &grid, 0.0);
        let blocks = dg.sinr_blocks(0, &[true]);
        assert!(blocks.iter().all(|&s| s == SINR_CAP));
        assert_eq!(mean_sinr(&blocks), SINR_CAP);
        // Rate is finite and pinned by the SE cap.
        let r = rate_kbps(&blocks, &grid);
        assert!((r - SE_CAP * grid.nominal_symbol_rate_ksps()).abs() < 1e-9);
    }

    #[test]
    fn sic_never_degrades_sinr() {
        let grid = wide_grid();
        let users = build_users(16, &TapProfile::etu(), &grid, 13);
        let report = detect_tti(&users, &grid, 1e-6, 0.1, 0.05);
        for u in &report.users {
            assert!(
                u.sinr >= u.sinr_pre - 1e-12,
                "user {} ({}): {} < {}",
                u.id,
                u.class,
                u.sinr,
                u.sinr_pre
            );
        }
        // With generous targets the MD users get cancelled in some order.
        let ranks: Vec<usize> = report
            .users
            .iter()
            .filter_map(|u| u.sic_rank)
            .collect();
        assert_eq!(ranks.len(), 4);
        let mut sorted = ranks.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn power_split_separates_classes() {
        let grid = wide_grid();
        let users = build_users(8, &TapProfile::flat(), &grid, 7);
        let dg = decision_gains(&users, &grid, 1e-3);
        let classes: Vec<UserClass> = users.iter().map(|u| u.class).collect();
        // Flat channel: inter-class power is numerically zero, intra is not.
        let (intra, inter, noise) = dg.power_split(4, &classes); // an LD user
        assert!(inter < 1e-10 * intra);
        assert!(intra > 0.0);
        assert!(noise > 0.0);
    }

    #[test]
    fn report_counts_served_by_class() {
        let grid = wide_grid();
        let users = build_users(16, &TapProfile::etu(), &grid, 2);
        // Impossible targets: nobody served.
        let none = detect_tti(&users, &grid, 1e-6, 1e9, 1e9);
        assert_eq!(none.served_count(UserClass::Md), 0);
        assert_eq!(none.served_count(UserClass::Ld), 0);
        // Trivial targets: everybody served.
        let all = detect_tti(&users, &grid, 1e-6, 1e-9, 1e-9);
        assert_eq!(all.served_count(UserClass::Md), 4);
        assert_eq!(all.served_count(UserClass::Ld), 16);
    }
}
