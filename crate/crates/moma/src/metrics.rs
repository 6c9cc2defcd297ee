//! System-level metrics: outage Monte Carlo, the served-user search, the
//! orthogonal (dedicated sub-channel) baseline, link budgets and coverage.
//!
//! All Monte Carlo loops draw their per-trial seeds from the master seed via
//! `seed::derive`, so every result is reproducible bit-for-bit and trials stay
//! independent of evaluation order (rayon reduction is order-insensitive
//! because only integer counts are summed).

use rayon::prelude::*;

use crate::channel::sample_channel;
use crate::codes::UserClass;
use crate::config::{derive_grid, ClassPlan, SystemConfig};
use crate::phy::{detect_tti, SE_CAP};
use crate::scenario::{draw_distances, Scenario};
use crate::seed;

/// Fraction of (trial, user-of-class) samples whose served rate misses the
/// target, at explicit class counts.
pub fn outage_fraction(
    sc: &Scenario,
    k_md: usize,
    k_ld: usize,
    class: UserClass,
    target_kbps: f64,
    runs: usize,
    master: u64,
) -> f64 {
    let (r_md, r_ld) = match class {
        UserClass::Md => (target_kbps, sc.plan.r_ld_kbps),
        UserClass::Ld => (sc.plan.r_md_kbps, target_kbps),
    };
    // Fail fast on construction errors before entering the parallel loop.
    sc.build_users_with_counts(k_md, k_ld, 0)
        .expect("scenario must be constructible");
    let class_count = match class {
        UserClass::Md => k_md,
        UserClass::Ld => k_ld,
    };
    let misses: usize = (0..runs)
        .into_par_iter()
        .map(|r| {
            let trial = seed::derive(
                master,
                &[seed::domain::SEARCH, k_md as u64, k_ld as u64, r as u64],
            );
            let users = sc
                .build_users_with_counts(k_md, k_ld, trial)
                .expect("checked above");
            let report = detect_tti(&users, &sc.grid, sc.noise_variance(), r_md, r_ld);
            report
                .users
                .iter()
                .filter(|u| u.class == class && u.rate_kbps < target_kbps)
                .count()
        })
        .sum();
    misses as f64 / (runs * class_count) as f64
}

/// Result of the served-user search: the largest user count meeting the
/// outage constraint, with every (candidate, outage) evaluation retained.
#[derive(Debug, Clone)]
pub struct ServedSearch {
    pub k_star: usize,
    pub evaluations: Vec<(usize, f64)>,
}

/// Doubling-then-bisection maximization of K under a monotone outage
/// constraint; `eval(k)` returns the outage fraction at K = k.
pub fn served_users<F: FnMut(usize) -> f64>(
    outage_eps: f64,
    cap: usize,
    mut eval: F,
) -> ServedSearch {
    let mut evaluations = Vec::new();
    let mut check = |k: usize, evals: &mut Vec<(usize, f64)>| {
        let out = eval(k);
        evals.push((k, out));
        out <= outage_eps
    };

    if cap == 0 || !check(1, &mut evaluations) {
        return ServedSearch { k_star: 0, evaluations };
    }

    // Doubling phase: find a failing upper bracket (or hit the cap).
    let mut lo = 1usize;
    let mut hi = None;
    let mut k = 2usize;
    while k <= cap {
        if check(k, &mut evaluations) {
            lo = k;
            k *= 2;
        } else {
            hi = Some(k);
            break;
        }
    }
    let mut hi = match hi {
        Some(h) => h,
        None => {
            if lo < cap && check(cap, &mut evaluations) {
                return ServedSearch { k_star: cap, evaluations };
            } else if lo >= cap {
                return ServedSearch { k_star: cap, evaluations };
            }
            cap
        }
    };

    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if check(mid, &mut evaluations) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ServedSearch { k_star: lo, evaluations }
}

/// Largest served count of one class at the target rate, with the other
/// class fixed at its configured plan count.
pub fn served_users_for_class(
    sc: &Scenario,
    class: UserClass,
    target_kbps: f64,
    runs: usize,
    outage_eps: f64,
    cap: usize,
    master: u64,
) -> ServedSearch {
    served_users(outage_eps, cap, |k| {
        let (k_md, k_ld) = match class {
            UserClass::Md => (k, sc.plan.k_ld),
            UserClass::Ld => (sc.plan.k_md, k),
        };
        outage_fraction(sc, k_md, k_ld, class, target_kbps, runs, master)
    })
}

/// Users served by the orthogonal baseline: each of the band's PRBs is
/// dedicated to one unspread user. All sub-channels are statistically
/// identical, so the count is prb_count when a dedicated-PRB user meets the
/// target within the outage budget and zero otherwise.
pub fn orthogonal_baseline(
    sc: &Scenario,
    target_kbps: f64,
    runs: usize,
    outage_eps: f64,
    master: u64,
) -> usize {
    let sys = SystemConfig {
        bandwidth_mode: crate::config::BandwidthMode::Narrow200K,
        total_bandwidth_hz: sc.system.total_bandwidth_hz,
        hd_bandwidth_hz: sc.system.total_bandwidth_hz - 180e3,
        lmd_bandwidth_hz: 180e3,
        ..sc.system.clone()
    };
    let grid = derive_grid(&sys, &ClassPlan::default()).expect("narrow grid");
    let p_re = sys.tx_power_per_re_w();
    let sigma2 = sys.noise_variance_per_re_w();

    let misses: usize = (0..runs)
        .into_par_iter()
        .map(|r| {
            let trial = seed::derive(master, &[seed::domain::SEARCH, 0, 0, r as u64]);
            let d = draw_distances(1, sc.min_distance_m, sc.max_distance_m, trial)[0];
            let ls = crate::channel::pathloss(d, sc.pathloss_model).expect("positive distance");
            let ch = sample_channel(
                &sc.profile,
                &sc.fading,
                sys.num_bs_antennas,
                &grid,
                seed::derive(trial, &[0]),
            );
            // Unspread: one data symbol per RE, per-RE MRC SNR.
            let mut se = 0.0;
            for sym in 0..grid.total_symbols() {
                let tb = ch.time_block_of(sym);
                for f in 0..grid.subcarriers() {
                    let snr = p_re * ls * ch.norm_sq(tb, f) / sigma2;
                    se += (1.0 + snr).log2().min(SE_CAP);
                }
            }
            let rate_kbps = se / grid.total_res() as f64 * grid.subcarriers() as f64
                * grid.symbols_per_tti as f64;
            usize::from(rate_kbps < target_kbps)
        })
        .sum();
    if (misses as f64 / runs as f64) <= outage_eps {
        sc.grid.prb_count
    } else {
        0
    }
}

/// Narrowband link budget for the maximum-coupling-loss calculation.
#[derive(Debug, Clone, Copy)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub required_snr_db: f64,
    pub processing_gain_db: f64,
}

impl LinkBudget {
    /// MCL = P_tx - (noise floor + NF + required SNR - processing gain).
    pub fn mcl_db(&self) -> f64 {
        self.tx_power_dbm
            - (self.noise_psd_dbm_hz
                + 10.0 * self.bandwidth_hz.log10()
                + self.noise_figure_db
                + self.required_snr_db
                - self.processing_gain_db)
    }
}

/// Despreading processing gain of an N-chip (or 4N-chip bundled) signature.
pub fn coverage_gain_db(spread_len: usize) -> f64 {
    10.0 * (spread_len as f64).log10()
}

#[derive(Debug, Clone)]
pub struct CapacityPoint {
    pub target_kbps: f64,
    pub k_star: usize,
    pub baseline: usize,
    pub evaluations: Vec<(usize, f64)>,
}

/// Served users vs. rate target, MOMA against the orthogonal baseline.
pub fn capacity_curve(
    sc: &Scenario,
    class: UserClass,
    targets: &[f64],
    runs: usize,
    outage_eps: f64,
    cap: usize,
    master: u64,
) -> Vec<CapacityPoint> {
    targets
        .iter()
        .map(|&t| {
            let search = served_users_for_class(sc, class, t, runs, outage_eps, cap, master);
            let baseline = orthogonal_baseline(sc, t, runs, outage_eps, master);
            CapacityPoint {
                target_kbps: t,
                k_star: search.k_star,
                baseline,
                evaluations: search.evaluations,
            }
        })
        .collect()
}
