//! Random access: contention-free, contention-based and hybrid preamble
//! assignment, collision probability (closed form, enumeration oracle and
//! Monte Carlo), signalling overhead, and a bridge that replays a preamble
//! collision through the PHY detection chain.
//!
//! The hybrid scheme gives MD arrivals coordinator-granted (collision-free)
//! resources and lets LD arrivals contend on a shared preamble pool.

use rand::Rng;
use thiserror::Error;

use crate::codes::UserClass;
use crate::phy::{detect_tti, DetectionReport};
use crate::scenario::{Scenario, ScenarioError};
use crate::seed;

#[derive(Debug, Error)]
pub enum RaError {
    #[error("oracle space {0} exceeds the enumeration limit")]
    OracleTooLarge(u128),
    #[error("unknown RA scheme {0:?}")]
    UnknownScheme(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RaScheme {
    ContentionFree,
    ContentionBased,
    Hybrid,
}

impl RaScheme {
    pub fn parse(s: &str) -> Result<Self, RaError> {
        match s {
            "contention_free" => Ok(RaScheme::ContentionFree),
            "contention_based" => Ok(RaScheme::ContentionBased),
            "hybrid" => Ok(RaScheme::Hybrid),
            other => Err(RaError::UnknownScheme(other.into())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RaConfig {
    pub scheme: RaScheme,
    pub pool_md: usize,
    pub pool_ld: usize,
    pub arrivals_md: usize,
    pub arrivals_ld: usize,
}

/// Per-class outcome of one RA round. `clean + collided + blocked` equals the
/// arrival count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassOutcome {
    pub arrivals: usize,
    /// Arrivals holding a resource no one else picked.
    pub clean: usize,
    /// Arrivals sharing a preamble with at least one other arrival.
    pub collided: usize,
    /// Contention-free arrivals beyond the pool size (no grant available).
    pub blocked: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct RaOutcome {
    pub md: ClassOutcome,
    pub ld: ClassOutcome,
}

fn contention_free(arrivals: usize, pool: usize) -> ClassOutcome {
    let clean = arrivals.min(pool);
    ClassOutcome {
        arrivals,
        clean,
        collided: 0,
        blocked: arrivals - clean,
    }
}

fn contention_draw<R: Rng>(arrivals: usize, pool: usize, rng: &mut R) -> ClassOutcome {
    let mut picks = vec![0usize; pool];
    for _ in 0..arrivals {
        picks[rng.random_range(0..pool)] += 1;
    }
    let clean = picks.iter().filter(|&&c| c == 1).count();
    ClassOutcome {
        arrivals,
        clean,
        collided: arrivals - clean,
        blocked: 0,
    }
}

/// One RA round; deterministic under (master, round).
pub fn simulate_round(cfg: &RaConfig, master: u64, round: u64) -> RaOutcome {
    let mut rng = seed::rng(master, &[seed::domain::RA, round]);
    match cfg.scheme {
        RaScheme::ContentionFree => RaOutcome {
            md: contention_free(cfg.arrivals_md, cfg.pool_md),
            ld: contention_free(cfg.arrivals_ld, cfg.pool_ld),
        },
        RaScheme::ContentionBased => RaOutcome {
            md: contention_draw(cfg.arrivals_md, cfg.pool_md, &mut rng),
            ld: contention_draw(cfg.arrivals_ld, cfg.pool_ld, &mut rng),
        },
        RaScheme::Hybrid => RaOutcome {
            md: contention_free(cfg.arrivals_md, cfg.pool_md),
            ld: contention_draw(cfg.arrivals_ld, cfg.pool_ld, &mut rng),
        },
    }
}

fn exact_terms(k: usize, s: usize) -> Option<(u128, u128)> {
    let total = (s as u128).checked_pow(k as u32)?;
    let mut distinct: u128 = 1;
    for i in 0..k {
        distinct = distinct.checked_mul((s - i) as u128)?;
    }
    Some((total, distinct))
}

/// P(at least one collision) when K users each pick uniformly from S
/// preambles: 1 - S!/((S-K)! S^K). Uses exact integer arithmetic when the
/// terms fit in u128, a float product otherwise.
pub fn collision_prob(k: usize, s: usize) -> f64 {
    if k <= 1 || s == 0 {
        return if s == 0 && k > 0 { 1.0 } else { 0.0 };
    }
    if k > s {
        return 1.0; // pigeonhole
    }
    if let Some((total, distinct)) = exact_terms(k, s) {
        return (total - distinct) as f64 / total as f64;
    }
    let p_none: f64 = (0..k).map(|i| 1.0 - i as f64 / s as f64).product();
    1.0 - p_none
}

/// Brute-force oracle: enumerates all S^K preamble assignments and counts the
/// ones containing a collision. Refuses spaces larger than 1e7.
pub fn collision_prob_oracle(k: usize, s: usize) -> Result<f64, RaError> {
    if k == 0 {
        return Ok(0.0);
    }
    if s == 0 {
        return Ok(1.0);
    }
    let total = (s as u128)
        .checked_pow(k as u32)
        .filter(|&t| t <= 10_000_000)
        .ok_or(RaError::OracleTooLarge(u128::MAX))?;
    let mut assignment = vec![0usize; k];
    let mut collided: u128 = 0;
    for _ in 0..total {
        let mut seen = vec![false; s];
        let mut clash = false;
        for &a in &assignment {
            if seen[a] {
                clash = true;
                break;
            }
            seen[a] = true;
        }
        if clash {
            collided += 1;
        }
        // Odometer increment.
        for slot in assignment.iter_mut() {
            *slot += 1;
            if *slot < s {
                break;
            }
            *slot = 0;
        }
    }
    Ok(collided as f64 / total as f64)
}

/// Monte Carlo collision probability over contention rounds.
pub fn estimate_collision_prob(k: usize, s: usize, rounds: usize, master: u64) -> f64 {
    let mut hits = 0usize;
    for r in 0..rounds {
        let mut rng = seed::rng(master, &[seed::domain::RA, r as u64]);
        let out = contention_draw(k, s, &mut rng);
        if out.collided > 0 {
            hits += 1;
        }
    }
    hits as f64 / rounds as f64
}

/// Downlink signalling cost of one RA round, in messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverheadReport {
    /// Per-user grants the coordinator must send.
    pub grant_messages: usize,
    /// Broadcast messages (pool announcement), scheme-wide.
    pub broadcast_messages: usize,
}

pub fn overhead_report(cfg: &RaConfig) -> OverheadReport {
    match cfg.scheme {
        RaScheme::ContentionFree => OverheadReport {
            grant_messages: cfg.arrivals_md + cfg.arrivals_ld,
            broadcast_messages: 1,
        },
        RaScheme::ContentionBased => OverheadReport {
            grant_messages: 0,
            broadcast_messages: 1,
        },
        RaScheme::Hybrid => OverheadReport {
            grant_messages: cfg.arrivals_md,
            broadcast_messages: 1,
        },
    }
}

/// A preamble collision replayed at the PHY: two LD users end up on the same
/// signature. MD detection must be unaffected; the collided pair cannot be
/// separated and is marked failed.
#[derive(Debug, Clone)]
pub struct CollisionBridge {
    pub baseline: DetectionReport,
    pub collided: DetectionReport,
    pub collided_ids: (usize, usize),
    /// max over MD users of |sinr_collided - sinr_baseline| / sinr_baseline.
    pub max_md_sinr_rel_delta: f64,
}

pub fn collision_impact_bridge(sc: &Scenario, trial_seed: u64) -> Result<CollisionBridge, RaError> {
    let users = sc.build_users(trial_seed)?;
    let ld: Vec<usize> = users
        .iter()
        .enumerate()
        .filter(|(_, u)| u.class == UserClass::Ld)
        .map(|(i, _)| i)
        .collect();
    assert!(ld.len() >= 2, "bridge needs at least two LD users");
    let (a, b) = (ld[0], ld[1]);

    let noise = sc.noise_variance();
    let baseline = detect_tti(&users, &sc.grid, noise, sc.plan.r_md_kbps, sc.plan.r_ld_kbps);

    let mut dup = users.clone();
    dup[b].signature.chips = dup[a].signature.chips.clone();
    let mut collided = detect_tti(&dup, &sc.grid, noise, sc.plan.r_md_kbps, sc.plan.r_ld_kbps);
    // The receiver cannot resolve two users on one preamble.
    for &i in &[a, b] {
        collided.users[i].served = false;
    }

    let max_md_sinr_rel_delta = baseline
        .users
        .iter()
        .zip(&collided.users)
        .filter(|(u, _)| u.class == UserClass::Md)
        .map(|(u, v)| (v.sinr - u.sinr).abs() / u.sinr)
        .fold(0.0f64, f64::max);

    Ok(CollisionBridge {
        collided_ids: (users[a].id, users[b].id),
        baseline,
        collided,
        max_md_sinr_rel_delta,
    })
}
