//! Acceptance criteria, one test per criterion. Each prints a single
//! `ACCEPTANCE <n> <name>: PASS|FAIL` line (visible with `--nocapture`, or on
//! failure) and asserts the gate.

use moma::channel::hardening_stats;
use moma::codes::UserClass;
use moma::config::{ClassPlan, ExperimentConfig, SystemConfig};
use moma::metrics::{coverage_gain_db, orthogonal_baseline, served_users_for_class};
use moma::phy::{decision_gains, detect_tti, mean_sinr};
use moma::ra::{collision_prob, collision_prob_oracle, estimate_collision_prob};
use moma::scenario::Scenario;
use moma::seed;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {n} {name}: {tag} ({detail})");
    assert!(pass, "ACCEPTANCE {n} {name}: FAIL ({detail})");
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

#[test]
fn criterion_1_coverage_gains() {
    let narrow = coverage_gain_db(6);
    let bundled = coverage_gain_db(24);
    let pass = (narrow - 7.78).abs() < 0.01 && (bundled - 13.80).abs() < 0.01;
    verdict(
        1,
        "coverage gains",
        pass,
        &format!("gain(N=6) = {narrow:.4} dB, gain(4N=24) = {bundled:.4} dB"),
    );
}

#[test]
fn criterion_2_flat_inter_class_orthogonality() {
    let mut cfg = ExperimentConfig::default();
    cfg.system.num_bs_antennas = 8;
    cfg.channel.profile = "flat".into();
    cfg.channel.min_distance_m = 50.0;
    cfg.channel.max_distance_m = 50.0;
    let sc = Scenario::from_experiment(&cfg).unwrap();

    let mut worst = 0.0f64;
    for seed_val in 0..100u64 {
        let users = sc.build_users(seed_val).unwrap();
        let dg = decision_gains(&users, &sc.grid, 0.0);
        for k in 0..users.len() {
            for j in 0..users.len() {
                if users[k].class == users[j].class {
                    continue;
                }
                for b in 0..dg.num_blocks {
                    worst = worst.max(dg.power(k, j, b) / dg.power(k, k, b));
                }
            }
        }
    }
    verdict(
        2,
        "flat-channel inter-class orthogonality",
        worst < 1e-10,
        &format!("max relative cross-gain over 100 seeds = {worst:.3e}"),
    );
}

#[test]
fn criterion_3_channel_hardening() {
    let cfg = ExperimentConfig::default();
    let sc = Scenario::from_experiment(&cfg).unwrap();
    let profile = moma::channel::TapProfile::etu();
    let m_values = [1usize, 4, 16, 64, 100];
    let stats = hardening_stats(&profile, &m_values, 500, &sc.grid, 20260824);
    let cv = &stats.median_cv;
    let decreasing = cv.windows(2).all(|w| w[1] < w[0]);
    let pass = cv[4] < 0.2 && cv[4] < 0.35 * cv[1] && decreasing;
    verdict(
        3,
        "channel hardening",
        pass,
        &format!(
            "median CV over M={m_values:?}: {:?} (M=100: {:.4}, 0.35x M=4: {:.4})",
            cv.iter().map(|c| (c * 1e4).round() / 1e4).collect::<Vec<_>>(),
            cv[4],
            0.35 * cv[1]
        ),
    );
}

#[test]
fn criterion_4_quasi_orthogonality_at_scale() {
    // ETU, M = 100, K_LD = 16 on N_LD = 4 (K_MD = 4 on N_MD = 2), equal
    // distances so the ratio reflects spreading structure, not geometry.
    //
    // Gated on the LD-detector reading (residual MD leakage relative to
    // intra-LD interference), matching the spec's derived LD-report figure;
    // the MD-detector reading is printed for reference.
    let mut cfg = ExperimentConfig::default();
    cfg.system.num_bs_antennas = 100;
    cfg.channel.profile = "etu".into();
    cfg.channel.min_distance_m = 50.0;
    cfg.channel.max_distance_m = 50.0;
    let sc = Scenario::from_experiment(&cfg).unwrap();

    let mut ld_ratios = Vec::new();
    let mut md_ratios = Vec::new();
    for trial in 0..30u64 {
        let users = sc.build_users(seed::derive(73, &[trial])).unwrap();
        let dg = decision_gains(&users, &sc.grid, 0.0);
        let classes: Vec<UserClass> = users.iter().map(|u| u.class).collect();
        for k in 0..users.len() {
            let (intra, inter, _) = dg.power_split(k, &classes);
            let ratio_db = 10.0 * (inter / intra).log10();
            match classes[k] {
                UserClass::Ld => ld_ratios.push(ratio_db),
                UserClass::Md => md_ratios.push(ratio_db),
            }
        }
    }
    let ld_median = median(ld_ratios);
    let md_median = median(md_ratios);
    verdict(
        4,
        "quasi-orthogonality at scale",
        ld_median < -20.0,
        &format!(
            "median inter/intra at LD detectors = {ld_median:.2} dB (gate < -20 dB); \
             at MD detectors = {md_median:.2} dB (informational)"
        ),
    );
}

#[test]
fn criterion_5_overloading_advantage() {
    // Paper setup: M = 64, 23 dBm, distances U[25,100] m, EVA-class doubly
    // dispersive channel, 100 distance realizations.
    let cfg = ExperimentConfig::default();
    let sc = Scenario::from_experiment(&cfg).unwrap();
    let runs = 100;
    let eps = 0.1;
    let cap = 64;
    let master = 5;

    let md = served_users_for_class(&sc, UserClass::Md, 45.0, runs, eps, cap, master);
    let ld = served_users_for_class(&sc, UserClass::Ld, 17.0, runs, eps, cap, master);
    let base_md = orthogonal_baseline(&sc, 45.0, runs, eps, master);
    let base_ld = orthogonal_baseline(&sc, 17.0, runs, eps, master);

    let pass = base_md > 0
        && base_ld > 0
        && md.k_star >= 2 * base_md
        && ld.k_star >= 2 * base_ld;
    let stretch_md = base_md > 0 && md.k_star >= 4 * base_md;
    let stretch_ld = base_ld > 0 && ld.k_star >= 4 * base_ld;
    verdict(
        5,
        "overloading advantage",
        pass,
        &format!(
            "MD {} vs baseline {} | LD {} vs baseline {} | 4x stretch: MD {stretch_md}, LD {stretch_ld}",
            md.k_star, base_md, ld.k_star, base_ld
        ),
    );
}

#[test]
fn criterion_6_bundling_factor() {
    // Narrowband 200 kHz mode so the bundled search stays tractable; the
    // served-rate quote is the per-TTI MCS-equivalent (bundling-invariant
    // symbol rate), while the physical symbol rate drops by exactly 4.
    let mut cfg = ExperimentConfig::default();
    cfg.system = SystemConfig {
        num_bs_antennas: 64,
        ..SystemConfig::narrow()
    };
    let unbundled = Scenario::from_experiment(&cfg).unwrap();
    cfg.plan = ClassPlan {
        tti_bundling: true,
        ..cfg.plan
    };
    let bundled = Scenario::from_experiment(&cfg).unwrap();

    let runs = 30;
    let eps = 0.1;
    let master = 6;
    let mut detail = String::new();
    let mut pass = true;
    for target in [12.0f64, 17.0, 22.0] {
        let un = served_users_for_class(&unbundled, UserClass::Ld, target, runs, eps, 192, master);
        let bu = served_users_for_class(&bundled, UserClass::Ld, target, runs, eps, 512, master);
        let ratio = bu.k_star as f64 / un.k_star.max(1) as f64;
        pass &= un.k_star > 0 && (3.0..=5.0).contains(&ratio);
        detail.push_str(&format!(
            "{target} kbps: {}x/{}x = {ratio:.2}; ",
            bu.k_star, un.k_star
        ));
    }
    verdict(6, "bundling factor", pass, detail.trim_end_matches("; "));
}

#[test]
fn criterion_7_ra_collision_correctness() {
    let mut exact = true;
    for s in 1..=6 {
        for k in 1..=6 {
            if collision_prob_oracle(k, s).unwrap() != collision_prob(k, s) {
                exact = false;
            }
        }
    }

    let rounds = 100_000;
    let mut mc_ok = true;
    let mut detail = format!("analytic == oracle on K,S <= 6: {exact}");
    for (k, s) in [(2usize, 4usize), (10, 16), (50, 64)] {
        let p = collision_prob(k, s);
        let est = estimate_collision_prob(k, s, rounds, 777);
        let sigma = (p * (1.0 - p) / rounds as f64).sqrt();
        let ok = (est - p).abs() <= 3.0 * sigma;
        mc_ok &= ok;
        detail.push_str(&format!("; ({k},{s}): |{est:.5}-{p:.5}| <= 3s={:.5}", 3.0 * sigma));
    }
    verdict(7, "RA collision correctness", exact && mc_ok, &detail);
}

#[test]
fn criterion_8_sic_sanity() {
    let mut cfg = ExperimentConfig::default();
    cfg.system.num_bs_antennas = 16;
    let sc = Scenario::from_experiment(&cfg).unwrap();

    let mut violations = 0usize;
    let mut cancellations = 0usize;
    for trial in 0..1000u64 {
        let users = sc.build_users(seed::derive(8, &[trial])).unwrap();
        let report = detect_tti(
            &users,
            &sc.grid,
            sc.noise_variance(),
            sc.plan.r_md_kbps,
            sc.plan.r_ld_kbps,
        );
        for u in report.users.iter().filter(|u| u.class == UserClass::Md) {
            if u.sinr < u.sinr_pre {
                violations += 1;
            }
            if u.sic_rank.is_some() {
                cancellations += 1;
            }
        }
    }
    verdict(
        8,
        "SIC sanity",
        violations == 0 && cancellations > 0,
        &format!(
            "0 of 4000 MD decodes lost SINR (violations = {violations}); {cancellations} cancellations observed"
        ),
    );
}

#[test]
fn criterion_9_cli_determinism() {
    use std::process::Command;
    let bin = env!("CARGO_BIN_EXE_moma");
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    std::fs::write(
        &config,
        "[system]\nnum_bs_antennas = 4\n\n[metrics]\nmc_runs = 3\nk_search_cap = 6\nrate_steps = 2\n\n[ra]\nrounds = 2000\n",
    )
    .unwrap();

    let mut pass = true;
    let mut detail = String::new();
    for sub in [
        "codes", "channel", "hardening", "tti", "capacity", "coverage", "ra", "print-config",
    ] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("{sub}-{run}"));
            let status = Command::new(bin)
                .args([
                    sub,
                    "--config",
                    config.to_str().unwrap(),
                    "--out",
                    out.to_str().unwrap(),
                    "--seed",
                    "42",
                    "--runs",
                    "5",
                ])
                .output()
                .unwrap();
            assert!(
                status.status.success(),
                "{sub} failed: {}",
                String::from_utf8_lossy(&status.stderr)
            );
            let mut files: Vec<_> = std::fs::read_dir(&out)
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            files.sort();
            let blob: Vec<(String, Vec<u8>)> = files
                .into_iter()
                .map(|f| {
                    (
                        f.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(&f).unwrap(),
                    )
                })
                .collect();
            outputs.push((blob, status.stdout));
        }
        let identical = outputs[0] == outputs[1];
        pass &= identical;
        detail.push_str(&format!("{sub}: {} ", if identical { "ok" } else { "DIFFERS" }));
    }
    verdict(9, "CLI determinism", pass, detail.trim());
}

#[test]
fn criterion_10_scaling_law() {
    fn fit_slope(points: &[(f64, f64)]) -> f64 {
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let num: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        num / den
    }

    let realizations = 200u64;

    // Solo mean post-despreading SNR vs antenna count.
    let mut m_points = Vec::new();
    for m in [1usize, 2, 4, 8, 16, 32, 64] {
        let mut cfg = ExperimentConfig::default();
        cfg.system.num_bs_antennas = m;
        cfg.channel.profile = "etu".into();
        cfg.channel.min_distance_m = 300.0;
        cfg.channel.max_distance_m = 300.0;
        let sc = Scenario::from_experiment(&cfg).unwrap();
        let mut acc = 0.0;
        for r in 0..realizations {
            let users = sc
                .build_users_with_counts(1, 1, seed::derive(10, &[m as u64, r]))
                .unwrap();
            let dg = decision_gains(&users[..1], &sc.grid, sc.noise_variance());
            acc += mean_sinr(&dg.sinr_blocks(0, &[false]));
        }
        m_points.push(((m as f64).ln(), (acc / realizations as f64).ln()));
    }
    let m_slope = fit_slope(&m_points);

    // Solo mean SNR vs spreading factor at fixed M = 16.
    let mut n_points = Vec::new();
    for n in [2usize, 4, 6, 12] {
        let mut cfg = ExperimentConfig::default();
        cfg.system.num_bs_antennas = 16;
        cfg.channel.profile = "etu".into();
        cfg.channel.min_distance_m = 300.0;
        cfg.channel.max_distance_m = 300.0;
        cfg.plan = ClassPlan {
            spreading_factor: n,
            n_md: 1,
            n_ld: n - 1,
            k_md: 1,
            k_ld: 2 * n,
            ..cfg.plan
        };
        let sc = Scenario::from_experiment(&cfg).unwrap();
        let mut acc = 0.0;
        for r in 0..realizations {
            let users = sc
                .build_users_with_counts(1, 1, seed::derive(11, &[n as u64, r]))
                .unwrap();
            let dg = decision_gains(&users[..1], &sc.grid, sc.noise_variance());
            acc += mean_sinr(&dg.sinr_blocks(0, &[false]));
        }
        n_points.push(((n as f64).ln(), (acc / realizations as f64).ln()));
    }
    let n_slope = fit_slope(&n_points);

    let pass = (m_slope - 1.0).abs() <= 0.1 && (n_slope - 1.0).abs() <= 0.1;
    verdict(
        10,
        "scaling law",
        pass,
        &format!("log-log slope vs M = {m_slope:.3}, vs N = {n_slope:.3} (gate 1.0 +/- 0.1)"),
    );
}
