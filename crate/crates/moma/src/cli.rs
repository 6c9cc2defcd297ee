//! The `moma` command-line front end: each subcommand loads a TOML experiment
//! configuration, runs one analysis and writes CSV files into the output
//! directory. Every file starts with `# `-prefixed provenance lines (config
//! hash and master seed) so reruns are checkable byte-for-byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::channel::hardening_stats;
use crate::codes::UserClass;
use crate::config::{ConfigError, ExperimentConfig};
use crate::metrics::{capacity_curve, coverage_gain_db, LinkBudget};
use crate::phy::detect_tti;
use crate::ra::{
    collision_prob, estimate_collision_prob, overhead_report, simulate_round, RaConfig, RaError,
    RaScheme,
};
use crate::scenario::{build_signature_set, Scenario, ScenarioError};
use crate::seed;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Ra(#[from] RaError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Parser)]
#[command(name = "moma", about = "Hierarchical-spreading uplink link-level simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed; every random stream derives from it.
    #[arg(long)]
    pub seed: u64,
    /// Monte Carlo runs, overriding the configuration where applicable.
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the per-user signatures and their Gram matrix.
    Codes(CommonArgs),
    /// Sample channel realizations and report their effective-gain spread.
    Channel(CommonArgs),
    /// Channel-hardening curve: median CV vs. antenna count.
    Hardening(CommonArgs),
    /// One detection pass (SIC included) at the configured load.
    Tti(CommonArgs),
    /// Served users vs. rate target, against the orthogonal baseline.
    Capacity(CommonArgs),
    /// Link budgets and coverage gains of the spread modes.
    Coverage(CommonArgs),
    /// Random-access collision statistics and overhead.
    Ra(CommonArgs),
    /// Print the fully-resolved configuration and write it to the output dir.
    PrintConfig(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Codes(a)
            | Command::Channel(a)
            | Command::Hardening(a)
            | Command::Tti(a)
            | Command::Capacity(a)
            | Command::Coverage(a)
            | Command::Ra(a)
            | Command::PrintConfig(a) => a,
        }
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, CliError> {
    Ok(match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    })
}

fn header(cfg: &ExperimentConfig, seed_val: u64) -> String {
    format!(
        "# moma output\n# config_hash = {:016x}\n# seed = {}\n",
        cfg.hash(),
        seed_val
    )
}

fn write_table(
    path: &Path,
    head: &str,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut text = String::from(head);
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn fmt_f(v: f64) -> String {
    // Shortest round-trip Display: deterministic and exact.
    format!("{v}")
}

/// Runs one parsed command. Errors are reported by the binary with a nonzero
/// exit status.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let args = cli.command.common();
    let cfg = load_config(args)?;
    std::fs::create_dir_all(&args.out)?;
    let head = header(&cfg, args.seed);

    match &cli.command {
        Command::Codes(a) => cmd_codes(&cfg, a, &head),
        Command::Channel(a) => cmd_channel(&cfg, a, &head),
        Command::Hardening(a) => cmd_hardening(&cfg, a, &head),
        Command::Tti(a) => cmd_tti(&cfg, a, &head),
        Command::Capacity(a) => cmd_capacity(&cfg, a, &head),
        Command::Coverage(a) => cmd_coverage(&cfg, a, &head),
        Command::Ra(a) => cmd_ra(&cfg, a, &head),
        Command::PrintConfig(a) => cmd_print_config(&cfg, a, &head),
    }
}

fn cmd_codes(cfg: &ExperimentConfig, a: &CommonArgs, head: &str) -> Result<(), CliError> {
    let sc = Scenario::from_experiment(cfg)?;
    let set = build_signature_set(&sc.plan, &sc.grid, sc.code_kind, sc.generation, a.seed)
        .map_err(ScenarioError::from)?;

    let mut columns = vec!["user".to_string(), "class".to_string()];
    for p in 0..sc.grid.spread_len {
        columns.push(format!("chip{p}_re"));
        columns.push(format!("chip{p}_im"));
    }
    let col_refs: Vec<&str> = columns.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = set
        .signatures
        .iter()
        .map(|s| {
            let mut row = vec![s.user.to_string(), s.class.to_string()];
            for c in &s.chips {
                row.push(fmt_f(c.re));
                row.push(fmt_f(c.im));
            }
            row
        })
        .collect();
    write_table(&a.out.join("signatures.csv"), head, &col_refs, &rows)?;

    let g = crate::codes::gram(&set);
    let rows: Vec<Vec<String>> = (0..set.len())
        .flat_map(|i| {
            let g = &g;
            (0..set.len()).map(move |j| {
                vec![
                    i.to_string(),
                    j.to_string(),
                    fmt_f(g[i][j].re),
                    fmt_f(g[i][j].im),
                    fmt_f(g[i][j].norm()),
                ]
            })
        })
        .collect();
    write_table(
        &a.out.join("gram.csv"),
        head,
        &["i", "j", "re", "im", "abs"],
        &rows,
    )
}

fn cmd_channel(cfg: &ExperimentConfig, a: &CommonArgs, head: &str) -> Result<(), CliError> {
    let sc = Scenario::from_experiment(cfg)?;
    let runs = a.runs.unwrap_or(cfg.metrics.mc_runs);
    let rows: Vec<Vec<String>> = (0..runs)
        .map(|r| {
            let ch = crate::channel::sample_channel(
                &sc.profile,
                &sc.fading,
                sc.system.num_bs_antennas,
                &sc.grid,
                seed::derive(a.seed, &[r as u64]),
            );
            let gains = crate::channel::mrc_effective_response(&ch);
            let flat: Vec<f64> = gains.into_iter().flatten().collect();
            let mean = flat.iter().sum::<f64>() / flat.len() as f64;
            vec![
                r.to_string(),
                fmt_f(mean),
                fmt_f(crate::channel::effective_gain_cv(&ch)),
            ]
        })
        .collect();
    write_table(
        &a.out.join("channel.csv"),
        head,
        &["realization", "mean_gain", "cv"],
        &rows,
    )
}

fn cmd_hardening(cfg: &ExperimentConfig, a: &CommonArgs, head: &str) -> Result<(), CliError> {
    let sc = Scenario::from_experiment(cfg)?;
    let m_values = [1usize, 4, 16, 64, 100];
    let runs = a.runs.unwrap_or(cfg.metrics.mc_runs);
    let stats = hardening_stats(&sc.profile, &m_values, runs, &sc.grid, a.seed);
    let rows: Vec<Vec<String>> = stats
        .m_values
        .iter()
        .zip(&stats.median_cv)
        .map(|(&m, &cv)| vec![m.to_string(), fmt_f(cv)])
        .collect();
    write_table(
        &a.out.join("hardening.csv"),
        head,
        &["antennas", "median_cv"],
        &rows,
    )
}

fn cmd_tti(cfg: &ExperimentConfig, a: &CommonArgs, head: &str) -> Result<(), CliError> {
    let sc = Scenario::from_experiment(cfg)?;
    let users = sc.build_users(a.seed)?;
    let report = detect_tti(
        &users,
        &sc.grid,
        sc.noise_variance(),
        sc.plan.r_md_kbps,
        sc.plan.r_ld_kbps,
    );
    let rows: Vec<Vec<String>> = report
        .users
        .iter()
        .zip(&users)
        .map(|(u, state)| {
            vec![
                u.id.to_string(),
                u.class.to_string(),
                fmt_f(state.distance_m),
                fmt_f(u.sinr_pre),
                fmt_f(u.sinr),
                fmt_f(u.rate_kbps),
                u.served.to_string(),
                u.sic_rank.map_or(String::from(""), |r| r.to_string()),
                fmt_f(u.intra_power),
                fmt_f(u.inter_power),
                fmt_f(u.noise_power),
            ]
        })
        .collect();
    write_table(
        &a.out.join("tti.csv"),
        head,
        &[
            "user", "class", "distance_m", "sinr_pre", "sinr", "rate_kbps", "served", "sic_rank",
            "intra_power", "inter_power", "noise_power",
        ],
        &rows,
    )
}

fn rate_targets(min: f64, max: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![min];
    }
    (0..steps)
        .map(|i| min + (max - min) * i as f64 / (steps - 1) as f64)
        .collect()
}

fn cmd_capacity(cfg: &ExperimentConfig, a: &CommonArgs, head: &str) -> Result<(), CliError> {
    let sc = Scenario::from_experiment(cfg)?;
    let m = &cfg.metrics;
    let runs = a.runs.unwrap_or(m.mc_runs);
    let mut rows = Vec::new();
    for (class, lo, hi) in [
        (UserClass::Md, m.md_rate_min_kbps, m.md_rate_max_kbps),
        (UserClass::Ld, m.ld_rate_min_kbps, m.ld_rate_max_kbps),
    ] {
        let targets = rate_targets(lo, hi, m.rate_steps);
        for point in capacity_curve(
            &sc,
            class,
            &targets,
            runs,
            m.outage_eps,
            m.k_search_cap,
            a.seed,
        ) {
            rows.push(vec![
                class.to_string(),
                fmt_f(point.target_kbps),
                point.k_star.to_string(),
                point.baseline.to_string(),
            ]);
        }
    }
    write_table(
        &a.out.join("capacity.csv"),
        head,
        &["class", "target_kbps", "served_users", "baseline_users"],
        &rows,
    )
}

fn cmd_coverage(cfg: &ExperimentConfig, a: &CommonArgs, head: &str) -> Result<(), CliError> {
    let sc = Scenario::from_experiment(cfg)?;
    let base = LinkBudget {
        tx_power_dbm: sc.system.tx_power_dbm,
        noise_psd_dbm_hz: sc.system.noise_psd_dbm_hz,
        noise_figure_db: sc.system.noise_figure_db,
        bandwidth_hz: sc.system.lmd_bandwidth_hz,
        required_snr_db: 0.0,
        processing_gain_db: 0.0,
    };
    let n = sc.plan.spreading_factor;
    let rows: Vec<Vec<String>> = [
        ("unspread", 0.0),
        ("spread", coverage_gain_db(n)),
        ("spread_bundled", coverage_gain_db(4 * n)),
    ]
    .into_iter()
    .map(|(mode, pg)| {
        let lb = LinkBudget { processing_gain_db: pg, ..base };
        vec![
            mode.to_string(),
            fmt_f(pg),
            fmt_f(lb.mcl_db()),
            fmt_f(lb.mcl_db() - base.mcl_db()),
        ]
    })
    .collect();
    write_table(
        &a.out.join("coverage.csv"),
        head,
        &["mode", "processing_gain_db", "mcl_db", "coverage_gain_db"],
        &rows,
    )
}

fn cmd_ra(cfg: &ExperimentConfig, a: &CommonArgs, head: &str) -> Result<(), CliError> {
    let ra = RaConfig {
        scheme: RaScheme::parse(&cfg.ra.scheme)?,
        pool_md: cfg.ra.pool_md,
        pool_ld: cfg.ra.pool_ld,
        arrivals_md: cfg.ra.arrivals_md,
        arrivals_ld: cfg.ra.arrivals_ld,
    };
    let rounds = a.runs.unwrap_or(cfg.ra.rounds);

    let mut md_collided = 0usize;
    let mut ld_collided = 0usize;
    let mut ld_clean = 0usize;
    for r in 0..rounds {
        let out = simulate_round(&ra, a.seed, r as u64);
        md_collided += out.md.collided;
        ld_collided += out.ld.collided;
        ld_clean += out.ld.clean;
    }
    let overhead = overhead_report(&ra);
    let analytic = collision_prob(ra.arrivals_ld, ra.pool_ld);
    let mc = estimate_collision_prob(ra.arrivals_ld, ra.pool_ld, rounds, a.seed);

    let mut rows = Vec::new();
    let mut push = |k: &str, v: String| rows.push(vec![k.to_string(), v]);
    push("rounds", rounds.to_string());
    push("ld_collision_prob_analytic", fmt_f(analytic));
    push("ld_collision_prob_mc", fmt_f(mc));
    push("md_collided_mean", fmt_f(md_collided as f64 / rounds as f64));
    push("ld_collided_mean", fmt_f(ld_collided as f64 / rounds as f64));
    push("ld_clean_mean", fmt_f(ld_clean as f64 / rounds as f64));
    push("grant_messages", overhead.grant_messages.to_string());
    push("broadcast_messages", overhead.broadcast_messages.to_string());
    write_table(&a.out.join("ra.csv"), head, &["metric", "value"], &rows)
}

fn cmd_print_config(cfg: &ExperimentConfig, a: &CommonArgs, head: &str) -> Result<(), CliError> {
    let resolved = cfg.to_toml_string();
    let mut text = String::from(head);
    let _ = write!(text, "{resolved}");
    std::fs::write(a.out.join("config.toml"), &text)?;
    print!("{resolved}");
    Ok(())
}
