//! Scenario assembly: turns a validated experiment configuration into the
//! per-trial user populations (signatures, channels, distances, powers) that
//! the detection and metrics layers consume.
//!
//! With TTI bundling the code matrix order is the full chip count 4N and the
//! column partition scales to 4 N_MD / 4 N_LD, so the class split and the
//! exact inter-class orthogonality carry over unchanged.

use rand::Rng;
use thiserror::Error;

use crate::channel::{
    pathloss, sample_channel, ChannelError, Evolution, FadingProcess, PathlossModel, TapProfile,
};
use crate::codes::{
    build_code_matrix, build_overloading, partition, signatures, CodeError, CodeKind, Generation,
    SignatureSet, UserClass,
};
use crate::config::{derive_grid, ClassPlan, ConfigError, ExperimentConfig, GridSpec, SystemConfig};
use crate::phy::UserState;
use crate::seed;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("unknown {field}: {value:?}")]
    UnknownOption { field: &'static str, value: String },
}

/// Signatures for a (possibly bundled) plan: MD users first, then LD.
pub fn build_signature_set(
    plan: &ClassPlan,
    grid: &GridSpec,
    kind: CodeKind,
    generation: Generation,
    seed_val: u64,
) -> Result<SignatureSet, CodeError> {
    build_signature_set_with_counts(plan, grid, kind, generation, plan.k_md, plan.k_ld, seed_val)
}

pub fn build_signature_set_with_counts(
    plan: &ClassPlan,
    grid: &GridSpec,
    kind: CodeKind,
    generation: Generation,
    k_md: usize,
    k_ld: usize,
    seed_val: u64,
) -> Result<SignatureSet, CodeError> {
    let u = build_code_matrix(kind, grid.spread_len)?;
    let part = partition(&u, plan.n_md * grid.bundle_len)?;
    let w_md = build_overloading(UserClass::Md, part.u_md.len(), k_md, generation, seed_val)?;
    let w_ld = build_overloading(UserClass::Ld, part.u_ld.len(), k_ld, generation, seed_val)?;
    signatures(&part, &w_md, &w_ld)
}

/// Uniform user distances on [min, max), deterministic under the seed.
pub fn draw_distances(count: usize, min_m: f64, max_m: f64, master: u64) -> Vec<f64> {
    if min_m == max_m {
        return vec![min_m; count];
    }
    let mut rng = seed::rng(master, &[seed::domain::DISTANCES]);
    (0..count).map(|_| rng.random_range(min_m..max_m)).collect()
}

/// Everything needed to draw i.i.d. trials of a configured experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub system: SystemConfig,
    pub plan: ClassPlan,
    pub grid: GridSpec,
    pub profile: TapProfile,
    pub fading: FadingProcess,
    pub pathloss_model: PathlossModel,
    pub min_distance_m: f64,
    pub max_distance_m: f64,
    pub code_kind: CodeKind,
    pub generation: Generation,
}

impl Scenario {
    pub fn from_experiment(cfg: &ExperimentConfig) -> Result<Self, ScenarioError> {
        let grid = derive_grid(&cfg.system, &cfg.plan)?;
        let profile = TapProfile::by_name(&cfg.channel.profile)?;
        let evolution = match cfg.channel.evolution.as_str() {
            "block_per_tti" => Evolution::BlockPerTti,
            "jakes_sos" => Evolution::JakesSos,
            other => {
                return Err(ScenarioError::UnknownOption {
                    field: "channel.evolution",
                    value: other.into(),
                })
            }
        };
        let pathloss_model = match cfg.channel.pathloss_model.as_str() {
            "log_distance" => PathlossModel::LogDistance {
                pl0_db: cfg.channel.pathloss_ref_db,
                exponent: cfg.channel.pathloss_exponent,
            },
            "free_space" => PathlossModel::FreeSpace {
                carrier_freq_hz: cfg.system.carrier_freq_hz,
            },
            other => {
                return Err(ScenarioError::UnknownOption {
                    field: "channel.pathloss_model",
                    value: other.into(),
                })
            }
        };
        Ok(Scenario {
            system: cfg.system.clone(),
            plan: cfg.plan.clone(),
            grid,
            profile,
            fading: FadingProcess {
                doppler_hz: cfg.channel.doppler_hz,
                evolution,
            },
            pathloss_model,
            min_distance_m: cfg.channel.min_distance_m,
            max_distance_m: cfg.channel.max_distance_m,
            code_kind: CodeKind::Dft,
            generation: Generation::RandomSphere,
        })
    }

    pub fn noise_variance(&self) -> f64 {
        self.system.noise_variance_per_re_w()
    }

    /// One trial's user population at the plan's class counts.
    pub fn build_users(&self, trial_seed: u64) -> Result<Vec<UserState>, ScenarioError> {
        self.build_users_with_counts(self.plan.k_md, self.plan.k_ld, trial_seed)
    }

    /// As [`Self::build_users`] with explicit class counts (used by the
    /// served-user search, which sweeps counts past the configured plan).
    pub fn build_users_with_counts(
        &self,
        k_md: usize,
        k_ld: usize,
        trial_seed: u64,
    ) -> Result<Vec<UserState>, ScenarioError> {
        let set = build_signature_set_with_counts(
            &self.plan,
            &self.grid,
            self.code_kind,
            self.generation,
            k_md,
            k_ld,
            trial_seed,
        )?;
        let distances = draw_distances(
            set.len(),
            self.min_distance_m,
            self.max_distance_m,
            trial_seed,
        );
        self.assemble(set, &distances, trial_seed)
    }

    /// Trial population with caller-fixed distances (tests, bridges).
    pub fn build_users_at(
        &self,
        distances: &[f64],
        trial_seed: u64,
    ) -> Result<Vec<UserState>, ScenarioError> {
        let set = build_signature_set(
            &self.plan,
            &self.grid,
            self.code_kind,
            self.generation,
            trial_seed,
        )?;
        self.assemble(set, distances, trial_seed)
    }

    fn assemble(
        &self,
        set: SignatureSet,
        distances: &[f64],
        trial_seed: u64,
    ) -> Result<Vec<UserState>, ScenarioError> {
        assert_eq!(distances.len(), set.len());
        let m = self.system.num_bs_antennas;
        let p_re = self.system.tx_power_per_re_w();
        set.signatures
            .into_iter()
            .zip(distances)
            .map(|(sig, &d)| {
                let mut ch = sample_channel(
                    &self.profile,
                    &self.fading,
                    m,
                    &self.grid,
                    seed::derive(trial_seed, &[sig.user as u64]),
                );
                ch.large_scale_gain = pathloss(d, self.pathloss_model)?;
                Ok(UserState {
                    id: sig.user,
                    class: sig.class,
                    signature: sig,
                    channel: ch,
                    tx_power_per_re_w: p_re,
                    distance_m: d,
                })
            })
            .collect()
    }
}
