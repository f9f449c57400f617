//! Run configuration and its TOML file form.
//!
//! Every table and key is optional; missing values take the defaults below.
//!
//! ```toml
//! [adapt]
//! n_iterations = 200
//! rollouts_per_iteration = 32
//! group_size = 8
//! horizon = 500
//! success_threshold = 0.8
//! eval_every = 1
//! eval_episodes = 50
//! eval_temperature = 1.0
//! temperature = 1.2
//! seed = 0
//! early_stop = true
//!
//! [adapt.toggles]
//! use_ars = true
//! use_lge = true
//! use_memory = true
//! uniform_weights = false
//! critic_sigma = 0.05
//!
//! [adapt.grpo]
//! learning_rate = 10.0
//! clip_epsilon = 0.2
//! epsilon_std = 1e-8
//! epochs_per_batch = 1
//!
//! [adapt.ars]
//! alpha = 0.9
//! c_init = 0.0
//!
//! [adapt.lge]
//! p_max = 0.8
//! lambda = 0.5
//! r_bar = 0.0
//! beta = 0.9
//! interval = 1
//!
//! [adapt.memory]
//! k = 3
//! tau = 0.1
//! capacity = 100
//! insert_threshold = 0.5
//!
//! [adapt.policy]
//! hint_gain = 1.0
//! layout = { max_entities = 4, max_subgoals = 6, suggestion_dim = 128 }
//!
//! [experiment]
//! populate_iterations = 60
//! sweep_tau = [0.05, 1.0, 10.0]
//! sweep_k = [1, 10]
//! sweep_capacity = [1]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainerError;
use crate::ars::CapabilityTracker;
use crate::grpo::GrpoConfig;
use crate::lge::SuggestionSchedule;
use crate::memory::{DEFAULT_CAPACITY, DEFAULT_K, DEFAULT_TAU};
use crate::policy::FeatureLayout;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Toggles {
    /// Decomposed sub-goal reward; otherwise progress on the final sub-goal only.
    pub use_ars: bool,
    pub use_lge: bool,
    pub use_memory: bool,
    /// Fixed weight 1 for every sub-goal instead of `1 - c_hat`.
    pub uniform_weights: bool,
    pub critic_sigma: f64,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            use_ars: true,
            use_lge: true,
            use_memory: true,
            uniform_weights: false,
            critic_sigma: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArsSettings {
    pub alpha: f64,
    pub c_init: f64,
}

impl Default for ArsSettings {
    fn default() -> Self {
        ArsSettings {
            alpha: CapabilityTracker::DEFAULT_ALPHA,
            c_init: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemorySettings {
    pub k: usize,
    pub tau: f64,
    pub capacity: usize,
    /// Minimum final evaluation success for the adapted policy to be stored.
    pub insert_threshold: f64,
}

impl Default for MemorySettings {
    fn default() -> Self {
        MemorySettings {
            k: DEFAULT_K,
            tau: DEFAULT_TAU,
            capacity: DEFAULT_CAPACITY,
            insert_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicySettings {
    pub layout: FeatureLayout,
    /// Weight of the base policy's hint-word prior.
    pub hint_gain: f64,
}

impl Default for PolicySettings {
    fn default() -> Self {
        PolicySettings {
            layout: FeatureLayout::default(),
            hint_gain: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptConfig {
    pub n_iterations: u32,
    pub rollouts_per_iteration: u32,
    pub group_size: u32,
    /// Cap on the episode length; a task's own horizon applies when shorter.
    pub horizon: u32,
    pub success_threshold: f64,
    pub eval_every: u32,
    pub eval_episodes: u32,
    pub eval_temperature: f64,
    /// Rollout sampling temperature.
    pub temperature: f64,
    pub seed: u64,
    pub early_stop: bool,
    pub toggles: Toggles,
    pub grpo: GrpoConfig,
    pub ars: ArsSettings,
    pub lge: SuggestionSchedule,
    pub memory: MemorySettings,
    pub policy: PolicySettings,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            n_iterations: 200,
            rollouts_per_iteration: 32,
            group_size: 8,
            horizon: 500,
            success_threshold: 0.8,
            eval_every: 1,
            eval_episodes: 50,
            eval_temperature: 1.0,
            temperature: 1.2,
            seed: 0,
            early_stop: true,
            toggles: Toggles::default(),
            grpo: GrpoConfig {
                learning_rate: 10.0,
                ..GrpoConfig::default()
            },
            ars: ArsSettings::default(),
            lge: SuggestionSchedule {
                interval: 1,
                ..SuggestionSchedule::default()
            },
            memory: MemorySettings::default(),
            policy: PolicySettings::default(),
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |m: String| Err(TrainerError::Config(m));
        if self.rollouts_per_iteration == 0
            || self.group_size < 2
            || self.eval_every == 0
            || self.eval_episodes == 0
        {
            return bad("rollouts_per_iteration, eval_every and eval_episodes must be positive and group_size at least 2".into());
        }
        if self.rollouts_per_iteration % self.group_size != 0 {
            return bad(format!(
                "rollouts_per_iteration {} is not a multiple of group_size {}",
                self.rollouts_per_iteration, self.group_size
            ));
        }
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return bad(format!(
                "success_threshold {} outside [0, 1]",
                self.success_threshold
            ));
        }
        if !(self.temperature > 0.0 && self.eval_temperature > 0.0) {
            return bad("temperatures must be positive".into());
        }
        if !(self.toggles.critic_sigma >= 0.0 && self.toggles.critic_sigma.is_finite()) {
            return bad(format!(
                "critic_sigma {} must be nonnegative",
                self.toggles.critic_sigma
            ));
        }
        if !(0.0..=1.0).contains(&self.ars.alpha) || !(0.0..=1.0).contains(&self.ars.c_init) {
            return bad("ars.alpha and ars.c_init must lie in [0, 1]".into());
        }
        if self.memory.k == 0 || self.memory.capacity == 0 || !(self.memory.tau > 0.0) {
            return bad("memory k, capacity and tau must be positive".into());
        }
        self.grpo.validate().map_err(TrainerError::Config)?;
        self.lge.validate().map_err(TrainerError::Config)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSettings {
    /// Iterations spent on each populate-role task before measurement.
    pub populate_iterations: u32,
    pub sweep_tau: Vec<f64>,
    pub sweep_k: Vec<usize>,
    pub sweep_capacity: Vec<usize>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            populate_iterations: 60,
            sweep_tau: vec![0.05, 1.0, 10.0],
            sweep_k: vec![1, 10],
            sweep_capacity: vec![1],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub adapt: AdaptConfig,
    pub experiment: ExperimentSettings,
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self, TrainerError> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| TrainerError::Config(e.to_string()))?;
        file.adapt.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, TrainerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TrainerError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
