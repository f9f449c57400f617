//! Adaptive reward synthesis: per-sub-goal capability tracking, curriculum
//! weights and capability-weighted dense rewards.

use rand::RngCore;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::trajectory::Trajectory;
use crate::world::{oracle_progress, SubGoal, WorldError, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum ArsError {
    #[error("sub-goal index {k} out of range 1..={len}")]
    IndexOutOfRange { k: usize, len: usize },
    #[error("tracker has {tracker} entries but the task has {task} sub-goals")]
    LengthMismatch { tracker: usize, task: usize },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("critic: {0}")]
    Critic(String),
}

/// Exponential moving average of per-sub-goal success.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityTracker {
    pub c_hat: Vec<f64>,
    pub alpha: f64,
    pub c_init: f64,
}

impl CapabilityTracker {
    pub const DEFAULT_ALPHA: f64 = 0.9;

    pub fn new(k: usize, alpha: f64, c_init: f64) -> Self {
        assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1]");
        assert!((0.0..=1.0).contains(&c_init), "c_init must lie in [0, 1]");
        CapabilityTracker {
            c_hat: vec![c_init; k],
            alpha,
            c_init,
        }
    }

    pub fn k(&self) -> usize {
        self.c_hat.len()
    }

    fn slot(&self, k: usize) -> Result<usize, ArsError> {
        if k == 0 || k > self.c_hat.len() {
            return Err(ArsError::IndexOutOfRange {
                k,
                len: self.c_hat.len(),
            });
        }
        Ok(k - 1)
    }

    /// `k` is 1-based.
    pub fn update(&mut self, k: usize, success: bool) -> Result<(), ArsError> {
        let i = self.slot(k)?;
        let target = if success { 1.0 } else { 0.0 };
        self.c_hat[i] = (self.alpha * self.c_hat[i] + (1.0 - self.alpha) * target).clamp(0.0, 1.0);
        Ok(())
    }

    pub fn capability(&self, k: usize) -> Result<f64, ArsError> {
        Ok(self.c_hat[self.slot(k)?])
    }

    /// Curriculum weight `1 - c_hat` of sub-goal `k` (1-based).
    pub fn weight(&self, k: usize) -> Result<f64, ArsError> {
        Ok(1.0 - self.c_hat[self.slot(k)?])
    }

    pub fn weights(&self) -> Vec<f64> {
        self.c_hat.iter().map(|c| 1.0 - c).collect()
    }
}

/// Free-function form of [`CapabilityTracker::update`].
pub fn update_capability(
    tracker: &mut CapabilityTracker,
    k: usize,
    success: bool,
) -> Result<(), ArsError> {
    tracker.update(k, success)
}

pub fn subgoal_weight(tracker: &CapabilityTracker, k: usize) -> Result<f64, ArsError> {
    tracker.weight(k)
}

/// Scores how far a segment advanced one sub-goal.
pub trait ProgressCritic: Send + Sync {
    fn progress(
        &self,
        start: &WorldState,
        end: &WorldState,
        subgoal: &SubGoal,
        rng: &mut dyn RngCore,
    ) -> Result<f64, ArsError>;
}

/// Ground-truth distance-based progress.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleCritic;

impl ProgressCritic for OracleCritic {
    fn progress(
        &self,
        start: &WorldState,
        end: &WorldState,
        g: &SubGoal,
        _: &mut dyn RngCore,
    ) -> Result<f64, ArsError> {
        Ok(oracle_progress(start, end, g)?)
    }
}

/// Oracle progress plus clamped Gaussian noise.
#[derive(Debug, Clone, Copy)]
pub struct NoisyCritic {
    pub sigma: f64,
}

impl ProgressCritic for NoisyCritic {
    fn progress(
        &self,
        start: &WorldState,
        end: &WorldState,
        g: &SubGoal,
        rng: &mut dyn RngCore,
    ) -> Result<f64, ArsError> {
        let delta = oracle_progress(start, end, g)?;
        Ok(noisy_critic(delta, self.sigma, rng))
    }
}

/// `clamp(delta + N(0, sigma), 0, 1)`. No variate is drawn when `sigma == 0`.
pub fn noisy_critic(delta: f64, sigma: f64, rng: &mut dyn RngCore) -> f64 {
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    if sigma == 0.0 {
        return delta;
    }
    let noise = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
    (delta + noise).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub deltas: Vec<f64>,
    pub weights: Vec<f64>,
    pub total: f64,
    pub subgoal_successes: Vec<bool>,
}

/// Observation-index segments `(start, end)` per sub-goal.
pub fn segment_trajectory(traj: &Trajectory, subgoals: &[SubGoal]) -> Vec<(usize, usize)> {
    let end = traj.states.len().saturating_sub(1);
    let mut boundary = 0;
    subgoals
        .iter()
        .enumerate()
        .map(|(k, _)| {
            let hit = (boundary..traj.satisfied.len()).find(|&t| traj.satisfied[t][k]);
            match hit {
                Some(t) => {
                    let seg = (boundary, t);
                    boundary = t;
                    seg
                }
                None => (boundary, end),
            }
        })
        .collect()
}

/// Sub-goal success: the predicate held at some observation.
pub fn subgoal_successes(traj: &Trajectory, k: usize) -> Vec<bool> {
    (0..k)
        .map(|i| traj.satisfied.iter().any(|s| s[i]))
        .collect()
}

/// Reward with explicit weights, one per sub-goal.
pub fn compute_reward_weighted(
    traj: &Trajectory,
    subgoals: &[SubGoal],
    weights: &[f64],
    critic: &dyn ProgressCritic,
    rng: &mut dyn RngCore,
) -> Result<RewardBreakdown, ArsError> {
    if weights.len() != subgoals.len() {
        return Err(ArsError::LengthMismatch {
            tracker: weights.len(),
            task: subgoals.len(),
        });
    }
    let segments = segment_trajectory(traj, subgoals);
    let deltas = subgoals
        .iter()
        .zip(&segments)
        .map(|(g, &(a, b))| {
            critic
                .progress(&traj.states[a], &traj.states[b], g, rng)
                .map(|d| d.clamp(0.0, 1.0))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let total = weights.iter().zip(&deltas).map(|(w, d)| w * d).sum();
    Ok(RewardBreakdown {
        deltas,
        weights: weights.to_vec(),
        total,
        subgoal_successes: subgoal_successes(traj, subgoals.len()),
    })
}

/// Capability-weighted dense reward.
pub fn compute_reward(
    traj: &Trajectory,
    subgoals: &[SubGoal],
    tracker: &CapabilityTracker,
    critic: &dyn ProgressCritic,
    rng: &mut dyn RngCore,
) -> Result<RewardBreakdown, ArsError> {
    if tracker.k() != subgoals.len() {
        return Err(ArsError::LengthMismatch {
            tracker: tracker.k(),
            task: subgoals.len(),
        });
    }
    compute_reward_weighted(traj, subgoals, &tracker.weights(), critic, rng)
}

/// Reward without decomposition: critic progress on the final sub-goal from
/// the first to the last observation.
pub fn final_goal_reward(
    traj: &Trajectory,
    subgoals: &[SubGoal],
    critic: &dyn ProgressCritic,
    rng: &mut dyn RngCore,
) -> Result<RewardBreakdown, ArsError> {
    let last = subgoals.last().expect("task has sub-goals");
    let delta = critic
        .progress(traj.first(), traj.last(), last, rng)?
        .clamp(0.0, 1.0);
    let k = subgoals.len();
    let mut deltas = vec![0.0; k];
    let mut weights = vec![0.0; k];
    deltas[k - 1] = delta;
    weights[k - 1] = 1.0;
    Ok(RewardBreakdown {
        deltas,
        weights,
        total: delta,
        subgoal_successes: subgoal_successes(traj, k),
    })
}
