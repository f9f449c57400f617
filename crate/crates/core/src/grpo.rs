//! Group-relative policy optimization with a clipped surrogate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::policy::{
    accumulate_log_prob_gradient, log_prob, FeatureVector, PolicyError, PolicyParams,
};
use crate::trajectory::Trajectory;

#[derive(Debug, thiserror::Error)]
pub enum GrpoError {
    #[error("group of {0} rollouts is too small for group statistics")]
    GroupTooSmall(usize),
    #[error("non-finite gradient; parameters left unchanged")]
    NonFiniteGradient,
    #[error("group has {trajectories} trajectories but {rewards} rewards")]
    RewardCountMismatch { trajectories: usize, rewards: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrpoConfig {
    pub learning_rate: f64,
    pub clip_epsilon: f64,
    pub epsilon_std: f64,
    pub epochs_per_batch: u32,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            learning_rate: 1e-5,
            clip_epsilon: 0.2,
            epsilon_std: 1e-8,
            epochs_per_batch: 1,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(format!(
                "clip_epsilon must lie in (0, 1), got {}",
                self.clip_epsilon
            ));
        }
        if !(self.epsilon_std > 0.0) {
            return Err("epsilon_std must be positive".into());
        }
        if self.epochs_per_batch == 0 {
            return Err("epochs_per_batch must be positive".into());
        }
        Ok(())
    }
}

/// Rollouts of one task under one parameter snapshot.
#[derive(Debug, Clone)]
pub struct RolloutGroup {
    pub trajectories: Vec<Trajectory>,
    pub rewards: Vec<f64>,
    /// Sampling temperature the log-probabilities were recorded at.
    pub temperature: f64,
}

/// `(R_i - mean) / (std_pop + eps)`.
pub fn group_advantages(rewards: &[f64], epsilon_std: f64) -> Result<Vec<f64>, GrpoError> {
    let g = rewards.len();
    if g < 2 {
        return Err(GrpoError::GroupTooSmall(g));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g as f64;
    let denom = var.sqrt() + epsilon_std;
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

fn feature(values: &[f64]) -> FeatureVector {
    FeatureVector {
        values: values.to_vec(),
        state_dim: values.len(),
    }
}

fn clipped_term(ratio: f64, adv: f64, eps: f64) -> (f64, bool) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Clipped surrogate: per-trajectory mean over steps, then mean over
/// trajectories of every group.
pub fn surrogate_objective(
    params: &PolicyParams,
    groups: &[RolloutGroup],
    config: &GrpoConfig,
) -> Result<f64, GrpoError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for g in groups {
        let adv = group_advantages(&g.rewards, config.epsilon_std)?;
        for (traj, a) in g.trajectories.iter().zip(adv) {
            if traj.is_empty() {
                continue;
            }
            let mut s = 0.0;
            for t in 0..traj.len() {
                let lp = log_prob(
                    params,
                    &feature(&traj.features[t]),
                    traj.actions[t],
                    g.temperature,
                )?;
                let ratio = (lp - traj.log_probs[t]).exp();
                s += clipped_term(ratio, a, config.clip_epsilon).0;
            }
            total += s / traj.len() as f64;
            count += 1;
        }
    }
    Ok(if count == 0 {
        0.0
    } else {
        total / count as f64
    })
}

fn trajectory_gradient(
    params: &PolicyParams,
    traj: &Trajectory,
    adv: f64,
    temperature: f64,
    eps: f64,
) -> Result<Vec<f64>, GrpoError> {
    let mut grad = vec![0.0; params.theta.len()];
    if adv == 0.0 {
        return Ok(grad);
    }
    let inv_t = 1.0 / traj.len() as f64;
    for t in 0..traj.len() {
        let f = &traj.features[t];
        let lp = log_prob(params, &feature(f), traj.actions[t], temperature)?;
        let ratio = (lp - traj.log_probs[t]).exp();
        if !ratio.is_finite() {
            return Err(GrpoError::NonFiniteGradient);
        }
        if clipped_term(ratio, adv, eps).1 {
            accumulate_log_prob_gradient(
                params,
                f,
                traj.actions[t],
                temperature,
                adv * ratio * inv_t,
                &mut grad,
            )?;
        }
    }
    Ok(grad)
}

/// Gradient of [`surrogate_objective`]. Per-trajectory gradients are
/// computed in parallel and summed in trajectory order.
pub fn surrogate_gradient(
    params: &PolicyParams,
    groups: &[RolloutGroup],
    config: &GrpoConfig,
) -> Result<Vec<f64>, GrpoError> {
    let mut jobs = Vec::new();
    for g in groups {
        if g.trajectories.len() != g.rewards.len() {
            return Err(GrpoError::RewardCountMismatch {
                trajectories: g.trajectories.len(),
                rewards: g.rewards.len(),
            });
        }
        let adv = group_advantages(&g.rewards, config.epsilon_std)?;
        for (traj, a) in g.trajectories.iter().zip(adv) {
            if !traj.is_empty() {
                jobs.push((traj, a, g.temperature));
            }
        }
    }
    let grads = jobs
        .par_iter()
        .map(|(traj, a, temp)| trajectory_gradient(params, traj, *a, *temp, config.clip_epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    let mut total = vec![0.0; params.theta.len()];
    for g in &grads {
        for (t, x) in total.iter_mut().zip(g) {
            *t += x;
        }
    }
    let n = jobs.len().max(1) as f64;
    total.iter_mut().for_each(|t| *t /= n);
    Ok(total)
}

/// One batch update: `epochs_per_batch` ascent steps on the clipped
/// surrogate. On a non-finite gradient the input parameters are returned
/// untouched through the error.
pub fn update(
    params: &PolicyParams,
    groups: &[RolloutGroup],
    config: &GrpoConfig,
) -> Result<PolicyParams, GrpoError> {
    let mut next = params.clone();
    for _ in 0..config.epochs_per_batch {
        let grad = surrogate_gradient(&next, groups, config)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(GrpoError::NonFiniteGradient);
        }
        for (t, g) in next.theta.iter_mut().zip(&grad) {
            if *g != 0.0 {
                *t += config.learning_rate * g;
            }
        }
        if next.theta.iter().any(|t| !t.is_finite()) {
            return Err(GrpoError::NonFiniteGradient);
        }
    }
    Ok(next)
}
