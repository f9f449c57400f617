use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::TrainerError;
use crate::ars::CapabilityTracker;
use crate::lge::{should_suggest, Suggestion, SuggestionProvider, SuggestionSchedule};
use crate::policy::{
    action_distribution, featurize, log_prob, sample_action, FeatureLayout, PolicyParams,
};
use crate::trajectory::Trajectory;
use crate::world::{step, Action, TaskSpec};

/// RNG stream domains.
pub(crate) mod domain {
    pub const ROLLOUT: u64 = 1;
    pub const CRITIC: u64 = 2;
    pub const EVAL: u64 = 3;
}

/// Independent ChaCha8 stream for `(seed, domain, a, b)`.
pub fn stream_rng(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, v) in key.chunks_exact_mut(8).zip([seed, domain, a, b]) {
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Per-episode suggestion gating. `None` disables hints entirely.
pub struct Hints<'a> {
    pub schedule: &'a SuggestionSchedule,
    pub provider: &'a dyn SuggestionProvider,
    pub tracker: &'a CapabilityTracker,
}

/// Samples one episode from the task's initial layout until the final
/// sub-goal holds or `horizon` steps elapse.
pub fn rollout(
    params: &PolicyParams,
    task: &TaskSpec,
    layout: &FeatureLayout,
    temperature: f64,
    horizon: u32,
    hints: Option<&Hints<'_>>,
    rng: &mut dyn RngCore,
) -> Result<Trajectory, TrainerError> {
    let mut state = task.layout.clone();
    let mut traj = Trajectory {
        states: vec![state.clone()],
        satisfied: vec![task.satisfied(&state)?],
        ..Trajectory::default()
    };
    let mut active: Option<Suggestion> = None;
    for t in 0..horizon {
        if task.is_success(&state)? {
            break;
        }
        if let Some(h) = hints {
            if t % h.schedule.interval == 0 {
                active = if should_suggest(h.schedule, t, rng) {
                    Some(h.provider.suggest(&state, task, h.tracker, rng)?).filter(|s| !s.is_none())
                } else {
                    None
                };
            }
        }
        let f = featurize(&state, task, active.as_ref(), layout)?;
        let probs = action_distribution(params, &f, temperature)?;
        let action = sample_action(&probs, rng);
        traj.log_probs
            .push(log_prob(params, &f, action, temperature)?);
        traj.actions.push(action);
        traj.features.push(f.values);
        traj.suggestions
            .push(active.as_ref().map(|s| s.text.clone()));
        state = step(&state, action);
        traj.satisfied.push(task.satisfied(&state)?);
        traj.states.push(state.clone());
    }
    Ok(traj)
}

/// How evaluation episodes choose actions.
#[derive(Clone, Copy)]
pub enum EvalPolicy<'a> {
    /// Sampled from the parameters at the evaluation temperature.
    Params(&'a PolicyParams),
    /// The world's scripted expert.
    Scripted,
    /// Uniform over actions.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalResult {
    pub success_rate: f64,
    pub mean_progress: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub episodes: u32,
    pub temperature: f64,
    pub horizon: u32,
}

fn eval_episode(
    policy: EvalPolicy<'_>,
    task: &TaskSpec,
    layout: &FeatureLayout,
    settings: &EvalSettings,
    rng: &mut ChaCha8Rng,
) -> Result<(bool, f64), TrainerError> {
    let last = match policy {
        EvalPolicy::Params(p) => rollout(
            p,
            task,
            layout,
            settings.temperature,
            settings.horizon,
            None,
            rng,
        )?
        .last()
        .clone(),
        EvalPolicy::Scripted | EvalPolicy::Random => {
            let mut state = task.layout.clone();
            for _ in 0..settings.horizon {
                if task.is_success(&state)? {
                    break;
                }
                let action = match policy {
                    EvalPolicy::Scripted => task.expert_action(&state)?,
                    _ => Action::ALL[rng.random_range(0..Action::ALL.len())],
                };
                state = step(&state, action);
            }
            state
        }
    };
    let done = task.done_flags(&last)?;
    let progress = done.iter().filter(|d| **d).count() as f64 / task.k() as f64;
    Ok((task.is_success(&last)?, progress))
}

/// Success rate and mean end-of-episode progress across `settings.episodes`
/// hint-free episodes. Progress counts completed sub-goals over K, where a
/// transient sub-goal counts once a later one holds. Episode `i` uses its
/// own RNG stream, so results do not depend on thread scheduling.
pub fn evaluate_with(
    policy: EvalPolicy<'_>,
    task: &TaskSpec,
    layout: &FeatureLayout,
    settings: &EvalSettings,
    seed: u64,
) -> Result<EvalResult, TrainerError> {
    if settings.episodes == 0 {
        return Err(TrainerError::Config(
            "evaluation needs at least one episode".into(),
        ));
    }
    let outcomes = (0..settings.episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, domain::EVAL, u64::from(i), 0);
            eval_episode(policy, task, layout, settings, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = f64::from(settings.episodes);
    Ok(EvalResult {
        success_rate: outcomes.iter().filter(|(s, _)| *s).count() as f64 / n,
        mean_progress: outcomes.iter().map(|(_, p)| p).sum::<f64>() / n,
    })
}

/// [`evaluate_with`] on learned parameters at temperature 1 and the task's
/// own horizon.
pub fn evaluate(
    params: &PolicyParams,
    task: &TaskSpec,
    n_episodes: u32,
    seed: u64,
) -> Result<EvalResult, TrainerError> {
    let layout = FeatureLayout::default();
    let settings = EvalSettings {
        episodes: n_episodes,
        temperature: 1.0,
        horizon: task.horizon,
    };
    evaluate_with(EvalPolicy::Params(params), task, &layout, &settings, seed)
}
