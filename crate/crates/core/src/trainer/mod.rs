//! Adaptation loop, evaluation and comparative experiments.

mod config;
mod experiment;
mod metrics;
mod rollout;

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;
use tracing::{debug, info, warn};

pub use config::{
    AdaptConfig, ArsSettings, ConfigFile, ExperimentSettings, MemorySettings, PolicySettings,
    Toggles,
};
pub use experiment::{
    median, run_experiment, run_variants, variants, AcceptanceCheck, ExperimentMode,
    ExperimentReport, RunResult, Variant, VariantSummary, ABLATION_MARGIN, TRANSFER_PRE_CEILING,
    WARM_START_RATIO,
};
pub use metrics::{
    write_checks_csv, write_iterations_csv, write_runs_csv, write_summary_csv, IterationCsv,
    ITERATION_COLUMNS, RUN_COLUMNS, SUMMARY_COLUMNS,
};
pub use rollout::{
    evaluate, evaluate_with, rollout, stream_rng, EvalPolicy, EvalResult, EvalSettings, Hints,
};

use crate::ars::{
    compute_reward_weighted, final_goal_reward, ArsError, CapabilityTracker, NoisyCritic,
    OracleCritic, ProgressCritic,
};
use crate::grpo::{update, GrpoError, RolloutGroup};
use crate::lge::{update_reward_average, HeuristicProvider, LgeError, SuggestionProvider};
use crate::memory::{
    embed_dim, retrieve, warm_start, EntryMeta, InsertOutcome, MemoryBank, MemoryEntry, MemoryError,
};
use crate::policy::{PolicyError, PolicyParams};
use crate::trajectory::Trajectory;
use crate::world::{TaskSpec, WorldError};
use rollout::domain;

#[derive(Debug, thiserror::Error)]
pub enum TrainerError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Ars(#[from] ArsError),
    #[error(transparent)]
    Lge(#[from] LgeError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Grpo(#[from] GrpoError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Steps of one adaptation run, in the order they happened.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum AdaptEvent {
    WarmStart { neighbors: usize },
    Decompose { subgoals: usize },
    TrackerInit,
    Rollouts { iteration: u32, count: usize },
    Rewards { iteration: u32 },
    PolicyUpdate { iteration: u32, applied: bool },
    CapabilityUpdate { iteration: u32 },
    ScheduleUpdate { iteration: u32 },
    Evaluation { iteration: u32 },
    EarlyStop { iteration: u32 },
    MemoryInsert { outcome: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: u32,
    /// Mean of the reward that drove the update.
    pub mean_reward: f64,
    /// Mean of the unweighted per-sub-goal progress, divided by K.
    pub mean_progress_reward: f64,
    pub rollout_success_rate: f64,
    pub eval_success_rate: Option<f64>,
    pub eval_progress: Option<f64>,
    /// Capabilities and weights after this iteration's update.
    pub c_hat: Vec<f64>,
    pub weights: Vec<f64>,
    /// Probability in force during this iteration's rollouts.
    pub suggestion_probability: f64,
    pub hinted_fraction: f64,
    pub rollout_count: u64,
    pub update_applied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptReport {
    pub task_id: String,
    pub records: Vec<IterationRecord>,
    pub final_params: PolicyParams,
    pub warm_start_params: PolicyParams,
    pub iterations_to_threshold: Option<u32>,
    pub iterations_to_090: Option<u32>,
    pub final_eval: EvalResult,
    pub events: Vec<AdaptEvent>,
    pub memory_outcome: Option<InsertOutcome>,
}

impl AdaptReport {
    pub fn rollout_count(&self) -> u64 {
        self.records.last().map_or(0, |r| r.rollout_count)
    }
}

/// [`adapt_with`] using the heuristic hint provider.
pub fn adapt(
    task: &TaskSpec,
    base_params: &PolicyParams,
    bank: &mut MemoryBank,
    config: &AdaptConfig,
) -> Result<(PolicyParams, AdaptReport), TrainerError> {
    let provider = HeuristicProvider::new(config.policy.layout.suggestion_dim);
    adapt_with(task, base_params, bank, config, &provider, &mut |_| {})
}

fn critic_for(sigma: f64) -> Box<dyn ProgressCritic> {
    if sigma > 0.0 {
        Box::new(NoisyCritic { sigma })
    } else {
        Box::new(OracleCritic)
    }
}

/// The full adaptation loop. `on_iteration` sees every record as soon as it
/// is complete.
pub fn adapt_with(
    task: &TaskSpec,
    base_params: &PolicyParams,
    bank: &mut MemoryBank,
    config: &AdaptConfig,
    provider: &dyn SuggestionProvider,
    on_iteration: &mut dyn FnMut(&IterationRecord),
) -> Result<(PolicyParams, AdaptReport), TrainerError> {
    config.validate()?;
    task.validate()?;
    let layout = &config.policy.layout;
    base_params.check_tag(&layout.version_tag())?;
    let toggles = &config.toggles;
    let mut events = Vec::new();

    let mut params = if toggles.use_memory {
        let query = embed_dim(&task.instruction, bank.embedding_dim)?;
        let neighbors = retrieve(bank, &query, config.memory.k).len();
        events.push(AdaptEvent::WarmStart { neighbors });
        warm_start(
            bank,
            &task.instruction,
            base_params,
            config.memory.k,
            config.memory.tau,
        )?
    } else {
        base_params.clone()
    };
    let warm_start_params = params.clone();

    let k = task.k();
    events.push(AdaptEvent::Decompose { subgoals: k });
    let mut tracker = CapabilityTracker::new(k, config.ars.alpha, config.ars.c_init);
    events.push(AdaptEvent::TrackerInit);
    let mut schedule = config.lge.clone();
    let critic = critic_for(toggles.critic_sigma);
    let horizon = config.horizon.min(task.horizon);
    let eval_settings = EvalSettings {
        episodes: config.eval_episodes,
        temperature: config.eval_temperature,
        horizon,
    };
    let n = config.rollouts_per_iteration as usize;

    let mut records = Vec::new();
    let mut to_threshold = None;
    let mut to_090 = None;
    let mut last_eval: Option<(u32, EvalResult)> = None;

    for iteration in 1..=config.n_iterations {
        let it = u64::from(iteration);
        let probability = schedule.probability();
        let trajectories: Vec<Trajectory> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = rollout::stream_rng(config.seed, domain::ROLLOUT, it, i as u64);
                let hints = Hints {
                    schedule: &schedule,
                    provider,
                    tracker: &tracker,
                };
                let hints = toggles.use_lge.then_some(&hints);
                rollout(
                    &params,
                    task,
                    layout,
                    config.temperature,
                    horizon,
                    hints,
                    &mut rng,
                )
            })
            .collect::<Result<_, _>>()?;
        events.push(AdaptEvent::Rollouts {
            iteration,
            count: n,
        });

        let weights = if toggles.uniform_weights {
            vec![1.0; k]
        } else {
            tracker.weights()
        };
        let breakdowns = trajectories
            .par_iter()
            .enumerate()
            .map(|(i, traj)| {
                let mut rng = rollout::stream_rng(config.seed, domain::CRITIC, it, i as u64);
                let rng: &mut dyn RngCore = &mut rng;
                let dense =
                    compute_reward_weighted(traj, &task.subgoals, &weights, critic.as_ref(), rng)?;
                let reward = if toggles.use_ars {
                    dense.total
                } else {
                    final_goal_reward(traj, &task.subgoals, critic.as_ref(), rng)?.total
                };
                Ok::<_, TrainerError>((reward, dense))
            })
            .collect::<Result<Vec<_>, _>>()?;
        events.push(AdaptEvent::Rewards { iteration });
        let rewards: Vec<f64> = breakdowns.iter().map(|(r, _)| *r).collect();

        let groups: Vec<RolloutGroup> = trajectories
            .chunks(config.group_size as usize)
            .zip(rewards.chunks(config.group_size as usize))
            .map(|(t, r)| RolloutGroup {
                trajectories: t.to_vec(),
                rewards: r.to_vec(),
                temperature: config.temperature,
            })
            .collect();
        let applied = match update(&params, &groups, &config.grpo) {
            Ok(next) => {
                params = next;
                true
            }
            Err(GrpoError::NonFiniteGradient) => {
                warn!(task = %task.id, iteration, "non-finite gradient, batch skipped");
                false
            }
            Err(e) => return Err(e.into()),
        };
        events.push(AdaptEvent::PolicyUpdate { iteration, applied });

        for (_, b) in &breakdowns {
            for (j, s) in b.subgoal_successes.iter().enumerate() {
                tracker.update(j + 1, *s)?;
            }
        }
        events.push(AdaptEvent::CapabilityUpdate { iteration });

        let mean_reward = rewards.iter().sum::<f64>() / n as f64;
        let progress_sum: f64 = breakdowns
            .iter()
            .map(|(_, b)| b.deltas.iter().sum::<f64>())
            .sum();
        let mean_progress_reward = progress_sum / n as f64 / k as f64;
        update_reward_average(&mut schedule, progress_sum / n as f64, k);
        events.push(AdaptEvent::ScheduleUpdate { iteration });

        let mut eval = None;
        if iteration % config.eval_every == 0 || iteration == config.n_iterations {
            let seed = config.seed ^ (it << 32);
            let r = evaluate_with(
                EvalPolicy::Params(&params),
                task,
                layout,
                &eval_settings,
                seed,
            )?;
            events.push(AdaptEvent::Evaluation { iteration });
            if to_threshold.is_none() && r.success_rate >= config.success_threshold {
                to_threshold = Some(iteration);
            }
            if to_090.is_none() && r.success_rate >= 0.9 {
                to_090 = Some(iteration);
            }
            last_eval = Some((iteration, r));
            eval = Some(r);
        }

        let successes = trajectories
            .iter()
            .filter(|t| task.is_success(t.last()).unwrap_or(false))
            .count();
        let hinted: usize = trajectories.iter().map(Trajectory::hinted_steps).sum();
        let steps: usize = trajectories.iter().map(Trajectory::len).sum();
        let record = IterationRecord {
            iteration,
            mean_reward,
            mean_progress_reward,
            rollout_success_rate: successes as f64 / n as f64,
            eval_success_rate: eval.map(|e| e.success_rate),
            eval_progress: eval.map(|e| e.mean_progress),
            c_hat: tracker.c_hat.clone(),
            weights: tracker.weights(),
            suggestion_probability: probability,
            hinted_fraction: if steps == 0 {
                0.0
            } else {
                hinted as f64 / steps as f64
            },
            rollout_count: it * n as u64,
            update_applied: applied,
        };
        debug!(task = %task.id, iteration, mean_reward, eval = ?record.eval_success_rate, "iteration");
        on_iteration(&record);
        records.push(record);

        if config.early_stop && to_threshold.is_some() {
            events.push(AdaptEvent::EarlyStop { iteration });
            break;
        }
    }

    let final_eval = match last_eval {
        Some((_, r)) => r,
        None => {
            let seed = config.seed ^ 0xfeed;
            evaluate_with(
                EvalPolicy::Params(&params),
                task,
                layout,
                &eval_settings,
                seed,
            )?
        }
    };

    let mut memory_outcome = None;
    if toggles.use_memory && final_eval.success_rate >= config.memory.insert_threshold {
        let entry = MemoryEntry::new(
            embed_dim(&task.instruction, bank.embedding_dim)?,
            &params,
            EntryMeta {
                instruction: task.instruction.clone(),
                success_rate: final_eval.success_rate,
                training_iterations: records.len() as u32,
                task_complexity: k as u32,
                created_at: bank.next_timestamp(),
            },
        );
        let outcome = bank.insert(entry)?;
        events.push(AdaptEvent::MemoryInsert {
            outcome: format!("{outcome:?}"),
        });
        memory_outcome = Some(outcome);
    }
    info!(
        task = %task.id,
        iterations = records.len(),
        success = final_eval.success_rate,
        threshold_at = ?to_threshold,
        "adaptation finished"
    );

    let report = AdaptReport {
        task_id: task.id.clone(),
        records,
        final_params: params.clone(),
        warm_start_params,
        iterations_to_threshold: to_threshold,
        iterations_to_090: to_090,
        final_eval,
        events,
        memory_outcome,
    };
    Ok((params, report))
}
