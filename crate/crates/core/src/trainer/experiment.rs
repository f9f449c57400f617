use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use tracing::info;

use super::{
    adapt_with, evaluate_with, AdaptConfig, EvalPolicy, EvalSettings, ExperimentSettings,
    IterationRecord, TrainerError,
};
use crate::lge::{instruction_prior, HeuristicProvider};
use crate::memory::{MemoryBank, EMBEDDING_DIM};
use crate::policy::PolicyParams;
use crate::world::{TaskRole, TaskSpec, TaskSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentMode {
    Full,
    AblateArs,
    AblateLge,
    AblateEm,
    UniformCurriculum,
    ColdVsWarm,
    Transfer,
    MemorySensitivity,
}

impl ExperimentMode {
    pub const ALL: [ExperimentMode; 8] = [
        ExperimentMode::Full,
        ExperimentMode::AblateArs,
        ExperimentMode::AblateLge,
        ExperimentMode::AblateEm,
        ExperimentMode::UniformCurriculum,
        ExperimentMode::ColdVsWarm,
        ExperimentMode::Transfer,
        ExperimentMode::MemorySensitivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentMode::Full => "full",
            ExperimentMode::AblateArs => "ablate-ars",
            ExperimentMode::AblateLge => "ablate-lge",
            ExperimentMode::AblateEm => "ablate-em",
            ExperimentMode::UniformCurriculum => "uniform-curriculum",
            ExperimentMode::ColdVsWarm => "cold-vs-warm",
            ExperimentMode::Transfer => "transfer",
            ExperimentMode::MemorySensitivity => "memory-sensitivity",
        }
    }
}

impl fmt::Display for ExperimentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode '{s}'"))
    }
}

/// One arm of a comparison: a configuration plus the bank capacity it sees.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub config: AdaptConfig,
}

impl Variant {
    fn new(name: &str, base: &AdaptConfig, edit: impl FnOnce(&mut AdaptConfig)) -> Self {
        let mut config = base.clone();
        edit(&mut config);
        Variant {
            name: name.to_owned(),
            config,
        }
    }
}

/// Arms compared by `mode`, the first being the reference.
pub fn variants(
    mode: ExperimentMode,
    base: &AdaptConfig,
    settings: &ExperimentSettings,
) -> Vec<Variant> {
    let full = Variant::new("full", base, |_| {});
    match mode {
        ExperimentMode::Full | ExperimentMode::Transfer => vec![full],
        ExperimentMode::AblateArs => vec![
            full,
            Variant::new("no-ars", base, |c| c.toggles.uniform_weights = true),
        ],
        ExperimentMode::AblateLge => vec![
            full,
            Variant::new("no-lge", base, |c| c.toggles.use_lge = false),
        ],
        ExperimentMode::AblateEm => vec![
            full,
            Variant::new("no-em", base, |c| c.toggles.use_memory = false),
        ],
        ExperimentMode::UniformCurriculum => vec![
            full,
            Variant::new("uniform-weights", base, |c| {
                c.toggles.uniform_weights = true
            }),
            Variant::new("final-goal-only", base, |c| c.toggles.use_ars = false),
        ],
        ExperimentMode::ColdVsWarm => vec![
            Variant::new("warm", base, |_| {}),
            Variant::new("cold", base, |c| c.toggles.use_memory = false),
        ],
        ExperimentMode::MemorySensitivity => {
            let mut v = vec![Variant::new("default", base, |_| {})];
            for &tau in &settings.sweep_tau {
                v.push(Variant::new(&format!("tau={tau}"), base, |c| {
                    c.memory.tau = tau
                }));
            }
            for &k in &settings.sweep_k {
                v.push(Variant::new(&format!("k={k}"), base, |c| c.memory.k = k));
            }
            for &cap in &settings.sweep_capacity {
                v.push(Variant::new(&format!("capacity={cap}"), base, |c| {
                    c.memory.capacity = cap
                }));
            }
            v
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub variant: String,
    pub task_id: String,
    pub seed: u64,
    pub iterations_to_threshold: Option<u32>,
    pub iterations_to_090: Option<u32>,
    pub budget: u32,
    /// Evaluation of the starting parameters before any update.
    pub pre_success_rate: f64,
    pub final_success_rate: f64,
    pub final_progress: f64,
    pub rollout_count: u64,
    #[serde(skip)]
    pub records: Vec<IterationRecord>,
}

impl RunResult {
    /// Iterations to threshold; runs that never reach it count as budget + 1.
    pub fn effective_iterations(&self) -> u32 {
        self.iterations_to_threshold.unwrap_or(self.budget + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub runs: usize,
    pub censored_runs: usize,
    pub median_iterations: f64,
    pub median_iterations_090: f64,
    pub median_pre_success_rate: f64,
    pub median_final_success_rate: f64,
    pub median_final_progress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceCheck {
    pub name: String,
    pub observed: f64,
    pub bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub mode: ExperimentMode,
    pub runs: Vec<RunResult>,
    pub summaries: Vec<VariantSummary>,
    pub checks: Vec<AcceptanceCheck>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self, variant: &str) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == variant)
    }
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn rebuild_with_capacity(bank: &MemoryBank, capacity: usize) -> Result<MemoryBank, TrainerError> {
    if capacity == bank.capacity {
        return Ok(bank.clone());
    }
    let mut out = MemoryBank::with_dim(
        capacity,
        &bank.version_tag,
        bank.embedding_dim,
        bank.param_len,
    );
    for e in &bank.entries {
        out.insert(e.clone())?;
    }
    Ok(out)
}

fn run_seed(
    suite: &TaskSuite,
    arms: &[Variant],
    base_config: &AdaptConfig,
    settings: &ExperimentSettings,
    seed: u64,
) -> Result<Vec<RunResult>, TrainerError> {
    let layout = base_config.policy.layout;
    let base = instruction_prior(&layout, base_config.policy.hint_gain);
    let provider = HeuristicProvider::new(layout.suggestion_dim);
    let mut bank = MemoryBank::with_dim(
        base_config.memory.capacity,
        &layout.version_tag(),
        EMBEDDING_DIM,
        layout.param_len(),
    );

    for (i, task) in suite.with_role(TaskRole::Populate).into_iter().enumerate() {
        let mut cfg = base_config.clone();
        cfg.toggles.use_memory = true;
        cfg.n_iterations = settings.populate_iterations;
        cfg.early_stop = true;
        cfg.seed = mix(seed, 1_000 + i as u64);
        let (_, report) = adapt_with(task, &base, &mut bank, &cfg, &provider, &mut |_| {})?;
        info!(seed, task = %task.id, success = report.final_eval.success_rate, "populated");
    }

    let mut results = Vec::new();
    for arm in arms {
        let arm_bank = rebuild_with_capacity(&bank, arm.config.memory.capacity)?;
        for (j, task) in suite.with_role(TaskRole::Target).into_iter().enumerate() {
            let mut cfg = arm.config.clone();
            cfg.early_stop = false;
            cfg.seed = mix(seed, j as u64);
            let mut scratch = arm_bank.clone();
            let (_, report) = adapt_with(task, &base, &mut scratch, &cfg, &provider, &mut |_| {})?;
            let pre = pre_evaluation(&report.warm_start_params, task, &cfg)?;
            results.push(RunResult {
                variant: arm.name.clone(),
                task_id: task.id.clone(),
                seed,
                iterations_to_threshold: report.iterations_to_threshold,
                iterations_to_090: report.iterations_to_090,
                budget: cfg.n_iterations,
                pre_success_rate: pre,
                final_success_rate: report.final_eval.success_rate,
                final_progress: report.final_eval.mean_progress,
                rollout_count: report.rollout_count(),
                records: report.records,
            });
        }
    }
    Ok(results)
}

fn pre_evaluation(
    params: &PolicyParams,
    task: &TaskSpec,
    cfg: &AdaptConfig,
) -> Result<f64, TrainerError> {
    let settings = EvalSettings {
        episodes: cfg.eval_episodes,
        temperature: cfg.eval_temperature,
        horizon: cfg.horizon.min(task.horizon),
    };
    let r = evaluate_with(
        EvalPolicy::Params(params),
        task,
        &cfg.policy.layout,
        &settings,
        mix(cfg.seed, 77),
    )?;
    Ok(r.success_rate)
}

fn summarize(name: &str, runs: &[&RunResult]) -> VariantSummary {
    let col =
        |f: &dyn Fn(&RunResult) -> f64| median(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
    VariantSummary {
        variant: name.to_owned(),
        runs: runs.len(),
        censored_runs: runs
            .iter()
            .filter(|r| r.iterations_to_threshold.is_none())
            .count(),
        median_iterations: col(&|r| f64::from(r.effective_iterations())),
        median_iterations_090: col(&|r| f64::from(r.iterations_to_090.unwrap_or(r.budget + 1))),
        median_pre_success_rate: col(&|r| r.pre_success_rate),
        median_final_success_rate: col(&|r| r.final_success_rate),
        median_final_progress: col(&|r| r.final_progress),
    }
}

/// Relative slowdown every ablation must show over the full system.
pub const ABLATION_MARGIN: f64 = 1.10;
/// Warm-start median iterations must be at most this fraction of cold start.
pub const WARM_START_RATIO: f64 = 0.75;
/// Ceiling on direct success of a transferred policy before adaptation.
pub const TRANSFER_PRE_CEILING: f64 = 0.05;

fn checks(
    mode: ExperimentMode,
    summaries: &[VariantSummary],
    runs: &[RunResult],
) -> Vec<AcceptanceCheck> {
    let get = |n: &str| summaries.iter().find(|s| s.variant == n);
    let mut out = Vec::new();
    match mode {
        ExperimentMode::AblateArs
        | ExperimentMode::AblateLge
        | ExperimentMode::AblateEm
        | ExperimentMode::UniformCurriculum => {
            let full = get("full").expect("reference arm").median_iterations;
            for s in summaries.iter().filter(|s| s.variant != "full") {
                out.push(AcceptanceCheck {
                    name: format!("{} slower than full by {ABLATION_MARGIN}x", s.variant),
                    observed: s.median_iterations / full,
                    bound: ABLATION_MARGIN,
                    passed: s.median_iterations >= ABLATION_MARGIN * full,
                });
            }
        }
        ExperimentMode::ColdVsWarm => {
            let warm = get("warm").expect("warm arm").median_iterations;
            let cold = get("cold").expect("cold arm").median_iterations;
            out.push(AcceptanceCheck {
                name: "warm over cold median iterations".into(),
                observed: warm / cold,
                bound: WARM_START_RATIO,
                passed: warm <= WARM_START_RATIO * cold,
            });
        }
        ExperimentMode::Transfer => {
            let pre =
                runs.iter().map(|r| r.pre_success_rate).sum::<f64>() / runs.len().max(1) as f64;
            out.push(AcceptanceCheck {
                name: "mean direct success before adaptation".into(),
                observed: pre,
                bound: TRANSFER_PRE_CEILING,
                passed: pre <= TRANSFER_PRE_CEILING,
            });
            let post = get("full").expect("full arm").median_final_success_rate;
            out.push(AcceptanceCheck {
                name: "median success after adaptation above zero".into(),
                observed: post,
                bound: 0.0,
                passed: post > 0.0,
            });
        }
        ExperimentMode::MemorySensitivity => {
            let default = get("default").expect("default arm").median_iterations;
            let extremes = summaries
                .iter()
                .filter(|s| matches!(s.variant.as_str(), "tau=10" | "k=10" | "capacity=1"));
            for s in extremes {
                out.push(AcceptanceCheck {
                    name: format!("default no slower than {}", s.variant),
                    observed: default,
                    bound: s.median_iterations,
                    passed: default <= s.median_iterations,
                });
            }
        }
        ExperimentMode::Full => {}
    }
    out
}

/// Runs the arms of `mode` over `seeds` seeds. For every seed the bank is
/// populated by adapting on populate-role tasks, then each arm adapts on
/// every target task from a copy of that bank with an identical budget.
pub fn run_experiment(
    suite: &TaskSuite,
    mode: ExperimentMode,
    config: &AdaptConfig,
    settings: &ExperimentSettings,
    seeds: u32,
) -> Result<ExperimentReport, TrainerError> {
    run_variants(
        suite,
        mode,
        &variants(mode, config, settings),
        config,
        settings,
        seeds,
    )
}

/// [`run_experiment`] with explicit arms; `mode` selects the checks.
pub fn run_variants(
    suite: &TaskSuite,
    mode: ExperimentMode,
    arms: &[Variant],
    config: &AdaptConfig,
    settings: &ExperimentSettings,
    seeds: u32,
) -> Result<ExperimentReport, TrainerError> {
    config.validate()?;
    for arm in arms {
        arm.config.validate()?;
    }
    if seeds == 0 {
        return Err(TrainerError::Config("at least one seed is required".into()));
    }
    if suite.with_role(TaskRole::Target).is_empty() {
        return Err(TrainerError::Config("suite has no target tasks".into()));
    }
    let per_seed = (0..u64::from(seeds))
        .into_par_iter()
        .map(|s| run_seed(suite, arms, config, settings, config.seed.wrapping_add(s)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut runs: Vec<RunResult> = per_seed.into_iter().flatten().collect();
    let order = |name: &str| {
        arms.iter()
            .position(|a| a.name == name)
            .unwrap_or(usize::MAX)
    };
    runs.sort_by(|a, b| {
        (order(&a.variant), a.seed, &a.task_id).cmp(&(order(&b.variant), b.seed, &b.task_id))
    });
    let summaries: Vec<VariantSummary> = arms
        .iter()
        .map(|a| {
            summarize(
                &a.name,
                &runs
                    .iter()
                    .filter(|r| r.variant == a.name)
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let checks = checks(mode, &summaries, &runs);
    Ok(ExperimentReport {
        mode,
        runs,
        summaries,
        checks,
    })
}
