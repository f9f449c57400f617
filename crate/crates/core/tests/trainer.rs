use proptest::prelude::*;

use vla_adapt_core::lge::instruction_prior;
use vla_adapt_core::memory::{MemoryBank, EMBEDDING_DIM};
use vla_adapt_core::policy::{featurize, FeatureLayout, PolicyParams};
use vla_adapt_core::trainer::{
    adapt, evaluate_with, AdaptConfig, AdaptEvent, EvalPolicy, EvalSettings,
};
use vla_adapt_core::world::{builtin_task, TaskSpec};

fn empty_bank(cfg: &AdaptConfig) -> MemoryBank {
    let layout = cfg.policy.layout;
    MemoryBank::with_dim(
        cfg.memory.capacity,
        &layout.version_tag(),
        EMBEDDING_DIM,
        layout.param_len(),
    )
}

fn base(cfg: &AdaptConfig) -> PolicyParams {
    instruction_prior(&cfg.policy.layout, cfg.policy.hint_gain)
}

fn quick(n: u32, seed: u64) -> AdaptConfig {
    AdaptConfig {
        n_iterations: n,
        eval_episodes: 20,
        seed,
        ..AdaptConfig::default()
    }
}

fn run(task: &TaskSpec, cfg: &AdaptConfig) -> vla_adapt_core::trainer::AdaptReport {
    let mut bank = empty_bank(cfg);
    adapt(task, &base(cfg), &mut bank, cfg).unwrap().1
}

#[test]
fn zero_iterations_return_warm_start_params() {
    let task = builtin_task("stove-moka").unwrap();
    let cfg = quick(0, 1);
    let mut bank = empty_bank(&cfg);
    let (params, report) = adapt(&task, &base(&cfg), &mut bank, &cfg).unwrap();
    assert_eq!(params, report.warm_start_params);
    assert_eq!(params, base(&cfg));
    assert!(report.records.is_empty());
}

#[test]
fn approach_stove_from_cold_start_reaches_090_within_150_iterations() {
    let task = builtin_task("approach-stove").unwrap();
    let mut cfg = quick(150, 0);
    cfg.eval_episodes = 50;
    cfg.toggles.use_memory = false;
    cfg.success_threshold = 0.9;
    let report = run(&task, &cfg);
    let first = report.iterations_to_threshold.expect("reaches 0.9");
    assert!(first <= 150);
    assert!(
        report.final_eval.success_rate >= 0.9,
        "{:?}",
        report.final_eval
    );
}

#[test]
fn capability_updates_follow_the_policy_update_each_iteration() {
    let task = builtin_task("drawer-bowl").unwrap();
    let mut cfg = quick(4, 3);
    cfg.early_stop = false;
    let report = run(&task, &cfg);
    let events = &report.events;
    assert!(matches!(events[0], AdaptEvent::WarmStart { .. }));
    assert!(matches!(events[1], AdaptEvent::Decompose { subgoals: 6 }));
    assert_eq!(events[2], AdaptEvent::TrackerInit);
    for it in 1..=4u32 {
        let pos = |want: &dyn Fn(&AdaptEvent) -> bool| events.iter().position(|e| want(e)).unwrap();
        let roll =
            pos(&|e| matches!(e, AdaptEvent::Rollouts { iteration, .. } if *iteration == it));
        let rew = pos(&|e| matches!(e, AdaptEvent::Rewards { iteration } if *iteration == it));
        let upd =
            pos(&|e| matches!(e, AdaptEvent::PolicyUpdate { iteration, .. } if *iteration == it));
        let cap =
            pos(&|e| matches!(e, AdaptEvent::CapabilityUpdate { iteration } if *iteration == it));
        let sched =
            pos(&|e| matches!(e, AdaptEvent::ScheduleUpdate { iteration } if *iteration == it));
        let eval = pos(&|e| matches!(e, AdaptEvent::Evaluation { iteration } if *iteration == it));
        assert!(
            roll < rew && rew < upd && upd < cap && cap < sched && sched < eval,
            "iteration {it}: {events:?}"
        );
    }
    assert!(
        matches!(events.last(), Some(AdaptEvent::MemoryInsert { .. }))
            || report.final_eval.success_rate < 0.5
    );
}

#[test]
fn memory_disabled_skips_warm_start_and_insertion() {
    let task = builtin_task("approach-stove").unwrap();
    let mut cfg = quick(3, 0);
    cfg.toggles.use_memory = false;
    let report = run(&task, &cfg);
    assert!(!report.events.iter().any(|e| matches!(
        e,
        AdaptEvent::WarmStart { .. } | AdaptEvent::MemoryInsert { .. }
    )));
    assert!(report.memory_outcome.is_none());
}

#[test]
fn rollout_count_strictly_increases_and_threshold_is_first_crossing() {
    let task = builtin_task("bowl-basket").unwrap();
    let mut cfg = quick(25, 5);
    cfg.early_stop = false;
    let report = run(&task, &cfg);
    for w in report.records.windows(2) {
        assert!(w[1].rollout_count > w[0].rollout_count);
        assert_eq!(
            w[1].rollout_count - w[0].rollout_count,
            u64::from(cfg.rollouts_per_iteration)
        );
    }
    let first = report
        .records
        .iter()
        .find(|r| {
            r.eval_success_rate
                .is_some_and(|s| s >= cfg.success_threshold)
        })
        .map(|r| r.iteration);
    assert_eq!(report.iterations_to_threshold, first);
}

#[test]
fn early_stop_ends_the_run_at_the_threshold() {
    let task = builtin_task("approach-stove").unwrap();
    let report = run(&task, &quick(50, 2));
    let stop = report.iterations_to_threshold.expect("easy task");
    assert_eq!(report.records.len() as u32, stop);
    assert!(report
        .events
        .iter()
        .any(|e| matches!(e, AdaptEvent::EarlyStop { iteration } if *iteration == stop)));
}

#[test]
fn curriculum_weights_shift_on_the_instrumented_chain() {
    // sub-goal 1 holds in the layout, the last one is out of reach
    let task = builtin_task("chain-instrumented").unwrap();
    for sigma in [0.05, 0.0] {
        let mut cfg = quick(30, 0);
        cfg.early_stop = false;
        cfg.toggles.critic_sigma = sigma;
        let report = run(&task, &cfg);
        let w = &report.records[29].weights;
        assert!(w[0] < 0.05 && w[2] > 0.9, "sigma {sigma}: {w:?}");
    }
}

#[test]
fn identical_seeds_give_identical_reports() {
    let task = builtin_task("cup-bin").unwrap();
    let cfg = quick(5, 11);
    let a = run(&task, &cfg);
    let b = run(&task, &cfg);
    assert_eq!(a.records, b.records);
    assert_eq!(a.final_params, b.final_params);
}

#[test]
fn scripted_policy_is_perfect_and_random_policy_fails_the_stove_task() {
    let task = builtin_task("stove-moka").unwrap();
    let layout = FeatureLayout::default();
    let settings = EvalSettings {
        episodes: 50,
        temperature: 1.0,
        horizon: 500,
    };
    let scripted = evaluate_with(EvalPolicy::Scripted, &task, &layout, &settings, 0).unwrap();
    assert_eq!((scripted.success_rate, scripted.mean_progress), (1.0, 1.0));
    let random = evaluate_with(EvalPolicy::Random, &task, &layout, &settings, 0).unwrap();
    assert!(random.success_rate <= 0.1, "{random:?}");
}

#[test]
fn evaluation_features_carry_no_suggestion() {
    let task = builtin_task("drawer-bowl").unwrap();
    let layout = FeatureLayout::default();
    let f = featurize(&task.layout, &task, None, &layout).unwrap();
    assert!(f.suggestion_block().iter().all(|x| *x == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn reported_rates_are_probabilities(seed in 0u64..1_000, n in 1u32..4) {
        let task = builtin_task("mug-box").unwrap();
        let mut cfg = quick(n, seed);
        cfg.eval_episodes = 5;
        cfg.early_stop = false;
        let report = run(&task, &cfg);
        prop_assert_eq!(report.records.len() as u32, n);
        for r in &report.records {
            prop_assert!((0.0..=1.0).contains(&r.rollout_success_rate));
            prop_assert!((0.0..=1.0).contains(&r.suggestion_probability));
            prop_assert!(r.weights.iter().zip(&r.c_hat).all(|(w, c)| (w + c - 1.0).abs() < 1e-12));
        }
    }
}
