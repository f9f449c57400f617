//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL`
//! line to stdout (bypassing the test harness capture) before asserting.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vla_adapt_core::ars::{compute_reward_weighted, CapabilityTracker, OracleCritic};
use vla_adapt_core::grpo::group_advantages;
use vla_adapt_core::lge::{instruction_prior, suggestion_probability, SuggestionSchedule};
use vla_adapt_core::memory::{
    embed, interpolate, retrieve, softmax_weights, EntryMeta, InstructionEmbedding, MemoryBank,
    MemoryEntry, EMBEDDING_DIM,
};
use vla_adapt_core::policy::{featurize, log_prob, log_prob_gradient, FeatureLayout, PolicyParams};
use vla_adapt_core::trainer::{
    adapt, rollout, run_experiment, run_variants, variants, AdaptConfig, ExperimentMode,
    ExperimentReport, ExperimentSettings, ABLATION_MARGIN, TRANSFER_PRE_CEILING, WARM_START_RATIO,
};
use vla_adapt_core::world::{builtin_task, builtin_tasks, oracle_progress, Action, TaskSuite};

const SEEDS: u32 = 10;
/// Iteration budget per measured run in the comparative criteria.
const BUDGET: u32 = 80;
const SENSITIVITY_BUDGET: u32 = 60;

fn report(criterion: &str, passed: bool, detail: &str) {
    let line = format!(
        "criterion {criterion}: {} ({detail})\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn suite(name: &str) -> TaskSuite {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../suites")
        .join(name);
    TaskSuite::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn config(n_iterations: u32, sigma: f64) -> AdaptConfig {
    let mut cfg = AdaptConfig {
        n_iterations,
        ..AdaptConfig::default()
    };
    cfg.toggles.critic_sigma = sigma;
    cfg
}

fn median_of(r: &ExperimentReport, arm: &str) -> f64 {
    r.summary(arm)
        .unwrap_or_else(|| panic!("arm {arm}"))
        .median_iterations
}

// ---------------------------------------------------------------------------
// criterion 1: formula invariants

fn random_trajectory(
    rng: &mut ChaCha8Rng,
) -> (
    vla_adapt_core::world::TaskSpec,
    vla_adapt_core::trajectory::Trajectory,
) {
    let tasks = builtin_tasks();
    let task = tasks[rng.random_range(0..tasks.len())].clone();
    let layout = FeatureLayout::default();
    let mut params = PolicyParams::zeros(&layout);
    params
        .theta
        .iter_mut()
        .for_each(|t| *t = rng.random_range(-1.0..1.0));
    let traj = rollout(&params, &task, &layout, 1.0, task.horizon, None, rng).unwrap();
    (task, traj)
}

/// First observation index at or after `from` where sub-goal `k` holds.
fn oracle_segments(sat: &[Vec<bool>], k: usize) -> Vec<(usize, usize)> {
    let end = sat.len() - 1;
    let mut segs = Vec::new();
    let mut start = 0;
    for g in 0..k {
        match (start..sat.len()).find(|&t| sat[t][g]) {
            Some(t) => {
                segs.push((start, t));
                start = t;
            }
            None => segs.push((start, end)),
        }
    }
    segs
}

fn check_ema_bounds() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let k = rng.random_range(1..=6);
        let alpha = rng.random_range(0.0..=1.0);
        let mut tracker = CapabilityTracker::new(k, alpha, rng.random_range(0.0..=1.0));
        for _ in 0..rng.random_range(1..60) {
            let g = rng.random_range(1..=k);
            tracker.update(g, rng.random_bool(0.5)).unwrap();
            let c = tracker.capability(g).unwrap();
            if !(0.0..=1.0).contains(&c) {
                return Err(format!("capability {c} outside [0, 1]"));
            }
            if tracker.weight(g).unwrap() != 1.0 - c {
                return Err("weight differs from 1 - c".into());
            }
        }
    }
    Ok(())
}

fn check_reward_identity() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let (task, traj) = random_trajectory(&mut rng);
        let k = task.k();
        let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..=1.0)).collect();
        let r = compute_reward_weighted(&traj, &task.subgoals, &weights, &OracleCritic, &mut rng)
            .unwrap();
        let expected: f64 = oracle_segments(&traj.satisfied, k)
            .iter()
            .zip(&task.subgoals)
            .zip(&weights)
            .map(|((&(a, b), g), w)| {
                w * oracle_progress(&traj.states[a], &traj.states[b], g)
                    .unwrap()
                    .clamp(0.0, 1.0)
            })
            .sum();
        if (r.total - expected).abs() > 1e-12 {
            return Err(format!("{}: total {} vs {expected}", task.id, r.total));
        }
    }
    Ok(())
}

fn check_interpolation() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let layout = FeatureLayout::default();
    for _ in 0..200 {
        let n = rng.random_range(1..=10);
        let tau = [0.05, 0.1, 1.0, 10.0][rng.random_range(0..4)];
        let cosines: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let w = softmax_weights(&cosines, tau);
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 || w.iter().any(|x| *x < 0.0) {
            return Err(format!("weights {w:?}"));
        }
        let entries: Vec<MemoryEntry> = (0..n)
            .map(|i| {
                let mut p = PolicyParams::zeros(&layout);
                p.theta
                    .iter_mut()
                    .for_each(|t| *t = rng.random_range(-5.0..5.0));
                MemoryEntry::new(
                    embed(&format!("task number {i}")).unwrap(),
                    &p,
                    EntryMeta {
                        instruction: format!("task number {i}"),
                        success_rate: 1.0,
                        training_iterations: 0,
                        task_complexity: 1,
                        created_at: i as i64,
                    },
                )
            })
            .collect();
        let neighbors: Vec<(&MemoryEntry, f64)> =
            entries.iter().zip(&cosines).map(|(e, c)| (e, *c)).collect();
        let theta = interpolate(&neighbors, tau).unwrap().theta;
        for (j, t) in theta.iter().enumerate() {
            let col = entries.iter().map(|e| e.params.theta[j]);
            let (lo, hi) = col
                .clone()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| {
                    (l.min(x), h.max(x))
                });
            if *t < lo - 1e-12 || *t > hi + 1e-12 {
                return Err(format!("coordinate {j} = {t} outside [{lo}, {hi}]"));
            }
        }
    }
    Ok(())
}

fn check_retrieval() -> Result<(), String> {
    const WORDS: [&str; 16] = [
        "pick", "place", "bowl", "plate", "stove", "drawer", "open", "turn", "on", "the", "in",
        "mug", "basket", "red", "blue", "block",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let layout = FeatureLayout::default();
    let sentence = |rng: &mut ChaCha8Rng| {
        (0..rng.random_range(2..7))
            .map(|_| WORDS[rng.random_range(0..WORDS.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };
    for _ in 0..100 {
        let mut bank = MemoryBank::new(100, &layout.version_tag(), layout.param_len());
        for _ in 0..rng.random_range(1..40) {
            let text = sentence(&mut rng);
            let meta = EntryMeta {
                instruction: text.clone(),
                success_rate: rng.random_range(0.0..=1.0),
                training_iterations: 1,
                task_complexity: 1,
                created_at: bank.next_timestamp(),
            };
            bank.insert(MemoryEntry::new(
                embed(&text).unwrap(),
                &PolicyParams::zeros(&layout),
                meta,
            ))
            .unwrap();
        }
        let query = embed(&sentence(&mut rng)).unwrap();
        let k = rng.random_range(1..=12);
        let got: Vec<(String, f64)> = retrieve(&bank, &query, k)
            .into_iter()
            .map(|(e, c)| (e.meta.instruction.clone(), c))
            .collect();
        let mut brute: Vec<(f64, i64, String)> = bank
            .entries
            .iter()
            .map(|e| {
                let dot: f64 = e
                    .embedding
                    .values
                    .iter()
                    .zip(&query.values)
                    .map(|(a, b)| a * b)
                    .sum();
                let na = e.embedding.values.iter().map(|a| a * a).sum::<f64>().sqrt();
                (dot / na, e.meta.created_at, e.meta.instruction.clone())
            })
            .collect();
        brute.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.cmp(&b.1))
                .then_with(|| a.2.cmp(&b.2))
        });
        brute.truncate(k);
        if got.len() != brute.len() {
            return Err("result length".into());
        }
        for ((gi, gc), (bc, _, bi)) in got.iter().zip(&brute) {
            // near-ties may legitimately order differently within rounding
            if (gc - bc).abs() > 1e-12 || (gi != bi && (gc - bc).abs() > 1e-12) {
                return Err(format!("{gi} {gc} vs {bi} {bc}"));
            }
        }
    }
    Ok(())
}

fn check_advantages() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1_000 {
        let n = rng.random_range(2..=16);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..6.0)).collect();
        let a = group_advantages(&r, 1e-8).unwrap();
        let mean = a.iter().sum::<f64>() / n as f64;
        if mean.abs() > 1e-12 {
            return Err(format!("mean {mean}"));
        }
        let shift = rng.random_range(-10.0..10.0);
        let shifted: Vec<f64> = r.iter().map(|x| x + shift).collect();
        let b = group_advantages(&shifted, 1e-8).unwrap();
        if a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9) {
            return Err("not shift invariant".into());
        }
    }
    Ok(())
}

fn check_gradient() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let layout = FeatureLayout::default();
    for i in 0..10 {
        let (task, traj) = random_trajectory(&mut rng);
        let state = &traj.states[rng.random_range(0..traj.states.len())];
        let f = featurize(state, &task, None, &layout).unwrap();
        let mut p = PolicyParams::zeros(&layout);
        p.theta
            .iter_mut()
            .for_each(|t| *t = rng.random_range(-1.0..1.0));
        let action = Action::ALL[rng.random_range(0..Action::COUNT)];
        let temp = rng.random_range(0.5..2.0);
        let g = log_prob_gradient(&p, &f, action, temp).unwrap();
        let h = 1e-5;
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..p.theta.len() {
            let mut plus = p.clone();
            plus.theta[j] += h;
            let mut minus = p.clone();
            minus.theta[j] -= h;
            let fd = (log_prob(&plus, &f, action, temp).unwrap()
                - log_prob(&minus, &f, action, temp).unwrap())
                / (2.0 * h);
            num += (g[j] - fd).powi(2);
            den += fd.powi(2);
        }
        let rel = num.sqrt() / den.sqrt().max(1e-300);
        if rel >= 1e-4 {
            return Err(format!("instance {i}: relative error {rel}"));
        }
    }
    Ok(())
}

fn check_schedule() -> Result<(), String> {
    let mut s = SuggestionSchedule::default();
    if (suggestion_probability(&s) - 0.8).abs() > 1e-15 {
        return Err(format!("p(0) = {}", suggestion_probability(&s)));
    }
    let mut prev = suggestion_probability(&s);
    for i in 1..=1_000 {
        s.r_bar = f64::from(i) * 0.01;
        let p = suggestion_probability(&s);
        if p >= prev || p <= 0.0 {
            return Err(format!("p({}) = {p} not below {prev}", s.r_bar));
        }
        prev = p;
    }
    Ok(())
}

#[test]
fn criterion_1_formula_invariants() {
    let checks: [(&str, fn() -> Result<(), String>); 7] = [
        ("ema bounds and w = 1 - c", check_ema_bounds),
        ("reward dot product", check_reward_identity),
        (
            "softmax weights and convex interpolation",
            check_interpolation,
        ),
        ("retrieval equals brute force", check_retrieval),
        ("group advantages", check_advantages),
        ("log-prob gradient vs finite differences", check_gradient),
        ("suggestion probability", check_schedule),
    ];
    let failures: Vec<String> = checks
        .iter()
        .filter_map(|(name, f)| f().err().map(|e| format!("{name}: {e}")))
        .collect();
    report(
        "1",
        failures.is_empty(),
        &format!("{} invariant groups, failures {failures:?}", checks.len()),
    );
    assert!(failures.is_empty(), "{failures:?}");
}

// ---------------------------------------------------------------------------
// criteria 2 and 7: curriculum shift

fn curriculum_weights(sigma: f64) -> Vec<f64> {
    let task = builtin_task("chain-instrumented").unwrap();
    let mut cfg = config(30, sigma);
    cfg.early_stop = false;
    cfg.toggles.use_memory = false;
    let layout = cfg.policy.layout;
    let mut bank =
        MemoryBank::with_dim(1, &layout.version_tag(), EMBEDDING_DIM, layout.param_len());
    let base = instruction_prior(&layout, cfg.policy.hint_gain);
    let (_, report) = adapt(&task, &base, &mut bank, &cfg).unwrap();
    report.records[29].weights.clone()
}

#[test]
fn criterion_2_curriculum_shift() {
    let w = curriculum_weights(AdaptConfig::default().toggles.critic_sigma);
    let again = curriculum_weights(AdaptConfig::default().toggles.critic_sigma);
    let passed = w[0] < 0.05 && w[2] > 0.9 && w == again;
    report(
        "2",
        passed,
        &format!(
            "after 30 iterations w = {w:?}, repeat identical = {}",
            w == again
        ),
    );
    assert!(passed);
}

// ---------------------------------------------------------------------------
// criteria 3 and 7: ablations on the long-horizon suite

fn ablation_report(sigma: f64) -> ExperimentReport {
    let cfg = config(BUDGET, sigma);
    let settings = ExperimentSettings::default();
    let mut arms = variants(ExperimentMode::AblateArs, &cfg, &settings);
    for mode in [ExperimentMode::AblateLge, ExperimentMode::AblateEm] {
        arms.push(variants(mode, &cfg, &settings).pop().unwrap());
    }
    run_variants(
        &suite("long_horizon.toml"),
        ExperimentMode::AblateArs,
        &arms,
        &cfg,
        &settings,
        SEEDS,
    )
    .unwrap()
}

fn noisy_ablations() -> &'static ExperimentReport {
    static R: OnceLock<ExperimentReport> = OnceLock::new();
    R.get_or_init(|| ablation_report(0.05))
}

fn describe(r: &ExperimentReport) -> String {
    let medians: Vec<String> = r
        .summaries
        .iter()
        .map(|s| format!("{}={}", s.variant, s.median_iterations))
        .collect();
    let ratios: Vec<String> = r
        .checks
        .iter()
        .map(|c| format!("{:.3}{}", c.observed, if c.passed { "" } else { "!" }))
        .collect();
    format!("medians {} ratios {}", medians.join(" "), ratios.join(" "))
}

#[test]
fn criterion_3_ablations_are_slower() {
    let r = noisy_ablations();
    assert_eq!(r.checks.len(), 3);
    report(
        "3",
        r.passed(),
        &format!("{SEEDS} seeds, need >= {ABLATION_MARGIN}x; {}", describe(r)),
    );
    assert!(r.passed(), "{:?}", r.checks);
}

#[test]
fn criterion_7_noise_robustness() {
    let noisy_curriculum = curriculum_weights(0.05);
    let clean_curriculum = curriculum_weights(0.0);
    let clean = ablation_report(0.0);
    let noisy = noisy_ablations();
    let c2_noisy = noisy_curriculum[0] < 0.05 && noisy_curriculum[2] > 0.9;
    // with an exact critic the curriculum bounds must hold with half the slack
    let c2_clean = clean_curriculum[0] < 0.025 && clean_curriculum[2] > 0.95;
    let passed = c2_noisy && c2_clean && noisy.passed() && clean.passed();
    report(
        "7",
        passed,
        &format!(
            "curriculum sigma 0.05 {c2_noisy} sigma 0 {c2_clean}; ablations sigma 0.05 {} sigma 0 {} [{}]",
            noisy.passed(),
            clean.passed(),
            describe(&clean)
        ),
    );
    assert!(passed);
}

// ---------------------------------------------------------------------------
// criterion 4: warm start

#[test]
fn criterion_4_warm_start_speedup() {
    let cfg = config(BUDGET, 0.05);
    let r = run_experiment(
        &suite("warm_start.toml"),
        ExperimentMode::ColdVsWarm,
        &cfg,
        &ExperimentSettings::default(),
        SEEDS,
    )
    .unwrap();
    let (warm, cold) = (median_of(&r, "warm"), median_of(&r, "cold"));
    let passed = warm <= WARM_START_RATIO * cold;
    report(
        "4",
        passed,
        &format!(
            "median warm {warm} cold {cold}, ratio {:.3} <= {WARM_START_RATIO}",
            warm / cold
        ),
    );
    assert!(passed);
    assert!(r.passed());
}

// ---------------------------------------------------------------------------
// criterion 5: cross-family transfer

#[test]
fn criterion_5_cross_family_transfer() {
    let cfg = config(BUDGET, 0.05);
    let s = suite("transfer.toml");
    let target_families: Vec<&str> = s
        .tasks
        .iter()
        .filter(|t| t.role == vla_adapt_core::world::TaskRole::Target)
        .map(|t| t.task.family_tag.as_str())
        .collect();
    let source_families: Vec<&str> = s
        .tasks
        .iter()
        .filter(|t| t.role == vla_adapt_core::world::TaskRole::Populate)
        .map(|t| t.task.family_tag.as_str())
        .collect();
    assert!(target_families.iter().all(|f| !source_families.contains(f)));
    let r = run_experiment(
        &s,
        ExperimentMode::Transfer,
        &cfg,
        &ExperimentSettings::default(),
        SEEDS,
    )
    .unwrap();
    let pre = r.runs.iter().map(|x| x.pre_success_rate).sum::<f64>() / r.runs.len() as f64;
    let post = r.summary("full").unwrap().median_final_success_rate;
    let passed = pre <= TRANSFER_PRE_CEILING && post > 0.0;
    report("5", passed, &format!("mean direct success {pre:.3} <= {TRANSFER_PRE_CEILING}, median after adaptation {post}"));
    assert!(passed);
    assert!(r.passed());
}

// ---------------------------------------------------------------------------
// criterion 6: memory sensitivity

#[test]
fn criterion_6_memory_sensitivity() {
    let cfg = config(SENSITIVITY_BUDGET, 0.05);
    let r = run_experiment(
        &suite("memory_sensitivity.toml"),
        ExperimentMode::MemorySensitivity,
        &cfg,
        &ExperimentSettings::default(),
        SEEDS,
    )
    .unwrap();
    let default = median_of(&r, "default");
    let extremes: Vec<String> = ["tau=10", "k=10", "capacity=1"]
        .iter()
        .map(|a| format!("{a}={}", median_of(&r, a)))
        .collect();
    assert_eq!(r.checks.len(), 3);
    report(
        "6",
        r.passed(),
        &format!("default {default} vs {}", extremes.join(" ")),
    );
    assert!(r.passed(), "{:?}", r.checks);
}

// ---------------------------------------------------------------------------
// criterion 8: persistence

#[test]
fn criterion_8_bank_persistence() {
    let layout = FeatureLayout::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bank = MemoryBank::new(100, &layout.version_tag(), layout.param_len());
    for i in 0..100 {
        let mut p = PolicyParams::zeros(&layout);
        p.theta
            .iter_mut()
            .for_each(|t| *t = rng.random_range(-20.0..20.0));
        let text = format!("put object {i} in container {}", i % 7);
        let values: Vec<f64> = (0..EMBEDDING_DIM)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let embedding = InstructionEmbedding {
            values: values.iter().map(|v| v / norm).collect(),
        };
        let meta = EntryMeta {
            instruction: text,
            success_rate: rng.random_range(0.0..=1.0),
            training_iterations: rng.random_range(0..500),
            task_complexity: rng.random_range(1..7),
            created_at: bank.next_timestamp(),
        };
        bank.insert(MemoryEntry::new(embedding, &p, meta)).unwrap();
    }
    assert_eq!(bank.len(), 100);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bank.bin");
    bank.save(&path).unwrap();
    let loaded = MemoryBank::load(&path, 100).unwrap();
    let bit_exact = loaded == bank
        && loaded.entries.iter().zip(&bank.entries).all(|(a, b)| {
            a.params
                .theta
                .iter()
                .zip(&b.params.theta)
                .all(|(x, y)| x.to_bits() == y.to_bits())
                && a.embedding
                    .values
                    .iter()
                    .zip(&b.embedding.values)
                    .all(|(x, y)| x.to_bits() == y.to_bits())
        })
        && loaded.to_bytes() == std::fs::read(&path).unwrap();

    let bytes = std::fs::read(&path).unwrap();
    let mut corrupted = bytes.clone();
    let mid = corrupted.len() / 2;
    corrupted[mid] ^= 0x40;
    let crc_rejects = MemoryBank::from_bytes(&corrupted, 100).is_err();
    let truncations_rejected = [
        0,
        3,
        4,
        20,
        bytes.len() / 3,
        bytes.len() - 4,
        bytes.len() - 1,
    ]
    .iter()
    .all(|&n| {
        let p = dir.path().join(format!("cut{n}.bin"));
        std::fs::write(&p, &bytes[..n]).unwrap();
        MemoryBank::load(&p, 100).is_err()
    });
    let passed = bit_exact && crc_rejects && truncations_rejected;
    report(
        "8",
        passed,
        &format!("100 entries bit-exact {bit_exact}, corrupted byte rejected {crc_rejects}, truncations rejected {truncations_rejected}"),
    );
    assert!(passed);
}

// ---------------------------------------------------------------------------
// criterion 9: determinism of the command-line experiment

fn run_cli_experiment(dir: &Path, out: &str) -> PathBuf {
    let suite = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../suites/transfer.toml");
    let status = Command::new(env!("CARGO_BIN_EXE_vla-adapt"))
        .args([
            "experiment",
            "--mode",
            "full",
            "--seeds",
            "3",
            "--config",
            "c.toml",
            "--out",
            out,
            "--suite",
        ])
        .arg(&suite)
        .current_dir(dir)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    dir.join(out)
}

#[test]
fn criterion_9_experiment_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[adapt]\nn_iterations = 20\nseed = 5\n",
    )
    .unwrap();
    let a = run_cli_experiment(dir.path(), "a");
    let b = run_cli_experiment(dir.path(), "b");
    let files = ["iterations.csv", "runs.csv", "summary.csv", "checks.csv"];
    let same: Vec<bool> = files
        .iter()
        .map(|f| std::fs::read(a.join(f)).unwrap() == std::fs::read(b.join(f)).unwrap())
        .collect();
    let rows = std::fs::read_to_string(a.join("iterations.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    let passed = same.iter().all(|s| *s) && rows == 3 * 2 * 20;
    report(
        "9",
        passed,
        &format!("{files:?} identical {same:?}, {rows} iteration rows"),
    );
    assert!(passed);
}
