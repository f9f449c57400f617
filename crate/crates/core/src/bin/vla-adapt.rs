use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tracing::Level;

use vla_adapt_core::lge::{instruction_prior, HeuristicProvider};
use vla_adapt_core::memory::{MemoryBank, EMBEDDING_DIM};
use vla_adapt_core::policy::PolicyParams;
use vla_adapt_core::trainer::{
    adapt_with, evaluate_with, run_experiment, write_checks_csv, write_iterations_csv,
    write_runs_csv, write_summary_csv, ConfigFile, EvalPolicy, EvalSettings, ExperimentMode,
    IterationCsv,
};
use vla_adapt_core::world::{builtin_task, TaskSpec, TaskSuite};

#[derive(Parser)]
#[command(
    name = "vla-adapt",
    version,
    about = "Online task adaptation on a grid manipulation world"
)]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adapt to one task and write metrics and parameters.
    Train {
        #[arg(long)]
        task: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Memory bank file; read if present and written back after adaptation.
        #[arg(long)]
        bank: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Suite file to look the task up in instead of the built-ins.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Evaluate parameters (or a reference policy) on a task.
    Eval {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        task: String,
        #[arg(long, default_value_t = 50)]
        episodes: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = PolicyKind::Params)]
        policy: PolicyKind,
        #[arg(long)]
        suite: Option<PathBuf>,
    },
    /// Run a comparative experiment over several seeds.
    Experiment {
        #[arg(long)]
        mode: String,
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Inspect or export a memory bank file.
    Bank {
        #[command(subcommand)]
        action: BankAction,
    },
}

#[derive(Subcommand)]
enum BankAction {
    /// Print a one-line summary per entry.
    Inspect { path: PathBuf },
    /// Print the lossless JSON export.
    Export {
        path: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyKind {
    Params,
    Scripted,
    Random,
}

/// Runtime outcome distinct from usage and runtime errors.
enum Outcome {
    Done,
    ChecksFailed,
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(ConfigFile::default()),
    }
}

fn find_task(id: &str, suite: Option<&Path>) -> Result<TaskSpec> {
    match suite {
        Some(path) => {
            let suite = TaskSuite::load(path)?;
            suite
                .find(id)
                .cloned()
                .with_context(|| format!("task '{id}' not in {}", path.display()))
        }
        None => Ok(builtin_task(id)?),
    }
}

fn train(
    task: &str,
    config: Option<&Path>,
    bank_path: Option<&Path>,
    seed: Option<u64>,
    suite: Option<&Path>,
    out: &Path,
) -> Result<Outcome> {
    let mut cfg = load_config(config)?.adapt;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let task = find_task(task, suite)?;
    let layout = cfg.policy.layout;
    let tag = layout.version_tag();
    let mut bank = match bank_path {
        Some(p) if p.exists() => MemoryBank::load_expecting(p, cfg.memory.capacity, &tag)?,
        _ => MemoryBank::with_dim(cfg.memory.capacity, &tag, EMBEDDING_DIM, layout.param_len()),
    };
    std::fs::create_dir_all(out)?;
    let mut metrics = IterationCsv::create(&out.join("metrics.csv"))?;
    let mut write_error = None;
    let base = instruction_prior(&layout, cfg.policy.hint_gain);
    let provider = HeuristicProvider::new(layout.suggestion_dim);
    let (params, report) = adapt_with(&task, &base, &mut bank, &cfg, &provider, &mut |r| {
        if let Err(e) = metrics.write(r) {
            write_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    params.save_json(&out.join("params.json"))?;
    if let Some(p) = bank_path {
        bank.save(p)?;
    }
    println!(
        "task={} iterations={} success_rate={} progress={} iterations_to_threshold={}",
        task.id,
        report.records.len(),
        report.final_eval.success_rate,
        report.final_eval.mean_progress,
        report
            .iterations_to_threshold
            .map_or_else(|| "none".to_owned(), |i| i.to_string())
    );
    Ok(Outcome::Done)
}

fn eval(
    params: Option<&Path>,
    task: &str,
    episodes: u32,
    seed: u64,
    policy: PolicyKind,
    suite: Option<&Path>,
) -> Result<Outcome> {
    let task = find_task(task, suite)?;
    let loaded;
    let policy = match policy {
        PolicyKind::Params => {
            let Some(path) = params else {
                bail!("--params is required for the params policy");
            };
            loaded = PolicyParams::load_json(path)?;
            EvalPolicy::Params(&loaded)
        }
        PolicyKind::Scripted => EvalPolicy::Scripted,
        PolicyKind::Random => EvalPolicy::Random,
    };
    let layout = ConfigFile::default().adapt.policy.layout;
    if let EvalPolicy::Params(p) = policy {
        p.check_tag(&layout.version_tag())?;
    }
    let settings = EvalSettings {
        episodes,
        temperature: 1.0,
        horizon: task.horizon,
    };
    let r = evaluate_with(policy, &task, &layout, &settings, seed)?;
    println!(
        "task={} episodes={episodes} success_rate={} progress={}",
        task.id, r.success_rate, r.mean_progress
    );
    Ok(Outcome::Done)
}

fn experiment(
    mode: &str,
    suite: &Path,
    seeds: u32,
    out: &Path,
    config: Option<&Path>,
) -> Result<Outcome> {
    let mode: ExperimentMode = mode.parse().map_err(anyhow::Error::msg)?;
    let file = load_config(config)?;
    let suite = TaskSuite::load(suite)?;
    let report = run_experiment(&suite, mode, &file.adapt, &file.experiment, seeds)?;
    std::fs::create_dir_all(out)?;
    write_iterations_csv(&out.join("iterations.csv"), &report.runs)?;
    write_runs_csv(&out.join("runs.csv"), &report.runs)?;
    write_summary_csv(&out.join("summary.csv"), &report.summaries)?;
    write_checks_csv(&out.join("checks.csv"), &report.checks)?;
    for s in &report.summaries {
        println!(
            "{mode} variant={} runs={} median_iterations={} median_final_success={}",
            s.variant, s.runs, s.median_iterations, s.median_final_success_rate
        );
    }
    for c in &report.checks {
        println!(
            "check {}: observed={} bound={} {}",
            c.name,
            c.observed,
            c.bound,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    Ok(if report.passed() {
        Outcome::Done
    } else {
        Outcome::ChecksFailed
    })
}

fn bank(action: &BankAction) -> Result<Outcome> {
    match action {
        BankAction::Inspect { path } => {
            let bank = MemoryBank::load(path, usize::MAX)?;
            println!(
                "version_tag={} embedding_dim={} param_len={} entries={}",
                bank.version_tag,
                bank.embedding_dim,
                bank.param_len,
                bank.len()
            );
            for e in &bank.entries {
                println!(
                    "created_at={} success_rate={} iterations={} complexity={} instruction={:?}",
                    e.meta.created_at,
                    e.meta.success_rate,
                    e.meta.training_iterations,
                    e.meta.task_complexity,
                    e.meta.instruction
                );
            }
        }
        BankAction::Export { path, out } => {
            let json = MemoryBank::load(path, usize::MAX)?.export_json();
            match out {
                Some(o) => std::fs::write(o, json)?,
                None => println!("{json}"),
            }
        }
    }
    Ok(Outcome::Done)
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Train {
            task,
            config,
            bank,
            seed,
            suite,
            out,
        } => train(
            &task,
            config.as_deref(),
            bank.as_deref(),
            seed,
            suite.as_deref(),
            &out,
        ),
        Command::Eval {
            params,
            task,
            episodes,
            seed,
            policy,
            suite,
        } => eval(
            params.as_deref(),
            &task,
            episodes,
            seed,
            policy,
            suite.as_deref(),
        ),
        Command::Experiment {
            mode,
            suite,
            seeds,
            out,
            config,
        } => experiment(&mode, &suite, seeds, &out, config.as_deref()),
        Command::Bank { action } => bank(&action),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.verbose {
        Level::INFO
    } else {
        Level::WARN
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .init();
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
