//! Python bindings for the adaptation loop and its building blocks.

use std::path::PathBuf;

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use vla_adapt_core::ars::CapabilityTracker;
use vla_adapt_core::grpo::group_advantages as core_group_advantages;
use vla_adapt_core::lge::{
    instruction_prior, suggestion_probability as core_suggestion_probability, SuggestionSchedule,
};
use vla_adapt_core::memory::{self, embed_dim, EntryMeta, MemoryEntry, EMBEDDING_DIM};
use vla_adapt_core::policy::{FeatureLayout, PolicyParams};
use vla_adapt_core::trainer::{self, AdaptConfig, ConfigFile, EvalPolicy, EvalSettings};
use vla_adapt_core::world::{builtin_ids, builtin_task, step, Action, TaskSpec, TaskSuite};

fn runtime<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A task: instruction, initial layout, ordered sub-goals and horizon.
#[pyclass(name = "Task", module = "vla_adapt", from_py_object)]
#[derive(Clone)]
struct PyTask {
    inner: TaskSpec,
}

#[pymethods]
impl PyTask {
    /// Built-in task by id.
    #[staticmethod]
    fn builtin(id: &str) -> PyResult<Self> {
        builtin_task(id)
            .map(|inner| PyTask { inner })
            .map_err(|e| PyKeyError::new_err(e.to_string()))
    }

    /// Every task in a suite file, in file order.
    #[staticmethod]
    fn load_suite(path: PathBuf) -> PyResult<Vec<Self>> {
        let suite = TaskSuite::load(&path).map_err(runtime)?;
        Ok(suite
            .tasks
            .into_iter()
            .map(|t| PyTask { inner: t.task })
            .collect())
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn instruction(&self) -> String {
        self.inner.instruction.clone()
    }

    #[getter]
    fn horizon(&self) -> u32 {
        self.inner.horizon
    }

    #[getter]
    fn family(&self) -> String {
        self.inner.family_tag.clone()
    }

    /// Sub-goal labels in order.
    #[getter]
    fn subgoals(&self) -> Vec<String> {
        self.inner
            .subgoals
            .iter()
            .map(|g| g.label.clone())
            .collect()
    }

    /// Number of scripted-expert steps to success.
    fn scripted_length(&self) -> PyResult<usize> {
        Ok(self.inner.scripted_episode().map_err(runtime)?.len() - 1)
    }

    /// Whether every sub-goal is done after applying `actions` from the
    /// initial layout. Action names: up, down, left, right, grasp, release,
    /// toggle.
    fn succeeds_with(&self, actions: Vec<String>) -> PyResult<bool> {
        let mut s = self.inner.layout.clone();
        for name in &actions {
            let a = Action::parse(name)
                .ok_or_else(|| PyValueError::new_err(format!("unknown action '{name}'")))?;
            s = step(&s, a);
        }
        self.inner.is_success(&s).map_err(runtime)
    }

    fn __repr__(&self) -> String {
        format!("Task(id={:?}, k={})", self.inner.id, self.inner.k())
    }
}

/// Linear softmax policy parameters.
#[pyclass(name = "PolicyParams", module = "vla_adapt", from_py_object)]
#[derive(Clone)]
struct PyPolicyParams {
    inner: PolicyParams,
}

#[pymethods]
impl PyPolicyParams {
    /// All-zero parameters for the default feature layout.
    #[staticmethod]
    fn zeros() -> Self {
        PyPolicyParams {
            inner: PolicyParams::zeros(&FeatureLayout::default()),
        }
    }

    /// The untrained base policy used by the trainer.
    #[staticmethod]
    #[pyo3(signature = (hint_gain = 1.0))]
    fn base(hint_gain: f64) -> Self {
        PyPolicyParams {
            inner: instruction_prior(&FeatureLayout::default(), hint_gain),
        }
    }

    #[staticmethod]
    fn from_theta(theta: Vec<f64>) -> PyResult<Self> {
        PolicyParams::from_theta(theta, &FeatureLayout::default())
            .map(|inner| PyPolicyParams { inner })
            .map_err(value)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        PolicyParams::load_json(&path)
            .map(|inner| PyPolicyParams { inner })
            .map_err(runtime)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_json(&path).map_err(runtime)
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta.clone()
    }

    #[getter]
    fn version_tag(&self) -> String {
        self.inner.version_tag.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.theta.len()
    }
}

/// Per-sub-goal capability estimates and the weights derived from them.
#[pyclass(name = "CapabilityTracker", module = "vla_adapt")]
struct PyCapabilityTracker {
    inner: CapabilityTracker,
}

#[pymethods]
impl PyCapabilityTracker {
    #[new]
    #[pyo3(signature = (k, alpha = 0.9, c_init = 0.0))]
    fn new(k: usize, alpha: f64, c_init: f64) -> PyResult<Self> {
        if k == 0 || !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&c_init) {
            return Err(PyValueError::new_err(
                "need k >= 1 and alpha, c_init in [0, 1]",
            ));
        }
        Ok(PyCapabilityTracker {
            inner: CapabilityTracker::new(k, alpha, c_init),
        })
    }

    /// Records one episode outcome for sub-goal `k` (1-based).
    fn update(&mut self, k: usize, success: bool) -> PyResult<()> {
        self.inner.update(k, success).map_err(value)
    }

    fn capability(&self, k: usize) -> PyResult<f64> {
        self.inner.capability(k).map_err(value)
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.weights()
    }
}

fn outcome_name(outcome: &memory::InsertOutcome) -> String {
    match outcome {
        memory::InsertOutcome::Added => "added".into(),
        memory::InsertOutcome::Replaced => "replaced".into(),
        memory::InsertOutcome::Dropped => "dropped".into(),
        memory::InsertOutcome::Evicted(name) => format!("evicted:{name}"),
    }
}

/// Store of adapted parameters keyed by instruction embedding.
#[pyclass(name = "MemoryBank", module = "vla_adapt")]
struct PyMemoryBank {
    inner: memory::MemoryBank,
}

#[pymethods]
impl PyMemoryBank {
    #[new]
    #[pyo3(signature = (capacity = 100))]
    fn new(capacity: usize) -> PyResult<Self> {
        if capacity == 0 {
            return Err(PyValueError::new_err("capacity must be positive"));
        }
        let layout = FeatureLayout::default();
        Ok(PyMemoryBank {
            inner: memory::MemoryBank::with_dim(
                capacity,
                &layout.version_tag(),
                EMBEDDING_DIM,
                layout.param_len(),
            ),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, capacity = 100))]
    fn load(path: PathBuf, capacity: usize) -> PyResult<Self> {
        memory::MemoryBank::load(&path, capacity)
            .map(|inner| PyMemoryBank { inner })
            .map_err(runtime)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(runtime)
    }

    /// Adds an entry and returns the outcome (`added`, `replaced`, `dropped`
    /// or `evicted:<instruction>`).
    #[pyo3(signature = (instruction, params, success_rate, training_iterations = 0, task_complexity = 1))]
    fn insert(
        &mut self,
        instruction: &str,
        params: &PyPolicyParams,
        success_rate: f64,
        training_iterations: u32,
        task_complexity: u32,
    ) -> PyResult<String> {
        let embedding = embed_dim(instruction, self.inner.embedding_dim).map_err(value)?;
        let meta = EntryMeta {
            instruction: instruction.to_owned(),
            success_rate,
            training_iterations,
            task_complexity,
            created_at: self.inner.next_timestamp(),
        };
        let outcome = self
            .inner
            .insert(MemoryEntry::new(embedding, &params.inner, meta))
            .map_err(value)?;
        Ok(outcome_name(&outcome))
    }

    /// The `k` most similar stored instructions with their cosine similarity.
    #[pyo3(signature = (instruction, k = 3))]
    fn retrieve(&self, instruction: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        let query = embed_dim(instruction, self.inner.embedding_dim).map_err(value)?;
        Ok(memory::retrieve(&self.inner, &query, k)
            .into_iter()
            .map(|(e, c)| (e.meta.instruction.clone(), c))
            .collect())
    }

    /// Interpolated initial parameters for `instruction`, or `base` when the
    /// bank is empty.
    #[pyo3(signature = (instruction, base, k = 3, tau = 0.1))]
    fn warm_start(
        &self,
        instruction: &str,
        base: &PyPolicyParams,
        k: usize,
        tau: f64,
    ) -> PyResult<PyPolicyParams> {
        memory::warm_start(&self.inner, instruction, &base.inner, k, tau)
            .map(|inner| PyPolicyParams { inner })
            .map_err(value)
    }

    fn instructions(&self) -> Vec<String> {
        self.inner
            .entries
            .iter()
            .map(|e| e.meta.instruction.clone())
            .collect()
    }

    fn export_json(&self) -> String {
        self.inner.export_json()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Outcome of one adaptation run.
#[pyclass(name = "AdaptReport", module = "vla_adapt", get_all)]
struct PyAdaptReport {
    task_id: String,
    iterations: usize,
    rollout_count: u64,
    iterations_to_threshold: Option<u32>,
    final_success_rate: f64,
    final_progress: f64,
    memory_outcome: Option<String>,
    /// Per-iteration evaluation success rate (None when not evaluated).
    eval_success: Vec<Option<f64>>,
    /// Per-iteration sub-goal weights.
    weights: Vec<Vec<f64>>,
}

fn parse_config(config_toml: Option<&str>) -> PyResult<AdaptConfig> {
    match config_toml {
        Some(text) => ConfigFile::from_toml_str(text)
            .map(|f| f.adapt)
            .map_err(value),
        None => Ok(AdaptConfig::default()),
    }
}

/// Adapts to `task`, starting from the base policy (or `base`) and the bank.
/// `config_toml` uses the same schema as the command-line config file.
/// Returns the adapted parameters and a report.
#[pyfunction]
#[pyo3(signature = (task, bank = None, config_toml = None, base = None))]
fn adapt(
    py: Python<'_>,
    task: &PyTask,
    bank: Option<&mut PyMemoryBank>,
    config_toml: Option<&str>,
    base: Option<&PyPolicyParams>,
) -> PyResult<(PyPolicyParams, PyAdaptReport)> {
    let config = parse_config(config_toml)?;
    let base = base
        .map(|b| b.inner.clone())
        .unwrap_or_else(|| instruction_prior(&config.policy.layout, config.policy.hint_gain));
    let layout = config.policy.layout;
    let mut scratch;
    let bank = match bank {
        Some(b) => &mut b.inner,
        None => {
            scratch = memory::MemoryBank::with_dim(
                config.memory.capacity,
                &layout.version_tag(),
                EMBEDDING_DIM,
                layout.param_len(),
            );
            &mut scratch
        }
    };
    let task = task.inner.clone();
    let (params, report) = py
        .detach(|| trainer::adapt(&task, &base, bank, &config))
        .map_err(runtime)?;
    let out = PyAdaptReport {
        task_id: report.task_id.clone(),
        iterations: report.records.len(),
        rollout_count: report.rollout_count(),
        iterations_to_threshold: report.iterations_to_threshold,
        final_success_rate: report.final_eval.success_rate,
        final_progress: report.final_eval.mean_progress,
        memory_outcome: report.memory_outcome.as_ref().map(outcome_name),
        eval_success: report.records.iter().map(|r| r.eval_success_rate).collect(),
        weights: report.records.iter().map(|r| r.weights.clone()).collect(),
    };
    Ok((PyPolicyParams { inner: params }, out))
}

/// Hint-free evaluation; returns `(success_rate, mean_progress)`.
/// `policy` is `"params"` (requires `params`), `"scripted"` or `"random"`.
#[pyfunction]
#[pyo3(signature = (task, params = None, episodes = 50, seed = 0, policy = "params"))]
fn evaluate(
    py: Python<'_>,
    task: &PyTask,
    params: Option<&PyPolicyParams>,
    episodes: u32,
    seed: u64,
    policy: &str,
) -> PyResult<(f64, f64)> {
    let policy = match (policy, params) {
        ("params", Some(p)) => EvalPolicy::Params(&p.inner),
        ("params", None) => return Err(PyValueError::new_err("policy 'params' needs params")),
        ("scripted", _) => EvalPolicy::Scripted,
        ("random", _) => EvalPolicy::Random,
        (other, _) => return Err(PyValueError::new_err(format!("unknown policy '{other}'"))),
    };
    let settings = EvalSettings {
        episodes,
        temperature: 1.0,
        horizon: task.inner.horizon,
    };
    let task = &task.inner;
    let r = py
        .detach(|| trainer::evaluate_with(policy, task, &FeatureLayout::default(), &settings, seed))
        .map_err(runtime)?;
    Ok((r.success_rate, r.mean_progress))
}

/// Group-relative advantages `(r - mean) / (std + eps)`.
#[pyfunction]
#[pyo3(signature = (rewards, eps = 1e-8))]
fn group_advantages(rewards: Vec<f64>, eps: f64) -> PyResult<Vec<f64>> {
    core_group_advantages(&rewards, eps).map_err(value)
}

/// Suggestion probability `p_max * exp(-lambda * r_bar)`.
#[pyfunction]
#[pyo3(signature = (r_bar, p_max = 0.8, lambda_ = 0.5))]
fn suggestion_probability(r_bar: f64, p_max: f64, lambda_: f64) -> f64 {
    core_suggestion_probability(&SuggestionSchedule {
        p_max,
        lambda: lambda_,
        r_bar,
        ..SuggestionSchedule::default()
    })
}

/// Softmax of cosine similarities at temperature `tau`.
#[pyfunction]
fn softmax_weights(cosines: Vec<f64>, tau: f64) -> Vec<f64> {
    memory::softmax_weights(&cosines, tau)
}

/// Ids of the built-in tasks.
#[pyfunction]
fn builtin_task_ids() -> Vec<&'static str> {
    builtin_ids()
}

#[pymodule]
fn vla_adapt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTask>()?;
    m.add_class::<PyPolicyParams>()?;
    m.add_class::<PyCapabilityTracker>()?;
    m.add_class::<PyMemoryBank>()?;
    m.add_class::<PyAdaptReport>()?;
    m.add_function(wrap_pyfunction!(adapt, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(group_advantages, m)?)?;
    m.add_function(wrap_pyfunction!(suggestion_probability, m)?)?;
    m.add_function(wrap_pyfunction!(softmax_weights, m)?)?;
    m.add_function(wrap_pyfunction!(builtin_task_ids, m)?)?;
    Ok(())
}
