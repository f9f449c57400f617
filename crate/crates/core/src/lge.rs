//! Language-guided exploration: hint providers, hint encoding and the
//! reward-decayed suggestion schedule.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::ars::CapabilityTracker;
use crate::memory::hashed_features;
use crate::policy::{FeatureLayout, PolicyParams};
use crate::world::{Action, Guidance, TaskSpec, WorldError, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum LgeError {
    #[error("suggestion provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuggestionSource {
    Heuristic,
    External,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub text: String,
    pub features: Vec<f64>,
    pub source: SuggestionSource,
}

impl Suggestion {
    /// Encodes `text` into `dim` hashed features. Text without any token
    /// yields an empty suggestion.
    pub fn new(text: &str, source: SuggestionSource, dim: usize) -> Self {
        match (source, hashed_features(text, dim)) {
            (SuggestionSource::None, _) | (_, None) => Suggestion::none(dim),
            (_, Some(features)) => Suggestion {
                text: text.to_owned(),
                features,
                source,
            },
        }
    }

    pub fn none(dim: usize) -> Self {
        Suggestion {
            text: String::new(),
            features: vec![0.0; dim],
            source: SuggestionSource::None,
        }
    }

    pub fn is_none(&self) -> bool {
        self.source == SuggestionSource::None
    }
}

/// Probability schedule `p_max * exp(-lambda * r_bar)` evaluated at every
/// `interval`-th step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuggestionSchedule {
    pub p_max: f64,
    pub lambda: f64,
    pub r_bar: f64,
    pub beta: f64,
    pub interval: u32,
}

impl Default for SuggestionSchedule {
    fn default() -> Self {
        SuggestionSchedule {
            p_max: 0.8,
            lambda: 0.5,
            r_bar: 0.0,
            beta: 0.9,
            interval: 50,
        }
    }
}

impl SuggestionSchedule {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return Err(format!("p_max must lie in (0, 1], got {}", self.p_max));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if self.interval == 0 {
            return Err("interval must be positive".into());
        }
        Ok(())
    }

    pub fn probability(&self) -> f64 {
        suggestion_probability(self)
    }
}

pub fn suggestion_probability(sched: &SuggestionSchedule) -> f64 {
    sched.p_max * (-sched.lambda * sched.r_bar).exp()
}

/// Folds a batch mean reward, normalized by the sub-goal count, into `r_bar`.
pub fn update_reward_average(sched: &mut SuggestionSchedule, batch_mean_reward: f64, k: usize) {
    let r = (batch_mean_reward / k.max(1) as f64).max(0.0);
    sched.r_bar = (sched.beta * sched.r_bar + (1.0 - sched.beta) * r).max(0.0);
}

/// True at suggestion opportunities (multiples of the interval) when a
/// Bernoulli draw with the current probability succeeds. Off-interval steps
/// consume no randomness.
pub fn should_suggest(sched: &SuggestionSchedule, t: u32, rng: &mut dyn RngCore) -> bool {
    if t % sched.interval != 0 {
        return false;
    }
    rng.random::<f64>() < suggestion_probability(sched)
}

pub trait SuggestionProvider: Send + Sync {
    fn suggest(
        &self,
        obs: &WorldState,
        task: &TaskSpec,
        tracker: &CapabilityTracker,
        rng: &mut dyn RngCore,
    ) -> Result<Suggestion, LgeError>;
}

fn direction_word(a: Action) -> &'static str {
    match a {
        Action::Up => "up",
        Action::Down => "down",
        Action::Left => "left",
        Action::Right => "right",
        other => other.name(),
    }
}

/// Rule-based hints read off the ground-truth state.
#[derive(Debug, Clone, Copy)]
pub struct HeuristicProvider {
    pub dim: usize,
}

impl HeuristicProvider {
    pub fn new(dim: usize) -> Self {
        HeuristicProvider { dim }
    }

    /// The hint text, or `None` when every sub-goal is done.
    pub fn hint_text(
        obs: &WorldState,
        task: &TaskSpec,
        tracker: &CapabilityTracker,
    ) -> Result<Option<String>, WorldError> {
        let Some(frontier) = task.frontier(obs)? else {
            return Ok(None);
        };
        if let Some(text) = ordering_hint(obs, task, tracker, frontier)? {
            return Ok(Some(text));
        }
        Ok(task.guidance(obs)?.map(|g| match g {
            Guidance::Move { action, toward } => {
                format!("move {} toward {toward}", direction_word(action))
            }
            Guidance::Grasp { entity } => format!("grasp {entity}"),
            Guidance::Toggle { entity } => format!("toggle {entity}"),
            Guidance::Release {
                entity,
                target: Some(t),
            } => format!("release {entity} on {t}"),
            Guidance::Release {
                entity,
                target: None,
            } => format!("release {entity}"),
        }))
    }
}

/// "complete A before B": the agent carries the subject of a later
/// unsatisfied sub-goal B while the frontier A is still open, and the tracker
/// rates B as the stronger skill, i.e. the agent tends to rush past A.
fn ordering_hint(
    obs: &WorldState,
    task: &TaskSpec,
    tracker: &CapabilityTracker,
    frontier: usize,
) -> Result<Option<String>, WorldError> {
    let Some(held) = obs.held_entity() else {
        return Ok(None);
    };
    let sat = task.satisfied(obs)?;
    let later = (frontier + 1..task.k()).find(|&j| {
        !sat[j]
            && task.subgoals[j].predicate.subject() == &*held.name
            && task.subgoals[frontier].predicate.subject() != &*held.name
    });
    let Some(j) = later else {
        return Ok(None);
    };
    let c = |i: usize| tracker.c_hat.get(i).copied().unwrap_or(0.0);
    if c(j) > c(frontier) {
        return Ok(Some(format!(
            "complete {} before {}",
            task.subgoals[frontier].label, task.subgoals[j].label
        )));
    }
    Ok(None)
}

impl SuggestionProvider for HeuristicProvider {
    fn suggest(
        &self,
        obs: &WorldState,
        task: &TaskSpec,
        tracker: &CapabilityTracker,
        _rng: &mut dyn RngCore,
    ) -> Result<Suggestion, LgeError> {
        Ok(match Self::hint_text(obs, task, tracker)? {
            Some(text) => Suggestion::new(&text, SuggestionSource::Heuristic, self.dim),
            None => Suggestion::none(self.dim),
        })
    }
}

/// Words a hint uses to name an action.
pub const ACTION_WORDS: [(&str, Action); 7] = [
    ("up", Action::Up),
    ("down", Action::Down),
    ("left", Action::Left),
    ("right", Action::Right),
    ("grasp", Action::Grasp),
    ("release", Action::Release),
    ("toggle", Action::Toggle),
];

/// Base parameters that only read the suggestion block: each action word's
/// hash bucket votes for its action with weight `gain`. The state block is
/// zero, so the prior acts only while a hint is active.
pub fn instruction_prior(layout: &FeatureLayout, gain: f64) -> PolicyParams {
    let mut params = PolicyParams::zeros(layout);
    let offset = layout.state_dim();
    for (word, action) in ACTION_WORDS {
        let features = hashed_features(word, layout.suggestion_dim).expect("nonempty word");
        let bucket = features.iter().position(|x| *x != 0.0).expect("one bucket");
        params.theta[action.index() * params.dim + offset + bucket] = gain;
    }
    params
}

/// Symbolic observation as sent to an external provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub grid: [i32; 2],
    pub gripper: [i32; 2],
    pub held: Option<String>,
    pub entities: Vec<EntityRecord>,
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub name: String,
    pub kind: crate::world::EntityKind,
    pub pos: [i32; 2],
    pub toggled: bool,
}

impl From<&WorldState> for ObservationRecord {
    fn from(s: &WorldState) -> Self {
        ObservationRecord {
            grid: [s.width, s.height],
            gripper: [s.gripper.x, s.gripper.y],
            held: s.held_entity().map(|e| e.name.to_string()),
            entities: s
                .entities
                .iter()
                .map(|e| EntityRecord {
                    name: e.name.to_string(),
                    kind: e.kind,
                    pos: [e.pos.x, e.pos.y],
                    toggled: e.toggled,
                })
                .collect(),
            step: s.step_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionRequest {
    pub instruction: String,
    pub observation: ObservationRecord,
    pub unsatisfied_subgoals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionResponse {
    pub suggestion: String,
}

impl SuggestionRequest {
    pub fn build(obs: &WorldState, task: &TaskSpec) -> Result<Self, WorldError> {
        let sat = task.satisfied(obs)?;
        Ok(SuggestionRequest {
            instruction: task.instruction.clone(),
            observation: obs.into(),
            unsatisfied_subgoals: task
                .subgoals
                .iter()
                .zip(&sat)
                .filter(|(_, s)| !**s)
                .map(|(g, _)| g.description.clone())
                .collect(),
        })
    }
}

/// One request/response exchange of UTF-8 JSON text.
pub trait Transport: Send + Sync {
    fn exchange(&self, request: &str) -> Result<String, LgeError>;
}

/// Runs a command per request: the request is written to its stdin and the
/// response read from its stdout. The child is killed on timeout.
#[derive(Debug, Clone)]
pub struct SubprocessTransport {
    pub program: String,
    pub args: Vec<String>,
    pub timeout: Duration,
}

impl Transport for SubprocessTransport {
    fn exchange(&self, request: &str) -> Result<String, LgeError> {
        let unavailable = |e: &dyn std::fmt::Display| {
            LgeError::ProviderUnavailable(format!("{}: {e}", self.program))
        };
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| unavailable(&e))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");
        let payload = request.as_bytes().to_vec();
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let result = stdin.write_all(&payload).and_then(|_| {
                drop(stdin);
                let mut out = String::new();
                stdout.read_to_string(&mut out).map(|_| out)
            });
            let _ = tx.send(result);
        });
        match rx.recv_timeout(self.timeout) {
            Ok(Ok(out)) => {
                let status = child.wait().map_err(|e| unavailable(&e))?;
                if !status.success() {
                    return Err(unavailable(&format!("exited with {status}")));
                }
                Ok(out)
            }
            Ok(Err(e)) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(unavailable(&e))
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                Err(unavailable(&format!(
                    "no response within {:?}",
                    self.timeout
                )))
            }
        }
    }
}

/// Provider backed by an external service speaking the JSON protocol.
pub struct ExternalProvider<T: Transport> {
    pub transport: T,
    pub dim: usize,
}

impl<T: Transport> SuggestionProvider for ExternalProvider<T> {
    fn suggest(
        &self,
        obs: &WorldState,
        task: &TaskSpec,
        _tracker: &CapabilityTracker,
        _rng: &mut dyn RngCore,
    ) -> Result<Suggestion, LgeError> {
        let request = SuggestionRequest::build(obs, task)?;
        if request.unsatisfied_subgoals.is_empty() && task.frontier(obs)?.is_none() {
            return Ok(Suggestion::none(self.dim));
        }
        let body = serde_json::to_string(&request).expect("request serializes");
        let reply = self.transport.exchange(&body)?;
        let response: SuggestionResponse = serde_json::from_str(reply.trim())
            .map_err(|e| LgeError::ProviderUnavailable(format!("malformed response: {e}")))?;
        Ok(Suggestion::new(
            &response.suggestion,
            SuggestionSource::External,
            self.dim,
        ))
    }
}

/// Uses `primary` and falls back to `fallback` whenever the primary provider
/// is unavailable.
pub struct FallbackProvider<P, F> {
    pub primary: P,
    pub fallback: F,
}

impl<P: SuggestionProvider, F: SuggestionProvider> SuggestionProvider for FallbackProvider<P, F> {
    fn suggest(
        &self,
        obs: &WorldState,
        task: &TaskSpec,
        tracker: &CapabilityTracker,
        rng: &mut dyn RngCore,
    ) -> Result<Suggestion, LgeError> {
        match self.primary.suggest(obs, task, tracker, rng) {
            Err(LgeError::ProviderUnavailable(why)) => {
                tracing::warn!(%why, "external suggestion provider unavailable, using heuristic hints");
                self.fallback.suggest(obs, task, tracker, rng)
            }
            other => other,
        }
    }
}
