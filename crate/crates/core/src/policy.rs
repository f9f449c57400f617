//! Linear-softmax policy over the seven grid actions.
//!
//! The feature vector has a state block followed by a suggestion block. The
//! state block layout, for `E` entity slots and `K` sub-goal slots:
//!
//! | offset            | width     | content                                             |
//! |-------------------|-----------|-----------------------------------------------------|
//! | 0                 | 1         | bias (1.0)                                          |
//! | 1                 | 2         | gripper x/(W-1), y/(H-1)                            |
//! | 3                 | E+1       | held one-hot (slot 0 = empty hand)                  |
//! | 4+E               | 3E        | per entity: dx/diam, dy/diam, toggled               |
//! | 4+4E              | K         | per sub-goal: predicate currently holds             |
//! | 4+4E+K            | 4K        | per sub-goal: frontier, sign dx, sign dy, co-located|
//!
//! Offsets in the last block point from the gripper to the navigation target
//! of the frontier sub-goal and are zero for every other slot. The suggestion
//! block carries the hint encoding, or zeros when no hint is active.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::lge::Suggestion;
use crate::world::{Action, TaskSpec, WorldError, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("dimension mismatch: {what} expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite logits")]
    NonFiniteLogits,
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("parameter version mismatch: expected '{expected}', found '{found}'")]
    VersionMismatch { expected: String, found: String },
    #[error("parameters contain non-finite values")]
    NonFiniteParams,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("parameter file: {0}")]
    Format(String),
}

/// Sizes that fix the feature layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureLayout {
    pub max_entities: usize,
    pub max_subgoals: usize,
    pub suggestion_dim: usize,
}

impl Default for FeatureLayout {
    fn default() -> Self {
        FeatureLayout {
            max_entities: 4,
            max_subgoals: 6,
            suggestion_dim: 128,
        }
    }
}

impl FeatureLayout {
    pub fn state_dim(&self) -> usize {
        4 + 4 * self.max_entities + 5 * self.max_subgoals
    }

    pub fn dim(&self) -> usize {
        self.state_dim() + self.suggestion_dim
    }

    pub fn param_len(&self) -> usize {
        self.dim() * Action::COUNT
    }

    fn entity_offset(&self) -> usize {
        4 + self.max_entities
    }

    fn satisfied_offset(&self) -> usize {
        4 + 4 * self.max_entities
    }

    fn frontier_offset(&self) -> usize {
        self.satisfied_offset() + self.max_subgoals
    }

    /// Architecture fingerprint shared by every parameter set built on this
    /// layout.
    pub fn version_tag(&self) -> String {
        let desc = format!(
            "bias,grip2,held{},ent{}x3,sat{},front{}x4,sugg{}",
            self.max_entities + 1,
            self.max_entities,
            self.max_subgoals,
            self.max_subgoals,
            self.suggestion_dim
        );
        let mut h: u32 = 0x811c_9dc5;
        for b in desc.bytes() {
            h ^= u32::from(b);
            h = h.wrapping_mul(0x0100_0193);
        }
        format!(
            "linsoftmax/v1/d={}/a={}/layout={h:08x}",
            self.dim(),
            Action::COUNT
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub state_dim: usize,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn state_block(&self) -> &[f64] {
        &self.values[..self.state_dim]
    }

    pub fn suggestion_block(&self) -> &[f64] {
        &self.values[self.state_dim..]
    }
}

fn sign(v: i32) -> f64 {
    f64::from(v.signum())
}

pub fn featurize(
    obs: &WorldState,
    task: &TaskSpec,
    suggestion: Option<&Suggestion>,
    layout: &FeatureLayout,
) -> Result<FeatureVector, PolicyError> {
    let e_max = layout.max_entities;
    let k_max = layout.max_subgoals;
    if obs.entities.len() > e_max {
        return Err(PolicyError::DimensionMismatch {
            what: "entity count",
            expected: e_max,
            found: obs.entities.len(),
        });
    }
    if task.k() > k_max {
        return Err(PolicyError::DimensionMismatch {
            what: "sub-goal count",
            expected: k_max,
            found: task.k(),
        });
    }
    let mut v = vec![0.0; layout.dim()];
    v[0] = 1.0;
    v[1] = f64::from(obs.gripper.x) / f64::from((obs.width - 1).max(1));
    v[2] = f64::from(obs.gripper.y) / f64::from((obs.height - 1).max(1));
    v[3 + obs.held.map_or(0, |i| i + 1)] = 1.0;

    let diam = f64::from(obs.diameter());
    let base = layout.entity_offset();
    for (i, e) in obs.entities.iter().enumerate() {
        v[base + 3 * i] = f64::from(e.pos.x - obs.gripper.x) / diam;
        v[base + 3 * i + 1] = f64::from(e.pos.y - obs.gripper.y) / diam;
        v[base + 3 * i + 2] = if e.toggled { 1.0 } else { 0.0 };
    }

    let sat = task.satisfied(obs)?;
    let base = layout.satisfied_offset();
    for (k, s) in sat.iter().enumerate() {
        v[base + k] = if *s { 1.0 } else { 0.0 };
    }

    let done = crate::world::done_from_satisfied(&task.subgoals, &sat);
    if let Some(k) = done.iter().position(|d| !d) {
        let target = task.nav_target(obs, k)?;
        let dx = target.x - obs.gripper.x;
        let dy = target.y - obs.gripper.y;
        let base = layout.frontier_offset() + 4 * k;
        v[base] = 1.0;
        v[base + 1] = sign(dx);
        v[base + 2] = sign(dy);
        v[base + 3] = if dx == 0 && dy == 0 { 1.0 } else { 0.0 };
    }

    if let Some(s) = suggestion {
        if s.features.len() != layout.suggestion_dim {
            return Err(PolicyError::DimensionMismatch {
                what: "suggestion features",
                expected: layout.suggestion_dim,
                found: s.features.len(),
            });
        }
        v[layout.state_dim()..].copy_from_slice(&s.features);
    }
    Ok(FeatureVector {
        values: v,
        state_dim: layout.state_dim(),
    })
}

/// Flat logit weights, one row of `dim` entries per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub theta: Vec<f64>,
    pub dim: usize,
    pub version_tag: String,
}

impl PolicyParams {
    pub fn zeros(layout: &FeatureLayout) -> Self {
        PolicyParams {
            theta: vec![0.0; layout.param_len()],
            dim: layout.dim(),
            version_tag: layout.version_tag(),
        }
    }

    pub fn from_theta(theta: Vec<f64>, layout: &FeatureLayout) -> Result<Self, PolicyError> {
        let p = PolicyParams {
            dim: layout.dim(),
            version_tag: layout.version_tag(),
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn actions(&self) -> usize {
        self.theta.len() / self.dim.max(1)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.dim == 0 || self.theta.len() % self.dim != 0 {
            return Err(PolicyError::DimensionMismatch {
                what: "parameter length",
                expected: self.dim,
                found: self.theta.len(),
            });
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(PolicyError::NonFiniteParams);
        }
        Ok(())
    }

    pub fn check_tag(&self, expected: &str) -> Result<(), PolicyError> {
        if self.version_tag != expected {
            return Err(PolicyError::VersionMismatch {
                expected: expected.to_owned(),
                found: self.version_tag.clone(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, f: &[f64]) -> Result<Vec<f64>, PolicyError> {
        if f.len() != self.dim {
            return Err(PolicyError::DimensionMismatch {
                what: "feature vector",
                expected: self.dim,
                found: f.len(),
            });
        }
        Ok(self
            .theta
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(f).map(|(w, x)| w * x).sum())
            .collect())
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<(), PolicyError> {
        let text = serde_json::to_string(self).map_err(|e| PolicyError::Format(e.to_string()))?;
        std::fs::write(path, text)
            .map_err(|e| PolicyError::Format(format!("{}: {e}", path.display())))
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Format(format!("{}: {e}", path.display())))?;
        let p: PolicyParams =
            serde_json::from_str(&text).map_err(|e| PolicyError::Format(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// Numerically stable softmax of `logits / temperature`.
pub fn softmax(logits: &[f64], temperature: f64) -> Result<Vec<f64>, PolicyError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(PolicyError::InvalidTemperature(temperature));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(PolicyError::NonFiniteLogits);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|l| ((l - max) / temperature).exp())
        .collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

pub fn action_distribution(
    params: &PolicyParams,
    f: &FeatureVector,
    temperature: f64,
) -> Result<Vec<f64>, PolicyError> {
    softmax(&params.logits(&f.values)?, temperature)
}

pub fn log_prob(
    params: &PolicyParams,
    f: &FeatureVector,
    action: Action,
    temperature: f64,
) -> Result<f64, PolicyError> {
    let logits = params.logits(&f.values)?;
    let a = action.index();
    if a >= logits.len() {
        return Err(PolicyError::DimensionMismatch {
            what: "action index",
            expected: logits.len(),
            found: a,
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits
        .iter()
        .map(|l| ((l - max) / temperature).exp())
        .sum::<f64>()
        .ln();
    Ok((logits[a] - max) / temperature - lse)
}

/// Gradient of `log p(action)` with respect to theta.
pub fn log_prob_gradient(
    params: &PolicyParams,
    f: &FeatureVector,
    action: Action,
    temperature: f64,
) -> Result<Vec<f64>, PolicyError> {
    let mut grad = vec![0.0; params.theta.len()];
    accumulate_log_prob_gradient(params, &f.values, action, temperature, 1.0, &mut grad)?;
    Ok(grad)
}

/// Adds `scale * d log p(action) / d theta` to `out`.
pub(crate) fn accumulate_log_prob_gradient(
    params: &PolicyParams,
    f: &[f64],
    action: Action,
    temperature: f64,
    scale: f64,
    out: &mut [f64],
) -> Result<(), PolicyError> {
    let probs = softmax(&params.logits(f)?, temperature)?;
    let a = action.index();
    for (b, (row, p)) in out.chunks_exact_mut(params.dim).zip(&probs).enumerate() {
        let coef = scale * (if a == b { 1.0 } else { 0.0 } - p) / temperature;
        if coef != 0.0 {
            for (g, x) in row.iter_mut().zip(f) {
                *g += coef * x;
            }
        }
    }
    Ok(())
}

/// Inverse-CDF draw from `probs` with one uniform variate.
pub fn sample_action<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Action {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Action::from_index(i).expect("distribution over the action set");
        }
    }
    Action::from_index(probs.len() - 1).expect("distribution over the action set")
}

/// Most likely action, lowest index on ties.
pub fn greedy_action(probs: &[f64]) -> Action {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    Action::from_index(best).expect("distribution over the action set")
}
