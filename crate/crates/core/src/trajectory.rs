use crate::world::{Action, WorldState};

/// One recorded rollout.
///
/// `states` holds the T+1 observations (initial state included); every other
/// per-step field has length T. `satisfied[t]` lists raw predicate
/// satisfaction for every sub-goal at observation `t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub states: Vec<WorldState>,
    pub actions: Vec<Action>,
    pub features: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub satisfied: Vec<Vec<bool>>,
    pub suggestions: Vec<Option<String>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn first(&self) -> &WorldState {
        &self.states[0]
    }

    pub fn last(&self) -> &WorldState {
        self.states
            .last()
            .expect("trajectory holds at least the initial state")
    }

    /// Steps at which a hint was active.
    pub fn hinted_steps(&self) -> usize {
        self.suggestions.iter().filter(|s| s.is_some()).count()
    }
}
