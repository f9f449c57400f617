use std::collections::HashSet;

use super::predicate::{eval_predicate, Predicate, SubGoal};
use super::state::{Action, Cell, WorldState};
use super::templates::TemplateSet;
use super::WorldError;

/// The unit of adaptation: an instruction, its initial layout and the ordered
/// sub-goals it decomposes into.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub id: String,
    pub instruction: String,
    pub layout: WorldState,
    pub subgoals: Vec<SubGoal>,
    pub horizon: u32,
    pub family_tag: String,
}

/// What the next useful step toward the current frontier is.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Guidance {
    Move {
        action: Action,
        toward: String,
    },
    Grasp {
        entity: String,
    },
    Toggle {
        entity: String,
    },
    Release {
        entity: String,
        target: Option<String>,
    },
}

impl Guidance {
    pub fn action(&self) -> Action {
        match self {
            Guidance::Move { action, .. } => *action,
            Guidance::Grasp { .. } => Action::Grasp,
            Guidance::Toggle { .. } => Action::Toggle,
            Guidance::Release { .. } => Action::Release,
        }
    }
}

impl TaskSpec {
    /// Decomposes `instruction` with `templates` and validates the result
    /// against `layout`. The family tag is taken from the matching template.
    pub fn from_instruction(
        id: &str,
        instruction: &str,
        layout: WorldState,
        horizon: u32,
        templates: &TemplateSet,
    ) -> Result<Self, WorldError> {
        let (family, subgoals) = templates.expand(instruction)?;
        let task = TaskSpec {
            id: id.to_owned(),
            instruction: instruction.to_owned(),
            layout,
            subgoals,
            horizon,
            family_tag: family.to_owned(),
        };
        task.validate()?;
        Ok(task)
    }

    pub fn k(&self) -> usize {
        self.subgoals.len()
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let invalid = |msg: String| Err(WorldError::InvalidTask(format!("{}: {msg}", self.id)));
        if let Err(msg) = self.layout.check_invariants() {
            return invalid(msg);
        }
        let mut names = HashSet::new();
        for e in &self.layout.entities {
            if !names.insert(&*e.name) {
                return invalid(format!("duplicate entity '{}'", e.name));
            }
        }
        if self.subgoals.is_empty() {
            return invalid("no sub-goals".into());
        }
        if self.horizon == 0 {
            return invalid("horizon must be positive".into());
        }
        for (i, g) in self.subgoals.iter().enumerate() {
            if g.id != i + 1 {
                return invalid(format!(
                    "sub-goal ids must run 1..K, found {} at position {}",
                    g.id,
                    i + 1
                ));
            }
            for name in g.predicate.entities() {
                if self.layout.find(name).is_none() {
                    return Err(WorldError::MissingEntity(name.to_owned()));
                }
            }
        }
        Ok(())
    }

    /// Raw predicate satisfaction per sub-goal.
    pub fn satisfied(&self, state: &WorldState) -> Result<Vec<bool>, WorldError> {
        self.subgoals
            .iter()
            .map(|g| eval_predicate(state, &g.predicate))
            .collect()
    }

    /// Sub-goal completion as seen from the current state: a sub-goal is done
    /// when it holds, or when it is transient (near/holding) and some later
    /// sub-goal holds. World facts (toggled, placed) count only while true.
    pub fn done_flags(&self, state: &WorldState) -> Result<Vec<bool>, WorldError> {
        let sat = self.satisfied(state)?;
        Ok(done_from_satisfied(&self.subgoals, &sat))
    }

    /// Index (0-based) of the first sub-goal that is not done.
    pub fn frontier(&self, state: &WorldState) -> Result<Option<usize>, WorldError> {
        Ok(self.done_flags(state)?.iter().position(|d| !d))
    }

    /// Every sub-goal is done: the final predicate holds together with every
    /// earlier world fact (toggled, placed).
    pub fn is_success(&self, state: &WorldState) -> Result<bool, WorldError> {
        Ok(self.done_flags(state)?.iter().all(|d| *d))
    }

    fn pos(&self, state: &WorldState, name: &str) -> Result<Cell, WorldError> {
        state
            .entity(name)
            .map(|e| e.pos)
            .ok_or_else(|| WorldError::MissingEntity(name.to_owned()))
    }

    /// The cell the gripper has to reach to make progress on sub-goal `k`.
    pub fn nav_target(&self, state: &WorldState, k: usize) -> Result<Cell, WorldError> {
        match &self.subgoals[k].predicate {
            Predicate::Placed { entity, target } if state.is_holding(entity) => {
                self.pos(state, target)
            }
            p => self.pos(state, p.subject()),
        }
    }

    /// Next step of the scripted expert, or `None` once every sub-goal is done.
    pub fn guidance(&self, state: &WorldState) -> Result<Option<Guidance>, WorldError> {
        let Some(k) = self.frontier(state)? else {
            return Ok(None);
        };
        let target = self.nav_target(state, k)?;
        let move_to = |toward: &str| Guidance::Move {
            action: direction_toward(state.gripper, target),
            toward: toward.to_owned(),
        };
        let held_other = |wanted: &str| {
            state
                .held_entity()
                .filter(|h| &*h.name != wanted)
                .map(|h| h.name.to_string())
        };
        let at_target = state.gripper == target;
        Ok(Some(match &self.subgoals[k].predicate {
            Predicate::Near { entity } => move_to(entity),
            Predicate::Toggled { entity } => {
                if at_target {
                    Guidance::Toggle {
                        entity: entity.clone(),
                    }
                } else {
                    move_to(entity)
                }
            }
            Predicate::Holding { entity } => {
                if let Some(other) = held_other(entity) {
                    Guidance::Release {
                        entity: other,
                        target: None,
                    }
                } else if at_target {
                    Guidance::Grasp {
                        entity: entity.clone(),
                    }
                } else {
                    move_to(entity)
                }
            }
            Predicate::Placed {
                entity,
                target: dest,
            } => {
                if state.is_holding(entity) {
                    if at_target {
                        Guidance::Release {
                            entity: entity.clone(),
                            target: Some(dest.clone()),
                        }
                    } else {
                        move_to(dest)
                    }
                } else if let Some(other) = held_other(entity) {
                    Guidance::Release {
                        entity: other,
                        target: None,
                    }
                } else if at_target {
                    Guidance::Grasp {
                        entity: entity.clone(),
                    }
                } else {
                    move_to(entity)
                }
            }
        }))
    }

    /// The scripted optimal policy: horizontal moves first, then vertical,
    /// then the manipulation the frontier sub-goal needs.
    pub fn expert_action(&self, state: &WorldState) -> Result<Action, WorldError> {
        Ok(self
            .guidance(state)?
            .map(|g| g.action())
            .unwrap_or(Action::Release))
    }

    /// Runs the scripted expert from the initial layout until success or the
    /// horizon; returns every visited state including the first.
    pub fn scripted_episode(&self) -> Result<Vec<WorldState>, WorldError> {
        let mut states = vec![self.layout.clone()];
        let mut state = self.layout.clone();
        while !self.is_success(&state)? && state.step_count < self.horizon {
            state = super::state::step(&state, self.expert_action(&state)?);
            states.push(state.clone());
        }
        Ok(states)
    }
}

pub(crate) fn done_from_satisfied(subgoals: &[SubGoal], sat: &[bool]) -> Vec<bool> {
    let mut done = vec![false; sat.len()];
    let mut later_satisfied = false;
    for k in (0..sat.len()).rev() {
        done[k] = sat[k] || (subgoals[k].predicate.is_transient() && later_satisfied);
        later_satisfied |= sat[k];
    }
    done
}

pub fn direction_toward(from: Cell, to: Cell) -> Action {
    if to.x > from.x {
        Action::Right
    } else if to.x < from.x {
        Action::Left
    } else if to.y > from.y {
        Action::Up
    } else {
        Action::Down
    }
}
