use serde::{Deserialize, Serialize};

use super::state::{Cell, WorldState};
use super::WorldError;

/// A testable condition over the world state. Entities are referenced by name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Predicate {
    /// Gripper within Chebyshev distance 1 of the entity.
    Near {
        entity: String,
    },
    Holding {
        entity: String,
    },
    Toggled {
        entity: String,
    },
    /// Entity co-located with the target and not held.
    Placed {
        entity: String,
        target: String,
    },
}

impl Predicate {
    pub fn near(e: &str) -> Self {
        Predicate::Near {
            entity: e.to_owned(),
        }
    }
    pub fn holding(e: &str) -> Self {
        Predicate::Holding {
            entity: e.to_owned(),
        }
    }
    pub fn toggled(e: &str) -> Self {
        Predicate::Toggled {
            entity: e.to_owned(),
        }
    }
    pub fn placed(e: &str, target: &str) -> Self {
        Predicate::Placed {
            entity: e.to_owned(),
            target: target.to_owned(),
        }
    }

    /// The entity the predicate is about (the moved entity for `Placed`).
    pub fn subject(&self) -> &str {
        match self {
            Predicate::Near { entity }
            | Predicate::Holding { entity }
            | Predicate::Toggled { entity }
            | Predicate::Placed { entity, .. } => entity,
        }
    }

    pub fn entities(&self) -> Vec<&str> {
        match self {
            Predicate::Placed { entity, target } => vec![entity, target],
            other => vec![other.subject()],
        }
    }

    /// Transient predicates describe the gripper rather than the world and
    /// stop holding once the agent moves on (being near, holding).
    pub fn is_transient(&self) -> bool {
        matches!(self, Predicate::Near { .. } | Predicate::Holding { .. })
    }

    pub fn kind_index(&self) -> usize {
        match self {
            Predicate::Near { .. } => 0,
            Predicate::Holding { .. } => 1,
            Predicate::Toggled { .. } => 2,
            Predicate::Placed { .. } => 3,
        }
    }
}

/// One milestone of a task. `id` runs 1..=K in task order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGoal {
    pub id: usize,
    /// Short hyphenated name such as `open-drawer`.
    pub label: String,
    pub description: String,
    pub predicate: Predicate,
}

fn position(state: &WorldState, name: &str) -> Result<Cell, WorldError> {
    state
        .entity(name)
        .map(|e| e.pos)
        .ok_or_else(|| WorldError::MissingEntity(name.to_owned()))
}

pub fn eval_predicate(state: &WorldState, predicate: &Predicate) -> Result<bool, WorldError> {
    Ok(match predicate {
        Predicate::Near { entity } => state.gripper.chebyshev(position(state, entity)?) <= 1,
        Predicate::Holding { entity } => {
            position(state, entity)?;
            state.is_holding(entity)
        }
        Predicate::Toggled { entity } => {
            state
                .entity(entity)
                .ok_or_else(|| WorldError::MissingEntity(entity.clone()))?
                .toggled
        }
        Predicate::Placed { entity, target } => {
            let e = position(state, entity)?;
            let t = position(state, target)?;
            e == t && !state.is_holding(entity)
        }
    })
}

/// Normalized distance-to-satisfaction in [0, 1]; zero exactly when the
/// predicate holds.
///
/// `Near` uses gripper-to-entity Chebyshev distance over the grid diameter.
/// `Placed` uses entity-to-target distance plus one pending release, over
/// `diameter + 1`, so that carrying an object onto its target without letting
/// go still leaves a remainder. `Holding` and `Toggled` are binary.
pub fn distance_to_satisfaction(
    state: &WorldState,
    predicate: &Predicate,
) -> Result<f64, WorldError> {
    if eval_predicate(state, predicate)? {
        return Ok(0.0);
    }
    let diameter = f64::from(state.diameter());
    Ok(match predicate {
        Predicate::Near { entity } => {
            let d = state.gripper.chebyshev(position(state, entity)?);
            (f64::from(d) / diameter).min(1.0)
        }
        Predicate::Holding { .. } | Predicate::Toggled { .. } => 1.0,
        Predicate::Placed { entity, target } => {
            let d = position(state, entity)?.chebyshev(position(state, target)?);
            ((f64::from(d) + 1.0) / (diameter + 1.0)).min(1.0)
        }
    })
}

/// Ground-truth progress on `subgoal` between two states of the same layout.
pub fn oracle_progress(
    before: &WorldState,
    after: &WorldState,
    subgoal: &SubGoal,
) -> Result<f64, WorldError> {
    let a = distance_to_satisfaction(before, &subgoal.predicate)?;
    let b = distance_to_satisfaction(after, &subgoal.predicate)?;
    Ok((a - b).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::state::{step, Action, Entity, EntityKind};

    fn sg(predicate: Predicate) -> SubGoal {
        SubGoal {
            id: 1,
            label: "x".into(),
            description: "x".into(),
            predicate,
        }
    }

    #[test]
    fn near_is_adjacent_inclusive() {
        let s = WorldState::new(
            6,
            6,
            (3, 3),
            vec![Entity::new("stove", EntityKind::Toggle, (3, 4))],
        );
        assert!(eval_predicate(&s, &Predicate::near("stove")).unwrap());
        let s = WorldState::new(
            6,
            6,
            (3, 2),
            vec![Entity::new("stove", EntityKind::Toggle, (3, 4))],
        );
        assert!(!eval_predicate(&s, &Predicate::near("stove")).unwrap());
    }

    #[test]
    fn held_object_is_not_placed() {
        let s = WorldState::new(
            4,
            4,
            (1, 1),
            vec![
                Entity::new("pot", EntityKind::Object, (1, 1)),
                Entity::new("stove", EntityKind::Toggle, (1, 1)),
            ],
        );
        let s = step(&s, Action::Grasp);
        assert!(s.is_holding("pot"));
        assert!(!eval_predicate(&s, &Predicate::placed("pot", "stove")).unwrap());
        let s = step(&s, Action::Release);
        assert!(eval_predicate(&s, &Predicate::placed("pot", "stove")).unwrap());
    }

    #[test]
    fn missing_entity_is_an_error() {
        let s = WorldState::new(3, 3, (0, 0), vec![]);
        assert!(matches!(
            eval_predicate(&s, &Predicate::toggled("lamp")),
            Err(WorldError::MissingEntity(name)) if name == "lamp"
        ));
    }

    #[test]
    fn progress_same_state_is_zero() {
        let s = WorldState::new(
            10,
            10,
            (0, 0),
            vec![Entity::new("stove", EntityKind::Toggle, (9, 9))],
        );
        assert_eq!(
            oracle_progress(&s, &s, &sg(Predicate::near("stove"))).unwrap(),
            0.0
        );
    }

    #[test]
    fn progress_full_completion_from_maximal_distance() {
        let a = WorldState::new(
            10,
            10,
            (0, 0),
            vec![Entity::new("stove", EntityKind::Toggle, (9, 9))],
        );
        let mut b = a.clone();
        b.gripper = Cell::new(9, 8);
        assert_eq!(
            oracle_progress(&a, &b, &sg(Predicate::near("stove"))).unwrap(),
            1.0
        );
    }

    #[test]
    fn progress_partial_approach() {
        // distance 6 -> distance 2 on a 10x10 grid (diameter 9)
        let a = WorldState::new(
            10,
            10,
            (0, 3),
            vec![Entity::new("stove", EntityKind::Toggle, (6, 3))],
        );
        let mut b = a.clone();
        b.gripper = Cell::new(4, 3);
        let p = oracle_progress(&a, &b, &sg(Predicate::near("stove"))).unwrap();
        assert!((p - 4.0 / 9.0).abs() < 1e-15, "{p}");
        // moving away is clamped to zero
        assert_eq!(
            oracle_progress(&b, &a, &sg(Predicate::near("stove"))).unwrap(),
            0.0
        );
    }

    #[test]
    fn placed_distance_counts_the_pending_release() {
        let s = WorldState::new(
            10,
            10,
            (0, 0),
            vec![
                Entity::new("pot", EntityKind::Object, (0, 0)),
                Entity::new("stove", EntityKind::Toggle, (9, 9)),
            ],
        );
        let g = Predicate::placed("pot", "stove");
        assert_eq!(distance_to_satisfaction(&s, &g).unwrap(), 1.0);
        let mut held = step(&s, Action::Grasp);
        held.gripper = Cell::new(9, 9);
        held.entities[0].pos = Cell::new(9, 9);
        assert!((distance_to_satisfaction(&held, &g).unwrap() - 0.1).abs() < 1e-15);
        let placed = step(&held, Action::Release);
        assert_eq!(distance_to_satisfaction(&placed, &g).unwrap(), 0.0);
    }
}
