use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// The fixed discrete action set. The index order is part of the policy
/// parameter layout and must not change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Grasp,
    Release,
    Toggle,
}

impl Action {
    pub const COUNT: usize = 7;
    pub const ALL: [Action; Action::COUNT] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Grasp,
        Action::Release,
        Action::Toggle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Action> {
        Action::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::Grasp => "grasp",
            Action::Release => "release",
            Action::Toggle => "toggle",
        }
    }

    pub fn parse(name: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid coordinates. `x` grows to the right, `y` grows upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

impl From<(i32, i32)> for Cell {
    fn from((x, y): (i32, i32)) -> Self {
        Cell { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Object,
    Toggle,
    Container,
    Surface,
}

impl EntityKind {
    /// Objects are the only graspable kind.
    pub fn graspable(self) -> bool {
        matches!(self, EntityKind::Object)
    }

    /// Toggles (stoves, switches) and containers (drawers, cabinets) carry an
    /// on/open flag that the toggle action flips.
    pub fn toggleable(self) -> bool {
        matches!(self, EntityKind::Toggle | EntityKind::Container)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Entity {
    pub name: Arc<str>,
    pub kind: EntityKind,
    pub pos: Cell,
    pub toggled: bool,
}

impl Entity {
    pub fn new(name: &str, kind: EntityKind, pos: impl Into<Cell>) -> Self {
        Entity {
            name: Arc::from(name),
            kind,
            pos: pos.into(),
            toggled: false,
        }
    }

    pub fn with_toggled(mut self, toggled: bool) -> Self {
        self.toggled = toggled;
        self
    }
}

/// Full symbolic world state. Treated as an immutable value: [`step`]
/// returns a successor and never mutates its input.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WorldState {
    pub width: i32,
    pub height: i32,
    pub gripper: Cell,
    /// Index into `entities` of the held entity, if any.
    pub held: Option<usize>,
    pub entities: Vec<Entity>,
    pub step_count: u32,
}

impl WorldState {
    pub fn new(width: i32, height: i32, gripper: impl Into<Cell>, entities: Vec<Entity>) -> Self {
        WorldState {
            width,
            height,
            gripper: gripper.into(),
            held: None,
            entities,
            step_count: 0,
        }
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.x >= 0 && cell.y >= 0 && cell.x < self.width && cell.y < self.height
    }

    /// Largest Chebyshev distance between two cells of the grid.
    pub fn diameter(&self) -> i32 {
        (self.width.max(self.height) - 1).max(1)
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.entities.iter().position(|e| &*e.name == name)
    }

    pub fn entity(&self, name: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| &*e.name == name)
    }

    pub fn held_entity(&self) -> Option<&Entity> {
        self.held.map(|i| &self.entities[i])
    }

    pub fn is_holding(&self, name: &str) -> bool {
        self.held_entity().is_some_and(|e| &*e.name == name)
    }

    /// Checks the structural invariants: everything inside the grid, and a
    /// held entity sits under the gripper.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.width <= 0 || self.height <= 0 {
            return Err(format!("grid {}x{} is empty", self.width, self.height));
        }
        if !self.contains(self.gripper) {
            return Err(format!("gripper {:?} outside the grid", self.gripper));
        }
        for e in &self.entities {
            if !self.contains(e.pos) {
                return Err(format!(
                    "entity '{}' at {:?} outside the grid",
                    e.name, e.pos
                ));
            }
        }
        if let Some(i) = self.held {
            let e = self
                .entities
                .get(i)
                .ok_or_else(|| format!("held index {i} out of range"))?;
            if e.pos != self.gripper {
                return Err(format!("held entity '{}' is not at the gripper", e.name));
            }
        }
        Ok(())
    }
}

/// Deterministic transition function. Actions that cannot apply are no-ops
/// on everything except `step_count`.
pub fn step(state: &WorldState, action: Action) -> WorldState {
    let mut next = state.clone();
    next.step_count += 1;
    let delta = match action {
        Action::Up => Some((0, 1)),
        Action::Down => Some((0, -1)),
        Action::Left => Some((-1, 0)),
        Action::Right => Some((1, 0)),
        _ => None,
    };
    if let Some((dx, dy)) = delta {
        let target = Cell::new(
            (state.gripper.x + dx).clamp(0, state.width - 1),
            (state.gripper.y + dy).clamp(0, state.height - 1),
        );
        next.gripper = target;
        if let Some(i) = next.held {
            next.entities[i].pos = target;
        }
        return next;
    }
    match action {
        Action::Grasp => {
            if next.held.is_none() {
                next.held = next
                    .entities
                    .iter()
                    .position(|e| e.kind.graspable() && e.pos == next.gripper);
            }
        }
        Action::Release => {
            next.held = None;
        }
        Action::Toggle => {
            let gripper = next.gripper;
            if let Some(e) = next
                .entities
                .iter_mut()
                .find(|e| e.kind.toggleable() && e.pos == gripper)
            {
                e.toggled = !e.toggled;
            }
        }
        _ => unreachable!("movement handled above"),
    }
    next
}
