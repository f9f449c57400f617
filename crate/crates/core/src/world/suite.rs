//! Task suite files.
//!
//! A suite is a TOML document with one `[[task]]` table per task. A task
//! either names a built-in layout or spells out its own:
//!
//! ```toml
//! [[task]]
//! builtin = "bowl-basket"
//! role = "populate"
//!
//! [[task]]
//! id = "stove-left"
//! instruction = "turn on the stove and put the moka pot on it"
//! grid = [5, 5]
//! gripper = [0, 4]
//! horizon = 60
//! family = "toggle-then-place"   # optional, defaults to the template family
//! role = "target"                 # optional, defaults to "target"
//! entities = [
//!   { name = "stove", kind = "toggle", pos = [4, 4] },
//!   { name = "moka pot", kind = "object", pos = [0, 0], toggled = false },
//! ]
//! ```
//!
//! Every task is validated on load.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::library::builtin_task;
use super::state::{Cell, Entity, EntityKind, WorldState};
use super::task::TaskSpec;
use super::templates::TemplateSet;
use super::WorldError;

/// How an experiment uses a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskRole {
    /// Adapted first to fill the memory bank.
    Populate,
    /// Measured.
    #[default]
    Target,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntityRecord {
    name: String,
    kind: EntityKind,
    pos: [i32; 2],
    #[serde(default)]
    toggled: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskRecord {
    builtin: Option<String>,
    id: Option<String>,
    instruction: Option<String>,
    grid: Option<[i32; 2]>,
    gripper: Option<[i32; 2]>,
    horizon: Option<u32>,
    family: Option<String>,
    #[serde(default)]
    role: TaskRole,
    #[serde(default)]
    entities: Vec<EntityRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    #[serde(default)]
    task: Vec<TaskRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteTask {
    pub task: TaskSpec,
    pub role: TaskRole,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TaskSuite {
    pub tasks: Vec<SuiteTask>,
}

impl TaskSuite {
    pub fn from_toml_str(text: &str) -> Result<Self, WorldError> {
        let file: SuiteFile =
            toml::from_str(text).map_err(|e| WorldError::Config(e.to_string()))?;
        let templates = TemplateSet::builtin();
        let tasks = file
            .task
            .into_iter()
            .enumerate()
            .map(|(i, rec)| {
                let role = rec.role;
                to_task(rec, i, &templates).map(|task| SuiteTask { task, role })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if tasks.is_empty() {
            return Err(WorldError::Config("suite has no tasks".into()));
        }
        Ok(TaskSuite { tasks })
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| WorldError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn with_role(&self, role: TaskRole) -> Vec<&TaskSpec> {
        self.tasks
            .iter()
            .filter(|t| t.role == role)
            .map(|t| &t.task)
            .collect()
    }

    pub fn all(&self) -> Vec<&TaskSpec> {
        self.tasks.iter().map(|t| &t.task).collect()
    }

    pub fn find(&self, id: &str) -> Option<&TaskSpec> {
        self.tasks.iter().map(|t| &t.task).find(|t| t.id == id)
    }
}

fn to_task(rec: TaskRecord, index: usize, templates: &TemplateSet) -> Result<TaskSpec, WorldError> {
    if let Some(name) = &rec.builtin {
        let mut task = builtin_task(name)?;
        if let Some(id) = rec.id {
            task.id = id;
        }
        if let Some(h) = rec.horizon {
            task.horizon = h;
        }
        if let Some(f) = rec.family {
            task.family_tag = f;
        }
        task.validate()?;
        return Ok(task);
    }
    let missing =
        |field: &str| WorldError::Config(format!("task #{}: missing field '{field}'", index + 1));
    let id = rec.id.ok_or_else(|| missing("id"))?;
    let instruction = rec.instruction.ok_or_else(|| missing("instruction"))?;
    let [w, h] = rec.grid.ok_or_else(|| missing("grid"))?;
    let [gx, gy] = rec.gripper.ok_or_else(|| missing("gripper"))?;
    let horizon = rec.horizon.ok_or_else(|| missing("horizon"))?;
    let entities = rec
        .entities
        .into_iter()
        .map(|e| {
            Entity::new(&e.name, e.kind, Cell::new(e.pos[0], e.pos[1])).with_toggled(e.toggled)
        })
        .collect();
    let layout = WorldState::new(w, h, (gx, gy), entities);
    let mut task = TaskSpec::from_instruction(&id, &instruction, layout, horizon, templates)?;
    if let Some(f) = rec.family {
        task.family_tag = f;
    }
    Ok(task)
}
