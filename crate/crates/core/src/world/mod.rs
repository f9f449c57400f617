//! Deterministic grid manipulation world, instruction templates and task
//! suites.

mod library;
mod predicate;
mod state;
mod suite;
mod task;
mod templates;

pub use library::{builtin_ids, builtin_task, builtin_tasks};
pub use predicate::{
    distance_to_satisfaction, eval_predicate, oracle_progress, Predicate, SubGoal,
};
pub use state::{step, Action, Cell, Entity, EntityKind, WorldState};
pub use suite::{SuiteTask, TaskRole, TaskSuite};
pub use task::{direction_toward, Guidance, TaskSpec};
pub use templates::{
    decompose, normalize_instruction, TemplateSet, ATOMIC, OPEN_THEN_INSERT, PICK_PLACE,
    RANKING_LITE, TOGGLE_THEN_PLACE,
};

pub(crate) use task::done_from_satisfied;

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("no template matches instruction '{0}'")]
    UnknownInstruction(String),
    #[error("entity '{0}' does not exist in the layout")]
    MissingEntity(String),
    #[error("invalid task {0}")]
    InvalidTask(String),
    #[error("unknown task id '{0}'")]
    UnknownTask(String),
    #[error("task suite: {0}")]
    Config(String),
}
