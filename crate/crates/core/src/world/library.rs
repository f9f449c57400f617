//! Built-in task layouts, at least three entity-name variants per family.

use super::state::{Cell, Entity, EntityKind, WorldState};
use super::task::TaskSpec;
use super::templates::TemplateSet;
use super::WorldError;

use EntityKind::{Container, Object, Surface, Toggle};

struct Def {
    id: &'static str,
    instruction: &'static str,
    grid: (i32, i32),
    gripper: (i32, i32),
    entities: &'static [(&'static str, EntityKind, (i32, i32))],
    horizon: u32,
}

const DEFS: &[Def] = &[
    // toggle-then-place
    Def {
        id: "stove-moka",
        instruction: "turn on the stove and put the moka pot on it",
        grid: (5, 5),
        gripper: (0, 4),
        entities: &[("stove", Toggle, (4, 4)), ("moka pot", Object, (0, 0))],
        horizon: 60,
    },
    Def {
        id: "burner-kettle",
        instruction: "turn on the burner and put the kettle on it",
        grid: (5, 5),
        gripper: (0, 0),
        entities: &[("burner", Toggle, (4, 0)), ("kettle", Object, (2, 4))],
        horizon: 60,
    },
    Def {
        id: "hotplate-pan",
        instruction: "turn on the hotplate and put the frying pan on it",
        grid: (5, 5),
        gripper: (4, 4),
        entities: &[("hotplate", Toggle, (0, 3)), ("frying pan", Object, (3, 0))],
        horizon: 60,
    },
    Def {
        id: "griddle-skillet",
        instruction: "turn on the griddle and put the skillet on it",
        grid: (5, 5),
        gripper: (2, 0),
        entities: &[("griddle", Toggle, (0, 4)), ("skillet", Object, (4, 3))],
        horizon: 60,
    },
    // pick-place
    Def {
        id: "bowl-basket",
        instruction: "pick up the bowl and place it in the basket",
        grid: (5, 5),
        gripper: (0, 0),
        entities: &[("bowl", Object, (3, 1)), ("basket", Container, (1, 4))],
        horizon: 40,
    },
    Def {
        id: "plate-tray",
        instruction: "pick up the plate and place it on the tray",
        grid: (5, 5),
        gripper: (4, 0),
        entities: &[("plate", Object, (1, 2)), ("tray", Surface, (4, 4))],
        horizon: 40,
    },
    Def {
        id: "mug-box",
        instruction: "pick up the mug and place it in the box",
        grid: (5, 5),
        gripper: (2, 0),
        entities: &[("mug", Object, (0, 3)), ("box", Container, (4, 2))],
        horizon: 40,
    },
    Def {
        id: "cup-bin",
        instruction: "pick up the cup and place it in the bin",
        grid: (5, 5),
        gripper: (0, 2),
        entities: &[("cup", Object, (3, 4)), ("bin", Container, (3, 0))],
        horizon: 40,
    },
    // open-then-insert
    Def {
        id: "drawer-bowl",
        instruction: "open the top drawer and put the bowl inside",
        grid: (5, 5),
        gripper: (0, 0),
        entities: &[("top drawer", Container, (4, 0)), ("bowl", Object, (1, 4))],
        horizon: 70,
    },
    Def {
        id: "cabinet-mug",
        instruction: "open the cabinet and put the mug inside",
        grid: (5, 5),
        gripper: (4, 4),
        entities: &[("cabinet", Container, (0, 4)), ("mug", Object, (3, 1))],
        horizon: 70,
    },
    Def {
        id: "microwave-plate",
        instruction: "open the microwave and put the plate inside",
        grid: (5, 5),
        gripper: (2, 4),
        entities: &[("microwave", Container, (4, 1)), ("plate", Object, (0, 1))],
        horizon: 70,
    },
    // ranking-lite
    Def {
        id: "blocks-bin",
        instruction: "put the red block, then the blue block in the bin",
        grid: (6, 6),
        gripper: (0, 0),
        entities: &[
            ("red block", Object, (4, 1)),
            ("blue block", Object, (1, 5)),
            ("bin", Container, (5, 5)),
        ],
        horizon: 80,
    },
    Def {
        id: "fruit-bowl",
        instruction: "put the apple, then the lemon in the fruit bowl",
        grid: (6, 6),
        gripper: (5, 0),
        entities: &[
            ("apple", Object, (1, 1)),
            ("lemon", Object, (4, 4)),
            ("fruit bowl", Container, (0, 5)),
        ],
        horizon: 80,
    },
    Def {
        id: "cones-crate",
        instruction: "put the orange cone, then the white cone in the crate",
        grid: (6, 6),
        gripper: (0, 5),
        entities: &[
            ("orange cone", Object, (3, 0)),
            ("white cone", Object, (5, 3)),
            ("crate", Container, (0, 0)),
        ],
        horizon: 80,
    },
    // K=3 carry whose first sub-goal holds in the initial layout and whose
    // last one is out of reach within the horizon; used to observe the
    // curriculum weights shift.
    Def {
        id: "chain-instrumented",
        instruction: "put the bowl in the basket",
        grid: (10, 10),
        gripper: (0, 0),
        entities: &[("bowl", Object, (1, 1)), ("basket", Container, (9, 9))],
        horizon: 14,
    },
    // atomic
    Def {
        id: "approach-stove",
        instruction: "approach the stove",
        grid: (5, 5),
        gripper: (0, 0),
        entities: &[("stove", Toggle, (4, 3))],
        horizon: 20,
    },
];

fn build(def: &Def, templates: &TemplateSet) -> Result<TaskSpec, WorldError> {
    let entities = def
        .entities
        .iter()
        .map(|(name, kind, pos)| Entity::new(name, *kind, Cell::from(*pos)))
        .collect();
    let layout = WorldState::new(def.grid.0, def.grid.1, def.gripper, entities);
    TaskSpec::from_instruction(def.id, def.instruction, layout, def.horizon, templates)
}

/// Ids of the shipped tasks, in library order.
pub fn builtin_ids() -> Vec<&'static str> {
    DEFS.iter().map(|d| d.id).collect()
}

pub fn builtin_task(id: &str) -> Result<TaskSpec, WorldError> {
    let def = DEFS
        .iter()
        .find(|d| d.id == id)
        .ok_or_else(|| WorldError::UnknownTask(id.to_owned()))?;
    build(def, &TemplateSet::builtin())
}

pub fn builtin_tasks() -> Vec<TaskSpec> {
    let templates = TemplateSet::builtin();
    DEFS.iter()
        .map(|d| build(d, &templates).expect("built-in task definitions are valid"))
        .collect()
}
