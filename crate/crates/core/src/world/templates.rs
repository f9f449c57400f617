//! Instruction grammar and deterministic sub-goal expansion.
//!
//! Each template pairs an anchored pattern over the normalized instruction
//! with an expansion into an ordered list of predicates. Templates are tried
//! in registration order and the first match wins, so more specific grammars
//! must be registered before more general ones.

use regex::Regex;

use super::predicate::{Predicate, SubGoal};
use super::WorldError;

pub const TOGGLE_THEN_PLACE: &str = "toggle-then-place";
pub const PICK_PLACE: &str = "pick-place";
pub const OPEN_THEN_INSERT: &str = "open-then-insert";
pub const RANKING_LITE: &str = "ranking-lite";
pub const ATOMIC: &str = "atomic";

type Expander = fn(&[String]) -> Vec<(String, String, Predicate)>;

pub struct Template {
    pub family: &'static str,
    pattern: Regex,
    expand: Expander,
}

impl Template {
    fn new(family: &'static str, pattern: &str, expand: Expander) -> Self {
        Template {
            family,
            pattern: Regex::new(pattern).expect("template pattern"),
            expand,
        }
    }

    fn apply(&self, instruction: &str) -> Option<Vec<SubGoal>> {
        let caps = self.pattern.captures(instruction)?;
        let args: Vec<String> = caps
            .iter()
            .skip(1)
            .flatten()
            .map(|m| m.as_str().trim().to_owned())
            .collect();
        let goals = (self.expand)(&args)
            .into_iter()
            .enumerate()
            .map(|(i, (label, description, predicate))| SubGoal {
                id: i + 1,
                label,
                description,
                predicate,
            })
            .collect();
        Some(goals)
    }
}

/// Short name of an entity for sub-goal labels: its last word.
fn short(name: &str) -> &str {
    name.rsplit(' ').next().unwrap_or(name)
}

fn approach(e: &str) -> (String, String, Predicate) {
    (
        format!("approach-{}", short(e)),
        format!("approach the {e}"),
        Predicate::near(e),
    )
}

fn grasp(e: &str) -> (String, String, Predicate) {
    (
        format!("grasp-{}", short(e)),
        format!("grasp the {e}"),
        Predicate::holding(e),
    )
}

fn toggle_then_place(a: &[String]) -> Vec<(String, String, Predicate)> {
    let (fixture, object) = (&a[0], &a[1]);
    vec![
        approach(fixture),
        (
            format!("toggle-{}", short(fixture)),
            format!("turn on the {fixture}"),
            Predicate::toggled(fixture),
        ),
        approach(object),
        grasp(object),
        (
            format!("place-{}", short(object)),
            format!("place the {object} on the {fixture}"),
            Predicate::placed(object, fixture),
        ),
    ]
}

fn pick_place(a: &[String]) -> Vec<(String, String, Predicate)> {
    let (object, target) = (&a[0], &a[1]);
    vec![
        approach(object),
        grasp(object),
        approach(target),
        (
            format!("place-{}", short(object)),
            format!("place the {object} in the {target}"),
            Predicate::placed(object, target),
        ),
    ]
}

fn open_then_insert(a: &[String]) -> Vec<(String, String, Predicate)> {
    let (container, object) = (&a[0], &a[1]);
    vec![
        approach(container),
        (
            format!("open-{}", short(container)),
            format!("open the {container}"),
            Predicate::toggled(container),
        ),
        approach(object),
        grasp(object),
        approach(container),
        (
            format!("place-{}", short(object)),
            format!("put the {object} inside the {container}"),
            Predicate::placed(object, container),
        ),
    ]
}

/// Objects go into one container in the stated order. Labels carry the full
/// entity name because the objects often share a noun ("red block").
fn ordered_placement(a: &[String]) -> Vec<(String, String, Predicate)> {
    let container = &a[1];
    a[0].split(", then the ")
        .flat_map(|e| {
            let e = e.trim();
            let tag = e.replace(' ', "-");
            [
                (
                    format!("approach-{tag}"),
                    format!("approach the {e}"),
                    Predicate::near(e),
                ),
                (
                    format!("grasp-{tag}"),
                    format!("grasp the {e}"),
                    Predicate::holding(e),
                ),
                (
                    format!("place-{tag}"),
                    format!("put the {e} in the {container}"),
                    Predicate::placed(e, container),
                ),
            ]
        })
        .collect()
}

fn carry(a: &[String]) -> Vec<(String, String, Predicate)> {
    let (object, target) = (&a[0], &a[1]);
    vec![
        approach(object),
        grasp(object),
        (
            format!("place-{}", short(object)),
            format!("put the {object} in the {target}"),
            Predicate::placed(object, target),
        ),
    ]
}

fn approach_only(a: &[String]) -> Vec<(String, String, Predicate)> {
    vec![approach(&a[0])]
}

fn switch_on(a: &[String]) -> Vec<(String, String, Predicate)> {
    let e = &a[0];
    vec![
        approach(e),
        (
            format!("toggle-{}", short(e)),
            format!("turn on the {e}"),
            Predicate::toggled(e),
        ),
    ]
}

const NAME: &str = "[a-z][a-z ]*?";

/// Registered instruction grammars.
pub struct TemplateSet {
    templates: Vec<Template>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        TemplateSet::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = vec![
            Template::new(
                TOGGLE_THEN_PLACE,
                &format!("^turn on the ({NAME}) and put the ({NAME}) on it$"),
                toggle_then_place,
            ),
            Template::new(
                PICK_PLACE,
                &format!("^pick up the ({NAME}) and place it (?:in|on) the ({NAME})$"),
                pick_place,
            ),
            Template::new(
                OPEN_THEN_INSERT,
                &format!("^open the ({NAME}) and put the ({NAME}) inside$"),
                open_then_insert,
            ),
            Template::new(
                RANKING_LITE,
                &format!("^put the ((?:{NAME})(?:, then the {NAME})+) in the ({NAME})$"),
                ordered_placement,
            ),
            Template::new(
                ATOMIC,
                &format!("^put the ({NAME}) (?:in|on) the ({NAME})$"),
                carry,
            ),
            Template::new(ATOMIC, &format!("^approach the ({NAME})$"), approach_only),
            Template::new(ATOMIC, &format!("^turn on the ({NAME})$"), switch_on),
        ];
        TemplateSet { templates }
    }

    pub fn families(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for t in &self.templates {
            if !out.contains(&t.family) {
                out.push(t.family);
            }
        }
        out
    }

    /// Returns the matching family tag and the expanded sub-goals.
    pub fn expand(&self, instruction: &str) -> Result<(&'static str, Vec<SubGoal>), WorldError> {
        let normalized = normalize_instruction(instruction);
        self.templates
            .iter()
            .find_map(|t| t.apply(&normalized).map(|goals| (t.family, goals)))
            .ok_or_else(|| WorldError::UnknownInstruction(instruction.to_owned()))
    }
}

/// Lowercases, collapses whitespace and drops a trailing period.
pub fn normalize_instruction(instruction: &str) -> String {
    let lowered = instruction.trim().trim_end_matches('.').to_lowercase();
    lowered.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Splits an instruction into an ordered sub-goal list.
pub fn decompose(instruction: &str, templates: &TemplateSet) -> Result<Vec<SubGoal>, WorldError> {
    templates.expand(instruction).map(|(_, goals)| goals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(goals: &[SubGoal]) -> Vec<&str> {
        goals.iter().map(|g| g.label.as_str()).collect()
    }

    #[test]
    fn stove_instruction_has_five_subgoals() {
        let t = TemplateSet::builtin();
        let goals = decompose("turn on the stove and put the moka pot on it", &t).unwrap();
        assert_eq!(
            labels(&goals),
            [
                "approach-stove",
                "toggle-stove",
                "approach-pot",
                "grasp-pot",
                "place-pot"
            ]
        );
        assert_eq!(goals[4].predicate, Predicate::placed("moka pot", "stove"));
        assert_eq!(
            goals.iter().map(|g| g.id).collect::<Vec<_>>(),
            [1, 2, 3, 4, 5]
        );
    }

    #[test]
    fn atomic_approach() {
        let goals = decompose("approach the stove", &TemplateSet::builtin()).unwrap();
        assert_eq!(goals.len(), 1);
        assert_eq!(goals[0].predicate, Predicate::near("stove"));
    }

    #[test]
    fn pick_place_expansion() {
        let goals = decompose(
            "pick up the bowl and place it in the basket",
            &TemplateSet::builtin(),
        )
        .unwrap();
        let preds: Vec<_> = goals.iter().map(|g| g.predicate.clone()).collect();
        assert_eq!(
            preds,
            vec![
                Predicate::near("bowl"),
                Predicate::holding("bowl"),
                Predicate::near("basket"),
                Predicate::placed("bowl", "basket"),
            ]
        );
    }

    #[test]
    fn drawer_labels() {
        let goals = decompose(
            "Open the top drawer and put the bowl inside.",
            &TemplateSet::builtin(),
        )
        .unwrap();
        assert_eq!(goals[1].label, "open-drawer");
        assert_eq!(goals[5].label, "place-bowl");
        assert_eq!(goals.len(), 6);
    }

    #[test]
    fn ordered_placement_expands_three_goals_per_object() {
        let t = TemplateSet::builtin();
        let (family, goals) = t
            .expand("put the red block, then the blue block in the bin")
            .unwrap();
        assert_eq!(family, RANKING_LITE);
        assert_eq!(
            labels(&goals),
            [
                "approach-red-block",
                "grasp-red-block",
                "place-red-block",
                "approach-blue-block",
                "grasp-blue-block",
                "place-blue-block"
            ]
        );
        assert_eq!(goals[5].predicate, Predicate::placed("blue block", "bin"));
        let three = decompose("put the a, then the b, then the c in the d", &t).unwrap();
        assert_eq!(three.len(), 9);
    }

    #[test]
    fn carry_is_three_goals() {
        let (family, goals) = TemplateSet::builtin()
            .expand("put the bowl in the basket")
            .unwrap();
        assert_eq!(family, ATOMIC);
        assert_eq!(
            labels(&goals),
            ["approach-bowl", "grasp-bowl", "place-bowl"]
        );
    }

    #[test]
    fn unknown_instruction() {
        assert!(matches!(
            decompose("juggle three oranges", &TemplateSet::builtin()),
            Err(WorldError::UnknownInstruction(_))
        ));
    }

    #[test]
    fn decomposition_is_deterministic() {
        let t = TemplateSet::builtin();
        let a = decompose("open the cabinet and put the mug inside", &t).unwrap();
        let b = decompose("open the cabinet and put the mug inside", &t).unwrap();
        assert_eq!(a, b);
    }
}
