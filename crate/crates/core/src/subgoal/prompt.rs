use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::envs::MazeLayout;
use crate::smdp::{StateVec, TaskInstruction};
use crate::{Error, Result};

/// The structured prompt sent to a decomposition provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub task_description: String,
    pub state_representation: String,
    pub goal_and_sequencing: String,
    pub in_context_examples: String,
    pub output_schema: String,
    pub sequences_requested: usize,
}

impl PromptBundle {
    pub fn sections(&self) -> [(&'static str, &str); 5] {
        [
            ("Task description", &self.task_description),
            ("State representation", &self.state_representation),
            ("Goal and subgoal sequencing", &self.goal_and_sequencing),
            ("Examples", &self.in_context_examples),
            ("Output format", &self.output_schema),
        ]
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (title, body) in self.sections() {
            let _ = write!(out, "## {title}\n{body}\n\n");
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    }
}

/// Landmarks ordered so that every landmark follows its prerequisites,
/// ties broken by registry order. Unreachable entries (cyclic prerequisites)
/// are left out.
fn dependency_order(layout: &MazeLayout) -> Vec<String> {
    let mut done: BTreeSet<&str> = BTreeSet::new();
    let mut order = Vec::new();
    loop {
        let next = layout.landmarks.iter().find(|l| {
            !done.contains(l.name.as_str()) && l.required_flags.iter().all(|r| done.contains(r.as_str()))
        });
        match next {
            Some(l) => {
                done.insert(&l.name);
                order.push(l.name.clone());
            }
            None => return order,
        }
    }
}

pub fn build_prompt(task: &TaskInstruction, s0: &StateVec, layout: &MazeLayout, k: usize) -> Result<PromptBundle> {
    if layout.landmarks.is_empty() {
        return Err(Error::Config("layout has no landmarks".into()));
    }
    if k == 0 {
        return Err(Error::Config("at least one sequence must be requested".into()));
    }

    let task_description = format!(
        "A point robot moves in a 2D maze called \"{}\". It drives forward and turns; walls block it. \
         Instruction: {}",
        layout.name, task.text
    );

    let mut state = format!(
        "Robot start: x={:.2}, y={:.2}, heading={:.2} rad.\nMap bounds: [{}, {}] x [{}, {}].\nLandmarks:",
        s0.x, s0.y, s0.theta, layout.bounds[0], layout.bounds[2], layout.bounds[1], layout.bounds[3]
    );
    for (i, l) in layout.landmarks.iter().enumerate() {
        let requires = if l.required_flags.is_empty() {
            "none".to_string()
        } else {
            l.required_flags.join(", ")
        };
        let attained = if s0.flag(i) { "yes" } else { "no" };
        let _ = write!(
            state,
            "\n- {}: center ({:.2}, {:.2}), radius {:.2}, requires [{}], attained {}",
            l.name, l.center[0], l.center[1], l.radius, requires, attained
        );
    }

    let goal_and_sequencing = format!(
        "The final goal is \"{}\". A landmark only counts once every landmark it requires has been reached. \
         Propose {k} ordered sequence(s) of landmarks that the robot can visit one after another to reach the \
         final goal. Each sequence must end with \"{}\" and may only use landmark names listed above.",
        task.goal_landmark, task.goal_landmark
    );

    let example = dependency_order(layout);
    let in_context_examples = format!(
        "Instruction: reach \"{last}\".\nAnswer: {json}",
        last = example.last().cloned().unwrap_or_default(),
        json = serde_json::to_string(&vec![example.clone()])?
    );

    let output_schema = format!(
        "Reply with a JSON array containing exactly {k} array(s) of landmark-name strings, for example \
         [[\"a\", \"b\"]]. No other JSON."
    );

    Ok(PromptBundle {
        task_description,
        state_representation: state,
        goal_and_sequencing,
        in_context_examples,
        output_schema,
        sequences_requested: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{builtin_layout, reset};
    use crate::subgoal::default_task;

    fn prompt(name: &str, k: usize) -> PromptBundle {
        let layout = builtin_layout(name).unwrap();
        let s0 = reset(&layout, 0);
        build_prompt(&default_task(&layout), &s0, &layout, k).unwrap()
    }

    #[test]
    fn mentions_every_landmark() {
        let text = prompt("point_maze", 1).render();
        for name in ["key", "remote", "door"] {
            assert!(text.contains(name), "{name}");
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(prompt("tunnel", 2).render(), prompt("tunnel", 2).render());
    }

    #[test]
    fn requests_k_sequences() {
        let p = prompt("e_maze", 3);
        assert!(p.output_schema.contains("exactly 3 array"));
        assert_eq!(p.sequences_requested, 3);
    }

    #[test]
    fn sections_non_empty_and_examples_use_registry() {
        for name in ["four_rooms", "point_maze", "e_maze", "tunnel"] {
            let layout = builtin_layout(name).unwrap();
            let p = prompt(name, 1);
            assert!(p.sections().iter().all(|(_, body)| !body.is_empty()));
            let order = dependency_order(&layout);
            assert_eq!(order.len(), layout.landmarks.len());
            assert!(p.in_context_examples.contains(&serde_json::to_string(&order).unwrap()));
        }
    }

    #[test]
    fn dependency_order_respects_prerequisites() {
        let layout = builtin_layout("point_maze").unwrap();
        assert_eq!(dependency_order(&layout), vec!["key", "remote", "door"]);
    }

    #[test]
    fn rejects_zero_sequences() {
        let layout = builtin_layout("four_rooms").unwrap();
        let s0 = reset(&layout, 0);
        assert!(build_prompt(&default_task(&layout), &s0, &layout, 0).is_err());
    }
}
