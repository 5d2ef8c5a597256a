//! Task decomposition into landmark sequences and the subgoal relation tree.
//!
//! A provider (fixture file, hand-written script or a chat-completion
//! endpoint) answers a structured prompt with candidate orderings of the
//! layout's landmarks. The orderings are merged into a tree whose nodes are
//! landmark names, so a landmark shared by several orderings is one node.
//! This happens once, before training.

mod parse;
mod prompt;
mod provider;
mod tree;

use std::path::Path;

pub use parse::{first_array_of_arrays, parse_sequences, parse_sequences_bytes};
pub use prompt::{build_prompt, PromptBundle};
pub use provider::{query_provider, scripted_sequences, write_fixture, HttpProvider, ProviderMode};
pub use tree::{build_tree, NodeId, SubgoalTree, TreeLimits, TreeNode};

use crate::envs::MazeLayout;
use crate::smdp::{StateVec, TaskInstruction};
use crate::Result;

/// The single navigation task of a layout.
pub fn default_task(layout: &MazeLayout) -> TaskInstruction {
    let goal = layout.landmarks[layout.goal_index()].name.clone();
    TaskInstruction {
        task_id: 0,
        text: format!("Drive the robot to the {goal} in the {} maze.", layout.name),
        goal_landmark: goal,
    }
}

/// Prompt the provider for one task and return its raw answer.
pub fn fetch_raw(
    task: &TaskInstruction,
    s0: &StateVec,
    layout: &MazeLayout,
    mode: &ProviderMode,
    k: usize,
    transcripts: Option<&Path>,
) -> Result<String> {
    let prompt = build_prompt(task, s0, layout, k)?;
    query_provider(&prompt, task.task_id, mode, transcripts)
}

/// Prompt, query, parse and merge for one task.
pub fn plan_task(
    task: &TaskInstruction,
    s0: &StateVec,
    layout: &MazeLayout,
    mode: &ProviderMode,
    k: usize,
    limits: TreeLimits,
    transcripts: Option<&Path>,
) -> Result<SubgoalTree> {
    let raw = fetch_raw(task, s0, layout, mode, k, transcripts)?;
    let sequences = parse_sequences(&raw, layout)?;
    build_tree(s0, &sequences, layout, limits)
}
