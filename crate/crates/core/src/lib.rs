//! LLM-guided hierarchical reinforcement learning with deep skill chaining.
//!
//! Three decision levels cooperate on every task:
//!
//! - a subgoal policy chooses the next landmark from a subgoal relation tree
//!   built once, before training, from language-model decompositions;
//! - a per-subgoal option policy chooses among the options currently able to
//!   start from the robot's state;
//! - each option runs its own DDPG actor for up to its time budget.
//!
//! Options are discovered by skill chaining: a goal option gestates on
//! successful trajectories into its subgoal, then spawns children that
//! terminate in their parent's initiation set.
//!
//! The crate also ships four point-mass maze environments and an experiment
//! harness (configs, metrics CSVs, summaries, plots).

pub mod agent;
pub mod ddpg;
pub mod dqn;
pub mod envs;
pub mod error;
pub mod harness;
pub mod nn;
pub mod replay;
pub mod schedule;
pub mod skill_chain;
pub mod smdp;
pub mod subgoal;

pub use error::{Error, Result};
