//! The three-level control loop, its DSC ablation and the flat DDPG
//! baseline.

mod checkpoint;
pub mod features;
mod flat;
mod ldsc;

use serde::{Deserialize, Serialize};

pub use checkpoint::{load_agent, save_agent, save_flat, AgentState, TrainedAgent};
pub use flat::FlatDdpgAgent;
pub use ldsc::{option_value_range, LdscAgent, OptionOutcome};

use crate::ddpg::DdpgConfig;
use crate::dqn::DqnConfig;
use crate::skill_chain::SkillChainConfig;
use crate::smdp::OptionId;
use crate::subgoal::TreeLimits;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Ldsc,
    Dsc,
    Ddpg,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ldsc => "LDSC",
            Method::Dsc => "DSC",
            Method::Ddpg => "DDPG",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub ddpg: DdpgConfig,
    pub dqn: DqnConfig,
    pub skill_chain: SkillChainConfig,
    pub tree_limits: TreeLimits,
    /// Sequences requested from the decomposition provider.
    pub sequences_requested: usize,
    /// Copy the global option's networks into an option at promotion.
    pub warm_start: bool,
    /// Clamp option critic targets to the range an intra-option return can
    /// take. Keeps bootstrapped values from drifting under sparse rewards.
    pub clip_option_targets: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            ddpg: DdpgConfig::default(),
            dqn: DqnConfig::default(),
            skill_chain: SkillChainConfig::default(),
            tree_limits: TreeLimits::default(),
            sequences_requested: 3,
            warm_start: true,
            clip_option_targets: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: usize,
    pub success: bool,
    pub steps: usize,
    pub ret: f64,
    /// Landmark name and the step count at which it was first attained.
    pub subgoal_times: Vec<(String, usize)>,
    /// Executed options and their durations.
    pub options: Vec<(OptionId, usize)>,
    pub options_in_repertoire: usize,
    /// Landmark flags set at the end of the episode.
    pub landmarks_attained: usize,
}
