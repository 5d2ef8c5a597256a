//! On-disk agent snapshots: network files in the nn JSON format plus
//! manifests tying them to options and policies.
//!
//! ```text
//! <dir>/agent_state.json       method, layout, trees, option tree, ...
//! <dir>/options/manifest.json  option id -> network files
//! <dir>/options/o<id>_<net>.json
//! <dir>/policies/manifest.json candidate names, conditioning, ε, replay size
//! <dir>/policies/<name>_{online,target}.json
//! ```
//!
//! Replays and optimiser moments are not saved; a loaded agent is meant for
//! evaluation or for continuing with fresh buffers.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::flat::FlatDdpgAgent;
use super::ldsc::LdscAgent;
use super::{AgentConfig, EpisodeResult, Method};
use crate::ddpg::DdpgAgent;
use crate::dqn::DiscreteQPolicy;
use crate::envs::{Env, EnvConfig, MazeLayout};
use crate::nn::{load_mlp, save_mlp};
use crate::skill_chain::{GestationBuffer, OptionTree};
use crate::smdp::{OptionId, TaskInstruction};
use crate::subgoal::SubgoalTree;
use crate::{Error, Result};

pub const AGENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentState {
    pub schema_version: u32,
    pub method: Method,
    pub config: AgentConfig,
    pub layout: MazeLayout,
    pub env_config: EnvConfig,
    pub tasks: Vec<TaskInstruction>,
    pub subgoal_trees: BTreeMap<usize, SubgoalTree>,
    pub subgoals: Vec<String>,
    pub option_tree: Option<OptionTree>,
    pub gestation: Option<GestationBuffer>,
    pub repertoire: Vec<OptionId>,
    pub untrained: Vec<OptionId>,
    pub progress: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ControllerFiles {
    actor: String,
    critic: String,
    actor_target: String,
    critic_target: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolicyEntry {
    candidates: Vec<String>,
    conditioning: String,
    epsilon: f64,
    replay_size: usize,
    online: String,
    target: String,
}

/// Either kind of trained agent.
#[derive(Debug, Clone)]
pub enum TrainedAgent {
    Hierarchical(Box<LdscAgent>),
    Flat(Box<FlatDdpgAgent>),
}

impl TrainedAgent {
    pub fn method(&self) -> Method {
        match self {
            TrainedAgent::Hierarchical(a) => a.method,
            TrainedAgent::Flat(_) => Method::Ddpg,
        }
    }

    pub fn layout(&self) -> &MazeLayout {
        match self {
            TrainedAgent::Hierarchical(a) => &a.layout,
            TrainedAgent::Flat(a) => &a.layout,
        }
    }

    pub fn env_config(&self) -> &EnvConfig {
        match self {
            TrainedAgent::Hierarchical(a) => &a.env_config,
            TrainedAgent::Flat(a) => &a.env_config,
        }
    }

    pub fn set_progress(&mut self, t: usize) {
        match self {
            TrainedAgent::Hierarchical(a) => a.set_progress(t),
            TrainedAgent::Flat(a) => a.set_progress(t),
        }
    }

    pub fn run_episode(&mut self, env: &mut Env, task_id: usize, env_seed: u64, learn: bool) -> Result<EpisodeResult> {
        match self {
            TrainedAgent::Hierarchical(a) => a.run_episode(env, task_id, env_seed, learn),
            TrainedAgent::Flat(a) => a.run_episode(env, task_id, env_seed, learn),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        match self {
            TrainedAgent::Hierarchical(a) => save_agent(a, dir),
            TrainedAgent::Flat(a) => save_flat(a, dir),
        }
    }
}

fn save_controller(c: &DdpgAgent, dir: &Path, stem: &str) -> Result<ControllerFiles> {
    let files = ControllerFiles {
        actor: format!("{stem}_actor.json"),
        critic: format!("{stem}_critic.json"),
        actor_target: format!("{stem}_actor_target.json"),
        critic_target: format!("{stem}_critic_target.json"),
    };
    save_mlp(&c.actor, dir.join(&files.actor))?;
    save_mlp(&c.critic, dir.join(&files.critic))?;
    save_mlp(&c.actor_target, dir.join(&files.actor_target))?;
    save_mlp(&c.critic_target, dir.join(&files.critic_target))?;
    Ok(files)
}

fn load_controller(files: &ControllerFiles, dir: &Path, config: &AgentConfig, seed: u64) -> Result<DdpgAgent> {
    DdpgAgent::from_networks(
        load_mlp(dir.join(&files.actor))?,
        load_mlp(dir.join(&files.critic))?,
        load_mlp(dir.join(&files.actor_target))?,
        load_mlp(dir.join(&files.critic_target))?,
        config.ddpg.clone(),
        seed,
    )
}

fn save_policy(p: &DiscreteQPolicy, dir: &Path, stem: &str, candidates: Vec<String>, conditioning: &str) -> Result<PolicyEntry> {
    let entry = PolicyEntry {
        candidates,
        conditioning: conditioning.into(),
        epsilon: p.epsilon(),
        replay_size: p.replay_len(),
        online: format!("{stem}_online.json"),
        target: format!("{stem}_target.json"),
    };
    save_mlp(&p.online, dir.join(&entry.online))?;
    save_mlp(&p.target, dir.join(&entry.target))?;
    Ok(entry)
}

fn load_policy(entry: &PolicyEntry, dir: &Path, config: &AgentConfig, progress: usize, seed: u64) -> Result<DiscreteQPolicy> {
    DiscreteQPolicy::from_networks(
        load_mlp(dir.join(&entry.online))?,
        load_mlp(dir.join(&entry.target))?,
        config.dqn.clone(),
        progress,
        seed,
    )
}

fn head_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|h| match h {
            0 => "global".to_string(),
            1 => "goal".to_string(),
            d => format!("chain_{}", d - 1),
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn save_agent(agent: &LdscAgent, dir: &Path) -> Result<()> {
    let options_dir = dir.join("options");
    let policies_dir = dir.join("policies");
    fs::create_dir_all(&options_dir)?;
    fs::create_dir_all(&policies_dir)?;

    let mut option_files = BTreeMap::new();
    for (id, c) in &agent.controllers {
        option_files.insert(id.to_string(), save_controller(c, &options_dir, &id.to_string())?);
    }
    write_json(&options_dir.join("manifest.json"), &option_files)?;

    let mut policies = BTreeMap::new();
    policies.insert(
        "subgoal".to_string(),
        save_policy(&agent.subgoal_policy, &policies_dir, "subgoal", agent.subgoals.clone(), "state+task_one_hot")?,
    );
    for (i, (name, p)) in agent.option_policies.iter().enumerate() {
        let entry = save_policy(p, &policies_dir, &format!("option_{i}"), head_names(p.candidate_count()), "state")?;
        policies.insert(format!("option:{name}"), entry);
    }
    write_json(&policies_dir.join("manifest.json"), &policies)?;

    let state = AgentState {
        schema_version: AGENT_SCHEMA_VERSION,
        method: agent.method,
        config: agent.config.clone(),
        layout: agent.layout.clone(),
        env_config: agent.env_config.clone(),
        tasks: agent.tasks.clone(),
        subgoal_trees: agent.subgoal_trees.clone(),
        subgoals: agent.subgoals.clone(),
        option_tree: Some(agent.option_tree.clone()),
        gestation: Some(agent.gestation.clone()),
        repertoire: agent.repertoire.clone(),
        untrained: agent.untrained.clone(),
        progress: agent.progress(),
    };
    write_json(&dir.join("agent_state.json"), &state)
}

pub fn save_flat(agent: &FlatDdpgAgent, dir: &Path) -> Result<()> {
    let options_dir = dir.join("options");
    fs::create_dir_all(&options_dir)?;
    let files = save_controller(&agent.ddpg, &options_dir, "flat")?;
    write_json(&options_dir.join("manifest.json"), &BTreeMap::from([("flat".to_string(), files)]))?;
    let state = AgentState {
        schema_version: AGENT_SCHEMA_VERSION,
        method: Method::Ddpg,
        config: AgentConfig { ddpg: agent.ddpg.config.clone(), ..AgentConfig::default() },
        layout: agent.layout.clone(),
        env_config: agent.env_config.clone(),
        tasks: Vec::new(),
        subgoal_trees: BTreeMap::new(),
        subgoals: Vec::new(),
        option_tree: None,
        gestation: None,
        repertoire: Vec::new(),
        untrained: Vec::new(),
        progress: 0,
    };
    write_json(&dir.join("agent_state.json"), &state)
}

/// Loads either agent kind from a checkpoint directory.
pub fn load_agent(dir: &Path, seed: u64) -> Result<TrainedAgent> {
    let state: AgentState = read_json(&dir.join("agent_state.json"))?;
    if state.schema_version != AGENT_SCHEMA_VERSION {
        return Err(Error::Config(format!("unsupported agent schema {}", state.schema_version)));
    }
    let options_dir = dir.join("options");
    let option_files: BTreeMap<String, ControllerFiles> = read_json(&options_dir.join("manifest.json"))?;

    if state.method == Method::Ddpg {
        let files = option_files.get("flat").ok_or_else(|| Error::Config("missing flat controller".into()))?;
        let ddpg = load_controller(files, &options_dir, &state.config, seed)?;
        return Ok(TrainedAgent::Flat(Box::new(FlatDdpgAgent {
            ddpg,
            layout: state.layout,
            env_config: state.env_config,
        })));
    }

    let mut agent = LdscAgent::from_trees(
        state.method,
        &state.tasks,
        state.subgoal_trees.clone(),
        &state.layout,
        &state.env_config,
        &state.config,
        seed,
    )?;
    agent.option_tree = state.option_tree.ok_or_else(|| Error::Config("missing option tree".into()))?;
    agent.gestation = state.gestation.unwrap_or_default();
    agent.repertoire = state.repertoire;
    agent.untrained = state.untrained;
    agent.subgoals = state.subgoals;

    agent.controllers.clear();
    for (i, (key, files)) in option_files.iter().enumerate() {
        let id: usize = key
            .strip_prefix('o')
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::Config(format!("bad option key {key}")))?;
        let c = load_controller(files, &options_dir, &state.config, seed.wrapping_add(i as u64))?;
        agent.controllers.insert(OptionId(id), c);
    }

    let policies_dir = dir.join("policies");
    let policies: BTreeMap<String, PolicyEntry> = read_json(&policies_dir.join("manifest.json"))?;
    let subgoal = policies.get("subgoal").ok_or_else(|| Error::Config("missing subgoal policy".into()))?;
    agent.subgoal_policy = load_policy(subgoal, &policies_dir, &state.config, state.progress, seed)?;
    for (name, p) in agent.option_policies.iter_mut() {
        let entry = policies
            .get(&format!("option:{name}"))
            .ok_or_else(|| Error::Config(format!("missing option policy for {name}")))?;
        *p = load_policy(entry, &policies_dir, &state.config, state.progress, seed)?;
    }
    agent.restore_rng(seed);
    agent.set_progress(state.progress);
    Ok(TrainedAgent::Hierarchical(Box::new(agent)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::builtin_layout;
    use crate::subgoal::{default_task, ProviderMode};

    #[test]
    fn hierarchical_round_trip_preserves_greedy_behaviour() {
        let layout = builtin_layout("mini_four_rooms").unwrap();
        let env_cfg = EnvConfig { max_episode_steps: 30, ..Default::default() };
        let mut config = AgentConfig::default();
        config.ddpg.hidden = vec![8, 8];
        config.ddpg.batch_size = 4;
        config.dqn.batch_size = 4;
        let mut agent = LdscAgent::bootstrap(
            Method::Ldsc,
            &[default_task(&layout)],
            &layout,
            &env_cfg,
            &ProviderMode::Scripted { env: "mini_four_rooms".into() },
            &config,
            3,
            None,
        )
        .unwrap();
        let mut env = Env::new(layout.clone(), env_cfg.clone()).unwrap();
        agent.run_episode(&mut env, 0, 0, true).unwrap();

        let dir = tempfile::tempdir().unwrap();
        save_agent(&agent, dir.path()).unwrap();
        let mut loaded = load_agent(dir.path(), 3).unwrap();
        assert_eq!(loaded.method(), Method::Ldsc);
        let a = agent.run_episode(&mut env, 0, 1, false).unwrap();
        let b = loaded.run_episode(&mut env, 0, 1, false).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flat_round_trip() {
        let layout = builtin_layout("mini_four_rooms").unwrap();
        let env_cfg = EnvConfig { max_episode_steps: 10, ..Default::default() };
        let mut cfg = crate::ddpg::DdpgConfig::default();
        cfg.hidden = vec![8];
        let agent = FlatDdpgAgent::new(&layout, &env_cfg, &cfg, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_flat(&agent, dir.path()).unwrap();
        match load_agent(dir.path(), 0).unwrap() {
            TrainedAgent::Flat(f) => assert_eq!(f.ddpg.actor, agent.ddpg.actor),
            _ => panic!("expected flat agent"),
        }
    }
}
