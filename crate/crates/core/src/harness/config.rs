use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{AgentConfig, Method};
use crate::envs::{base_name, builtin_layout, load_layout, EnvConfig, MazeLayout};
use crate::schedule::LinearSchedule;
use crate::smdp::TaskInstruction;
use crate::subgoal::{default_task, ProviderMode};
use crate::{Error, Result};

/// One experiment: an environment, a method and a list of seeds.
///
/// Every field has a default, so a minimal file names only `env` and
/// `method`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Builtin layout name. Ignored when `layout_path` is set.
    pub env: String,
    pub layout_path: Option<PathBuf>,
    pub method: Method,
    /// Defaults to the scripted decompositions of `env`.
    pub provider: Option<ProviderMode>,
    /// Defaults to the layout's single navigation task.
    pub tasks: Option<Vec<TaskInstruction>>,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    /// Fraction of `episodes` over which ε and σ decay. Zero keeps the
    /// schedules given in `agent`.
    pub explore_decay_fraction: f64,
    pub env_config: EnvConfig,
    pub agent: AgentConfig,
    pub output_dir: PathBuf,
    /// Checkpoint every this many episodes; zero saves only the final one.
    pub checkpoint_interval: usize,
    /// Final-window length used by summaries.
    pub window: usize,
    /// Seeds trained concurrently.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: "four_rooms".into(),
            layout_path: None,
            method: Method::Ldsc,
            provider: None,
            tasks: None,
            seeds: vec![0],
            episodes: 300,
            explore_decay_fraction: 0.2,
            env_config: EnvConfig::default(),
            agent: AgentConfig::default(),
            output_dir: PathBuf::from("runs/default"),
            checkpoint_interval: 0,
            window: 20,
            workers: 1,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn schedule(name: &str, s: &LinearSchedule) -> Result<()> {
    if s.start < 0.0 || s.end < 0.0 || !s.start.is_finite() || !s.end.is_finite() {
        return Err(Error::Config(format!("{name} must be non-negative")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            Self::from_toml(&text)?
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        nonzero("episodes", self.episodes)?;
        nonzero("window", self.window)?;
        if !(0.0..=1.0).contains(&self.explore_decay_fraction) {
            return Err(Error::Config("explore_decay_fraction must lie in [0, 1]".into()));
        }
        self.env_config.validate()?;
        positive("env_config.max_speed", self.env_config.max_speed)?;
        positive("env_config.max_turn", self.env_config.max_turn)?;

        let a = &self.agent;
        let d = &a.ddpg;
        positive("ddpg.actor_lr", d.actor_lr)?;
        positive("ddpg.critic_lr", d.critic_lr)?;
        positive("ddpg.gamma", d.gamma)?;
        positive("ddpg.tau", d.tau)?;
        nonzero("ddpg.batch_size", d.batch_size)?;
        nonzero("ddpg.replay_capacity", d.replay_capacity)?;
        schedule("ddpg.noise_sigma", &d.noise_sigma)?;
        let q = &a.dqn;
        positive("dqn.lr", q.lr)?;
        positive("dqn.gamma", q.gamma)?;
        positive("dqn.tau", q.tau)?;
        nonzero("dqn.batch_size", q.batch_size)?;
        nonzero("dqn.replay_capacity", q.replay_capacity)?;
        schedule("dqn.epsilon", &q.epsilon)?;
        if d.gamma > 1.0 || q.gamma > 1.0 {
            return Err(Error::Config("discount factors must not exceed 1".into()));
        }
        let c = &a.skill_chain;
        nonzero("skill_chain.global_budget", c.global_budget)?;
        nonzero("skill_chain.option_budget", c.option_budget)?;
        nonzero("skill_chain.gestation_threshold", c.gestation_threshold)?;
        nonzero("skill_chain.suffix_len", c.suffix_len)?;
        if !(c.margin >= 0.0) {
            return Err(Error::Config("skill_chain.margin must be non-negative".into()));
        }
        nonzero("tree_limits.depth_limit", a.tree_limits.depth_limit)?;
        nonzero("tree_limits.branch_limit", a.tree_limits.branch_limit)?;
        nonzero("sequences_requested", a.sequences_requested)?;
        if let Some(tasks) = &self.tasks {
            if tasks.is_empty() {
                return Err(Error::Config("tasks must not be empty when given".into()));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<MazeLayout> {
        match &self.layout_path {
            Some(p) => load_layout(p),
            None => builtin_layout(&self.env),
        }
    }

    /// Name used in summaries: the layout's own name when loaded from a file.
    pub fn env_name(&self) -> Result<String> {
        Ok(match &self.layout_path {
            Some(_) => self.layout()?.name,
            None => self.env.clone(),
        })
    }

    pub fn provider_mode(&self) -> ProviderMode {
        self.provider
            .clone()
            .unwrap_or_else(|| ProviderMode::Scripted { env: base_name(&self.env).to_string() })
    }

    pub fn task_list(&self, layout: &MazeLayout) -> Vec<TaskInstruction> {
        self.tasks.clone().unwrap_or_else(|| vec![default_task(layout)])
    }

    /// Agent hyperparameters with the exploration schedules stretched over
    /// `explore_decay_fraction` of the run.
    pub fn effective_agent(&self) -> AgentConfig {
        let mut a = self.agent.clone();
        if self.explore_decay_fraction > 0.0 {
            let steps = ((self.explore_decay_fraction * self.episodes as f64).round() as usize).max(1);
            a.ddpg.noise_sigma.decay_steps = steps;
            a.dqn.epsilon.decay_steps = steps;
        }
        a
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Environment seed of one episode.
pub fn episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_mul(100_000).wrapping_add(episode as u64)
}

/// Desk-scale configurations used by the acceptance runs and shipped as
/// files under `configs/`.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (env, method) = match name {
        "mini_four_rooms_ldsc" => ("mini_four_rooms", Method::Ldsc),
        "mini_four_rooms_ddpg" => ("mini_four_rooms", Method::Ddpg),
        "mini_point_maze_ldsc" => ("mini_point_maze", Method::Ldsc),
        "mini_point_maze_dsc" => ("mini_point_maze", Method::Dsc),
        _ => return Err(Error::Config(format!("unknown preset '{name}'"))),
    };
    let mut cfg = ExperimentConfig {
        env: env.into(),
        method,
        seeds: (0..5).collect(),
        episodes: 300,
        output_dir: PathBuf::from("runs").join(name),
        ..Default::default()
    };
    cfg.env_config.max_speed = 0.5;
    cfg.env_config.max_episode_steps = if env == "mini_four_rooms" { 150 } else { 300 };
    cfg.agent.ddpg.hidden = vec![32, 32];
    cfg.agent.clip_option_targets = true;
    Ok(cfg)
}

pub const PRESETS: [&str; 4] = [
    "mini_four_rooms_ldsc",
    "mini_four_rooms_ddpg",
    "mini_point_maze_ldsc",
    "mini_point_maze_dsc",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml("env = \"e_maze\"\nmethod = \"DSC\"\n").unwrap();
        assert_eq!(cfg.env, "e_maze");
        assert_eq!(cfg.method, Method::Dsc);
        assert_eq!(cfg.agent, AgentConfig::default());
        assert_eq!(cfg.agent.ddpg.hidden, vec![400, 300]);
        assert_eq!(cfg.window, 20);
        assert_eq!(cfg.provider_mode(), ProviderMode::Scripted { env: "e_maze".into() });
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_tables_fill_in() {
        let cfg = ExperimentConfig::from_toml("[agent.ddpg]\nhidden = [8]\n[agent.skill_chain]\nmargin = 1.5\n").unwrap();
        assert_eq!(cfg.agent.ddpg.hidden, vec![8]);
        assert_eq!(cfg.agent.ddpg.actor_lr, 1e-4);
        assert_eq!(cfg.agent.skill_chain.margin, 1.5);
        assert_eq!(cfg.agent.skill_chain.gestation_threshold, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml("envv = \"x\"\n").is_err());
    }

    #[test]
    fn validation() {
        let bad = |f: fn(&mut ExperimentConfig)| {
            let mut c = ExperimentConfig::default();
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.seeds.clear()));
        assert!(bad(|c| c.episodes = 0));
        assert!(bad(|c| c.window = 0));
        assert!(bad(|c| c.agent.ddpg.actor_lr = 0.0));
        assert!(bad(|c| c.agent.dqn.gamma = 1.5));
        assert!(bad(|c| c.agent.skill_chain.gestation_threshold = 0));
        assert!(bad(|c| c.explore_decay_fraction = 2.0));
        assert!(bad(|c| c.tasks = Some(vec![])));
        assert!(!bad(|_| ()));
    }

    #[test]
    fn decay_fraction_sets_schedules() {
        let cfg = ExperimentConfig { episodes: 300, ..Default::default() };
        let a = cfg.effective_agent();
        assert_eq!(a.ddpg.noise_sigma.decay_steps, 60);
        assert_eq!(a.dqn.epsilon.decay_steps, 60);
        let off = ExperimentConfig { explore_decay_fraction: 0.0, ..cfg };
        assert_eq!(off.effective_agent(), off.agent);
    }

    #[test]
    fn presets_round_trip_and_validate() {
        for name in PRESETS {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            let back = ExperimentConfig::from_toml(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.to_toml().unwrap(), text);
            assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn episode_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> =
            (0..3).flat_map(|s| (0..1000).map(move |e| episode_seed(s, e))).collect();
        assert_eq!(seeds.len(), 3000);
    }
}
