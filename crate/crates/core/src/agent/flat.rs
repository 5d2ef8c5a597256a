use super::features::{state_dim, state_features};
use super::EpisodeResult;
use crate::ddpg::{DdpgAgent, DdpgConfig, Transition};
use crate::envs::{Env, EnvConfig, MazeLayout};
use crate::Result;

/// One DDPG agent on the raw environment reward: no options, no subgoals.
#[derive(Debug, Clone)]
pub struct FlatDdpgAgent {
    pub ddpg: DdpgAgent,
    pub layout: MazeLayout,
    pub env_config: EnvConfig,
}

impl FlatDdpgAgent {
    pub fn new(layout: &MazeLayout, env_config: &EnvConfig, config: &DdpgConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            ddpg: DdpgAgent::new(state_dim(layout), 2, env_config.action_bound, config.clone(), seed)?,
            layout: layout.clone(),
            env_config: env_config.clone(),
        })
    }

    pub fn set_progress(&mut self, t: usize) {
        self.ddpg.set_progress(t);
    }

    pub fn run_episode(&mut self, env: &mut Env, task_id: usize, env_seed: u64, learn: bool) -> Result<EpisodeResult> {
        let mut s = env.reset(env_seed);
        let mut result = EpisodeResult {
            task_id,
            success: false,
            steps: 0,
            ret: 0.0,
            subgoal_times: Vec::new(),
            options: Vec::new(),
            options_in_repertoire: 0,
            landmarks_attained: 0,
        };
        let names = self.layout.landmark_names();
        let mut feats = state_features(&s, &self.layout, &self.env_config);
        while !env.is_done() {
            let action = self.ddpg.act(&feats, learn)?;
            let step = env.step(&action)?;
            let next = state_features(&step.state, &self.layout, &self.env_config);
            if learn {
                self.ddpg.push(Transition {
                    s: feats,
                    a: action,
                    r: step.reward,
                    s_next: next.clone(),
                    // Running out of time is not a terminal state.
                    done: step.goal_reached,
                })?;
                self.ddpg.train_from_replay()?;
            }
            for (i, n) in names.iter().enumerate() {
                if step.state.flag(i) && !s.flag(i) {
                    result.subgoal_times.push((n.clone(), env.steps()));
                }
            }
            result.ret += step.reward;
            result.success |= step.goal_reached;
            feats = next;
            s = step.state;
        }
        result.steps = env.steps();
        result.landmarks_attained = s.flag_count();
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::builtin_layout;

    #[test]
    fn uses_table_sizes_and_no_options() {
        let layout = builtin_layout("four_rooms").unwrap();
        let cfg = EnvConfig { max_episode_steps: 20, ..Default::default() };
        let mut a = FlatDdpgAgent::new(&layout, &cfg, &DdpgConfig::default(), 0).unwrap();
        assert_eq!(a.ddpg.actor.architecture(), vec![state_dim(&layout), 400, 300, 2]);
        let mut env = Env::new(layout, cfg).unwrap();
        let r = a.run_episode(&mut env, 0, 0, true).unwrap();
        assert!(r.options.is_empty());
        assert_eq!(r.options_in_repertoire, 0);
        assert_eq!(r.steps, 20);
    }
}
