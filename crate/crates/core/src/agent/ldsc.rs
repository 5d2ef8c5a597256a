use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::{conditioned, option_dim, option_features, state_dim, state_features};
use super::{AgentConfig, EpisodeResult, Method};
use crate::ddpg::{intra_option_reward, DdpgAgent, Transition};
use crate::dqn::{DiscreteQPolicy, SmdpExperience};
use crate::envs::{Env, EnvConfig, MazeLayout};
use crate::skill_chain::{learn_initiation_classifier, should_chain, ClassifierMode, GestationBuffer, OptionTree};
use crate::smdp::{available_options, OptionDef, OptionId, OptionKind, StateVec, TaskInstruction};
use crate::subgoal::{build_tree, plan_task, NodeId, ProviderMode, SubgoalTree};
use crate::{Error, Result};

/// What one option execution produced.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionOutcome {
    /// Environment rewards, one per step.
    pub rewards: Vec<f64>,
    /// Visited states including the one the option started from.
    pub states: Vec<StateVec>,
    pub local_done: bool,
    pub env_done: bool,
    pub goal_reached: bool,
}

/// LDSC agent; with a goal-only subgoal tree it is the DSC baseline.
#[derive(Debug, Clone)]
pub struct LdscAgent {
    pub method: Method,
    pub config: AgentConfig,
    pub layout: MazeLayout,
    pub env_config: EnvConfig,
    pub tasks: Vec<TaskInstruction>,
    pub subgoal_trees: BTreeMap<usize, SubgoalTree>,
    /// Every subgoal across all trees, in order of first appearance. The
    /// subgoal policy has one head per entry.
    pub subgoals: Vec<String>,
    pub subgoal_policy: DiscreteQPolicy,
    pub option_policies: BTreeMap<String, DiscreteQPolicy>,
    pub option_tree: OptionTree,
    pub controllers: BTreeMap<OptionId, DdpgAgent>,
    pub gestation: GestationBuffer,
    /// Selectable options: globals plus promoted ones, in promotion order.
    pub repertoire: Vec<OptionId>,
    pub untrained: Vec<OptionId>,
    rng: ChaCha8Rng,
    progress: usize,
}

/// Option-policy head of an option: global 0, goal 1, chain `1 + depth`.
pub fn option_head(def: &OptionDef) -> usize {
    match def.kind {
        OptionKind::Global => 0,
        OptionKind::Goal | OptionKind::Chain => 1 + def.depth,
    }
}

impl LdscAgent {
    /// Decomposes every task, merges the trees' subgoals and creates a
    /// global and an untrained goal option for each new subgoal.
    #[allow(clippy::too_many_arguments)]
    pub fn bootstrap(
        method: Method,
        tasks: &[TaskInstruction],
        layout: &MazeLayout,
        env_config: &EnvConfig,
        provider: &ProviderMode,
        config: &AgentConfig,
        seed: u64,
        transcripts: Option<&Path>,
    ) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Config("no tasks to bootstrap".into()));
        }
        let mut trees = BTreeMap::new();
        for task in tasks {
            let s0 = crate::envs::reset(layout, seed);
            let tree = match method {
                Method::Ldsc => plan_task(
                    task,
                    &s0,
                    layout,
                    provider,
                    config.sequences_requested,
                    config.tree_limits,
                    transcripts,
                )?,
                Method::Dsc => build_tree(&s0, &[vec![task.goal_landmark.clone()]], layout, config.tree_limits)?,
                Method::Ddpg => return Err(Error::Config("DDPG has no hierarchy".into())),
            };
            trees.insert(task.task_id, tree);
        }
        Self::from_trees(method, tasks, trees, layout, env_config, config, seed)
    }

    pub fn from_trees(
        method: Method,
        tasks: &[TaskInstruction],
        trees: BTreeMap<usize, SubgoalTree>,
        layout: &MazeLayout,
        env_config: &EnvConfig,
        config: &AgentConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut subgoals: Vec<String> = Vec::new();
        for tree in trees.values() {
            for name in tree.subgoal_names() {
                if !subgoals.contains(&name) {
                    subgoals.push(name);
                }
            }
        }
        let heads = 2 + config.skill_chain.max_chain_depth;
        let mut option_tree = OptionTree::new();
        let mut option_policies = BTreeMap::new();
        let mut controllers = BTreeMap::new();
        let mut repertoire = Vec::new();
        let mut untrained = Vec::new();
        for name in &subgoals {
            let region = layout.region(name)?;
            let global = option_tree.create_global_option(&region, &config.skill_chain)?;
            let goal = option_tree.create_goal_option(&region, &config.skill_chain)?;
            for id in [global, goal] {
                controllers.insert(id, new_controller(layout, env_config, config, &mut rng)?);
            }
            repertoire.push(global);
            untrained.push(goal);
            option_policies.insert(
                name.clone(),
                DiscreteQPolicy::new(state_dim(layout), heads, config.dqn.clone(), rng.random())?,
            );
        }
        let subgoal_policy = DiscreteQPolicy::new(
            state_dim(layout) + tasks.len(),
            subgoals.len().max(1),
            config.dqn.clone(),
            rng.random(),
        )?;
        Ok(Self {
            method,
            config: config.clone(),
            layout: layout.clone(),
            env_config: env_config.clone(),
            tasks: tasks.to_vec(),
            subgoal_trees: trees,
            subgoals,
            subgoal_policy,
            option_policies,
            option_tree,
            controllers,
            gestation: GestationBuffer::new(),
            repertoire,
            untrained,
            rng,
            progress: 0,
        })
    }

    pub(crate) fn restore_rng(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Moves every exploration schedule to episode `t`.
    pub fn set_progress(&mut self, t: usize) {
        self.progress = t;
        self.subgoal_policy.set_progress(t);
        for p in self.option_policies.values_mut() {
            p.set_progress(t);
        }
        for c in self.controllers.values_mut() {
            c.set_progress(t);
        }
    }

    pub fn progress(&self) -> usize {
        self.progress
    }

    fn subgoal_index(&self, name: &str) -> Result<usize> {
        self.subgoals
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownLandmark(name.to_string()))
    }

    fn task_slot(&self, task_id: usize) -> Result<usize> {
        self.tasks
            .iter()
            .position(|t| t.task_id == task_id)
            .ok_or_else(|| Error::Config(format!("unknown task {task_id}")))
    }

    fn tree(&self, task_id: usize) -> Result<&SubgoalTree> {
        self.subgoal_trees
            .get(&task_id)
            .ok_or_else(|| Error::Config(format!("no subgoal tree for task {task_id}")))
    }

    /// Subgoal-policy heads admissible at `node`, falling back to the goal
    /// when the tree offers nothing.
    pub fn subgoal_candidates(&self, task_id: usize, node: NodeId, attained: &BTreeSet<String>) -> Result<Vec<usize>> {
        let tree = self.tree(task_id)?;
        let mut out: Vec<usize> = tree
            .next_subgoal_candidates(attained, node)
            .into_iter()
            .map(|s| self.subgoal_index(&s.name))
            .collect::<Result<_>>()?;
        if out.is_empty() {
            out.push(self.subgoal_index(&tree.goal)?);
        }
        Ok(out)
    }

    fn subgoal_context(&self, s: &StateVec, task_id: usize) -> Result<Vec<f64>> {
        let slot = self.task_slot(task_id)?;
        Ok(conditioned(s, &self.layout, &self.env_config, slot, self.tasks.len()))
    }

    pub fn repertoire_defs(&self) -> Vec<&OptionDef> {
        self.repertoire.iter().filter_map(|&id| self.option_tree.get(id).ok()).collect()
    }

    /// Repertoire options of `subgoal` that may start at `s`, keyed by head.
    pub fn available_heads(&self, subgoal: &str, s: &StateVec) -> Result<Vec<(usize, OptionId)>> {
        let chain: Vec<OptionDef> = self
            .repertoire
            .iter()
            .filter_map(|&id| self.option_tree.get(id).ok())
            .filter(|o| o.subgoal_name() == subgoal)
            .cloned()
            .collect();
        Ok(available_options(&chain, s)?.into_iter().map(|o| (option_head(o), o.id)).collect())
    }

    /// Runs `id`'s controller until its termination set, its budget or the
    /// end of the episode. With `learn`, each step feeds the option's own
    /// replay (pseudo-reward) and trains it.
    pub fn execute_option(&mut self, env: &mut Env, id: OptionId, learn: bool) -> Result<OptionOutcome> {
        let def = self.option_tree.get(id)?.clone();
        if !def.is_available(env.state()) {
            return Err(Error::InitiationViolated(id.0));
        }
        let controller = self
            .controllers
            .get_mut(&id)
            .ok_or_else(|| Error::Internal(format!("option {id} has no controller")))?;
        let target = def.target();
        let mut out = OptionOutcome {
            rewards: Vec::new(),
            states: vec![env.state().clone()],
            local_done: false,
            env_done: false,
            goal_reached: false,
        };
        let mut feats = option_features(env.state(), target, &self.layout, &self.env_config);
        for _ in 0..def.budget {
            let action = controller.act(&feats, learn)?;
            let prev = env.state().clone();
            let step = env.step(&action)?;
            let (r_int, local_done) = intra_option_reward(&prev, &step.state, &def, self.layout.step_penalty);
            let next_feats = option_features(&step.state, target, &self.layout, &self.env_config);
            if learn {
                controller.push(Transition {
                    s: feats,
                    a: action,
                    r: r_int,
                    s_next: next_feats.clone(),
                    done: local_done,
                })?;
                controller.train_from_replay()?;
            }
            feats = next_feats;
            out.rewards.push(step.reward);
            out.states.push(step.state);
            out.local_done = local_done;
            out.env_done = step.done;
            out.goal_reached |= step.goal_reached;
            if local_done || step.done {
                break;
            }
        }
        Ok(out)
    }

    /// Credits untrained options whose termination set the segment has just
    /// reached, promotes those that finish gestation and chains a child
    /// behind each promoted option. Returns the promoted ids.
    pub fn maybe_discover(
        &mut self,
        segment_start: &StateVec,
        trajectory: &[StateVec],
        credited: &mut BTreeSet<OptionId>,
    ) -> Result<Vec<OptionId>> {
        let Some(last) = trajectory.last() else {
            return Ok(Vec::new());
        };
        let cfg = self.config.skill_chain.clone();
        let mut promoted = Vec::new();
        for id in self.untrained.clone() {
            if credited.contains(&id) {
                continue;
            }
            let def = self.option_tree.get(id)?.clone();
            if !def.terminates(last) {
                continue;
            }
            // Trajectories starting where the chain already initiates teach
            // nothing new.
            let covered = self.repertoire_defs().iter().any(|o| {
                o.subgoal_name() == def.subgoal_name()
                    && o.initiation.mode == ClassifierMode::Box
                    && o.initiation.contains(segment_start)
            });
            if covered {
                continue;
            }
            credited.insert(id);
            self.gestation.record_success(&def, trajectory, cfg.suffix_len)?;
            let classifier = learn_initiation_classifier(
                &def.initiation,
                self.gestation.positives(id),
                self.gestation.positive_count(id),
                cfg.gestation_threshold,
            );
            let trained = classifier.trained;
            self.option_tree.get_mut(id)?.initiation = classifier;
            if !trained {
                continue;
            }
            self.untrained.retain(|&u| u != id);
            self.repertoire.push(id);
            promoted.push(id);
            if self.config.warm_start {
                if let Some(global) = self.option_tree.global_for(def.subgoal_name()) {
                    let seed = self.rng.random();
                    let fork = self.controllers[&global].fork(seed);
                    self.controllers.insert(id, fork);
                }
            }
            let def = self.option_tree.get(id)?.clone();
            let chain_ok = should_chain(&def, last, segment_start, &self.repertoire_defs());
            if chain_ok && def.depth < cfg.max_chain_depth {
                let child = self.option_tree.create_child_option(id, &cfg)?;
                let controller = new_controller(&self.layout, &self.env_config, &self.config, &mut self.rng)?;
                self.controllers.insert(child, controller);
                self.untrained.push(child);
            }
        }
        Ok(promoted)
    }

    /// One episode of the control loop. With `learn = false` exploration,
    /// replay, training and discovery are all off.
    pub fn run_episode(&mut self, env: &mut Env, task_id: usize, env_seed: u64, learn: bool) -> Result<EpisodeResult> {
        let s0 = env.reset(env_seed);
        let tree = self.tree(task_id)?.clone();
        let names = self.layout.landmark_names();
        let flags_of = |s: &StateVec| -> BTreeSet<String> {
            names.iter().enumerate().filter(|(i, _)| s.flag(*i)).map(|(_, n)| n.clone()).collect()
        };
        let mut attained = flags_of(&s0);
        let mut node = tree.advance(tree.root, &attained);
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

        'episode: while !env.is_done() {
            let segment_start = env.state().clone();
            let candidates = self.subgoal_candidates(task_id, node, &attained)?;
            let context = self.subgoal_context(&segment_start, task_id)?;
            let choice = self.subgoal_policy.select(&context, &candidates, learn)?;
            let goal = self.subgoals[choice].clone();
            // Buffer B: rewards and states since the segment began.
            let mut rewards: Vec<f64> = Vec::new();
            let mut states: Vec<StateVec> = vec![segment_start.clone()];
            let mut credited = BTreeSet::new();

            while !env.is_done() {
                let s = env.state().clone();
                let heads = self.available_heads(&goal, &s)?;
                let head_ids: Vec<usize> = heads.iter().map(|h| h.0).collect();
                let option_ctx = state_features(&s, &self.layout, &self.env_config);
                let policy = self.option_policies.get_mut(&goal).expect("policy per subgoal");
                let head = policy.select(&option_ctx, &head_ids, learn)?;
                let id = heads.iter().find(|h| h.0 == head).expect("selected head is available").1;

                let out = self.execute_option(env, id, learn)?;
                result.options.push((id, out.rewards.len()));
                result.ret += out.rewards.iter().sum::<f64>();
                result.success |= out.goal_reached;
                rewards.extend(&out.rewards);
                states.extend(out.states.iter().skip(1).cloned());
                let s_next = env.state().clone();

                let now = flags_of(&s_next);
                let newly: Vec<String> = now.difference(&attained).cloned().collect();
                for n in &newly {
                    result.subgoal_times.push((n.clone(), env.steps()));
                }
                attained = now;
                let hit = if newly.contains(&goal) {
                    Some(goal.clone())
                } else {
                    newly.iter().find(|n| candidates.iter().any(|&c| &self.subgoals[c] == *n)).cloned()
                };

                if learn {
                    let terminal = hit.as_deref() == Some(goal.as_str()) || out.goal_reached;
                    let next_candidates = if terminal {
                        Vec::new()
                    } else {
                        self.available_heads(&goal, &s_next)?.into_iter().map(|h| h.0).collect()
                    };
                    let policy = self.option_policies.get_mut(&goal).expect("policy per subgoal");
                    policy.push(SmdpExperience {
                        context: option_ctx,
                        choice: head,
                        rewards: out.rewards.clone(),
                        next_context: state_features(&s_next, &self.layout, &self.env_config),
                        next_candidates,
                        terminal,
                    })?;
                    policy.train_from_replay()?;
                    self.maybe_discover(&segment_start, &states, &mut credited)?;
                }

                if let Some(h) = hit {
                    node = tree.advance(tree.node(&h).unwrap_or(node), &attained);
                    if learn {
                        let terminal = out.goal_reached || h == tree.goal;
                        let next_candidates =
                            if terminal { Vec::new() } else { self.subgoal_candidates(task_id, node, &attained)? };
                        let next_context = self.subgoal_context(&s_next, task_id)?;
                        self.subgoal_policy.push(SmdpExperience {
                            context,
                            choice: self.subgoal_index(&h)?,
                            rewards,
                            next_context,
                            next_candidates,
                            terminal,
                        })?;
                        self.subgoal_policy.train_from_replay()?;
                    }
                    continue 'episode;
                }
            }
        }
        result.steps = env.steps();
        result.options_in_repertoire = self.repertoire.len();
        result.landmarks_attained = env.state().flag_count();
        Ok(result)
    }
}

pub(crate) fn new_controller(
    layout: &MazeLayout,
    env: &EnvConfig,
    config: &AgentConfig,
    rng: &mut ChaCha8Rng,
) -> Result<DdpgAgent> {
    let mut ddpg = config.ddpg.clone();
    if config.clip_option_targets {
        ddpg.target_clip = Some(option_value_range(layout.step_penalty, ddpg.gamma));
    }
    DdpgAgent::new(option_dim(layout), 2, env.action_bound, ddpg, rng.random())
}

/// Bounds on an option's discounted intra-option return: a step penalty
/// forever at worst, the terminal bonus at best.
pub fn option_value_range(step_penalty: f64, gamma: f64) -> [f64; 2] {
    [-step_penalty / (1.0 - gamma), 1.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::builtin_layout;
    use crate::subgoal::default_task;

    fn small_config() -> AgentConfig {
        let mut c = AgentConfig::default();
        c.ddpg.hidden = vec![16, 16];
        c.ddpg.batch_size = 8;
        c.dqn.batch_size = 8;
        c
    }

    fn agent(method: Method, env_name: &str) -> LdscAgent {
        let layout = builtin_layout(env_name).unwrap();
        LdscAgent::bootstrap(
            method,
            &[default_task(&layout)],
            &layout,
            &EnvConfig::default(),
            &ProviderMode::Scripted { env: env_name.into() },
            &small_config(),
            0,
            None,
        )
        .unwrap()
    }

    fn kinds(a: &LdscAgent) -> (usize, usize) {
        let n = |k| a.option_tree.nodes().iter().filter(|o| o.kind == k).count();
        (n(OptionKind::Global), n(OptionKind::Goal))
    }

    #[test]
    fn bootstrap_counts() {
        let a = agent(Method::Ldsc, "four_rooms");
        assert_eq!(a.subgoals, vec!["key", "lock"]);
        assert_eq!(kinds(&a), (2, 2));
        assert_eq!(a.repertoire.len(), 2);
        assert_eq!(a.untrained.len(), 2);

        let e = agent(Method::Ldsc, "e_maze");
        assert_eq!(e.subgoals, vec!["key1", "key2", "goal"]);
        assert_eq!(kinds(&e), (3, 3));
    }

    #[test]
    fn shared_subgoals_across_tasks_create_options_once() {
        let layout = builtin_layout("four_rooms").unwrap();
        let mut t2 = default_task(&layout);
        t2.task_id = 1;
        let a = LdscAgent::bootstrap(
            Method::Ldsc,
            &[default_task(&layout), t2],
            &layout,
            &EnvConfig::default(),
            &ProviderMode::Scripted { env: "four_rooms".into() },
            &small_config(),
            0,
            None,
        )
        .unwrap();
        assert_eq!(kinds(&a), (2, 2));
        assert_eq!(a.subgoal_trees.len(), 2);
    }

    #[test]
    fn dsc_has_goal_only() {
        let a = agent(Method::Dsc, "four_rooms");
        assert_eq!(a.subgoals, vec!["lock"]);
        let attained = BTreeSet::new();
        assert_eq!(a.subgoal_candidates(0, 0, &attained).unwrap(), vec![0]);
        let with_key = BTreeSet::from(["key".to_string()]);
        assert_eq!(a.subgoal_candidates(0, 0, &with_key).unwrap(), vec![0]);
    }

    #[test]
    fn global_option_takes_one_step() {
        let mut a = agent(Method::Ldsc, "four_rooms");
        let mut env = Env::new(a.layout.clone(), EnvConfig::default()).unwrap();
        env.reset(0);
        let id = a.option_tree.global_for("key").unwrap();
        let out = a.execute_option(&mut env, id, true).unwrap();
        assert_eq!(out.rewards.len(), 1);
        assert_eq!(out.states.len(), 2);
        assert_eq!(a.controllers[&id].replay_len(), 1);
    }

    #[test]
    fn option_at_its_subgoal_is_unavailable() {
        let mut a = agent(Method::Ldsc, "four_rooms");
        let mut env = Env::new(a.layout.clone(), EnvConfig::default()).unwrap();
        env.reset(0);
        let key = a.layout.landmark("key").unwrap().center;
        env.set_state(StateVec::at_rest(key[0], key[1], 0.0, 2)).unwrap();
        let id = a.option_tree.global_for("key").unwrap();
        assert!(matches!(a.execute_option(&mut env, id, false), Err(Error::InitiationViolated(_))));
    }

    #[test]
    fn untrained_goal_option_is_not_selectable() {
        let a = agent(Method::Ldsc, "four_rooms");
        let s = StateVec::at_rest(15.0, 5.0, 0.0, 2);
        let heads = a.available_heads("key", &s).unwrap();
        assert_eq!(heads, vec![(0, a.option_tree.global_for("key").unwrap())]);
    }

    #[test]
    fn episode_respects_step_limit() {
        let mut a = agent(Method::Ldsc, "four_rooms");
        let cfg = EnvConfig { max_episode_steps: 40, ..Default::default() };
        let mut env = Env::new(a.layout.clone(), cfg).unwrap();
        let r = a.run_episode(&mut env, 0, 0, true).unwrap();
        assert_eq!(r.steps, 40);
        assert!(!r.success);
        assert_eq!(r.options.iter().map(|o| o.1).sum::<usize>(), 40);
        assert!((r.ret + 0.4).abs() < 1e-9);
    }
}

#[cfg(test)]
mod clip_tests {
    use super::*;
    use crate::envs::builtin_layout;

    #[test]
    fn clip_flag_reaches_controllers() {
        let layout = builtin_layout("four_rooms").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut cfg = AgentConfig::default();
        cfg.ddpg.hidden = vec![4];
        let off = new_controller(&layout, &EnvConfig::default(), &cfg, &mut rng).unwrap();
        assert_eq!(off.config.target_clip, None);
        cfg.clip_option_targets = true;
        let on = new_controller(&layout, &EnvConfig::default(), &cfg, &mut rng).unwrap();
        let [lo, hi] = on.config.target_clip.unwrap();
        assert!((lo + layout.step_penalty * 100.0).abs() < 1e-9);
        assert_eq!(hi, 1.0);
    }
}
