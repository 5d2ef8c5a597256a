//! DDPG actor-critic: the intra-option controller of every option and the
//! flat baseline.

use ndarray::{concatenate, s, Array2, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::nn::{adam_step, soft_update, Activation, AdamState, Mlp, OutputActivation};
use crate::replay::ReplayBuffer;
use crate::schedule::LinearSchedule;
use crate::smdp::{OptionDef, StateVec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdpgConfig {
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub noise_sigma: LinearSchedule,
    /// Scale of the last layer's uniform initialisation.
    pub final_init: f64,
    /// Optional `[low, high]` range the critic targets are clamped to.
    pub target_clip: Option<[f64; 2]>,
}

impl Default for DdpgConfig {
    fn default() -> Self {
        Self {
            hidden: vec![400, 300],
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.99,
            tau: 0.01,
            batch_size: 64,
            replay_capacity: 100_000,
            noise_sigma: LinearSchedule { start: 0.3, end: 0.05, decay_steps: 1 },
            final_init: 3e-3,
            target_clip: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub critic_loss: f64,
    pub actor_objective: f64,
}

#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_adam: AdamState,
    critic_adam: AdamState,
    pub config: DdpgConfig,
    action_bound: f64,
    replay: ReplayBuffer<Transition>,
    rng: ChaCha8Rng,
    progress: usize,
}

impl DdpgAgent {
    pub fn new(state_dim: usize, action_dim: usize, action_bound: f64, config: DdpgConfig, seed: u64) -> Result<Self> {
        if state_dim == 0 || action_dim == 0 {
            return Err(Error::Shape("DDPG needs non-empty state and action".into()));
        }
        if !(action_bound > 0.0) {
            return Err(Error::Config("action bound must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_sizes = vec![state_dim];
        actor_sizes.extend(&config.hidden);
        actor_sizes.push(action_dim);
        let mut critic_sizes = vec![state_dim + action_dim];
        critic_sizes.extend(&config.hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(
            &actor_sizes,
            Activation::Relu,
            OutputActivation::TanhScaled(action_bound),
            Some(config.final_init),
            &mut rng,
        )?;
        let critic = Mlp::new(&critic_sizes, Activation::Relu, OutputActivation::Linear, Some(config.final_init), &mut rng)?;
        Ok(Self::assemble(actor, critic, config, action_bound, rng))
    }

    fn assemble(actor: Mlp, critic: Mlp, config: DdpgConfig, action_bound: f64, rng: ChaCha8Rng) -> Self {
        Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor_adam: AdamState::new(&actor),
            critic_adam: AdamState::new(&critic),
            actor,
            critic,
            replay: ReplayBuffer::new(config.replay_capacity),
            config,
            action_bound,
            rng,
            progress: 0,
        }
    }

    /// Rebuilds an agent from checkpointed networks with fresh optimiser
    /// state and an empty replay.
    pub fn from_networks(
        actor: Mlp,
        critic: Mlp,
        actor_target: Mlp,
        critic_target: Mlp,
        config: DdpgConfig,
        seed: u64,
    ) -> Result<Self> {
        if !actor.same_architecture(&actor_target) || !critic.same_architecture(&critic_target) {
            return Err(Error::Shape("target networks differ from online networks".into()));
        }
        if critic.input_dim() != actor.input_dim() + actor.output_dim() || critic.output_dim() != 1 {
            return Err(Error::Shape("critic does not match actor".into()));
        }
        let bound = match actor.output_activation {
            OutputActivation::TanhScaled(b) => b,
            OutputActivation::Linear => return Err(Error::Shape("actor output must be bounded".into())),
        };
        let mut agent = Self::assemble(actor, critic, config, bound, ChaCha8Rng::seed_from_u64(seed));
        agent.actor_target = actor_target;
        agent.critic_target = critic_target;
        Ok(agent)
    }

    /// A copy of this agent's networks with its own replay, optimiser and
    /// noise stream. Used to warm-start a newly promoted option.
    pub fn fork(&self, seed: u64) -> Self {
        let mut agent = Self::assemble(
            self.actor.clone(),
            self.critic.clone(),
            self.config.clone(),
            self.action_bound,
            ChaCha8Rng::seed_from_u64(seed),
        );
        agent.actor_target = self.actor_target.clone();
        agent.critic_target = self.critic_target.clone();
        agent.progress = self.progress;
        agent
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn action_bound(&self) -> f64 {
        self.action_bound
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn set_progress(&mut self, t: usize) {
        self.progress = t;
    }

    pub fn noise_sigma(&self) -> f64 {
        self.config.noise_sigma.value(self.progress).max(0.0)
    }

    /// Actor output, optionally perturbed by Gaussian noise, clipped to the
    /// action bounds.
    pub fn act(&mut self, state: &[f64], explore: bool) -> Result<Vec<f64>> {
        let mut a = self.act_unclipped(state, explore)?;
        for x in &mut a {
            *x = x.clamp(-self.action_bound, self.action_bound);
        }
        Ok(a)
    }

    fn act_unclipped(&mut self, state: &[f64], explore: bool) -> Result<Vec<f64>> {
        if state.len() != self.state_dim() {
            return Err(Error::Shape(format!(
                "state has {} features, actor expects {}",
                state.len(),
                self.state_dim()
            )));
        }
        let mut a = self.actor.predict(state)?;
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidAction(a));
        }
        let sigma = self.noise_sigma();
        if explore && sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
            for x in &mut a {
                *x += normal.sample(&mut self.rng);
            }
        }
        Ok(a)
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.s.len() != self.state_dim() || t.s_next.len() != self.state_dim() {
            return Err(Error::InvalidExperience("state dimension".into()));
        }
        if t.a.len() != self.action_dim() {
            return Err(Error::InvalidExperience("action dimension".into()));
        }
        if !t.r.is_finite() {
            return Err(Error::InvalidExperience("non-finite reward".into()));
        }
        self.replay.push(t);
        Ok(())
    }

    fn rows<'a>(dim: usize, rows: impl Iterator<Item = &'a [f64]>, n: usize) -> Array2<f64> {
        let mut m = Array2::zeros((n, dim));
        for (i, r) in rows.enumerate() {
            m.row_mut(i).assign(&ArrayView1::from(r));
        }
        m
    }

    /// `y = r + (done ? 0 : γ · Q'(s', μ'(s')))`.
    pub fn critic_targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        let n = batch.len();
        let next = Self::rows(self.state_dim(), batch.iter().map(|t| t.s_next.as_slice()), n);
        let next_a = self.actor_target.predict_batch(next.view())?;
        let sa = concatenate(Axis(1), &[next.view(), next_a.view()]).map_err(|e| Error::Shape(e.to_string()))?;
        let q = self.critic_target.predict_batch(sa.view())?;
        Ok(batch
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let y = if t.done { t.r } else { t.r + self.config.gamma * q[[i, 0]] };
                match self.config.target_clip {
                    Some([lo, hi]) => y.clamp(lo, hi),
                    None => y,
                }
            })
            .collect())
    }

    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<TrainStats> {
        if batch.is_empty() {
            return Err(Error::InvalidExperience("empty batch".into()));
        }
        let n = batch.len();
        let nf = n as f64;
        let targets = self.critic_targets(batch)?;
        let states = Self::rows(self.state_dim(), batch.iter().map(|t| t.s.as_slice()), n);
        let actions = Self::rows(self.action_dim(), batch.iter().map(|t| t.a.as_slice()), n);

        // Critic: mean squared error against the frozen targets.
        let sa = concatenate(Axis(1), &[states.view(), actions.view()]).map_err(|e| Error::Shape(e.to_string()))?;
        let (q, cache) = self.critic.forward_batch(sa.view())?;
        let mut d_q = Array2::zeros((n, 1));
        let mut critic_loss = 0.0;
        for i in 0..n {
            let err = q[[i, 0]] - targets[i];
            critic_loss += err * err;
            d_q[[i, 0]] = 2.0 * err / nf;
        }
        critic_loss /= nf;
        let (g, _) = self.critic.backward(&cache, d_q.view())?;
        adam_step(&mut self.critic, &g, &mut self.critic_adam, self.config.critic_lr)?;

        // Actor: ascend mean Q(s, μ(s)) through the updated critic.
        let (mu, actor_cache) = self.actor.forward_batch(states.view())?;
        let s_mu = concatenate(Axis(1), &[states.view(), mu.view()]).map_err(|e| Error::Shape(e.to_string()))?;
        let (q_mu, critic_cache) = self.critic.forward_batch(s_mu.view())?;
        let actor_objective = q_mu.sum() / nf;
        let ascend = Array2::from_elem((n, 1), -1.0 / nf);
        let (_, d_input) = self.critic.backward(&critic_cache, ascend.view())?;
        let d_mu = d_input.slice(s![.., self.state_dim()..]).to_owned();
        let (ga, _) = self.actor.backward(&actor_cache, d_mu.view())?;
        adam_step(&mut self.actor, &ga, &mut self.actor_adam, self.config.actor_lr)?;

        soft_update(&mut self.critic_target, &self.critic, self.config.tau)?;
        soft_update(&mut self.actor_target, &self.actor, self.config.tau)?;
        Ok(TrainStats { critic_loss, actor_objective })
    }

    pub fn train_from_replay(&mut self) -> Result<Option<TrainStats>> {
        if self.replay.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch: Vec<Transition> = self
            .replay
            .sample(self.config.batch_size, &mut self.rng)
            .into_iter()
            .cloned()
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        self.train_step(&refs).map(Some)
    }
}

/// Pseudo-reward confined to an option's own replay: `+1` on reaching its
/// termination set, `-step_penalty` otherwise.
pub fn intra_option_reward(_prev: &StateVec, next: &StateVec, option: &OptionDef, step_penalty: f64) -> (f64, bool) {
    if option.terminates(next) {
        (1.0, true)
    } else {
        (-step_penalty, false)
    }
}
