//! Discrete-choice SMDP Q-learning with double-DQN targets.
//!
//! Used for both the subgoal policy (choices are subgoals, conditioned on
//! the task) and the per-subgoal option policies (choices are options).
//! The network has one output head per possible choice; admissibility is
//! applied as a mask at selection and bootstrap time.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{adam_step, soft_update, Activation, AdamState, Mlp, OutputActivation};
use crate::replay::ReplayBuffer;
use crate::schedule::LinearSchedule;
use crate::smdp::discounted_return;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub epsilon: LinearSchedule,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            lr: 1e-3,
            gamma: 0.99,
            tau: 0.01,
            batch_size: 64,
            replay_capacity: 100_000,
            epsilon: LinearSchedule { start: 1.0, end: 0.05, decay_steps: 1 },
        }
    }
}

/// One SMDP decision: context ⊕ conditioning at decision time, the choice,
/// the per-step rewards it collected and what was admissible afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmdpExperience {
    pub context: Vec<f64>,
    pub choice: usize,
    pub rewards: Vec<f64>,
    pub next_context: Vec<f64>,
    pub next_candidates: Vec<usize>,
    pub terminal: bool,
}

impl SmdpExperience {
    pub fn tau(&self) -> usize {
        self.rewards.len()
    }
}

/// Index of the largest `q[i]` over `candidates`, lowest index on ties.
pub fn masked_argmax(q: &[f64], candidates: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &c in candidates {
        best = match best {
            None => Some(c),
            Some(b) if q[c] > q[b] || (q[c] == q[b] && c < b) => Some(c),
            keep => keep,
        };
    }
    best
}

#[derive(Debug, Clone)]
pub struct DiscreteQPolicy {
    pub online: Mlp,
    pub target: Mlp,
    adam: AdamState,
    candidate_count: usize,
    context_dim: usize,
    pub config: DqnConfig,
    replay: ReplayBuffer<SmdpExperience>,
    rng: ChaCha8Rng,
    progress: usize,
    train_steps: u64,
}

impl DiscreteQPolicy {
    pub fn new(context_dim: usize, candidate_count: usize, config: DqnConfig, seed: u64) -> Result<Self> {
        if candidate_count == 0 || context_dim == 0 {
            return Err(Error::Shape("Q policy needs at least one input and one head".into()));
        }
        if config.replay_capacity < config.batch_size {
            return Err(Error::Config("replay capacity below batch size".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![context_dim];
        sizes.extend(&config.hidden);
        sizes.push(candidate_count);
        let online = Mlp::new(&sizes, Activation::Relu, OutputActivation::Linear, None, &mut rng)?;
        Ok(Self {
            target: online.clone(),
            adam: AdamState::new(&online),
            online,
            candidate_count,
            context_dim,
            replay: ReplayBuffer::new(config.replay_capacity),
            config,
            rng,
            progress: 0,
            train_steps: 0,
        })
    }

    /// Rebuilds a policy from saved networks with an empty replay.
    pub fn from_networks(online: Mlp, target: Mlp, config: DqnConfig, progress: usize, seed: u64) -> Result<Self> {
        if !online.same_architecture(&target) {
            return Err(Error::Shape("online and target architectures differ".into()));
        }
        Ok(Self {
            adam: AdamState::new(&online),
            candidate_count: online.output_dim(),
            context_dim: online.input_dim(),
            replay: ReplayBuffer::new(config.replay_capacity),
            online,
            target,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            progress,
            train_steps: 0,
        })
    }

    pub fn candidate_count(&self) -> usize {
        self.candidate_count
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// Position on the exploration schedule.
    pub fn set_progress(&mut self, t: usize) {
        self.progress = t;
    }

    pub fn progress(&self) -> usize {
        self.progress
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.value(self.progress).clamp(0.0, 1.0)
    }

    pub fn q_values(&self, context: &[f64]) -> Result<Vec<f64>> {
        self.online.predict(context)
    }

    fn check_candidates(&self, candidates: &[usize]) -> Result<()> {
        if let Some(bad) = candidates.iter().find(|&&c| c >= self.candidate_count) {
            return Err(Error::Shape(format!(
                "candidate {bad} out of range for {} heads",
                self.candidate_count
            )));
        }
        Ok(())
    }

    /// ε-greedy choice among `candidates`; greedy ties go to the lowest index.
    pub fn select(&mut self, context: &[f64], candidates: &[usize], explore: bool) -> Result<usize> {
        if candidates.is_empty() {
            return Err(Error::NoAdmissibleChoice);
        }
        self.check_candidates(candidates)?;
        if candidates.len() == 1 {
            return Ok(candidates[0]);
        }
        if explore && self.rng.random::<f64>() < self.epsilon() {
            return Ok(candidates[self.rng.random_range(0..candidates.len())]);
        }
        let q = self.q_values(context)?;
        Ok(masked_argmax(&q, candidates).expect("candidates non-empty"))
    }

    fn validate(&self, exp: &SmdpExperience) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidExperience(m.to_string()));
        if exp.rewards.is_empty() {
            return bad("empty reward sequence");
        }
        if exp.context.len() != self.context_dim || exp.next_context.len() != self.context_dim {
            return bad("context dimension");
        }
        if exp.choice >= self.candidate_count {
            return bad("choice out of range");
        }
        if exp.next_candidates.iter().any(|&c| c >= self.candidate_count) {
            return bad("next candidate out of range");
        }
        if !exp.terminal && exp.next_candidates.is_empty() {
            return bad("non-terminal experience without next candidates");
        }
        Ok(())
    }

    pub fn push(&mut self, exp: SmdpExperience) -> Result<()> {
        self.validate(&exp)?;
        self.replay.push(exp);
        Ok(())
    }

    fn stack<'a>(&self, rows: impl Iterator<Item = &'a [f64]>, n: usize) -> Array2<f64> {
        let mut m = Array2::zeros((n, self.context_dim));
        for (i, r) in rows.enumerate() {
            m.row_mut(i).assign(&ndarray::ArrayView1::from(r));
        }
        m
    }

    /// `y = Σ γ^k r_k + γ^τ Q_target(s', argmax_{a ∈ next} Q_online(s', a))`,
    /// with the bootstrap dropped for terminal items.
    pub fn smdp_target(&self, batch: &[&SmdpExperience]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::InvalidExperience("empty batch".into()));
        }
        for e in batch {
            self.validate(e)?;
        }
        let next = self.stack(batch.iter().map(|e| e.next_context.as_slice()), batch.len());
        let q_online = self.online.predict_batch(next.view())?;
        let q_target = self.target.predict_batch(next.view())?;
        let gamma = self.config.gamma;
        batch
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let mut y = discounted_return(&e.rewards, gamma)?;
                if !e.terminal {
                    let row = q_online.row(i);
                    let row = row.as_slice().expect("standard layout");
                    let best = masked_argmax(row, &e.next_candidates)
                        .ok_or(Error::NoAdmissibleChoice)?;
                    y += gamma.powi(e.tau() as i32) * q_target[[i, best]];
                }
                Ok(y)
            })
            .collect()
    }

    /// One gradient step on the mean squared TD error followed by a soft
    /// target update. Returns the loss before the step.
    pub fn train_step(&mut self, batch: &[&SmdpExperience]) -> Result<f64> {
        let targets = self.smdp_target(batch)?;
        let n = batch.len();
        let ctx = self.stack(batch.iter().map(|e| e.context.as_slice()), n);
        let (q, cache) = self.online.forward_batch(ctx.view())?;
        let mut d_out = Array2::zeros(q.dim());
        let mut loss = 0.0;
        for (i, (e, y)) in batch.iter().zip(&targets).enumerate() {
            let err = q[[i, e.choice]] - y;
            loss += err * err;
            d_out[[i, e.choice]] = 2.0 * err / n as f64;
        }
        loss /= n as f64;
        let (grads, _) = self.online.backward(&cache, d_out.view())?;
        adam_step(&mut self.online, &grads, &mut self.adam, self.config.lr)?;
        soft_update(&mut self.target, &self.online, self.config.tau)?;
        self.train_steps += 1;
        Ok(loss)
    }

    /// Trains on a uniform replay sample once the replay holds a full batch.
    pub fn train_from_replay(&mut self) -> Result<Option<f64>> {
        if self.replay.len() < self.config.batch_size {
            return Ok(None);
        }
        let batch: Vec<SmdpExperience> = self
            .replay
            .sample(self.config.batch_size, &mut self.rng)
            .into_iter()
            .cloned()
            .collect();
        let refs: Vec<&SmdpExperience> = batch.iter().collect();
        self.train_step(&refs).map(Some)
    }
}
