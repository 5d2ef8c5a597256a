//! Deterministic 2D point-mass navigation environments.
//!
//! A point robot moves inside axis-aligned walls. Collisions are resolved
//! per axis: the x displacement is applied first and cancelled if it would
//! cross a wall or leave the map, then the y displacement likewise, so the
//! robot slides along walls instead of bouncing.

mod builtin;
mod layout;

pub use builtin::{base_name, builtin_layout, BUILTIN_LAYOUTS};
pub use layout::{load_layout, save_layout, MazeLayout, Wall, LAYOUT_SCHEMA_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::smdp::{wrap_angle, StateVec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsMode {
    /// Action is the commanded `(v, ω)`.
    Kinematic,
    /// Action is `(thrust, torque)`; velocities decay with `damping`.
    Inertial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub dt: f64,
    pub max_episode_steps: usize,
    pub dynamics_mode: DynamicsMode,
    pub action_bound: f64,
    /// Linear speed reached at full action, in map units per unit time.
    pub max_speed: f64,
    /// Turn rate reached at full action, in radians per unit time.
    pub max_turn: f64,
    /// Velocity decay rate of the inertial model.
    pub damping: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            max_episode_steps: 1000,
            dynamics_mode: DynamicsMode::Kinematic,
            action_bound: 1.0,
            max_speed: 0.5,
            max_turn: 1.0,
            damping: 0.5,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.max_episode_steps == 0 || !(self.action_bound > 0.0) {
            return Err(Error::Config(
                "env: dt and action_bound must be positive, max_episode_steps >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: StateVec,
    pub reward: f64,
    pub done: bool,
    pub goal_reached: bool,
}

/// Start pose drawn uniformly from `layout.starts` with a seeded generator.
pub fn reset(layout: &MazeLayout, seed: u64) -> StateVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let i = rng.random_range(0..layout.starts.len());
    let [x, y, theta] = layout.starts[i];
    StateVec::at_rest(x, y, theta, layout.landmarks.len())
}

fn crosses(a: f64, b: f64, wall: f64) -> bool {
    (a < wall && b >= wall) || (a > wall && b <= wall)
}

/// Whether moving along axis `axis` from `from` to `to`, at fixed
/// coordinate `other` on the remaining axis, hits a wall or the boundary.
fn blocked(layout: &MazeLayout, axis: usize, other: f64, from: f64, to: f64) -> bool {
    let (lo, hi) = (layout.bounds[axis], layout.bounds[axis + 2]);
    if to <= lo || to >= hi {
        return true;
    }
    let across = 1 - axis;
    layout.walls.iter().any(|w| {
        // Only walls perpendicular to the motion can be crossed.
        if w.from[axis] != w.to[axis] {
            return false;
        }
        let (a, b) = w.span(across);
        other >= a && other <= b && crosses(from, to, w.from[axis])
    })
}

/// Applies a displacement with axis-decomposed sliding collision handling.
pub fn slide(layout: &MazeLayout, from: [f64; 2], delta: [f64; 2]) -> [f64; 2] {
    let mut p = from;
    let nx = p[0] + delta[0];
    if !blocked(layout, 0, p[1], p[0], nx) {
        p[0] = nx;
    }
    let ny = p[1] + delta[1];
    if !blocked(layout, 1, p[0], p[1], ny) {
        p[1] = ny;
    }
    p
}

/// Sets every landmark flag whose disc contains the position and whose
/// prerequisites hold; repeats until no more flags change.
fn update_flags(layout: &MazeLayout, state: &mut StateVec) {
    loop {
        let mut changed = false;
        for (i, l) in layout.landmarks.iter().enumerate() {
            if state.flags[i] || !l.covers(state.position()) {
                continue;
            }
            let ready = l.required_flags.iter().all(|r| {
                layout
                    .landmark_index(r)
                    .is_some_and(|j| state.flags[j])
            });
            if ready {
                state.flags[i] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// One deterministic transition. Returns the successor, the reward and
/// whether the goal landmark was attained.
pub fn transition(
    state: &StateVec,
    action: &[f64],
    layout: &MazeLayout,
    config: &EnvConfig,
) -> Result<(StateVec, f64, bool)> {
    if action.len() != 2 || !action.iter().all(|a| a.is_finite()) {
        return Err(Error::InvalidAction(action.to_vec()));
    }
    let bound = config.action_bound;
    let a0 = action[0].clamp(-bound, bound) / bound;
    let a1 = action[1].clamp(-bound, bound) / bound;
    let dt = config.dt;

    let (v, omega) = match config.dynamics_mode {
        DynamicsMode::Kinematic => (a0 * config.max_speed, a1 * config.max_turn),
        DynamicsMode::Inertial => {
            // First-order lag towards the commanded velocities.
            let v = state.v + config.damping * (a0 * config.max_speed - state.v) * dt;
            let w = state.omega + config.damping * (a1 * config.max_turn - state.omega) * dt;
            (
                v.clamp(-config.max_speed, config.max_speed),
                w.clamp(-config.max_turn, config.max_turn),
            )
        }
    };

    let theta = wrap_angle(state.theta + omega * dt);
    let delta = [v * theta.cos() * dt, v * theta.sin() * dt];
    let [x, y] = slide(layout, state.position(), delta);

    let mut next = StateVec {
        x,
        y,
        theta,
        v,
        omega,
        flags: state.flags.clone(),
    };
    let goal = layout.goal_index();
    let had_goal = next.flags[goal];
    update_flags(layout, &mut next);
    let goal_reached = !had_goal && next.flags[goal];
    let reward = if goal_reached {
        layout.goal_reward
    } else {
        -layout.step_penalty
    };
    Ok((next, reward, goal_reached))
}

/// A stateful episode wrapper around [`transition`] that also enforces the
/// episode step limit.
#[derive(Debug, Clone)]
pub struct Env {
    pub layout: MazeLayout,
    pub config: EnvConfig,
    state: StateVec,
    steps: usize,
    done: bool,
}

impl Env {
    pub fn new(layout: MazeLayout, config: EnvConfig) -> Result<Self> {
        layout.validate()?;
        config.validate()?;
        let state = reset(&layout, 0);
        Ok(Self { layout, config, state, steps: 0, done: false })
    }

    pub fn reset(&mut self, seed: u64) -> StateVec {
        self.state = reset(&self.layout, seed);
        self.steps = 0;
        self.done = false;
        self.state.clone()
    }

    pub fn state(&self) -> &StateVec {
        &self.state
    }

    /// Places the robot in an arbitrary state mid-episode (scripted tests,
    /// evaluation from chosen poses). The step counter is unchanged.
    pub fn set_state(&mut self, state: StateVec) -> Result<()> {
        if state.flags.len() != self.layout.landmarks.len() || !self.layout.in_bounds(state.position()) {
            return Err(Error::Internal("state does not fit the layout".into()));
        }
        self.state = state;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Internal("step called on a finished episode".into()));
        }
        let (state, reward, goal_reached) =
            transition(&self.state, action, &self.layout, &self.config)?;
        self.steps += 1;
        self.done = goal_reached || self.steps >= self.config.max_episode_steps;
        self.state = state.clone();
        Ok(StepOutcome { state, reward, done: self.done, goal_reached })
    }
}
