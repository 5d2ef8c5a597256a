//! State encodings fed to the networks.

use crate::envs::{EnvConfig, MazeLayout};
use crate::smdp::StateVec;

fn scale(layout: &MazeLayout) -> f64 {
    let [x0, y0, x1, y1] = layout.bounds;
    (x1 - x0).max(y1 - y0).max(f64::EPSILON)
}

/// Position mapped to `[-1, 1]²`.
fn normalized_position(s: &StateVec, layout: &MazeLayout) -> [f64; 2] {
    let [x0, y0, x1, y1] = layout.bounds;
    let nx = 2.0 * (s.x - x0) / (x1 - x0).max(f64::EPSILON) - 1.0;
    let ny = 2.0 * (s.y - y0) / (y1 - y0).max(f64::EPSILON) - 1.0;
    [nx, ny]
}

fn base(s: &StateVec, layout: &MazeLayout, env: &EnvConfig, out: &mut Vec<f64>) {
    let [nx, ny] = normalized_position(s, layout);
    out.extend([nx, ny, s.theta.cos(), s.theta.sin()]);
    out.push(s.v / env.max_speed.max(f64::EPSILON));
    out.push(s.omega / env.max_turn.max(f64::EPSILON));
    out.extend(s.flags.iter().map(|&f| if f { 1.0 } else { 0.0 }));
}

pub fn state_dim(layout: &MazeLayout) -> usize {
    6 + layout.landmarks.len()
}

/// Pose, velocities and flags.
pub fn state_features(s: &StateVec, layout: &MazeLayout, env: &EnvConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(state_dim(layout));
    base(s, layout, env, &mut out);
    out
}

pub fn option_dim(layout: &MazeLayout) -> usize {
    state_dim(layout) + 3
}

/// State features plus the target in the robot's body frame (forward,
/// left, distance), all scaled by the map size.
pub fn option_features(s: &StateVec, target: [f64; 2], layout: &MazeLayout, env: &EnvConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(option_dim(layout));
    base(s, layout, env, &mut out);
    let k = scale(layout);
    let (dx, dy) = ((target[0] - s.x) / k, (target[1] - s.y) / k);
    let (c, sn) = (s.theta.cos(), s.theta.sin());
    out.extend([c * dx + sn * dy, -sn * dx + c * dy, (dx * dx + dy * dy).sqrt()]);
    out
}

/// State features followed by a one-hot block.
pub fn conditioned(s: &StateVec, layout: &MazeLayout, env: &EnvConfig, index: usize, width: usize) -> Vec<f64> {
    let mut out = state_features(s, layout, env);
    out.extend((0..width).map(|i| if i == index { 1.0 } else { 0.0 }));
    out
}
