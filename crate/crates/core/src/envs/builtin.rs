//! Hand-authored layouts. Coordinates are given on a 20 × 20 canvas; the
//! `mini_` variants shrink the canvas to 8 × 8 and enlarge landmark discs
//! relative to the map so desk-scale runs finish in minutes.

use std::f64::consts::PI;

use super::layout::{MazeLayout, Wall, LAYOUT_SCHEMA_VERSION};
use crate::smdp::SubgoalSpec;
use crate::{Error, Result};

pub const BUILTIN_LAYOUTS: [&str; 8] = [
    "four_rooms",
    "point_maze",
    "e_maze",
    "tunnel",
    "mini_four_rooms",
    "mini_point_maze",
    "mini_e_maze",
    "mini_tunnel",
];

const FULL_RADIUS: f64 = 0.6;
const MINI_SCALE: f64 = 0.4;
const MINI_RADIUS: f64 = 0.8;

struct Canvas {
    scale: f64,
    radius: f64,
}

impl Canvas {
    fn wall(&self, x1: f64, y1: f64, x2: f64, y2: f64) -> Wall {
        let s = self.scale;
        Wall::new(x1 * s, y1 * s, x2 * s, y2 * s)
    }

    fn landmark(&self, name: &str, x: f64, y: f64, requires: &[&str]) -> SubgoalSpec {
        SubgoalSpec {
            name: name.to_string(),
            center: [x * self.scale, y * self.scale],
            radius: self.radius,
            required_flags: requires.iter().map(|r| r.to_string()).collect(),
        }
    }

    fn start(&self, x: f64, y: f64, theta: f64) -> [f64; 3] {
        [x * self.scale, y * self.scale, theta]
    }

    fn layout(
        &self,
        name: &str,
        walls: Vec<Wall>,
        landmarks: Vec<SubgoalSpec>,
        starts: Vec<[f64; 3]>,
        goal: &str,
    ) -> MazeLayout {
        MazeLayout {
            schema_version: LAYOUT_SCHEMA_VERSION,
            name: name.to_string(),
            bounds: [0.0, 0.0, 20.0 * self.scale, 20.0 * self.scale],
            walls,
            landmarks,
            starts,
            goal_landmark: goal.to_string(),
            step_penalty: 0.01,
            goal_reward: 1.0,
        }
    }
}

/// Start bottom-right, key bottom-left, lock top-left. Doorways sit midway
/// along each shared wall.
fn four_rooms(c: &Canvas, name: &str) -> MazeLayout {
    let walls = vec![
        c.wall(10.0, 0.0, 10.0, 3.0),
        c.wall(10.0, 7.0, 10.0, 13.0),
        c.wall(10.0, 17.0, 10.0, 20.0),
        c.wall(0.0, 10.0, 3.0, 10.0),
        c.wall(7.0, 10.0, 13.0, 10.0),
        c.wall(17.0, 10.0, 20.0, 10.0),
    ];
    let landmarks = vec![
        c.landmark("key", 5.0, 5.0, &[]),
        c.landmark("lock", 5.0, 15.0, &["key"]),
    ];
    c.layout(name, walls, landmarks, vec![c.start(15.0, 5.0, PI)], "lock")
}

/// U-shaped maze: a wall splits the map into a lower and an upper corridor
/// joined on the right. Key top-right, remote bottom-right, door top-left.
fn point_maze(c: &Canvas, name: &str) -> MazeLayout {
    let walls = vec![c.wall(0.0, 10.0, 14.0, 10.0)];
    let landmarks = vec![
        c.landmark("key", 17.0, 16.0, &[]),
        c.landmark("remote", 17.0, 4.0, &["key"]),
        c.landmark("door", 4.0, 15.0, &["key", "remote"]),
    ];
    c.layout(name, walls, landmarks, vec![c.start(4.0, 5.0, 0.0)], "door")
}

/// E-shaped maze: a spine on the left and three rungs. Starts on the top
/// and bottom rungs, keys at their right ends, goal at the end of the
/// middle rung.
fn e_maze(c: &Canvas, name: &str) -> MazeLayout {
    let walls = vec![c.wall(5.0, 14.0, 20.0, 14.0), c.wall(5.0, 6.0, 20.0, 6.0)];
    let landmarks = vec![
        c.landmark("key1", 17.0, 17.0, &[]),
        c.landmark("key2", 17.0, 3.0, &[]),
        c.landmark("goal", 17.0, 10.0, &["key1", "key2"]),
    ];
    let starts = vec![c.start(9.0, 17.0, 0.0), c.start(9.0, 3.0, 0.0)];
    c.layout(name, walls, landmarks, starts, "goal")
}

/// A long narrow tunnel with a checkpoint before it splits into an upper
/// branch (key1, goal) and a lower branch (key2).
fn tunnel(c: &Canvas, name: &str) -> MazeLayout {
    let walls = vec![
        c.wall(0.0, 8.0, 12.0, 8.0),
        c.wall(0.0, 12.0, 12.0, 12.0),
        c.wall(12.0, 12.0, 12.0, 20.0),
        c.wall(12.0, 0.0, 12.0, 8.0),
        c.wall(14.0, 10.0, 20.0, 10.0),
    ];
    let landmarks = vec![
        c.landmark("checkpoint", 9.0, 10.0, &[]),
        c.landmark("key1", 18.0, 17.0, &["checkpoint"]),
        c.landmark("key2", 18.0, 3.0, &["checkpoint"]),
        c.landmark("goal", 14.0, 18.0, &["key1"]),
    ];
    c.layout(name, walls, landmarks, vec![c.start(2.0, 10.0, 0.0)], "goal")
}

pub fn builtin_layout(name: &str) -> Result<MazeLayout> {
    let (base, canvas) = match name.strip_prefix("mini_") {
        Some(base) => (base, Canvas { scale: MINI_SCALE, radius: MINI_RADIUS }),
        None => (name, Canvas { scale: 1.0, radius: FULL_RADIUS }),
    };
    let layout = match base {
        "four_rooms" => four_rooms(&canvas, name),
        "point_maze" => point_maze(&canvas, name),
        "e_maze" => e_maze(&canvas, name),
        "tunnel" => tunnel(&canvas, name),
        _ => return Err(Error::UnknownLayout(name.to_string())),
    };
    debug_assert!(layout.validate().is_ok());
    Ok(layout)
}

/// The environment family of a layout name (`mini_tunnel` → `tunnel`).
pub fn base_name(name: &str) -> &str {
    name.strip_prefix("mini_").unwrap_or(name)
}
