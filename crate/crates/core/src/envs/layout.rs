//! Maze layouts and their JSON file format.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::smdp::{Region, SubgoalSpec};
use crate::{Error, Result};

pub const LAYOUT_SCHEMA_VERSION: u32 = 1;

/// Axis-aligned wall segment, serialized as `[[x1, y1], [x2, y2]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Wall {
    pub from: [f64; 2],
    pub to: [f64; 2],
}

impl From<[[f64; 2]; 2]> for Wall {
    fn from(v: [[f64; 2]; 2]) -> Self {
        Wall { from: v[0], to: v[1] }
    }
}

impl From<Wall> for [[f64; 2]; 2] {
    fn from(w: Wall) -> Self {
        [w.from, w.to]
    }
}

impl Wall {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Wall { from: [x1, y1], to: [x2, y2] }
    }

    pub fn is_vertical(&self) -> bool {
        self.from[0] == self.to[0]
    }

    pub fn is_horizontal(&self) -> bool {
        self.from[1] == self.to[1]
    }

    /// Span along axis `d` as `(lo, hi)`.
    pub fn span(&self, d: usize) -> (f64, f64) {
        let (a, b) = (self.from[d], self.to[d]);
        (a.min(b), a.max(b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazeLayout {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    /// `[x_min, y_min, x_max, y_max]`.
    pub bounds: [f64; 4],
    pub walls: Vec<Wall>,
    pub landmarks: Vec<SubgoalSpec>,
    /// Start poses `[x, y, theta]`.
    pub starts: Vec<[f64; 3]>,
    pub goal_landmark: String,
    pub step_penalty: f64,
    pub goal_reward: f64,
}

impl MazeLayout {
    pub fn landmark_index(&self, name: &str) -> Option<usize> {
        self.landmarks.iter().position(|l| l.name == name)
    }

    pub fn landmark(&self, name: &str) -> Option<&SubgoalSpec> {
        self.landmarks.iter().find(|l| l.name == name)
    }

    pub fn landmark_names(&self) -> Vec<String> {
        self.landmarks.iter().map(|l| l.name.clone()).collect()
    }

    pub fn goal_index(&self) -> usize {
        self.landmark_index(&self.goal_landmark)
            .expect("validated layout names its goal landmark")
    }

    /// Resolves a landmark's prerequisite names into flag indices.
    pub fn region(&self, name: &str) -> Result<Region> {
        let flag_index = self
            .landmark_index(name)
            .ok_or_else(|| Error::UnknownLandmark(name.to_string()))?;
        let spec = self.landmarks[flag_index].clone();
        let required = spec
            .required_flags
            .iter()
            .map(|r| {
                self.landmark_index(r)
                    .ok_or_else(|| Error::UnknownLandmark(r.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Region { spec, flag_index, required })
    }

    pub fn in_bounds(&self, p: [f64; 2]) -> bool {
        let [x0, y0, x1, y1] = self.bounds;
        p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Layout(msg));
        if self.schema_version != LAYOUT_SCHEMA_VERSION {
            return bad(format!(
                "schema_version: expected {LAYOUT_SCHEMA_VERSION}, found {}",
                self.schema_version
            ));
        }
        let [x0, y0, x1, y1] = self.bounds;
        if !self.bounds.iter().all(|v| v.is_finite()) || x0 >= x1 || y0 >= y1 {
            return bad(format!("bounds: degenerate box {:?}", self.bounds));
        }
        for (i, w) in self.walls.iter().enumerate() {
            let finite = w.from.iter().chain(&w.to).all(|v| v.is_finite());
            if !finite || !(w.is_vertical() || w.is_horizontal()) {
                return bad(format!("walls[{i}]: segment is not axis-aligned"));
            }
        }
        if self.landmarks.is_empty() {
            return bad("landmarks: empty".into());
        }
        let mut names = BTreeSet::new();
        for l in &self.landmarks {
            if !names.insert(l.name.as_str()) {
                return bad(format!("landmarks: duplicate name '{}'", l.name));
            }
            if !(l.radius > 0.0) {
                return bad(format!("landmarks.{}: radius must be positive", l.name));
            }
            if !self.in_bounds(l.center) {
                return bad(format!("landmarks.{}: center outside bounds", l.name));
            }
        }
        for l in &self.landmarks {
            for r in &l.required_flags {
                if r == &l.name || !names.contains(r.as_str()) {
                    return bad(format!(
                        "landmarks.{}: required flag '{r}' is not another landmark",
                        l.name
                    ));
                }
            }
        }
        if self.starts.is_empty() {
            return bad("starts: empty".into());
        }
        for (i, s) in self.starts.iter().enumerate() {
            if !s.iter().all(|v| v.is_finite()) || !self.in_bounds([s[0], s[1]]) {
                return bad(format!("starts[{i}]: outside bounds"));
            }
        }
        if !names.contains(self.goal_landmark.as_str()) {
            return bad(format!(
                "goal_landmark: '{}' is not a landmark",
                self.goal_landmark
            ));
        }
        if !(self.step_penalty >= 0.0) || !self.goal_reward.is_finite() {
            return bad("step_penalty/goal_reward: invalid value".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let layout: MazeLayout =
            serde_json::from_str(text).map_err(|e| Error::Layout(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn load_layout(path: impl AsRef<Path>) -> Result<MazeLayout> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    MazeLayout::from_json(&text)
        .map_err(|e| Error::Layout(format!("{}: {e}", path.display())))
}

pub fn save_layout(layout: &MazeLayout, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, layout.to_json()?)?;
    Ok(())
}
