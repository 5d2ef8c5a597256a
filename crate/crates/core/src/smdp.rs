//! Semi-MDP building blocks shared by every level of the hierarchy.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::skill_chain::{BoxRegion, InitiationClassifier};
use crate::{Error, Result};

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π for tiny negative inputs.
    if wrapped >= PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

/// Point-robot state: pose, velocities and landmark-attainment flags.
///
/// `flags[i]` refers to the i-th landmark of the layout the state lives in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVec {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub flags: Vec<bool>,
}

impl StateVec {
    pub fn at_rest(x: f64, y: f64, theta: f64, landmark_count: usize) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
            v: 0.0,
            omega: 0.0,
            flags: vec![false; landmark_count],
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    pub fn flag(&self, index: usize) -> bool {
        self.flags.get(index).copied().unwrap_or(false)
    }

    pub fn flag_count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstruction {
    pub task_id: usize,
    pub text: String,
    pub goal_landmark: String,
}

/// A named landmark: the grounding of a subgoal as a disc in the map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalSpec {
    pub name: String,
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default)]
    pub required_flags: Vec<String>,
}

impl SubgoalSpec {
    pub fn covers(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// A subgoal resolved against a layout's flag ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub spec: SubgoalSpec,
    pub flag_index: usize,
    pub required: Vec<usize>,
}

impl Region {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    /// Attainment test: inside the disc with every prerequisite flag set.
    pub fn contains(&self, s: &StateVec) -> bool {
        self.spec.covers(s.position()) && self.required.iter().all(|&i| s.flag(i))
    }
}

/// Termination condition β of an option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Termination {
    /// The option's subgoal region (global and goal options).
    Subgoal(Region),
    /// The parent's initiation box (chain options).
    ParentBox(BoxRegion),
}

impl Termination {
    pub fn holds(&self, s: &StateVec) -> bool {
        match self {
            Termination::Subgoal(r) => r.contains(s),
            Termination::ParentBox(b) => b.contains(s.position()),
        }
    }

    /// Point the intra-option controller steers towards.
    pub fn target(&self) -> [f64; 2] {
        match self {
            Termination::Subgoal(r) => r.spec.center,
            Termination::ParentBox(b) => b.center(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OptionId(pub usize);

impl std::fmt::Display for OptionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "o{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Global,
    Goal,
    Chain,
}

/// An option `(I, π, β, T)`. The intra-option policy π is the DDPG agent
/// stored under the same [`OptionId`] by whoever owns the option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionDef {
    pub id: OptionId,
    pub kind: OptionKind,
    /// Subgoal whose chain this option belongs to.
    pub subgoal: Region,
    pub initiation: InitiationClassifier,
    pub termination: Termination,
    pub budget: usize,
    /// 0 for global and goal options, parent depth + 1 for chain options.
    pub depth: usize,
    pub parent: Option<OptionId>,
}

impl OptionDef {
    pub fn subgoal_name(&self) -> &str {
        self.subgoal.name()
    }

    pub fn terminates(&self, s: &StateVec) -> bool {
        self.termination.holds(s)
    }

    pub fn can_initiate(&self, s: &StateVec) -> bool {
        self.initiation.contains(s)
    }

    /// `I_o(s) = 1 ∧ β_o(s) = 0`.
    pub fn is_available(&self, s: &StateVec) -> bool {
        self.can_initiate(s) && !self.terminates(s)
    }

    /// Global options are always selectable; the others only once their
    /// initiation classifier has been trained.
    pub fn is_trained(&self) -> bool {
        self.kind == OptionKind::Global || self.initiation.trained
    }

    pub fn target(&self) -> [f64; 2] {
        self.termination.target()
    }
}

/// One temporally extended decision as seen by an SMDP learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmdpTransition {
    pub s: StateVec,
    pub choice_id: usize,
    pub rewards: Vec<f64>,
    pub s_next: StateVec,
    pub terminal: bool,
}

impl SmdpTransition {
    pub fn tau(&self) -> usize {
        self.rewards.len()
    }
}

/// `Σ_{k<τ} γ^k r_k`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> Result<f64> {
    if rewards.is_empty() {
        return Err(Error::EmptyRewards);
    }
    let mut discount = 1.0;
    let mut total = 0.0;
    for r in rewards {
        total += discount * r;
        discount *= gamma;
    }
    Ok(total)
}

/// Options of `repertoire` that may start at `state`, in repertoire order.
///
/// A global option that is not already at its subgoal is always available,
/// so an empty result in that situation signals a broken invariant.
pub fn available_options<'a>(
    repertoire: &'a [OptionDef],
    state: &StateVec,
) -> Result<Vec<&'a OptionDef>> {
    let available: Vec<&OptionDef> = repertoire.iter().filter(|o| o.is_available(state)).collect();
    if available.is_empty() {
        if let Some(g) = repertoire
            .iter()
            .find(|o| o.kind == OptionKind::Global && !o.terminates(state))
        {
            return Err(Error::Internal(format!(
                "global option {} unavailable off its subgoal",
                g.id
            )));
        }
    }
    Ok(available)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skill_chain::InitiationClassifier;

    fn key_region() -> Region {
        Region {
            spec: SubgoalSpec {
                name: "key".into(),
                center: [5.0, 5.0],
                radius: 1.0,
                required_flags: vec![],
            },
            flag_index: 0,
            required: vec![],
        }
    }

    fn global() -> OptionDef {
        OptionDef {
            id: OptionId(0),
            kind: OptionKind::Global,
            subgoal: key_region(),
            initiation: InitiationClassifier::always(),
            termination: Termination::Subgoal(key_region()),
            budget: 1,
            depth: 0,
            parent: None,
        }
    }

    fn goal(classifier: InitiationClassifier) -> OptionDef {
        OptionDef {
            id: OptionId(1),
            kind: OptionKind::Goal,
            initiation: classifier,
            budget: 100,
            ..global()
        }
    }

    fn trained_box(min: [f64; 2], max: [f64; 2]) -> InitiationClassifier {
        InitiationClassifier {
            bounds: Some(BoxRegion { min, max }),
            trained: true,
            positive_count: 5,
            ..InitiationClassifier::untrained_box(0.5)
        }
    }

    #[test]
    fn discounted_return_examples() {
        assert_eq!(discounted_return(&[5.0], 0.99).unwrap(), 5.0);
        assert_eq!(discounted_return(&[1.0, 1.0, 1.0], 1.0).unwrap(), 3.0);
        assert_eq!(discounted_return(&[1.0, 0.0, 2.0], 0.5).unwrap(), 1.5);
        assert!(matches!(discounted_return(&[], 0.9), Err(Error::EmptyRewards)));
    }

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let a = wrap_angle(k as f64 * 0.77);
            assert!((-PI..PI).contains(&a));
        }
        assert_eq!(wrap_angle(PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn global_available_off_goal_only() {
        let o = global();
        assert!(o.is_available(&StateVec::at_rest(0.0, 0.0, 0.0, 1)));
        assert!(!o.is_available(&StateVec::at_rest(5.2, 5.0, 0.0, 1)));
    }

    #[test]
    fn goal_option_outside_box_unavailable() {
        let o = goal(trained_box([0.0, 0.0], [2.0, 2.0]));
        assert!(o.is_available(&StateVec::at_rest(1.0, 1.0, 0.0, 1)));
        assert!(!o.is_available(&StateVec::at_rest(3.0, 1.0, 0.0, 1)));
    }

    #[test]
    fn available_options_examples() {
        let s = StateVec::at_rest(1.0, 1.0, 0.0, 1);

        let only_global = [global()];
        let got = available_options(&only_global, &s).unwrap();
        assert_eq!(got.len(), 1);

        let with_untrained = [global(), goal(InitiationClassifier::untrained_box(0.5))];
        let got = available_options(&with_untrained, &s).unwrap();
        assert_eq!(got.iter().map(|o| o.id).collect::<Vec<_>>(), vec![OptionId(0)]);

        let with_trained = [global(), goal(trained_box([0.0, 0.0], [2.0, 2.0]))];
        let got = available_options(&with_trained, &s).unwrap();
        assert_eq!(
            got.iter().map(|o| o.id).collect::<Vec<_>>(),
            vec![OptionId(0), OptionId(1)]
        );
    }

    #[test]
    fn available_options_reports_broken_global() {
        let mut broken = global();
        broken.initiation = InitiationClassifier::untrained_box(0.5);
        let s = StateVec::at_rest(1.0, 1.0, 0.0, 1);
        assert!(matches!(available_options(&[broken], &s), Err(Error::Internal(_))));
    }

    #[test]
    fn flag_gated_region() {
        let lock = Region {
            spec: SubgoalSpec {
                name: "lock".into(),
                center: [0.0, 0.0],
                radius: 1.0,
                required_flags: vec!["key".into()],
            },
            flag_index: 1,
            required: vec![0],
        };
        let mut s = StateVec::at_rest(0.5, 0.0, 0.0, 2);
        assert!(!lock.contains(&s));
        s.flags[0] = true;
        assert!(lock.contains(&s));
    }
}
