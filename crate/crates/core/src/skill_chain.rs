//! Option discovery by skill chaining.
//!
//! Every subgoal starts with an always-available global option and an
//! untrained goal option. Successful arrivals at the subgoal are recorded
//! as positive examples; after enough of them the goal option's initiation
//! box is fitted and the option becomes selectable. It then spawns a child
//! option whose termination set is the parent's box, and the process repeats
//! backwards towards the start state.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::smdp::{OptionDef, OptionId, OptionKind, Region, StateVec, Termination};
use crate::{Error, Result};

/// Axis-aligned rectangle over map positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl BoxRegion {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|d| p[d] >= self.min[d] && p[d] <= self.max[d])
    }

    pub fn center(&self) -> [f64; 2] {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    /// Bounding box of `points` grown by `margin` on every side.
    pub fn fit(points: impl IntoIterator<Item = [f64; 2]>, margin: f64) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut min, mut max) = (first, first);
        for p in it {
            for d in 0..2 {
                min[d] = min[d].min(p[d]);
                max[d] = max[d].max(p[d]);
            }
        }
        Some(Self {
            min: [min[0] - margin, min[1] - margin],
            max: [max[0] + margin, max[1] + margin],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierMode {
    Always,
    Box,
}

/// Initiation set `I_o`, learned as a box over positions only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitiationClassifier {
    pub mode: ClassifierMode,
    pub bounds: Option<BoxRegion>,
    pub margin: f64,
    pub trained: bool,
    pub positive_count: usize,
}

impl InitiationClassifier {
    pub fn always() -> Self {
        Self {
            mode: ClassifierMode::Always,
            bounds: None,
            margin: 0.0,
            trained: true,
            positive_count: 0,
        }
    }

    pub fn untrained_box(margin: f64) -> Self {
        Self {
            mode: ClassifierMode::Box,
            bounds: None,
            margin,
            trained: false,
            positive_count: 0,
        }
    }

    pub fn contains(&self, s: &StateVec) -> bool {
        match self.mode {
            ClassifierMode::Always => true,
            ClassifierMode::Box => {
                self.trained && self.bounds.is_some_and(|b| b.contains(s.position()))
            }
        }
    }
}

/// Fits the initiation box once `success_count` reaches `threshold`.
/// Below the threshold the classifier is returned untrained, to be retried
/// after later successes.
pub fn learn_initiation_classifier(
    classifier: &InitiationClassifier,
    positives: &[StateVec],
    success_count: usize,
    threshold: usize,
) -> InitiationClassifier {
    let mut next = classifier.clone();
    next.positive_count = success_count;
    if classifier.mode == ClassifierMode::Always {
        return next;
    }
    if success_count < threshold {
        next.trained = false;
        return next;
    }
    match BoxRegion::fit(positives.iter().map(StateVec::position), classifier.margin) {
        Some(b) => {
            next.bounds = Some(b);
            next.trained = true;
        }
        None => next.trained = false,
    }
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkillChainConfig {
    /// Budget of global options (literally `T = 1`).
    pub global_budget: usize,
    /// `T_0`: budget of goal and chain options.
    pub option_budget: usize,
    /// `N_g`: successes needed before the initiation box is fitted.
    pub gestation_threshold: usize,
    /// `K_seg`: trajectory suffix length stored per success.
    pub suffix_len: usize,
    pub margin: f64,
    pub max_chain_depth: usize,
}

impl Default for SkillChainConfig {
    fn default() -> Self {
        Self {
            global_budget: 1,
            option_budget: 100,
            gestation_threshold: 5,
            suffix_len: 10,
            margin: 0.5,
            max_chain_depth: 4,
        }
    }
}

/// Positive examples gathered by options still in gestation.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GestationBuffer {
    positives: BTreeMap<OptionId, Vec<StateVec>>,
    successes: BTreeMap<OptionId, usize>,
}

impl GestationBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores the last `suffix_len` states of a trajectory that ended in
    /// `option`'s termination set.
    pub fn record_success(
        &mut self,
        option: &OptionDef,
        trajectory: &[StateVec],
        suffix_len: usize,
    ) -> Result<()> {
        match trajectory.last() {
            Some(last) if option.terminates(last) => {}
            _ => {
                return Err(Error::Lifecycle(format!(
                    "trajectory for {} does not end in its termination set",
                    option.id
                )))
            }
        }
        let start = trajectory.len().saturating_sub(suffix_len);
        self.positives
            .entry(option.id)
            .or_default()
            .extend_from_slice(&trajectory[start..]);
        *self.successes.entry(option.id).or_default() += 1;
        Ok(())
    }

    pub fn positives(&self, id: OptionId) -> &[StateVec] {
        self.positives.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn positive_count(&self, id: OptionId) -> usize {
        self.successes.get(&id).copied().unwrap_or(0)
    }
}

/// Whether a freshly terminated option should spawn a predecessor: it must
/// have ended in its termination set, and the episode start must not already
/// be covered by a trained initiation box of the same subgoal's chain.
pub fn should_chain(
    terminated: &OptionDef,
    final_state: &StateVec,
    episode_start: &StateVec,
    repertoire: &[&OptionDef],
) -> bool {
    if !terminated.terminates(final_state) {
        return false;
    }
    !repertoire.iter().any(|o| {
        o.subgoal_name() == terminated.subgoal_name()
            && o.initiation.mode == ClassifierMode::Box
            && o.initiation.contains(episode_start)
    })
}

/// Registry of every option plus the parent → child chaining edges.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OptionTree {
    nodes: Vec<OptionDef>,
    edges: Vec<(OptionId, OptionId)>,
    globals: BTreeMap<String, OptionId>,
    roots: BTreeMap<String, OptionId>,
}

impl OptionTree {
    pub fn new() -> Self {
        Self::default()
    }

    fn next_id(&self) -> OptionId {
        OptionId(self.nodes.len())
    }

    pub fn create_global_option(
        &mut self,
        subgoal: &Region,
        config: &SkillChainConfig,
    ) -> Result<OptionId> {
        if self.globals.contains_key(subgoal.name()) {
            return Err(Error::Lifecycle(format!(
                "global option for '{}' already exists",
                subgoal.name()
            )));
        }
        let id = self.next_id();
        self.nodes.push(OptionDef {
            id,
            kind: OptionKind::Global,
            subgoal: subgoal.clone(),
            initiation: InitiationClassifier::always(),
            termination: Termination::Subgoal(subgoal.clone()),
            budget: config.global_budget.max(1),
            depth: 0,
            parent: None,
        });
        self.globals.insert(subgoal.name().to_string(), id);
        Ok(id)
    }

    pub fn create_goal_option(
        &mut self,
        subgoal: &Region,
        config: &SkillChainConfig,
    ) -> Result<OptionId> {
        if self.roots.contains_key(subgoal.name()) {
            return Err(Error::Lifecycle(format!(
                "goal option for '{}' already exists",
                subgoal.name()
            )));
        }
        let id = self.next_id();
        self.nodes.push(OptionDef {
            id,
            kind: OptionKind::Goal,
            subgoal: subgoal.clone(),
            initiation: InitiationClassifier::untrained_box(config.margin),
            termination: Termination::Subgoal(subgoal.clone()),
            budget: config.option_budget.max(1),
            depth: 0,
            parent: None,
        });
        self.roots.insert(subgoal.name().to_string(), id);
        Ok(id)
    }

    /// New chain option terminating in `parent`'s initiation box.
    pub fn create_child_option(
        &mut self,
        parent: OptionId,
        config: &SkillChainConfig,
    ) -> Result<OptionId> {
        let p = self.get(parent)?;
        if p.kind == OptionKind::Global {
            return Err(Error::Lifecycle("global options have no chain".into()));
        }
        let parent_box = match (&p.initiation.bounds, p.initiation.trained) {
            (Some(b), true) => *b,
            _ => {
                return Err(Error::Lifecycle(format!(
                    "parent {parent} has no trained initiation set"
                )))
            }
        };
        let depth = p.depth + 1;
        if depth > config.max_chain_depth {
            return Err(Error::Lifecycle(format!(
                "chain depth cap {} reached",
                config.max_chain_depth
            )));
        }
        let subgoal = p.subgoal.clone();
        let id = self.next_id();
        self.nodes.push(OptionDef {
            id,
            kind: OptionKind::Chain,
            subgoal,
            initiation: InitiationClassifier::untrained_box(config.margin),
            termination: Termination::ParentBox(parent_box),
            budget: config.option_budget.max(1),
            depth,
            parent: Some(parent),
        });
        self.edges.push((parent, id));
        Ok(id)
    }

    pub fn get(&self, id: OptionId) -> Result<&OptionDef> {
        self.nodes
            .get(id.0)
            .ok_or_else(|| Error::Lifecycle(format!("unknown option {id}")))
    }

    pub fn get_mut(&mut self, id: OptionId) -> Result<&mut OptionDef> {
        self.nodes
            .get_mut(id.0)
            .ok_or_else(|| Error::Lifecycle(format!("unknown option {id}")))
    }

    pub fn nodes(&self) -> &[OptionDef] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(OptionId, OptionId)] {
        &self.edges
    }

    pub fn global_for(&self, subgoal: &str) -> Option<OptionId> {
        self.globals.get(subgoal).copied()
    }

    pub fn goal_for(&self, subgoal: &str) -> Option<OptionId> {
        self.roots.get(subgoal).copied()
    }

    /// All options of one subgoal's chain, in creation order.
    pub fn chain(&self, subgoal: &str) -> impl Iterator<Item = &OptionDef> {
        let subgoal = subgoal.to_string();
        self.nodes.iter().filter(move |o| o.subgoal_name() == subgoal)
    }

    pub fn is_acyclic(&self) -> bool {
        let mut children: BTreeMap<OptionId, Vec<OptionId>> = BTreeMap::new();
        for (p, c) in &self.edges {
            children.entry(*p).or_default().push(*c);
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; self.nodes.len()];
        fn visit(
            n: OptionId,
            children: &BTreeMap<OptionId, Vec<OptionId>>,
            mark: &mut [u8],
        ) -> bool {
            match mark.get(n.0) {
                Some(1) => return false,
                Some(2) => return true,
                None => return false,
                _ => {}
            }
            mark[n.0] = 1;
            for c in children.get(&n).into_iter().flatten() {
                if !visit(*c, children, mark) {
                    return false;
                }
            }
            mark[n.0] = 2;
            true
        }
        let ids: BTreeSet<OptionId> = self.nodes.iter().map(|o| o.id).collect();
        ids.into_iter().all(|id| visit(id, &children, &mut mark))
    }

    pub fn snapshot(&self) -> OptionTreeSnapshot {
        OptionTreeSnapshot {
            nodes: self
                .nodes
                .iter()
                .map(|o| SnapshotNode {
                    id: o.id.0,
                    kind: o.kind,
                    subgoal: o.subgoal_name().to_string(),
                    r#box: o.initiation.bounds,
                    trained: o.is_trained(),
                    budget: o.budget,
                })
                .collect(),
            edges: self.edges.iter().map(|(p, c)| (p.0, c.0)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotNode {
    pub id: usize,
    pub kind: OptionKind,
    pub subgoal: String,
    #[serde(rename = "box")]
    pub r#box: Option<BoxRegion>,
    pub trained: bool,
    pub budget: usize,
}

/// JSON export of the option tree, consumed by the footprint plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionTreeSnapshot {
    pub nodes: Vec<SnapshotNode>,
    pub edges: Vec<(usize, usize)>,
}
