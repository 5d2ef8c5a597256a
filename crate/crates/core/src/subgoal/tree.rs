use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::envs::MazeLayout;
use crate::smdp::{StateVec, SubgoalSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeLimits {
    pub depth_limit: usize,
    pub branch_limit: usize,
}

impl Default for TreeLimits {
    fn default() -> Self {
        Self { depth_limit: 6, branch_limit: 4 }
    }
}

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub name: String,
    /// `None` for the root (the initial state).
    pub spec: Option<SubgoalSpec>,
}

/// Relation tree over landmarks. Node 0 is the initial state; every other
/// node is one landmark, shared by all sequences that mention it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalTree {
    pub root: NodeId,
    pub root_state: StateVec,
    pub nodes: Vec<TreeNode>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub goal: String,
    pub limits: TreeLimits,
    /// Sequences that reached the goal, as merged.
    pub complete_sequences: Vec<Vec<String>>,
}

pub const ROOT_NAME: &str = "s0";

impl SubgoalTree {
    pub fn node(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().skip(1).position(|n| n.name == name).map(|i| i + 1)
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id].name
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges.iter().filter(move |e| e.0 == id).map(|e| e.1)
    }

    /// Landmark names in node order (root excluded).
    pub fn subgoal_names(&self) -> Vec<String> {
        self.nodes.iter().skip(1).map(|n| n.name.clone()).collect()
    }

    pub fn goal_node(&self) -> Option<NodeId> {
        self.node(&self.goal)
    }

    /// Children of `current` not yet attained whose prerequisites are all
    /// attained, ordered by name.
    pub fn next_subgoal_candidates(&self, attained: &BTreeSet<String>, current: NodeId) -> Vec<&SubgoalSpec> {
        let mut out: Vec<&SubgoalSpec> = self
            .children(current)
            .filter_map(|c| self.nodes[c].spec.as_ref())
            .filter(|s| !attained.contains(&s.name) && s.required_flags.iter().all(|r| attained.contains(r)))
            .collect();
        out.sort_by(|a, b| a.name.cmp(&b.name));
        out.dedup_by(|a, b| a.name == b.name);
        out
    }

    /// Follows attained children from `current` (lowest name first) so that
    /// landmarks reached along the way move the cursor forward.
    pub fn advance(&self, current: NodeId, attained: &BTreeSet<String>) -> NodeId {
        let mut at = current;
        let mut visited = BTreeSet::from([at]);
        loop {
            let next = self
                .children(at)
                .filter(|&c| !visited.contains(&c) && attained.contains(self.name(c)))
                .min_by(|&a, &b| self.name(a).cmp(self.name(b)));
            match next {
                Some(n) => {
                    visited.insert(n);
                    at = n;
                }
                None => return at,
            }
        }
    }

    /// Every node reachable from the root.
    pub fn is_rooted(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            if std::mem::replace(&mut seen[n], true) {
                continue;
            }
            stack.extend(self.children(n));
        }
        seen.iter().all(|&s| s)
    }

    pub fn has_duplicate_edges(&self) -> bool {
        let set: BTreeSet<_> = self.edges.iter().collect();
        set.len() != self.edges.len()
    }

    pub fn is_acyclic(&self) -> bool {
        // Kahn's algorithm.
        let mut indeg = vec![0usize; self.nodes.len()];
        for &(_, t) in &self.edges {
            indeg[t] += 1;
        }
        let mut queue: Vec<NodeId> = (0..self.nodes.len()).filter(|&n| indeg[n] == 0).collect();
        let mut removed = 0;
        while let Some(n) = queue.pop() {
            removed += 1;
            for c in self.children(n).collect::<Vec<_>>() {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push(c);
                }
            }
        }
        removed == self.nodes.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Merges landmark sequences into a relation tree.
///
/// Each sequence walks down from the root, adding an edge only when it is
/// absent. A walk stops at the goal, at `depth_limit` landmarks, or when a
/// new edge would give a node more than `branch_limit` children. A landmark
/// repeated within one sequence is skipped.
pub fn build_tree(s0: &StateVec, sequences: &[Vec<String>], layout: &MazeLayout, limits: TreeLimits) -> Result<SubgoalTree> {
    let mut tree = SubgoalTree {
        root: 0,
        root_state: s0.clone(),
        nodes: vec![TreeNode { name: ROOT_NAME.into(), spec: None }],
        edges: Vec::new(),
        goal: layout.goal_landmark.clone(),
        limits,
        complete_sequences: Vec::new(),
    };
    for seq in sequences {
        let mut parent = tree.root;
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut walked = Vec::new();
        for name in seq {
            if !seen.insert(name) {
                continue;
            }
            if walked.len() >= limits.depth_limit {
                break;
            }
            let spec = layout.landmark(name).ok_or_else(|| Error::UnknownLandmark(name.clone()))?;
            let child = match tree.node(name) {
                Some(id) if tree.has_edge(parent, id) => id,
                existing => {
                    if tree.children(parent).count() >= limits.branch_limit {
                        break;
                    }
                    let id = existing.unwrap_or_else(|| {
                        tree.nodes.push(TreeNode { name: name.clone(), spec: Some(spec.clone()) });
                        tree.nodes.len() - 1
                    });
                    tree.edges.push((parent, id));
                    id
                }
            };
            walked.push(name.clone());
            parent = child;
            if *name == tree.goal {
                tree.complete_sequences.push(walked.clone());
                break;
            }
        }
    }
    if tree.complete_sequences.is_empty() {
        return Err(Error::NoCompleteDecomposition);
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{builtin_layout, reset};
    use crate::smdp::SubgoalSpec;
    use proptest::prelude::*;

    fn seqs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter().map(|s| s.iter().map(|n| n.to_string()).collect()).collect()
    }

    /// Unconstrained landmarks `a..h` plus goal `g`.
    fn abc_layout() -> MazeLayout {
        let mut layout = builtin_layout("four_rooms").unwrap();
        layout.landmarks = "abcdefgh"
            .chars()
            .enumerate()
            .map(|(i, c)| SubgoalSpec {
                name: c.to_string(),
                center: [1.0 + 2.0 * i as f64, 1.0],
                radius: 0.5,
                required_flags: vec![],
            })
            .collect();
        layout.goal_landmark = "g".into();
        layout
    }

    fn tree(layout: &MazeLayout, raw: &[&[&str]]) -> SubgoalTree {
        build_tree(&reset(layout, 0), &seqs(raw), layout, TreeLimits::default()).unwrap()
    }

    fn names(specs: Vec<&SubgoalSpec>) -> Vec<&str> {
        specs.into_iter().map(|s| s.name.as_str()).collect()
    }

    #[test]
    fn shared_goal_node() {
        let l = abc_layout();
        let t = tree(&l, &[&["a", "b", "g"], &["a", "c", "g"]]);
        assert_eq!(t.nodes.len(), 5);
        assert_eq!(t.edges.len(), 5);
        let g = t.node("g").unwrap();
        assert!(t.has_edge(t.node("b").unwrap(), g) && t.has_edge(t.node("c").unwrap(), g));
    }

    #[test]
    fn duplicate_sequence_is_idempotent() {
        let l = abc_layout();
        assert_eq!(
            tree(&l, &[&["a", "b", "g"]]).edges,
            tree(&l, &[&["a", "b", "g"], &["a", "b", "g"]]).edges
        );
    }

    #[test]
    fn e_maze_diamond() {
        let l = builtin_layout("e_maze").unwrap();
        let t = tree(&l, &[&["key1", "key2", "goal"], &["key2", "key1", "goal"]]);
        assert_eq!(t.subgoal_names(), vec!["key1", "key2", "goal"]);
        let (k1, k2, g) = (t.node("key1").unwrap(), t.node("key2").unwrap(), t.node("goal").unwrap());
        let mut edges = t.edges.clone();
        edges.sort();
        let mut expected = vec![(0, k1), (0, k2), (k1, k2), (k2, k1), (k1, g), (k2, g)];
        expected.sort();
        assert_eq!(edges, expected);

        let none = BTreeSet::new();
        assert_eq!(names(t.next_subgoal_candidates(&none, 0)), vec!["key1", "key2"]);
        let got_k1 = BTreeSet::from(["key1".to_string()]);
        assert_eq!(names(t.next_subgoal_candidates(&got_k1, k1)), vec!["key2"]);
        let both = BTreeSet::from(["key1".to_string(), "key2".to_string()]);
        assert_eq!(names(t.next_subgoal_candidates(&both, k2)), vec!["goal"]);
    }

    #[test]
    fn four_rooms_root_candidates() {
        let l = builtin_layout("four_rooms").unwrap();
        let t = tree(&l, &[&["key", "lock"]]);
        assert_eq!(names(t.next_subgoal_candidates(&BTreeSet::new(), 0)), vec!["key"]);
        assert!(t.is_acyclic());
    }

    #[test]
    fn advance_follows_attained_children_without_looping() {
        let l = builtin_layout("e_maze").unwrap();
        let t = tree(&l, &[&["key1", "key2", "goal"], &["key2", "key1", "goal"]]);
        let both = BTreeSet::from(["key1".to_string(), "key2".to_string()]);
        let at = t.advance(0, &both);
        assert!(at == t.node("key1").unwrap() || at == t.node("key2").unwrap());
        assert_eq!(names(t.next_subgoal_candidates(&both, at)), vec!["goal"]);
    }

    #[test]
    fn incomplete_sequences_rejected() {
        let l = abc_layout();
        let err = build_tree(&reset(&l, 0), &seqs(&[&["a", "b"]]), &l, TreeLimits::default()).unwrap_err();
        assert!(matches!(err, Error::NoCompleteDecomposition));
        let short = TreeLimits { depth_limit: 2, branch_limit: 4 };
        let err = build_tree(&reset(&l, 0), &seqs(&[&["a", "b", "g"]]), &l, short).unwrap_err();
        assert!(matches!(err, Error::NoCompleteDecomposition));
    }

    #[test]
    fn branch_limit_truncates() {
        let l = abc_layout();
        let narrow = TreeLimits { depth_limit: 6, branch_limit: 1 };
        let t = build_tree(&reset(&l, 0), &seqs(&[&["a", "g"], &["b", "g"]]), &l, narrow).unwrap();
        assert_eq!(t.subgoal_names(), vec!["a", "g"]);
        assert_eq!(t.complete_sequences.len(), 1);
    }

    #[test]
    fn snapshot_round_trip() {
        let l = builtin_layout("tunnel").unwrap();
        let t = tree(
            &l,
            &[&["checkpoint", "key1", "goal"], &["checkpoint", "key1", "key2", "goal"], &["checkpoint", "key2", "key1", "goal"]],
        );
        assert_eq!(SubgoalTree::from_json(&t.to_json().unwrap()).unwrap(), t);
    }

    fn sequence_sets() -> impl Strategy<Value = Vec<Vec<String>>> {
        let name = prop::sample::select(vec!["a", "b", "c", "d", "e", "f"]);
        let body = prop::collection::vec(name, 0..4).prop_map(|mut v| {
            let mut seen = BTreeSet::new();
            v.retain(|n| seen.insert(*n));
            v.into_iter().map(str::to_string).chain(std::iter::once("g".to_string())).collect::<Vec<_>>()
        });
        prop::collection::vec(body, 1..6)
    }

    proptest! {
        #[test]
        fn tree_laws(sets in sequence_sets()) {
            let l = abc_layout();
            let t = build_tree(&reset(&l, 0), &sets, &l, TreeLimits { depth_limit: 6, branch_limit: 8 }).unwrap();
            let distinct: BTreeSet<&String> = sets.iter().flatten().collect();
            prop_assert_eq!(t.nodes.len(), distinct.len() + 1);
            prop_assert!(t.is_rooted());
            prop_assert!(!t.has_duplicate_edges());
            prop_assert!(t.edges.iter().all(|&(a, b)| a != b && b != t.root));
        }
    }
}
