//! The search DAG: nodes are proof states (or terminal outcomes), edges are
//! executed proof steps.
//!
//! States are merged by canonical key: the second arrival at a known goal is
//! recorded as a `Back` edge instead of a fresh node, and an arrival that
//! would close a cycle (the known goal is an ancestor of the would-be parent)
//! becomes a `CyclePruned` error terminal. The structure is append-only and
//! acyclic by construction.

use crate::prover::StepResult;
use crate::state::{ErrorKind, ProofState, ProofStep, StateKey};
use std::collections::HashMap;

/// Index of a node inside its [`SearchDag`].
pub type NodeId = usize;

/// Lifecycle status of a search node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    /// An intermediate state that can still be expanded.
    Open,
    /// A failed branch; terminal.
    Error(ErrorKind),
    /// The goal was closed here; terminal.
    ProofFinished,
}

impl NodeStatus {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, NodeStatus::Open)
    }
}

/// How an edge relates to the spanning tree of discovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// First discovery of the target node.
    Tree,
    /// A re-arrival at an already-known state.
    Back,
}

/// A node in the search DAG.
#[derive(Debug, Clone)]
pub struct SearchNode {
    pub id: NodeId,
    /// The proof state, present iff the node is (or was created) `Open`.
    /// Terminal outcomes (errors, finishes) carry no state.
    pub state: Option<ProofState>,
    pub status: NodeStatus,
    /// Cumulative path score (root = 0).
    pub score: f64,
    /// Steps from the root along Tree edges.
    pub depth: u32,
    /// Order in which the node was expanded, if it ever was.
    pub expansion_order: Option<u32>,
}

/// An edge in the search DAG: the step that was executed and the policy's
/// logprob for it.
#[derive(Debug, Clone)]
pub struct SearchEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub step: ProofStep,
    /// The policy's logprob for this step (edge annotation; independent of
    /// the scoring strategy used for node scores).
    pub beam_prob: f64,
    pub kind: EdgeKind,
}

#[derive(Debug, thiserror::Error)]
pub enum DagError {
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is terminal and cannot take children")]
    ParentNotOpen(NodeId),
    #[error("node {0} is not a finished node")]
    NotFinished(NodeId),
    #[error("node {0} has no tree path to the root")]
    NoTreePath(NodeId),
}

/// Path score accumulation: a child's score is its parent's score plus the
/// step's contribution (log-domain, so addition composes probabilities).
pub fn compute_score(parent_score: f64, logprob: f64) -> f64 {
    parent_score + logprob
}

/// Append-only search DAG with canonical-key merging and cycle pruning.
#[derive(Debug, Clone)]
pub struct SearchDag {
    nodes: Vec<SearchNode>,
    edges: Vec<SearchEdge>,
    /// Outgoing adjacency (targets of both edge kinds), for ancestry checks.
    out: Vec<Vec<NodeId>>,
    /// For each node, the edge that discovered it (None for the root).
    tree_parent: Vec<Option<usize>>,
    /// canonical key → node id, for every node that carries a state.
    key_index: HashMap<StateKey, NodeId>,
    next_expansion: u32,
}

impl SearchDag {
    /// Create a DAG holding just the root state (score 0, depth 0).
    pub fn new(root_state: ProofState) -> Self {
        let key = root_state.canonical_key();
        let root = SearchNode {
            id: 0,
            state: Some(root_state),
            status: NodeStatus::Open,
            score: 0.0,
            depth: 0,
            expansion_order: None,
        };
        SearchDag {
            nodes: vec![root],
            edges: Vec::new(),
            out: vec![Vec::new()],
            tree_parent: vec![None],
            key_index: HashMap::from([(key, 0)]),
            next_expansion: 0,
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &SearchNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[SearchNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[SearchEdge] {
        &self.edges
    }

    /// Node currently holding `key`, if any.
    pub fn node_for_key(&self, key: StateKey) -> Option<NodeId> {
        self.key_index.get(&key).copied()
    }

    /// Number of expansions recorded so far.
    pub fn expansions(&self) -> u32 {
        self.next_expansion
    }

    /// Record the result of executing `step` (with policy logprob `logprob`)
    /// from `parent`. The child's score contribution equals `logprob`; see
    /// [`SearchDag::add_child_weighted`] for scorers that decouple the two.
    ///
    /// Returns the id of the node the edge points at and the edge kind.
    pub fn add_child(
        &mut self,
        parent: NodeId,
        step: ProofStep,
        logprob: f64,
        result: &StepResult,
    ) -> Result<(NodeId, EdgeKind), DagError> {
        self.add_child_weighted(parent, step, logprob, logprob, result)
    }

    /// Like [`SearchDag::add_child`], but with an explicit score
    /// contribution: the edge is annotated with `edge_logprob` while the
    /// child's score is `compute_score(parent.score, score_contribution)`.
    pub fn add_child_weighted(
        &mut self,
        parent: NodeId,
        step: ProofStep,
        edge_logprob: f64,
        score_contribution: f64,
        result: &StepResult,
    ) -> Result<(NodeId, EdgeKind), DagError> {
        let parent_node = self.nodes.get(parent).ok_or(DagError::UnknownNode(parent))?;
        if parent_node.status.is_terminal() {
            return Err(DagError::ParentNotOpen(parent));
        }
        let score = compute_score(parent_node.score, score_contribution);
        let depth = parent_node.depth + 1;

        match result {
            StepResult::NewState(state) => {
                let key = state.canonical_key();
                if let Some(existing) = self.node_for_key(key) {
                    if existing == parent || self.reaches(existing, parent) {
                        // Adding parent → existing would close a cycle; keep
                        // the failed branch visible as a pruned terminal.
                        let id = self.push_node(
                            None,
                            NodeStatus::Error(ErrorKind::CyclePruned),
                            score,
                            depth,
                        );
                        self.push_edge(parent, id, step, edge_logprob, EdgeKind::Tree);
                        Ok((id, EdgeKind::Tree))
                    } else {
                        // Known state, no cycle: record the re-arrival only.
                        // The existing node keeps its original score.
                        self.push_edge(parent, existing, step, edge_logprob, EdgeKind::Back);
                        Ok((existing, EdgeKind::Back))
                    }
                } else {
                    let id = self.push_node(Some(state.clone()), NodeStatus::Open, score, depth);
                    self.key_index.insert(key, id);
                    self.push_edge(parent, id, step, edge_logprob, EdgeKind::Tree);
                    Ok((id, EdgeKind::Tree))
                }
            }
            StepResult::ProofFinished => {
                let id = self.push_node(None, NodeStatus::ProofFinished, score, depth);
                self.push_edge(parent, id, step, edge_logprob, EdgeKind::Tree);
                Ok((id, EdgeKind::Tree))
            }
            StepResult::StepError { kind, .. } => {
                let id = self.push_node(None, NodeStatus::Error(*kind), score, depth);
                self.push_edge(parent, id, step, edge_logprob, EdgeKind::Tree);
                Ok((id, EdgeKind::Tree))
            }
            StepResult::StepTimeout => {
                let id = self.push_node(None, NodeStatus::Error(ErrorKind::Timeout), score, depth);
                self.push_edge(parent, id, step, edge_logprob, EdgeKind::Tree);
                Ok((id, EdgeKind::Tree))
            }
        }
    }

    /// Stamp the next expansion ordinal on `id` and return it.
    pub fn mark_expanded(&mut self, id: NodeId) -> u32 {
        let order = self.next_expansion;
        self.nodes[id].expansion_order = Some(order);
        self.next_expansion += 1;
        order
    }

    /// The proof: the step sequence along Tree edges from the root to a
    /// finished node.
    pub fn extract_proof(&self, finished: NodeId) -> Result<Vec<ProofStep>, DagError> {
        let node = self.nodes.get(finished).ok_or(DagError::UnknownNode(finished))?;
        if node.status != NodeStatus::ProofFinished {
            return Err(DagError::NotFinished(finished));
        }
        let mut steps = Vec::new();
        let mut current = finished;
        while current != self.root() {
            let edge_idx = self.tree_parent[current].ok_or(DagError::NoTreePath(finished))?;
            let edge = &self.edges[edge_idx];
            steps.push(edge.step.clone());
            current = edge.from;
        }
        steps.reverse();
        Ok(steps)
    }

    /// True iff `to` is reachable from `from` over one or more edges (of
    /// either kind).
    pub fn reaches(&self, from: NodeId, to: NodeId) -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; self.nodes.len()];
        while let Some(n) = stack.pop() {
            for &next in &self.out[n] {
                if next == to {
                    return true;
                }
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        false
    }

    /// Kahn's algorithm; true when the edge set is cycle-free. The DAG is
    /// acyclic by construction — this exists so tests and fuzzing can verify
    /// the invariant from the outside.
    pub fn is_acyclic(&self) -> bool {
        let mut indegree = vec![0usize; self.nodes.len()];
        for e in &self.edges {
            indegree[e.to] += 1;
        }
        let mut ready: Vec<NodeId> =
            (0..self.nodes.len()).filter(|&n| indegree[n] == 0).collect();
        let mut visited = 0usize;
        while let Some(n) = ready.pop() {
            visited += 1;
            for &next in &self.out[n] {
                indegree[next] -= 1;
                if indegree[next] == 0 {
                    ready.push(next);
                }
            }
        }
        visited == self.nodes.len()
    }

    /// (open, error, finished) node counts.
    pub fn status_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for n in &self.nodes {
            match n.status {
                NodeStatus::Open => counts.0 += 1,
                NodeStatus::Error(_) => counts.1 += 1,
                NodeStatus::ProofFinished => counts.2 += 1,
            }
        }
        counts
    }

    /// Maximum node depth present in the DAG.
    pub fn max_depth(&self) -> u32 {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// The edge that discovered `id`, if any (None for the root).
    pub fn tree_parent_edge(&self, id: NodeId) -> Option<&SearchEdge> {
        self.tree_parent[id].map(|i| &self.edges[i])
    }

    fn push_node(
        &mut self,
        state: Option<ProofState>,
        status: NodeStatus,
        score: f64,
        depth: u32,
    ) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(SearchNode { id, state, status, score, depth, expansion_order: None });
        self.out.push(Vec::new());
        self.tree_parent.push(None);
        id
    }

    fn push_edge(
        &mut self,
        from: NodeId,
        to: NodeId,
        step: ProofStep,
        beam_prob: f64,
        kind: EdgeKind,
    ) {
        let idx = self.edges.len();
        self.edges.push(SearchEdge { from, to, step, beam_prob, kind });
        self.out[from].push(to);
        if kind == EdgeKind::Tree {
            debug_assert!(self.tree_parent[to].is_none(), "node {to} discovered twice");
            self.tree_parent[to] = Some(idx);
        }
    }

    /// Rebuild a DAG from raw parts (used by the JSON importer). Edges must
    /// reference valid nodes and contain exactly one Tree edge per non-root
    /// node.
    pub(crate) fn from_parts(
        nodes: Vec<SearchNode>,
        edges: Vec<SearchEdge>,
        next_expansion: u32,
    ) -> Result<Self, DagError> {
        let n = nodes.len();
        let mut out = vec![Vec::new(); n];
        let mut tree_parent = vec![None; n];
        let mut key_index = HashMap::new();
        for (idx, e) in edges.iter().enumerate() {
            if e.from >= n {
                return Err(DagError::UnknownNode(e.from));
            }
            if e.to >= n {
                return Err(DagError::UnknownNode(e.to));
            }
            out[e.from].push(e.to);
            if e.kind == EdgeKind::Tree {
                tree_parent[e.to] = Some(idx);
            }
        }
        for node in &nodes {
            if let Some(state) = &node.state {
                key_index.insert(state.canonical_key(), node.id);
            }
        }
        Ok(SearchDag { nodes, edges, out, tree_parent, key_index, next_expansion })
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::canonical_state_key;

    fn state(id: u64, goal: &str, depth: u32) -> ProofState {
        ProofState::new(id, goal, depth)
    }

    fn new_state_result(id: u64, goal: &str, depth: u32) -> StepResult {
        StepResult::NewState(state(id, goal, depth))
    }

    #[test]
    fn chain_scores_are_path_sums() {
        let mut dag = SearchDag::new(state(0, "g0", 0));
        let (a, _) = dag
            .add_child(dag.root(), ProofStep::from_full_text("s1"), -0.5, &new_state_result(1, "g1", 1))
            .unwrap();
        let (b, _) = dag
            .add_child(a, ProofStep::from_full_text("s2"), -0.25, &new_state_result(2, "g2", 2))
            .unwrap();
        let (c, _) = dag
            .add_child(b, ProofStep::from_full_text("s3"), -0.1, &new_state_result(3, "g3", 3))
            .unwrap();
        assert_eq!(dag.node(dag.root()).score, 0.0);
        assert!((dag.node(a).score - -0.5).abs() < 1e-15);
        assert!((dag.node(b).score - -0.75).abs() < 1e-15);
        assert!((dag.node(c).score - -0.85).abs() < 1e-15);
        assert_eq!(dag.node(c).depth, 3);
    }

    #[test]
    fn second_arrival_at_known_goal_is_a_back_edge() {
        let mut dag = SearchDag::new(state(0, "root", 0));
        let (a, _) = dag
            .add_child(dag.root(), ProofStep::from_full_text("s1"), -0.5, &new_state_result(1, "left", 1))
            .unwrap();
        let (b, _) = dag
            .add_child(dag.root(), ProofStep::from_full_text("s2"), -0.6, &new_state_result(2, "right", 1))
            .unwrap();
        // Both branches now reach a goal that renders with different spacing
        // but normalizes identically.
        let (m1, k1) = dag
            .add_child(a, ProofStep::from_full_text("s3"), -0.1, &new_state_result(3, "x = x", 2))
            .unwrap();
        let (m2, k2) = dag
            .add_child(b, ProofStep::from_full_text("s4"), -0.2, &new_state_result(4, "x  =  x ", 2))
            .unwrap();
        assert_eq!(k1, EdgeKind::Tree);
        assert_eq!(k2, EdgeKind::Back);
        assert_eq!(m1, m2, "merged into a single node");
        // The back edge never updates the target's score.
        assert!((dag.node(m1).score - (-0.5 - 0.1)).abs() < 1e-15);
        assert_eq!(dag.nodes().len(), 4);
        assert_eq!(dag.edges().len(), 4);
        assert!(dag.is_acyclic());
    }

    #[test]
    fn rediscovering_an_ancestor_is_cycle_pruned() {
        let mut dag = SearchDag::new(state(0, "a + b = c", 0));
        let (child, _) = dag
            .add_child(dag.root(), ProofStep::from_full_text("swap"), -0.3, &new_state_result(1, "b + a = c", 1))
            .unwrap();
        // Swapping back reproduces the root goal: that is the ancestor of
        // `child`, so the branch is pruned as a terminal.
        let (pruned, kind) = dag
            .add_child(child, ProofStep::from_full_text("swap"), -0.3, &new_state_result(2, "a + b = c", 2))
            .unwrap();
        assert_eq!(kind, EdgeKind::Tree);
        assert_eq!(dag.node(pruned).status, NodeStatus::Error(ErrorKind::CyclePruned));
        assert!(dag.node(pruned).state.is_none());
        assert!(dag.is_acyclic());
        // Self-loops (step does not change the goal) are cycles too.
        let (selfloop, _) = dag
            .add_child(child, ProofStep::from_full_text("noop"), -0.1, &new_state_result(3, "b + a = c", 2))
            .unwrap();
        assert_eq!(dag.node(selfloop).status, NodeStatus::Error(ErrorKind::CyclePruned));
    }

    #[test]
    fn terminal_results_create_terminal_nodes() {
        let mut dag = SearchDag::new(state(0, "g", 0));
        let (fin, _) = dag
            .add_child(dag.root(), ProofStep::from_full_text("refl"), -0.05, &StepResult::ProofFinished)
            .unwrap();
        assert_eq!(dag.node(fin).status, NodeStatus::ProofFinished);
        let (err, _) = dag
            .add_child(
                dag.root(),
                ProofStep::from_full_text("bad"),
                -1.0,
                &StepResult::error(ErrorKind::Syntax, "unknown tactic"),
            )
            .unwrap();
        assert_eq!(dag.node(err).status, NodeStatus::Error(ErrorKind::Syntax));
        let (to, _) = dag
            .add_child(dag.root(), ProofStep::from_full_text("spin"), -2.0, &StepResult::StepTimeout)
            .unwrap();
        assert_eq!(dag.node(to).status, NodeStatus::Error(ErrorKind::Timeout));
        assert_eq!(dag.status_counts(), (1, 2, 1));
    }

    #[test]
    fn children_of_terminals_are_rejected() {
        let mut dag = SearchDag::new(state(0, "g", 0));
        let (fin, _) = dag
            .add_child(dag.root(), ProofStep::from_full_text("refl"), 0.0, &StepResult::ProofFinished)
            .unwrap();
        let err = dag
            .add_child(fin, ProofStep::from_full_text("more"), -0.1, &new_state_result(9, "h", 2))
            .unwrap_err();
        assert!(matches!(err, DagError::ParentNotOpen(n) if n == fin));
        let err = dag
            .add_child(99, ProofStep::from_full_text("s"), -0.1, &StepResult::ProofFinished)
            .unwrap_err();
        assert!(matches!(err, DagError::UnknownNode(99)));
    }

    #[test]
    fn extract_proof_returns_root_to_finish_steps() {
        let mut dag = SearchDag::new(state(0, "x + 0 = x", 0));
        let (a, _) = dag
            .add_child(
                dag.root(),
                ProofStep::new("rw add_zero", "l"),
                -0.2,
                &new_state_result(1, "x = x", 1),
            )
            .unwrap();
        // A decoy sibling, to make sure extraction follows tree parents.
        dag.add_child(dag.root(), ProofStep::new("rw comm_add", "l"), -0.9, &new_state_result(2, "0 + x = x", 1))
            .unwrap();
        let (fin, _) = dag
            .add_child(a, ProofStep::new("refl", ""), -0.05, &StepResult::ProofFinished)
            .unwrap();
        let proof = dag.extract_proof(fin).unwrap();
        let texts: Vec<&str> = proof.iter().map(|s| s.full_text.as_str()).collect();
        assert_eq!(texts, vec!["rw add_zero l", "refl"]);
        // Non-finished nodes are rejected.
        assert!(matches!(dag.extract_proof(a), Err(DagError::NotFinished(_))));
    }

    #[test]
    fn weighted_children_separate_edge_and_score_contributions() {
        let mut dag = SearchDag::new(state(0, "g", 0));
        let (a, _) = dag
            .add_child_weighted(
                dag.root(),
                ProofStep::from_full_text("s"),
                -0.2,  // edge annotation
                -0.3,  // score contribution
                &new_state_result(1, "h", 1),
            )
            .unwrap();
        assert!((dag.node(a).score - -0.3).abs() < 1e-15);
        assert!((dag.edges()[0].beam_prob - -0.2).abs() < 1e-15);
    }

    #[test]
    fn expansion_orders_are_a_gapless_prefix() {
        let mut dag = SearchDag::new(state(0, "g", 0));
        let (a, _) = dag
            .add_child(dag.root(), ProofStep::from_full_text("s"), -0.1, &new_state_result(1, "h", 1))
            .unwrap();
        assert_eq!(dag.mark_expanded(dag.root()), 0);
        assert_eq!(dag.mark_expanded(a), 1);
        assert_eq!(dag.expansions(), 2);
    }

    #[test]
    fn key_index_is_injective_under_random_growth() {
        // Seeded random growth: repeatedly attach children with goals drawn
        // from a small alphabet so merges, cycles, and fresh nodes all occur.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for round in 0..50 {
            let mut dag = SearchDag::new(state(0, "goal-0", 0));
            let mut open: Vec<NodeId> = vec![dag.root()];
            let mut next_id = 1u64;
            for _ in 0..60 {
                let parent = open[rng.gen_range(0..open.len())];
                if dag.node(parent).status.is_terminal() {
                    continue;
                }
                let goal = format!("goal-{}", rng.gen_range(0..12u8));
                let depth = dag.node(parent).depth + 1;
                let result = match rng.gen_range(0..10u8) {
                    0 => StepResult::error(ErrorKind::Syntax, "x"),
                    1 => StepResult::StepTimeout,
                    _ => StepResult::NewState(ProofState::new(next_id, goal, depth)),
                };
                next_id += 1;
                let lp = -rng.gen_range(0.01..2.0);
                let (child, kind) = dag
                    .add_child(parent, ProofStep::from_full_text("s"), lp, &result)
                    .unwrap();
                if kind == EdgeKind::Tree && dag.node(child).status == NodeStatus::Open {
                    open.push(child);
                }
            }
            assert!(dag.is_acyclic(), "round {round} grew a cycle");
            // One node per canonical key among state-carrying nodes.
            let mut seen = std::collections::HashSet::new();
            for n in dag.nodes() {
                if let Some(st) = &n.state {
                    assert!(
                        seen.insert(canonical_state_key(&st.goal_text)),
                        "round {round}: duplicate canonical key for node {}",
                        n.id
                    );
                }
            }
        }
    }
}
