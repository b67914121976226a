//! Proof-state exploration for data synthesis.
//!
//! Starting from a seed theorem, the explorer walks proof states breadth-
//! first: each expansion proposes a beam of tactic tokens from a fixed
//! tactic set, completes their premises, executes every completed step, and
//! records one [`Transition`] per execution — valid and invalid alike.
//! Only a pruned subset of the valid new states is enqueued (the top-β by
//! logprob plus a uniform sample of the rest, up to ⌈αB⌉), and finding a new
//! finish path shrinks the remaining expansion budget by the factor γ.

use crate::policy::{PolicyBackend, TacticSet};
use crate::prover::{ProverBackend, StepResult, TheoremSpec};
use crate::search::ceil_quota;
use crate::state::{ProofState, ProofStep, StateKey};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet, VecDeque};
use std::time::Duration;

// ---------------------------------------------------------------------------
// transitions
// ---------------------------------------------------------------------------

/// What one executed step produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransitionChild {
    /// A legal new proof state with this goal text.
    State(String),
    /// The step closed the proof.
    Finished,
    /// The step failed (syntax error, inapplicable, timeout, crash, …).
    Error,
}

/// One recorded (state, step, outcome) triple from an exploration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "WireTransition", try_from = "WireTransition")]
pub struct Transition {
    /// Name of the seed theorem this exploration started from.
    pub seed_name: String,
    pub parent: ProofState,
    pub step: ProofStep,
    pub logprob: f64,
    pub child: TransitionChild,
}

impl Transition {
    /// A transition is valid exactly when its child is a legal state or a
    /// finished proof.
    pub fn valid(&self) -> bool {
        !matches!(self.child, TransitionChild::Error)
    }

    /// The wire word for the child outcome.
    pub fn status_word(&self) -> &'static str {
        match self.child {
            TransitionChild::State(_) => "state",
            TransitionChild::Finished => "finished",
            TransitionChild::Error => "error",
        }
    }

    fn from_step_result(
        seed_name: &str,
        parent: &ProofState,
        step: ProofStep,
        logprob: f64,
        result: &StepResult,
    ) -> Transition {
        let child = match result {
            StepResult::NewState(s) => TransitionChild::State(s.goal_text.clone()),
            StepResult::ProofFinished => TransitionChild::Finished,
            StepResult::StepError { .. } | StepResult::StepTimeout => TransitionChild::Error,
        };
        Transition {
            seed_name: seed_name.to_string(),
            parent: parent.clone(),
            step,
            logprob,
            child,
        }
    }
}

/// The JSONL shape of a [`Transition`].
#[derive(Serialize, Deserialize)]
struct WireTransition {
    seed: String,
    parent_goal: String,
    tactic: String,
    premise: String,
    step: String,
    logprob: f64,
    child_goal: Option<String>,
    status: String,
    valid: bool,
}

impl From<Transition> for WireTransition {
    fn from(t: Transition) -> WireTransition {
        let valid = t.valid();
        let status = t.status_word().to_string();
        let child_goal = match t.child {
            TransitionChild::State(goal) => Some(goal),
            _ => None,
        };
        WireTransition {
            seed: t.seed_name,
            parent_goal: t.parent.goal_text,
            tactic: t.step.tactic,
            premise: t.step.premise,
            step: t.step.full_text,
            logprob: t.logprob,
            child_goal,
            status,
            valid,
        }
    }
}

impl TryFrom<WireTransition> for Transition {
    type Error = String;

    fn try_from(w: WireTransition) -> Result<Transition, String> {
        let child = match w.status.as_str() {
            "state" => TransitionChild::State(
                w.child_goal
                    .ok_or_else(|| "status \"state\" requires a child_goal".to_string())?,
            ),
            "finished" => TransitionChild::Finished,
            "error" => TransitionChild::Error,
            other => return Err(format!("unknown transition status {other:?}")),
        };
        let valid = !matches!(child, TransitionChild::Error);
        if valid != w.valid {
            return Err(format!(
                "valid flag {} contradicts status {:?}",
                w.valid, w.status
            ));
        }
        if !w.step.starts_with(&w.tactic) {
            return Err(format!(
                "step text {:?} does not start with tactic {:?}",
                w.step, w.tactic
            ));
        }
        Ok(Transition {
            seed_name: w.seed,
            parent: ProofState::new(0, w.parent_goal, 0),
            step: ProofStep { tactic: w.tactic, premise: w.premise, full_text: w.step },
            logprob: w.logprob,
            child,
        })
    }
}

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

/// Exploration knobs.
#[derive(Debug, Clone)]
pub struct ExploreConfig {
    /// Tactic candidates requested per expansion.
    pub beam: u32,
    /// Fraction of the beam retained for enqueueing (quota ⌈αB⌉).
    pub alpha: f64,
    /// Of the quota, how many slots go to the highest-logprob children;
    /// `None` means half the quota.
    pub beta: Option<usize>,
    /// Budget decay factor applied when an expansion finds a new finish path.
    pub gamma: f64,
    /// Maximum expansions for one seed.
    pub budget: u32,
    pub seed: u64,
    /// Wall-clock limit per executed step.
    pub step_timeout: Duration,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            beam: 32,
            alpha: 0.25,
            beta: None,
            gamma: 0.9,
            budget: 100,
            seed: 0,
            step_timeout: Duration::from_secs(20),
        }
    }
}

impl ExploreConfig {
    /// The enqueue quota ⌈αB⌉.
    pub fn quota(&self) -> usize {
        ceil_quota(self.alpha * f64::from(self.beam))
    }

    /// The top-logprob keep count: configured β, or half the quota.
    pub fn beta_value(&self) -> usize {
        self.beta.unwrap_or_else(|| ceil_quota(self.quota() as f64 / 2.0))
    }

    /// Check 0 < α ≤ 1, β ≤ ⌈αB⌉, 0 < γ ≤ 1, beam ≥ 1.
    pub fn validate(&self) -> Result<(), String> {
        if self.beam < 1 {
            return Err("exploration beam must be >= 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("alpha {} must be in (0, 1]", self.alpha));
        }
        if let Some(beta) = self.beta {
            if beta > self.quota() {
                return Err(format!(
                    "beta {beta} exceeds the enqueue quota ceil(alpha*B) = {}",
                    self.quota()
                ));
            }
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma {} must be in (0, 1]", self.gamma));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// branch pruning
// ---------------------------------------------------------------------------

/// Keep at most `quota` of `children`: all of them when under quota,
/// otherwise the `beta` highest-logprob entries plus a uniform random sample
/// of `quota − beta` from the remainder. Output preserves the input order.
pub fn prune_branches<T>(
    children: Vec<(T, f64)>,
    quota: usize,
    beta: usize,
    rng: &mut impl rand::Rng,
) -> Vec<T> {
    if children.len() <= quota {
        return children.into_iter().map(|(c, _)| c).collect();
    }
    // Rank indices by logprob descending, ties broken by original position.
    let mut ranked: Vec<usize> = (0..children.len()).collect();
    ranked.sort_by(|&a, &b| {
        children[b]
            .1
            .partial_cmp(&children[a].1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let beta = beta.min(quota);
    let mut keep = vec![false; children.len()];
    for &i in ranked.iter().take(beta) {
        keep[i] = true;
    }
    let remainder: Vec<usize> = ranked.iter().skip(beta).copied().collect();
    let sample_size = (quota - beta).min(remainder.len());
    if sample_size > 0 {
        for pick in rand::seq::index::sample(rng, remainder.len(), sample_size) {
            keep[remainder[pick]] = true;
        }
    }
    children
        .into_iter()
        .enumerate()
        .filter_map(|(i, (c, _))| keep[i].then_some(c))
        .collect()
}

// ---------------------------------------------------------------------------
// exploration
// ---------------------------------------------------------------------------

/// Explore proof states reachable from `seed`, breadth-first, recording
/// every executed step as a [`Transition`].
///
/// Backend faults are absorbed: a failed proposal contributes no
/// transitions for that expansion, a failed step becomes an invalid
/// transition. Only theorem initialization errors are fatal, and those are
/// reported by returning an empty transition list with a logged warning —
/// exploration is a bulk data process, not a correctness gate.
pub fn explore_theorem(
    seed: &TheoremSpec,
    policy: &dyn PolicyBackend,
    prover: &mut dyn ProverBackend,
    cfg: &ExploreConfig,
    tactics: &TacticSet,
) -> Vec<Transition> {
    assert!(!tactics.is_empty(), "exploration requires a non-empty tactic set");
    if let Err(e) = cfg.validate() {
        panic!("invalid exploration config: {e}");
    }
    let root = match prover.init_theorem(seed) {
        Ok(root) => root,
        Err(e) => {
            log::warn!("cannot initialize {:?}: {e}; skipping seed", seed.name);
            return Vec::new();
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut transitions = Vec::new();
    let mut queue: VecDeque<(ProofState, Vec<String>)> = VecDeque::new();
    let mut enqueued: HashSet<StateKey> = HashSet::new();
    let mut finish_paths: HashSet<Vec<String>> = HashSet::new();
    let mut next_state_id = root.state_id + 1;
    enqueued.insert(root.canonical_key());
    queue.push_back((root, Vec::new()));

    let mut remaining = cfg.budget;
    let mut consumed: u32 = 0;

    while consumed < remaining {
        let Some((state, path)) = queue.pop_front() else { break };
        consumed += 1;

        let proposed = match policy.propose_tactics(&state, cfg.beam, tactics) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("tactic proposal failed at {:?}: {e}", state.goal_text);
                continue;
            }
        };
        let tokens: Vec<String> = proposed.into_iter().map(|(t, _)| t).collect();
        let completed = match policy.complete_premises(&state, &tokens) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("premise completion failed at {:?}: {e}", state.goal_text);
                continue;
            }
        };

        // Execute every completed step; collect the valid new states.
        let mut new_children: Vec<((ProofState, Vec<String>), f64)> = Vec::new();
        let mut seen_this_expansion: HashSet<StateKey> = HashSet::new();
        let mut found_new_finish = false;
        for comp in completed {
            let result = prover.run_step(&state, &comp.step, cfg.step_timeout);
            transitions.push(Transition::from_step_result(
                &seed.name,
                &state,
                comp.step.clone(),
                comp.logprob,
                &result,
            ));
            match result {
                StepResult::NewState(child_state) => {
                    let mut child_path = path.clone();
                    child_path.push(comp.step.full_text.clone());
                    // Each distinct child goal is a pruning candidate once
                    // per expansion.
                    if seen_this_expansion.insert(child_state.canonical_key()) {
                        let child = ProofState::new(
                            next_state_id,
                            child_state.goal_text.clone(),
                            state.depth + 1,
                        );
                        next_state_id += 1;
                        new_children.push(((child, child_path), comp.logprob));
                    }
                }
                StepResult::ProofFinished => {
                    let mut finish_path = path.clone();
                    finish_path.push(comp.step.full_text.clone());
                    if finish_paths.insert(finish_path) {
                        found_new_finish = true;
                    }
                }
                StepResult::StepError { .. } | StepResult::StepTimeout => {}
            }
        }

        for (child, child_path) in
            prune_branches(new_children, cfg.quota(), cfg.beta_value(), &mut rng)
        {
            if enqueued.insert(child.canonical_key()) {
                queue.push_back((child, child_path));
            }
        }

        if found_new_finish {
            remaining = (f64::from(remaining) * cfg.gamma).floor() as u32;
        }
    }
    transitions
}

// ---------------------------------------------------------------------------
// tactic-set construction
// ---------------------------------------------------------------------------

/// A tactic set distilled from a step corpus, with parse statistics.
#[derive(Debug, Clone)]
pub struct TacticSetBuild {
    pub set: TacticSet,
    /// Steps that yielded a leading token.
    pub parsed: usize,
    /// Steps skipped because no leading token could be extracted.
    pub skipped: usize,
    /// Distinct tokens seen before the frequency cutoff.
    pub distinct: usize,
}

/// Distill a tactic set from raw step texts: extract each step's leading
/// token, rank tokens by frequency (ties: first appearance), and keep the
/// shortest prefix whose cumulative relative frequency reaches `p`.
pub fn build_tactic_set(step_corpus: &[String], p: f64) -> Result<TacticSetBuild, String> {
    if step_corpus.is_empty() {
        return Err("step corpus is empty".into());
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(format!("frequency threshold {p} must be in (0, 1]"));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    let mut first_seen: Vec<String> = Vec::new();
    let mut parsed = 0usize;
    let mut skipped = 0usize;
    for raw in step_corpus {
        let step = ProofStep::from_full_text(raw);
        if step.tactic.is_empty() {
            skipped += 1;
            continue;
        }
        parsed += 1;
        let entry = counts.entry(step.tactic.clone()).or_insert(0);
        if *entry == 0 {
            first_seen.push(step.tactic.clone());
        }
        *entry += 1;
    }
    if parsed == 0 {
        return Err("no step in the corpus has a leading token".into());
    }

    let mut ranked: Vec<(String, u64)> = first_seen
        .iter()
        .map(|t| (t.clone(), counts[t]))
        .collect();
    // Stable sort: frequency descending, first appearance preserved on ties.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));

    let total = parsed as f64;
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for (token, count) in &ranked {
        kept.push(token.clone());
        mass += *count as f64 / total;
        if mass >= p - 1e-12 {
            break;
        }
    }
    let set = TacticSet::new(
        kept,
        format!("frequency prefix over {parsed} steps"),
        Some(p),
    )
    .map_err(|e| e.to_string())?;
    Ok(TacticSetBuild { set, parsed, skipped, distinct: ranked.len() })
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
