//! The policy contract: beam proposal, constrained tactic decoding, and
//! premise completion.
//!
//! A policy suggests proof steps for a goal. Three implementations ship:
//!
//! - [`ScriptedPolicy`]: a deterministic lookup table, optionally with seeded
//!   Gaussian noise on logprobs, for tests and desk-scale runs.
//! - [`ExhaustiveToyPolicy`]: enumerates every applicable toy rewrite at a
//!   goal with uniform logprobs; the reference policy for oracle comparisons.
//! - [`RemotePolicy`]: an HTTP client for OpenAI-style completion servers.
//!
//! Candidate generation happens in one of two shapes. `propose` asks for the
//! best `beam_size` whole steps directly. The two-phase shape used for data
//! synthesis first picks tactic operators out of a fixed [`TacticSet`]
//! (`propose_tactics`), then asks the policy to finish each tactic with its
//! premise (`complete_premises`).

pub mod exhaustive;
pub mod remote;
pub mod scripted;

pub use exhaustive::ExhaustiveToyPolicy;
pub use remote::{RemoteConfig, RemotePolicy};
pub use scripted::ScriptedPolicy;

use crate::state::{normalize_goal, ProofState, ProofStep, ScoredCandidate};
use serde::{Deserialize, Serialize};
use std::collections::hash_map::Entry;
use std::collections::HashMap;
use thiserror::Error;

/// Why a policy call failed. Transport errors are retriable; the search
/// layer treats a policy that stays unreachable as yielding zero candidates
/// rather than aborting a whole run.
#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy transport: {0}")]
    Transport(String),
    #[error("policy table: {0}")]
    Table(String),
}

// ---------------------------------------------------------------------------
// tactic sets
// ---------------------------------------------------------------------------

/// An ordered set 𝒯 of distinct tactic tokens, with provenance describing
/// where it came from and the nucleus threshold used to build it.
///
/// A "token" here is the operator portion a step must begin with; members may
/// contain spaces (the toy prover's `rw add_zero` is one token of its set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TacticSet {
    pub tactics: Vec<String>,
    /// Human-readable origin, e.g. a corpus filename.
    pub source: String,
    /// Nucleus threshold the set was filtered with, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl TacticSet {
    /// Build a set, validating that it is non-empty and duplicate-free.
    pub fn new(
        tactics: Vec<String>,
        source: impl Into<String>,
        threshold: Option<f64>,
    ) -> Result<TacticSet, PolicyError> {
        if tactics.is_empty() {
            return Err(PolicyError::Table("tactic set is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for t in &tactics {
            if t.trim().is_empty() {
                return Err(PolicyError::Table("tactic set contains a blank token".into()));
            }
            if !seen.insert(t.as_str()) {
                return Err(PolicyError::Table(format!("duplicate tactic token {t:?}")));
            }
        }
        Ok(TacticSet { tactics, source: source.into(), threshold })
    }

    /// Parse from the JSON document format used on disk.
    pub fn from_json_str(text: &str) -> Result<TacticSet, PolicyError> {
        let raw: TacticSet = serde_json::from_str(text)
            .map_err(|e| PolicyError::Table(format!("bad tactic set: {e}")))?;
        TacticSet::new(raw.tactics, raw.source, raw.threshold)
    }

    /// Load from a JSON file.
    pub fn load(path: &std::path::Path) -> Result<TacticSet, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Table(format!("cannot read {}: {e}", path.display())))?;
        TacticSet::from_json_str(&text)
    }

    pub fn len(&self) -> usize {
        self.tactics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tactics.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tactics.iter().any(|t| t == token)
    }

    /// The longest member this step text begins with (on a word boundary),
    /// if any. `"rw add_zero l"` matches member `"rw add_zero"` over `"rw"`.
    pub fn leading_token_of(&self, step_text: &str) -> Option<&str> {
        let text = crate::state::normalize_step_text(step_text);
        self.tactics
            .iter()
            .filter(|t| text == **t || text.starts_with(&format!("{t} ")))
            .map(|t| t.as_str())
            .max_by_key(|t| t.len())
    }
}

// ---------------------------------------------------------------------------
// policy contract
// ---------------------------------------------------------------------------

/// One tactic finished with its premise by `complete_premises`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedStep {
    pub step: ProofStep,
    /// The policy's log joint probability of the whole step.
    pub logprob: f64,
    /// True when the policy could not produce a premise for this tactic; the
    /// step is still emitted (with an empty premise) so the prover can reject
    /// it rather than the whole batch failing.
    pub premise_failed: bool,
}

/// A proof-step suggestion backend.
///
/// Implementations must tolerate concurrent calls (`Send + Sync`): searches
/// over distinct theorems share one policy.
pub trait PolicyBackend: Send + Sync {
    /// Up to `beam_size` distinct candidate steps for this goal, sorted by
    /// logprob descending (ties by first appearance), duplicates merged
    /// keeping the maximum logprob. An empty response is legal and simply
    /// yields no children.
    fn propose(
        &self,
        state: &ProofState,
        beam_size: u32,
    ) -> Result<Vec<ScoredCandidate>, PolicyError>;

    /// Constrained decoding over 𝒯: exactly `min(beam_size, |𝒯|)` distinct
    /// members of `constraint`, best first, each with a logprob ≤ 0.
    fn propose_tactics(
        &self,
        state: &ProofState,
        beam_size: u32,
        constraint: &TacticSet,
    ) -> Result<Vec<(String, f64)>, PolicyError>;

    /// Finish each tactic token with a premise: one [`CompletedStep`] per
    /// input, same order. Per-tactic failures set `premise_failed` instead of
    /// failing the batch.
    fn complete_premises(
        &self,
        state: &ProofState,
        tactics: &[String],
    ) -> Result<Vec<CompletedStep>, PolicyError>;

    /// A copy of this policy with a fresh noise/sampling seed. Deterministic
    /// backends without noise return an identical copy.
    fn reseeded(&self, seed: u64) -> Box<dyn PolicyBackend>;
}

/// Merge duplicate candidates (same normalized step text) keeping the
/// maximum logprob, then sort by logprob descending with ties broken by
/// first appearance.
pub fn dedup_and_rank(candidates: Vec<ScoredCandidate>) -> Vec<ScoredCandidate> {
    let mut kept: Vec<ScoredCandidate> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for cand in candidates {
        match index.entry(cand.step.normalized_text()) {
            Entry::Occupied(slot) => {
                let existing = &mut kept[*slot.get()];
                if cand.logprob > existing.logprob {
                    *existing = cand;
                }
            }
            Entry::Vacant(slot) => {
                slot.insert(kept.len());
                kept.push(cand);
            }
        }
    }
    kept.sort_by(|a, b| b.logprob.partial_cmp(&a.logprob).unwrap_or(std::cmp::Ordering::Equal));
    kept
}

/// Split a full step text into (requested tactic, premise remainder) given
/// the tactic token it is known to start with.
pub(crate) fn split_after_token(full_text: &str, token: &str) -> ProofStep {
    let text = crate::state::normalize_step_text(full_text);
    let premise = text
        .strip_prefix(token)
        .map(|rest| rest.trim_start().to_string())
        .unwrap_or_default();
    ProofStep::new(token, premise)
}

/// Normalized goal text used as the lookup key by table-driven policies.
pub(crate) fn goal_key(state: &ProofState) -> String {
    normalize_goal(&state.goal_text)
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
