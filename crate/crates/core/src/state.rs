//! Proof states, proof steps, and canonical state identity.
//!
//! Goal texts coming back from a prover are free-form: the same goal can be
//! rendered with different spacing depending on the pretty-printer mood of the
//! backend. Everything that needs to decide "have I seen this state before"
//! goes through [`canonical_state_key`], a digest of the whitespace-normalized
//! goal text, so that search-level dedup does not depend on rendering quirks.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;

/// Classification of failed proof steps and failed search nodes.
///
/// `Syntax`, `Inapplicable` and `Crash` originate from a prover backend;
/// `Timeout` is enforced by the caller-side deadline; `CyclePruned` is
/// assigned by the search DAG when a step rediscovers one of its own
/// ancestors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    /// The step could not be parsed or was rejected outright by the prover.
    Syntax,
    /// The step parsed but does not apply at the given position.
    Inapplicable,
    /// The step exceeded its execution deadline.
    Timeout,
    /// The prover backend died while executing the step.
    Crash,
    /// The resulting state equals an ancestor of its parent; kept as a
    /// terminal so the failed branch stays visible.
    CyclePruned,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ErrorKind::Syntax => "syntax",
            ErrorKind::Inapplicable => "inapplicable",
            ErrorKind::Timeout => "timeout",
            ErrorKind::Crash => "crash",
            ErrorKind::CyclePruned => "cycle-pruned",
        };
        f.write_str(s)
    }
}

/// Whitespace-normalize a goal text: per line, runs of whitespace collapse to
/// a single space and leading/trailing whitespace is stripped; line structure
/// is preserved.
pub fn normalize_goal(text: &str) -> String {
    text.lines()
        .map(|line| line.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Whitespace-normalize a single-line step text (runs of whitespace collapse,
/// ends trimmed).
pub fn normalize_step_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Content-addressed identity of a proof state: SHA-256 over the normalized
/// goal text.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey([u8; 32]);

impl StateKey {
    /// Hex rendering of the full digest.
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateKey({}…)", &self.to_hex()[..12])
    }
}

impl fmt::Display for StateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Canonical key of a goal text. Two goals that differ only in whitespace
/// layout map to the same key.
pub fn canonical_state_key(goal_text: &str) -> StateKey {
    let normalized = normalize_goal(goal_text);
    let digest = Sha256::digest(normalized.as_bytes());
    StateKey(digest.into())
}

/// A single proof state handed out by a prover backend.
#[derive(Debug, Clone, PartialEq)]
pub struct ProofState {
    /// Backend-session-unique identifier.
    pub state_id: u64,
    /// Goal text exactly as rendered by the backend.
    pub goal_text: String,
    /// Number of steps from the root of this proof attempt.
    pub depth: u32,
    canonical_key: StateKey,
}

impl ProofState {
    pub fn new(state_id: u64, goal_text: impl Into<String>, depth: u32) -> Self {
        let goal_text = goal_text.into();
        let canonical_key = canonical_state_key(&goal_text);
        ProofState { state_id, goal_text, depth, canonical_key }
    }

    /// Canonical identity of this state (cached at construction).
    pub fn canonical_key(&self) -> StateKey {
        self.canonical_key
    }
}

/// A proof step: a tactic token plus its premise/argument text.
///
/// Invariant: `full_text` starts with `tactic`, and equals
/// `"{tactic} {premise}"` when the premise is non-empty (`tactic` alone
/// otherwise).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProofStep {
    pub tactic: String,
    pub premise: String,
    pub full_text: String,
}

impl ProofStep {
    /// Build a step from an explicit tactic/premise split.
    pub fn new(tactic: impl Into<String>, premise: impl Into<String>) -> Self {
        let tactic = tactic.into();
        let premise = premise.into();
        let full_text = if premise.is_empty() {
            tactic.clone()
        } else {
            format!("{tactic} {premise}")
        };
        ProofStep { tactic, premise, full_text }
    }

    /// Split a raw step text at the first whitespace: leading token becomes
    /// the tactic, the (trimmed) remainder the premise.
    pub fn from_full_text(text: &str) -> Self {
        let trimmed = text.trim();
        match trimmed.split_once(char::is_whitespace) {
            Some((tactic, rest)) => ProofStep::new(tactic, rest.trim()),
            None => ProofStep::new(trimmed, ""),
        }
    }

    /// Whitespace-normalized step text, used as the dedup identity of a step.
    pub fn normalized_text(&self) -> String {
        normalize_step_text(&self.full_text)
    }
}

impl fmt::Display for ProofStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.full_text)
    }
}

/// A proposed step together with the policy's log-probability for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub step: ProofStep,
    /// Cumulative log joint probability of the step's tokens; always ≤ 0.
    pub logprob: f64,
}

impl ScoredCandidate {
    pub fn new(step: ProofStep, logprob: f64) -> Self {
        debug_assert!(logprob <= 0.0, "candidate logprob must be ≤ 0, got {logprob}");
        ScoredCandidate { step, logprob }
    }
}

/// Prompt rendering used both when querying a policy model and when emitting
/// training records. The template is byte-stable; do not touch the framing
/// tokens without regenerating downstream datasets.
pub fn goal_prompt(goal_text: &str) -> String {
    format!("[GOAL]\n{goal_text}\n[PROOFSTEP]\n")
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identical_goal_texts_share_a_key() {
        assert_eq!(canonical_state_key("x + 0 = x"), canonical_state_key("x + 0 = x"));
    }

    #[test]
    fn whitespace_variants_share_a_key() {
        assert_eq!(canonical_state_key("x  =  x "), canonical_state_key("x = x"));
        assert_eq!(canonical_state_key("\ta = b\n"), canonical_state_key("a = b"));
        assert_eq!(
            canonical_state_key("h : p\n⊢  q"),
            canonical_state_key("h :   p\n⊢ q"),
        );
    }

    #[test]
    fn differing_goals_get_distinct_keys() {
        assert_ne!(canonical_state_key("x = x"), canonical_state_key("x = y"));
    }

    #[test]
    fn newline_structure_is_significant() {
        // Collapsing happens within lines only; a two-line goal is not the
        // same state as its one-line concatenation.
        assert_ne!(canonical_state_key("a = b\nc = d"), canonical_state_key("a = b c = d"));
    }

    #[test]
    fn normalization_is_idempotent() {
        let samples = ["x  +  0 =  x ", " a = b\n\n c  = d ", "⊢ foo  bar"];
        for s in samples {
            let once = normalize_goal(s);
            assert_eq!(once, normalize_goal(&once));
        }
    }

    #[test]
    fn ten_thousand_random_goals_have_no_key_collisions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut seen = std::collections::HashMap::new();
        for i in 0..10_000 {
            // Random distinct goal texts: an equation over random identifiers.
            let goal = format!(
                "v{}_{} + {} = v{}",
                i,
                rng.gen_range(0..1_000_000u64),
                rng.gen_range(0..10u8),
                rng.gen_range(0..1_000_000u64),
            );
            let key = canonical_state_key(&goal);
            if let Some(prev) = seen.insert(key, normalize_goal(&goal)) {
                assert_eq!(
                    prev,
                    normalize_goal(&goal),
                    "distinct normalized goals collided on {key}"
                );
            }
        }
    }

    #[test]
    fn proof_step_composes_tactic_and_premise() {
        let step = ProofStep::new("rw add_zero", "l");
        assert_eq!(step.full_text, "rw add_zero l");
        assert!(step.full_text.starts_with(&step.tactic));

        let bare = ProofStep::new("refl", "");
        assert_eq!(bare.full_text, "refl");
    }

    #[test]
    fn proof_step_parses_leading_token() {
        let step = ProofStep::from_full_text("  simp [foo, bar]  ");
        assert_eq!(step.tactic, "simp");
        assert_eq!(step.premise, "[foo, bar]");
        assert_eq!(step.full_text, "simp [foo, bar]");

        let bare = ProofStep::from_full_text("refl");
        assert_eq!((bare.tactic.as_str(), bare.premise.as_str()), ("refl", ""));
    }

    #[test]
    fn step_normalization_collapses_whitespace() {
        let a = ProofStep::from_full_text("rw   add_zero    l");
        let b = ProofStep::new("rw add_zero", "l");
        assert_eq!(a.normalized_text(), b.normalized_text());
    }

    #[test]
    fn prompt_template_is_byte_exact() {
        assert_eq!(goal_prompt("x + 0 = x"), "[GOAL]\nx + 0 = x\n[PROOFSTEP]\n");
        assert_eq!(goal_prompt(""), "[GOAL]\n\n[PROOFSTEP]\n");
    }

    #[test]
    fn proof_state_caches_canonical_key() {
        let st = ProofState::new(7, "x  + 0 =  x", 2);
        assert_eq!(st.canonical_key(), canonical_state_key("x + 0 = x"));
        assert_eq!(st.depth, 2);
    }

    proptest::proptest! {
        #[test]
        fn key_equality_matches_normalized_equality(a in "[ a-z+*=()\\n]{0,24}", b in "[ a-z+*=()\\n]{0,24}") {
            let same_key = canonical_state_key(&a) == canonical_state_key(&b);
            let same_norm = normalize_goal(&a) == normalize_goal(&b);
            proptest::prop_assert_eq!(same_key, same_norm);
        }
    }
}
