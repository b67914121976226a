//! A deterministic table-driven policy.
//!
//! The table is JSON lines; each line maps a goal pattern to candidate steps:
//!
//! ```json
//! {"pattern": "x + 0 = x",
//!  "candidates": [{"tactic": "rw add_zero", "premise": "l", "logprob": -0.2},
//!                 {"tactic": "refl", "logprob": -2.5}]}
//! ```
//!
//! A pattern containing `*` or `?` is a glob (`*` = any text including
//! newlines, `?` = any single character); anything else must equal the
//! normalized goal text exactly. Every matching line contributes its
//! candidates.
//!
//! An optional zero-mean Gaussian noise term perturbs logprobs to simulate
//! model variance across evaluation runs. Noise is keyed by
//! `(seed, goal, step)`, so within one seeded run repeated queries agree,
//! while different seeds reorder close candidates.

use super::{
    dedup_and_rank, goal_key, split_after_token, CompletedStep, PolicyBackend, PolicyError,
    TacticSet,
};
use crate::state::{ProofState, ProofStep, ScoredCandidate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use regex::Regex;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::Path;

/// Logprob assigned to constrained tactics the table says nothing about.
/// Low enough to rank below any real table entry; spaced so ordering among
/// fillers stays deterministic.
const FILLER_LOGPROB: f64 = -20.0;
const FILLER_STEP: f64 = -0.01;

#[derive(Debug, Deserialize)]
struct RawLine {
    pattern: String,
    candidates: Vec<RawCandidate>,
}

#[derive(Debug, Deserialize)]
struct RawCandidate {
    tactic: String,
    #[serde(default)]
    premise: String,
    logprob: f64,
}

#[derive(Debug, Clone)]
enum Matcher {
    Exact(String),
    Glob(Regex),
}

impl Matcher {
    fn matches(&self, goal: &str) -> bool {
        match self {
            Matcher::Exact(text) => text == goal,
            Matcher::Glob(re) => re.is_match(goal),
        }
    }
}

#[derive(Debug, Clone)]
struct Entry {
    matcher: Matcher,
    candidates: Vec<(ProofStep, f64)>,
}

/// Deterministic scripted policy backed by a pattern → candidates table.
#[derive(Clone)]
pub struct ScriptedPolicy {
    entries: Vec<Entry>,
    noise_sigma: f64,
    seed: u64,
}

impl std::fmt::Debug for ScriptedPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScriptedPolicy")
            .field("entries", &self.entries.len())
            .field("noise_sigma", &self.noise_sigma)
            .field("seed", &self.seed)
            .finish()
    }
}

fn glob_to_regex(pattern: &str) -> Result<Regex, PolicyError> {
    let mut expr = String::from("^");
    for ch in pattern.chars() {
        match ch {
            '*' => expr.push_str(".*"),
            '?' => expr.push('.'),
            other => expr.push_str(&regex::escape(&other.to_string())),
        }
    }
    expr.push('$');
    regex::RegexBuilder::new(&expr)
        .dot_matches_new_line(true)
        .build()
        .map_err(|e| PolicyError::Table(format!("bad pattern {pattern:?}: {e}")))
}

impl ScriptedPolicy {
    /// Parse a table from JSONL text. Blank lines are ignored.
    pub fn from_json_lines(text: &str) -> Result<ScriptedPolicy, PolicyError> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawLine = serde_json::from_str(line).map_err(|e| {
                PolicyError::Table(format!("line {}: {e}", lineno + 1))
            })?;
            let matcher = if raw.pattern.contains(['*', '?']) {
                Matcher::Glob(glob_to_regex(&raw.pattern)?)
            } else {
                Matcher::Exact(crate::state::normalize_goal(&raw.pattern))
            };
            let mut candidates = Vec::new();
            for cand in raw.candidates {
                if !cand.logprob.is_finite() || cand.logprob > 0.0 {
                    return Err(PolicyError::Table(format!(
                        "line {}: logprob {} out of range (must be finite and <= 0)",
                        lineno + 1,
                        cand.logprob
                    )));
                }
                candidates.push((ProofStep::new(cand.tactic, cand.premise), cand.logprob));
            }
            entries.push(Entry { matcher, candidates });
        }
        Ok(ScriptedPolicy { entries, noise_sigma: 0.0, seed: 0 })
    }

    /// Load a table from a JSONL file.
    pub fn load(path: &Path) -> Result<ScriptedPolicy, PolicyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PolicyError::Table(format!("cannot read {}: {e}", path.display())))?;
        ScriptedPolicy::from_json_lines(&text)
    }

    /// Enable Gaussian logprob noise with the given standard deviation.
    pub fn with_noise(mut self, sigma: f64, seed: u64) -> ScriptedPolicy {
        self.noise_sigma = sigma;
        self.seed = seed;
        self
    }

    /// Deterministic per-(seed, goal, step) noise term.
    fn noise(&self, goal: &str, step_text: &str) -> f64 {
        if self.noise_sigma == 0.0 {
            return 0.0;
        }
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(goal.as_bytes());
        hasher.update([0xff]);
        hasher.update(step_text.as_bytes());
        let digest = hasher.finalize();
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(
            digest[..8].try_into().expect("digest is 32 bytes"),
        ));
        rand_distr::Normal::new(0.0, self.noise_sigma)
            .expect("sigma validated finite")
            .sample(&mut rng)
    }

    /// All candidates from matching table lines, with noise applied and
    /// logprobs clamped to ≤ 0.
    fn matched(&self, goal: &str) -> Vec<ScoredCandidate> {
        let mut out = Vec::new();
        for entry in &self.entries {
            if !entry.matcher.matches(goal) {
                continue;
            }
            for (step, logprob) in &entry.candidates {
                let noisy =
                    (logprob + self.noise(goal, &step.normalized_text())).min(0.0);
                out.push(ScoredCandidate::new(step.clone(), noisy));
            }
        }
        out
    }
}

impl PolicyBackend for ScriptedPolicy {
    fn propose(
        &self,
        state: &ProofState,
        beam_size: u32,
    ) -> Result<Vec<ScoredCandidate>, PolicyError> {
        let mut out = dedup_and_rank(self.matched(&goal_key(state)));
        out.truncate(beam_size as usize);
        Ok(out)
    }

    fn propose_tactics(
        &self,
        state: &ProofState,
        beam_size: u32,
        constraint: &TacticSet,
    ) -> Result<Vec<(String, f64)>, PolicyError> {
        let goal = goal_key(state);
        // Best noisy logprob per constraint member the table can express.
        let mut ranked: Vec<(String, f64)> = Vec::new();
        let mut index = std::collections::HashMap::new();
        for cand in self.matched(&goal) {
            let Some(token) = constraint.leading_token_of(&cand.step.full_text) else {
                continue;
            };
            match index.entry(token.to_string()) {
                std::collections::hash_map::Entry::Occupied(slot) => {
                    let existing: &mut (String, f64) = &mut ranked[*slot.get()];
                    existing.1 = existing.1.max(cand.logprob);
                }
                std::collections::hash_map::Entry::Vacant(slot) => {
                    slot.insert(ranked.len());
                    ranked.push((token.to_string(), cand.logprob));
                }
            }
        }
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        // Pad with the remaining members of 𝒯, in set order, so constrained
        // decoding always yields exactly min(beam, |𝒯|) distinct tactics.
        let mut fillers = 0usize;
        for token in &constraint.tactics {
            if !index.contains_key(token) {
                ranked.push((token.clone(), FILLER_LOGPROB + FILLER_STEP * fillers as f64));
                fillers += 1;
            }
        }
        ranked.truncate((beam_size as usize).min(constraint.len()));
        Ok(ranked)
    }

    fn complete_premises(
        &self,
        state: &ProofState,
        tactics: &[String],
    ) -> Result<Vec<CompletedStep>, PolicyError> {
        let goal = goal_key(state);
        let matched = self.matched(&goal);
        let mut out = Vec::with_capacity(tactics.len());
        for (i, token) in tactics.iter().enumerate() {
            let best = matched
                .iter()
                .filter(|cand| {
                    let text = cand.step.normalized_text();
                    text == *token || text.starts_with(&format!("{token} "))
                })
                .max_by(|a, b| {
                    a.logprob.partial_cmp(&b.logprob).unwrap_or(std::cmp::Ordering::Equal)
                });
            out.push(match best {
                Some(cand) => CompletedStep {
                    step: split_after_token(&cand.step.full_text, token),
                    logprob: cand.logprob,
                    premise_failed: false,
                },
                None => CompletedStep {
                    step: ProofStep::new(token.clone(), ""),
                    logprob: FILLER_LOGPROB + FILLER_STEP * i as f64,
                    premise_failed: true,
                },
            });
        }
        Ok(out)
    }

    fn reseeded(&self, seed: u64) -> Box<dyn PolicyBackend> {
        let mut copy = self.clone();
        copy.seed = seed;
        Box::new(copy)
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
