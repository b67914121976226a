//! A reference policy that enumerates every applicable toy rewrite.
//!
//! All candidates carry the same logprob, so downstream ranking degenerates
//! to the prover's deterministic enumeration order. Combined with FIFO
//! tie-breaking in the search frontier, this makes best-first search traverse
//! states in breadth-first order — the property the brute-force oracle
//! comparisons rely on.

use super::{split_after_token, CompletedStep, PolicyBackend, PolicyError, TacticSet};
use crate::prover::toy::enumerate_applicable_steps;
use crate::state::{ProofState, ProofStep, ScoredCandidate};
use crate::term::parse_goal;

/// Enumerates all applicable toy steps at a goal, at a uniform logprob.
#[derive(Debug, Clone)]
pub struct ExhaustiveToyPolicy {
    pub logprob: f64,
}

impl Default for ExhaustiveToyPolicy {
    fn default() -> Self {
        ExhaustiveToyPolicy { logprob: -1.0 }
    }
}

impl ExhaustiveToyPolicy {
    pub fn new() -> Self {
        ExhaustiveToyPolicy::default()
    }

    fn applicable(&self, state: &ProofState) -> Vec<ProofStep> {
        match parse_goal(&state.goal_text) {
            Ok(goal) => enumerate_applicable_steps(&goal),
            // Non-toy goal texts have no applicable toy steps.
            Err(_) => Vec::new(),
        }
    }
}

impl PolicyBackend for ExhaustiveToyPolicy {
    fn propose(
        &self,
        state: &ProofState,
        beam_size: u32,
    ) -> Result<Vec<ScoredCandidate>, PolicyError> {
        let mut out: Vec<ScoredCandidate> = self
            .applicable(state)
            .into_iter()
            .map(|step| ScoredCandidate::new(step, self.logprob))
            .collect();
        out.truncate(beam_size as usize);
        Ok(out)
    }

    fn propose_tactics(
        &self,
        state: &ProofState,
        beam_size: u32,
        constraint: &TacticSet,
    ) -> Result<Vec<(String, f64)>, PolicyError> {
        let mut out: Vec<(String, f64)> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for step in self.applicable(state) {
            if let Some(token) = constraint.leading_token_of(&step.full_text) {
                if seen.insert(token.to_string()) {
                    out.push((token.to_string(), self.logprob));
                }
            }
        }
        for token in &constraint.tactics {
            if !seen.contains(token) {
                out.push((token.clone(), self.logprob));
            }
        }
        out.truncate((beam_size as usize).min(constraint.len()));
        Ok(out)
    }

    fn complete_premises(
        &self,
        state: &ProofState,
        tactics: &[String],
    ) -> Result<Vec<CompletedStep>, PolicyError> {
        let applicable = self.applicable(state);
        let mut out = Vec::with_capacity(tactics.len());
        for token in tactics {
            let found = applicable.iter().find(|step| {
                let text = step.normalized_text();
                text == *token || text.starts_with(&format!("{token} "))
            });
            out.push(match found {
                Some(step) => CompletedStep {
                    step: split_after_token(&step.full_text, token),
                    logprob: self.logprob,
                    premise_failed: false,
                },
                None => CompletedStep {
                    step: ProofStep::new(token.clone(), ""),
                    logprob: self.logprob,
                    premise_failed: true,
                },
            });
        }
        Ok(out)
    }

    fn reseeded(&self, _seed: u64) -> Box<dyn PolicyBackend> {
        Box::new(self.clone())
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
