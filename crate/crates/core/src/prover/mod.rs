//! Prover backends: the execution side of proof search.
//!
//! A backend owns one proof session at a time: [`ProverBackend::init_theorem`]
//! opens a theorem and returns its root state, [`ProverBackend::run_step`]
//! executes one proof step against a state under a deadline. Implementations
//! here: [`toy::ToyProver`], a deterministic rewrite prover used by the test
//! suite and demos, and [`external::ExternalProver`], a JSON-lines adapter for
//! real provers running as a child process or behind a TCP socket.

pub mod external;
pub mod toy;

use crate::state::{ErrorKind, ProofState, ProofStep};
use serde::{Deserialize, Serialize};
use std::time::Duration;

/// Outcome of executing a single proof step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepResult {
    /// The step produced a new open proof state.
    NewState(ProofState),
    /// The step closed the goal; the proof attempt is complete.
    ProofFinished,
    /// The step failed; `kind` classifies the failure.
    StepError { kind: ErrorKind, message: String },
    /// The step exceeded its deadline.
    StepTimeout,
}

impl StepResult {
    /// Convenience constructor for step errors.
    pub fn error(kind: ErrorKind, message: impl Into<String>) -> Self {
        StepResult::StepError { kind, message: message.into() }
    }

    /// True for results that represent progress (a new state or a finish).
    pub fn is_success(&self) -> bool {
        matches!(self, StepResult::NewState(_) | StepResult::ProofFinished)
    }
}

/// A named theorem statement, as stored in corpus files (one JSON object per
/// line: `{"name": ..., "statement": ...}`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremSpec {
    pub name: String,
    pub statement: String,
}

impl TheoremSpec {
    pub fn new(name: impl Into<String>, statement: impl Into<String>) -> Self {
        TheoremSpec { name: name.into(), statement: statement.into() }
    }
}

/// Errors raised by prover backends outside of per-step failures (those are
/// reported in-band as [`StepResult::StepError`]).
#[derive(Debug, thiserror::Error)]
pub enum ProverError {
    #[error("theorem initialization failed: {message}")]
    Init { message: String },
    #[error("prover protocol violation: {message}")]
    Protocol { message: String },
    #[error("prover i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A proof execution backend. One instance serves one search at a time;
/// methods take `&mut self` and implementations need not be reentrant.
pub trait ProverBackend: Send {
    /// Open a proof session for `theorem` and return the root state
    /// (depth 0).
    fn init_theorem(&mut self, theorem: &TheoremSpec) -> Result<ProofState, ProverError>;

    /// Execute `step` against `state` under `timeout`. Failures of the step
    /// itself come back in-band as [`StepResult`] variants; `run_step` only
    /// needs `Err` for conditions that also invalidate the session.
    fn run_step(&mut self, state: &ProofState, step: &ProofStep, timeout: Duration) -> StepResult;

    /// Re-run a step sequence from the root of `theorem` and return the final
    /// [`StepResult`]. An empty sequence yields the root state; the first
    /// non-advancing result short-circuits the replay.
    fn replay(
        &mut self,
        theorem: &TheoremSpec,
        steps: &[ProofStep],
        timeout: Duration,
    ) -> Result<StepResult, ProverError> {
        let mut current = self.init_theorem(theorem)?;
        if steps.is_empty() {
            return Ok(StepResult::NewState(current));
        }
        for (i, step) in steps.iter().enumerate() {
            match self.run_step(&current, step, timeout) {
                StepResult::NewState(next) => {
                    if i + 1 == steps.len() {
                        return Ok(StepResult::NewState(next));
                    }
                    current = next;
                }
                other => return Ok(other),
            }
        }
        unreachable!("loop returns on the final step");
    }
}

/// Read a theorem corpus from JSON-lines text. Blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<Vec<TheoremSpec>, serde_json::Error> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(serde_json::from_str)
        .collect()
}
