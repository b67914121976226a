//! A deterministic toy prover over the rewrite language in [`crate::term`].
//!
//! Statements are equations; the goal is closed by `refl` once both sides are
//! syntactically identical. Steps:
//!
//! - `refl` — closes the goal when `lhs` equals `rhs`.
//! - `rw <rule> <side>[.<child>...] [rev]` — apply a named rewrite rule at the
//!   addressed subterm, e.g. `rw add_zero l`, `rw comm_mul r.0.1`,
//!   `rw add_zero l rev` (right-to-left application).
//! - `spin` — sleeps through the step deadline and reports a timeout; exists
//!   so timeout handling can be exercised deterministically.
//!
//! Apart from fresh state ids, `run_step` is a pure function of
//! `(goal, step)`: same goal text and step text always produce the same
//! result kind and the same resulting goal text.

use super::{ProverBackend, ProverError, StepResult, TheoremSpec};
use crate::state::{ErrorKind, ProofState, ProofStep};
use crate::term::{parse_goal, rule_by_name, rules, ApplyError, Side, ToyGoal};
use std::time::Duration;

/// The toy tactic vocabulary: `refl`, one `rw <rule>` entry per built-in
/// rewrite rule, and `spin`. All but `spin` can make progress on some goal.
pub fn toy_tactic_names() -> Vec<String> {
    let mut names = vec!["refl".to_string()];
    names.extend(rules().iter().map(|r| format!("rw {}", r.name)));
    names.push("spin".to_string());
    names
}

/// A parsed premise: which side, which subterm, which direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteAddress {
    pub side: Side,
    pub path: Vec<usize>,
    pub reversed: bool,
}

impl RewriteAddress {
    /// Render in premise syntax: `l`, `r.0.1`, `l.0 rev`, ...
    pub fn render(&self) -> String {
        let mut out = self.side.to_string();
        for idx in &self.path {
            out.push('.');
            out.push_str(&idx.to_string());
        }
        if self.reversed {
            out.push_str(" rev");
        }
        out
    }

    /// Parse premise syntax. `tokens` are whitespace-split premise tokens.
    pub fn parse(tokens: &[&str]) -> Option<RewriteAddress> {
        let (addr, reversed) = match tokens {
            [addr] => (addr, false),
            [addr, rev] if *rev == "rev" => (addr, true),
            _ => return None,
        };
        let mut parts = addr.split('.');
        let side = match parts.next()? {
            "l" => Side::Left,
            "r" => Side::Right,
            _ => return None,
        };
        let mut path = Vec::new();
        for part in parts {
            let idx: usize = part.parse().ok()?;
            if idx > 1 {
                return None;
            }
            path.push(idx);
        }
        Some(RewriteAddress { side, path, reversed })
    }
}

/// Deterministic in-process prover for the toy rewrite language.
#[derive(Debug, Default)]
pub struct ToyProver {
    next_state_id: u64,
}

impl ToyProver {
    pub fn new() -> Self {
        ToyProver::default()
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_state_id;
        self.next_state_id += 1;
        id
    }
}

/// Execute one toy step against a parsed goal. Returns the result kind and,
/// for rewrites, the successor goal. Shared by [`ToyProver`] and the wire
/// server.
pub fn execute_toy_step(goal: &ToyGoal, step_text: &str, timeout: Duration) -> ToyStepOutcome {
    let tokens: Vec<&str> = step_text.split_whitespace().collect();
    match tokens.as_slice() {
        ["refl"] => {
            if goal.lhs == goal.rhs {
                ToyStepOutcome::Finished
            } else {
                ToyStepOutcome::Error(ErrorKind::Inapplicable, "refl: goal sides differ".into())
            }
        }
        ["refl", ..] => {
            ToyStepOutcome::Error(ErrorKind::Syntax, "refl takes no premise".into())
        }
        ["spin", ..] => {
            std::thread::sleep(timeout);
            ToyStepOutcome::Timeout
        }
        ["rw"] => ToyStepOutcome::Error(ErrorKind::Syntax, "rw: missing rule name".into()),
        ["rw", rule_name, rest @ ..] => {
            let Some(rule) = rule_by_name(rule_name) else {
                return ToyStepOutcome::Error(
                    ErrorKind::Syntax,
                    format!("rw: unknown rule {rule_name:?}"),
                );
            };
            let Some(addr) = RewriteAddress::parse(rest) else {
                return ToyStepOutcome::Error(
                    ErrorKind::Syntax,
                    format!("rw {rule_name}: bad or missing address {:?}", rest.join(" ")),
                );
            };
            match rule.apply(goal, addr.side, &addr.path, addr.reversed) {
                Ok(next) => ToyStepOutcome::NewGoal(next),
                Err(e @ (ApplyError::NoMatch | ApplyError::NoSubterm | ApplyError::Unbound)) => {
                    ToyStepOutcome::Error(
                        ErrorKind::Inapplicable,
                        format!("rw {rule_name} at {}: {e}", addr.render()),
                    )
                }
            }
        }
        [] => ToyStepOutcome::Error(ErrorKind::Syntax, "empty step".into()),
        [other, ..] => {
            ToyStepOutcome::Error(ErrorKind::Syntax, format!("unknown tactic {other:?}"))
        }
    }
}

/// Result of [`execute_toy_step`], before state-id assignment.
#[derive(Debug, Clone, PartialEq)]
pub enum ToyStepOutcome {
    NewGoal(ToyGoal),
    Finished,
    Error(ErrorKind, String),
    Timeout,
}

impl ProverBackend for ToyProver {
    fn init_theorem(&mut self, theorem: &TheoremSpec) -> Result<ProofState, ProverError> {
        let goal = parse_goal(&theorem.statement).map_err(|e| ProverError::Init {
            message: format!("cannot parse statement {:?}: {e}", theorem.statement),
        })?;
        Ok(ProofState::new(self.fresh_id(), goal.render(), 0))
    }

    fn run_step(&mut self, state: &ProofState, step: &ProofStep, timeout: Duration) -> StepResult {
        let goal = match parse_goal(&state.goal_text) {
            Ok(g) => g,
            Err(e) => {
                return StepResult::error(ErrorKind::Crash, format!("corrupt state: {e}"));
            }
        };
        match execute_toy_step(&goal, &step.full_text, timeout) {
            ToyStepOutcome::NewGoal(next) => StepResult::NewState(ProofState::new(
                self.fresh_id(),
                next.render(),
                state.depth + 1,
            )),
            ToyStepOutcome::Finished => StepResult::ProofFinished,
            ToyStepOutcome::Error(kind, message) => StepResult::StepError { kind, message },
            ToyStepOutcome::Timeout => StepResult::StepTimeout,
        }
    }
}

/// Enumerate every applicable step at `goal`, in deterministic order: `refl`
/// first when the sides already agree, then each rule in canonical order at
/// each address (left side before right, preorder paths, forward before
/// reversed). Inapplicable combinations are skipped.
pub fn enumerate_applicable_steps(goal: &ToyGoal) -> Vec<ProofStep> {
    let mut steps = Vec::new();
    if goal.lhs == goal.rhs {
        steps.push(ProofStep::new("refl", ""));
    }
    for rule in rules() {
        for side in [Side::Left, Side::Right] {
            for path in goal.side(side).paths() {
                for reversed in [false, true] {
                    if rule.apply(goal, side, &path, reversed).is_ok() {
                        let addr = RewriteAddress { side, path: path.clone(), reversed };
                        steps.push(ProofStep::new(format!("rw {}", rule.name), addr.render()));
                    }
                }
            }
        }
    }
    steps
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
