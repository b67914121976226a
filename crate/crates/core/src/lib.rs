//! Proof-search orchestration and training-data synthesis for tactic-based
//! theorem provers.
//!
//! The crate is organized around a small set of backends and the engines that
//! drive them:
//!
//! - [`state`] / [`dag`] — proof states, steps, canonical state identity, and
//!   the search DAG with cycle pruning and path-sum scoring.
//! - [`term`] / [`prover`] — a deterministic toy rewrite prover for tests and
//!   demos, plus a JSON-lines adapter for external provers (child process or
//!   TCP) with timeout recovery by replay.
//! - [`policy`] — tactic/premise proposal backends: a scripted table policy, a
//!   toy-aware exhaustive policy, and a remote HTTP completion client.
//! - [`search`] — best-first search with fixed/adaptive/nucleus beam
//!   schedules, early abort on error-heavy expansions, and Pass@k evaluation.
//! - [`explore`] — breadth-wise proof-state exploration that records every
//!   attempted transition for dataset synthesis, with stochastic branch
//!   pruning and budget decay.
//! - [`postprocess`] — dedup, BLEU-based decontamination, replay-based
//!   rejection sampling, and prompt/completion emission.
//! - [`viz`] — DOT / JSON / self-contained HTML exports of search DAGs.

pub mod dag;
pub mod explore;
pub mod policy;
pub mod postprocess;
pub mod prover;
pub mod search;
pub mod state;
pub mod term;
pub mod viz;

/// Version string stamped into provenance headers.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
