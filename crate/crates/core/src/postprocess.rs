//! Dataset curation for synthesized transitions: de-duplication, BLEU-based
//! benchmark decontamination, rejection sampling against the prover, and
//! training-record emission.
//!
//! The canonical pipeline order is dedup → decontaminate → reject_invalid;
//! record counts are monotonically non-increasing through the stages.

use crate::explore::Transition;
use crate::prover::{ProverBackend, StepResult};
use crate::state::{goal_prompt, normalize_goal, normalize_step_text};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::time::Duration;

// ---------------------------------------------------------------------------
// de-duplication
// ---------------------------------------------------------------------------

/// Drop repeated (parent state, step) pairs, keeping the first occurrence.
/// Order is otherwise preserved, so the pass is idempotent.
pub fn dedup(transitions: Vec<Transition>) -> Vec<Transition> {
    let mut seen = HashSet::new();
    transitions
        .into_iter()
        .filter(|t| {
            seen.insert((t.parent.canonical_key(), normalize_step_text(&t.step.full_text)))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// BLEU
// ---------------------------------------------------------------------------

/// Split on whitespace and detach punctuation and brackets into their own
/// tokens; alphanumeric runs (plus `_`) stay whole. Goal texts are
/// symbol-dense, so pure whitespace splitting would under-segment them.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            word.push(c);
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Sentence BLEU of `candidate` against `reference`: the geometric mean of
/// modified n-gram precisions (n up to 4, capped by either text's length)
/// with uniform weights, times the brevity penalty
/// `min(1, exp(1 − |ref|/|cand|))`.
///
/// Either text tokenizing to nothing scores 0. Zero 1-gram overlap scores
/// exactly 0. Higher-order zero counts are add-one smoothed so short texts
/// do not collapse spuriously.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let max_n = 4.min(cand.len()).min(refr.len());
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let mut ref_counts: BTreeMap<&[String], usize> = BTreeMap::new();
        for gram in refr.windows(n) {
            *ref_counts.entry(gram).or_default() += 1;
        }
        let mut matches = 0usize;
        let mut cand_counts: BTreeMap<&[String], usize> = BTreeMap::new();
        for gram in cand.windows(n) {
            *cand_counts.entry(gram).or_default() += 1;
        }
        for (gram, count) in &cand_counts {
            matches += (*count).min(ref_counts.get(gram).copied().unwrap_or(0));
        }
        let total = cand.len() + 1 - n;
        if matches == 0 {
            if n == 1 {
                // No shared vocabulary at all: the score is exactly zero,
                // with no smoothing floor.
                return 0.0;
            }
            log_sum += ((matches + 1) as f64 / (total + 1) as f64).ln();
        } else {
            log_sum += (matches as f64 / total as f64).ln();
        }
    }
    let precision = (log_sum / max_n as f64).exp();
    let brevity = (1.0 - refr.len() as f64 / cand.len() as f64).exp().min(1.0);
    precision * brevity
}

// ---------------------------------------------------------------------------
// decontamination
// ---------------------------------------------------------------------------

/// Remove transitions that overlap a benchmark: a transition goes when its
/// seed's statement or its own parent goal scores `bleu(text, benchmark) ≥
/// threshold` against any benchmark statement. Returns (kept, removed).
///
/// Transition dumps carry seed names, not statements, so a seed's statement
/// is taken to be the parent goal of its first recorded transition — the
/// root state the exploration started from.
pub fn decontaminate(
    transitions: Vec<Transition>,
    benchmark_statements: &[String],
    threshold: f64,
) -> (Vec<Transition>, Vec<Transition>) {
    assert!(
        threshold > 0.0 && threshold <= 1.0,
        "BLEU threshold {threshold} must be in (0, 1]"
    );
    let mut seed_statements: BTreeMap<&str, &str> = BTreeMap::new();
    for t in &transitions {
        seed_statements.entry(&t.seed_name).or_insert(&t.parent.goal_text);
    }
    let contaminated: HashSet<String> = seed_statements
        .iter()
        .filter(|(_, stmt)| {
            benchmark_statements.iter().any(|b| bleu(stmt, b) >= threshold)
        })
        .map(|(name, _)| name.to_string())
        .collect();

    let mut goal_cache: BTreeMap<&str, bool> = BTreeMap::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for t in transitions.iter() {
        let seed_hit = contaminated.contains(&t.seed_name);
        let goal_hit = *goal_cache.entry(&t.parent.goal_text).or_insert_with(|| {
            benchmark_statements.iter().any(|b| bleu(&t.parent.goal_text, b) >= threshold)
        });
        if seed_hit || goal_hit {
            removed.push(t.clone());
        } else {
            kept.push(t.clone());
        }
    }
    (kept, removed)
}

// ---------------------------------------------------------------------------
// rejection sampling
// ---------------------------------------------------------------------------

/// Counts from a [`reject_invalid`] pass.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RejectionReport {
    pub kept: usize,
    /// Dropped because the transition was already flagged invalid.
    pub dropped_invalid: usize,
    /// Dropped because replaying the step disagreed with the record.
    pub dropped_disagreement: usize,
}

/// Keep only transitions whose recorded outcome the prover reproduces:
/// invalid-flagged transitions are dropped without replay; the rest are
/// re-executed at their parent state and must yield the same status (and,
/// for new states, the same child goal).
pub fn reject_invalid(
    transitions: Vec<Transition>,
    prover: &mut dyn ProverBackend,
    step_timeout: Duration,
) -> (Vec<Transition>, RejectionReport) {
    let mut report = RejectionReport::default();
    let mut kept = Vec::new();
    for t in transitions {
        if !t.valid() {
            report.dropped_invalid += 1;
            continue;
        }
        let result = prover.run_step(&t.parent, &t.step, step_timeout);
        let agrees = match (&t.child, &result) {
            (crate::explore::TransitionChild::State(goal), StepResult::NewState(s)) => {
                normalize_goal(goal) == normalize_goal(&s.goal_text)
            }
            (crate::explore::TransitionChild::Finished, StepResult::ProofFinished) => true,
            _ => false,
        };
        if agrees {
            report.kept += 1;
            kept.push(t);
        } else {
            report.dropped_disagreement += 1;
            log::warn!(
                "replay of {:?} at {:?} disagreed with the recorded {} outcome",
                t.step.full_text,
                t.parent.goal_text,
                t.status_word()
            );
        }
    }
    (kept, report)
}

// ---------------------------------------------------------------------------
// training records
// ---------------------------------------------------------------------------

/// One fine-tuning example: the goal prompt and the step to produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub prompt: String,
    pub completion: String,
}

/// Render curated transitions as training records with the byte-exact
/// `[GOAL] … [PROOFSTEP]` prompt template.
pub fn emit_training_records(transitions: &[Transition]) -> Vec<TrainingRecord> {
    transitions
        .iter()
        .map(|t| TrainingRecord {
            prompt: goal_prompt(&t.parent.goal_text),
            completion: t.step.full_text.clone(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// provenance
// ---------------------------------------------------------------------------

/// The pipeline settings behind a dataset, written as the first line of
/// every dump: `{"meta":{…}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceMeta {
    pub alpha: f64,
    pub beta: usize,
    pub gamma: f64,
    pub b: u32,
    /// Tactic-set frequency threshold, when one was applied.
    pub p: Option<f64>,
    /// Decontamination threshold, once that stage has run.
    pub bleu_threshold: Option<f64>,
    pub seed: u64,
    pub tool_version: String,
}

/// Wrapper giving the header line its `{"meta": …}` shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceLine {
    pub meta: ProvenanceMeta,
}

impl ProvenanceMeta {
    pub fn from_explore(cfg: &crate::explore::ExploreConfig, p: Option<f64>) -> ProvenanceMeta {
        ProvenanceMeta {
            alpha: cfg.alpha,
            beta: cfg.beta_value(),
            gamma: cfg.gamma,
            b: cfg.beam,
            p,
            bleu_threshold: None,
            seed: cfg.seed,
            tool_version: crate::TOOL_VERSION.to_string(),
        }
    }

    /// The JSONL header line (no trailing newline).
    pub fn to_header_line(&self) -> String {
        serde_json::to_string(&ProvenanceLine { meta: self.clone() })
            .expect("provenance serializes")
    }

    /// Parse a header line; `None` when the line is not a meta record.
    pub fn parse_header_line(line: &str) -> Option<ProvenanceMeta> {
        serde_json::from_str::<ProvenanceLine>(line).ok().map(|l| l.meta)
    }
}

// ---------------------------------------------------------------------------
// the full pipeline
// ---------------------------------------------------------------------------

/// Stage-by-stage record counts for one curation run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationCounts {
    pub input: usize,
    pub after_dedup: usize,
    pub after_decontamination: usize,
    pub after_rejection: usize,
    pub dropped_invalid: usize,
    pub dropped_disagreement: usize,
}

/// A curated dataset plus its audit trail.
#[derive(Debug)]
pub struct CurationOutput {
    pub kept: Vec<Transition>,
    pub records: Vec<TrainingRecord>,
    pub counts: CurationCounts,
}

/// Run the canonical pipeline: dedup → decontaminate → reject_invalid →
/// training records.
pub fn curate(
    transitions: Vec<Transition>,
    benchmark_statements: &[String],
    bleu_threshold: f64,
    prover: &mut dyn ProverBackend,
    step_timeout: Duration,
) -> CurationOutput {
    let input = transitions.len();
    let deduped = dedup(transitions);
    let after_dedup = deduped.len();
    let (clean, _removed) = decontaminate(deduped, benchmark_statements, bleu_threshold);
    let after_decontamination = clean.len();
    let (kept, report) = reject_invalid(clean, prover, step_timeout);
    let records = emit_training_records(&kept);
    CurationOutput {
        counts: CurationCounts {
            input,
            after_dedup,
            after_decontamination,
            after_rejection: kept.len(),
            dropped_invalid: report.dropped_invalid,
            dropped_disagreement: report.dropped_disagreement,
        },
        kept,
        records,
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
