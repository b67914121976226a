//! Best-first proof search with an adaptive beam schedule, plus the Pass@k
//! evaluation harness.
//!
//! The search keeps a max-priority frontier of Open nodes ordered by score
//! (ties: earlier insertion first). Each expansion asks the policy for a
//! beam of candidate steps, runs every candidate against the prover with a
//! per-step timeout, and records the children in the [`SearchDag`]. A node
//! whose expansion produces too many error children is abandoned outright.
//! The search ends at the first ProofFinished child, when the frontier or
//! expansion budget is exhausted, or when the global timeout elapses.

use crate::dag::{EdgeKind, NodeStatus, SearchDag};
use crate::policy::PolicyBackend;
use crate::prover::{ProverBackend, ProverError, TheoremSpec};
use crate::state::{ProofStep, ScoredCandidate};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

// ---------------------------------------------------------------------------
// beam schedules
// ---------------------------------------------------------------------------

/// How many candidates to request at each expansion.
#[derive(Debug, Clone, PartialEq)]
pub enum BeamSchedule {
    /// Constant beam size.
    Fixed(u32),
    /// Linear decay from `b_max` to `b_min` over the expansion budget:
    /// `b_min + (b_max − b_min) × max(1 − λ·e/E, 0)`, rounded half-to-even.
    Adaptive { b_max: u32, b_min: u32, lambda: f64 },
    /// Request `base` candidates, then keep only the top candidates whose
    /// normalized probability mass reaches `p`.
    TopPFilter { base: Box<BeamSchedule>, p: f64 },
}

impl BeamSchedule {
    /// Validate the schedule's invariants (sizes ≥ 1, `b_min ≤ b_max`,
    /// `λ ≥ 0`, `0 < p ≤ 1`).
    pub fn validate(&self) -> Result<(), String> {
        match self {
            BeamSchedule::Fixed(b) => {
                if *b < 1 {
                    return Err("beam size must be >= 1".into());
                }
            }
            BeamSchedule::Adaptive { b_max, b_min, lambda } => {
                if *b_min < 1 {
                    return Err("b_min must be >= 1".into());
                }
                if b_min > b_max {
                    return Err(format!("b_min {b_min} exceeds b_max {b_max}"));
                }
                if !lambda.is_finite() || *lambda < 0.0 {
                    return Err(format!("lambda {lambda} must be finite and >= 0"));
                }
            }
            BeamSchedule::TopPFilter { base, p } => {
                base.validate()?;
                if !p.is_finite() || *p <= 0.0 || *p > 1.0 {
                    return Err(format!("top-p threshold {p} must be in (0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Beam size requested at expansion `e` of a budget of `total`.
    pub fn size_at(&self, e: u32, total: u32) -> u32 {
        match self {
            BeamSchedule::Fixed(b) => (*b).max(1),
            BeamSchedule::Adaptive { b_max, b_min, lambda } => {
                beam_schedule_size(e, total, *b_max, *b_min, *lambda)
            }
            BeamSchedule::TopPFilter { base, .. } => base.size_at(e, total),
        }
    }

    /// The nucleus threshold, when this schedule filters.
    fn top_p(&self) -> Option<f64> {
        match self {
            BeamSchedule::TopPFilter { p, .. } => Some(*p),
            _ => None,
        }
    }
}

impl std::fmt::Display for BeamSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BeamSchedule::Fixed(b) => write!(f, "fixed {b}"),
            BeamSchedule::Adaptive { b_max, b_min, lambda } => {
                write!(f, "adaptive {b_max},{b_min},{lambda}")
            }
            BeamSchedule::TopPFilter { base, p } => match base.as_ref() {
                BeamSchedule::Fixed(b) => write!(f, "top-p {p},{b}"),
                other => write!(f, "top-p {p} over {other}"),
            },
        }
    }
}

impl std::str::FromStr for BeamSchedule {
    type Err = String;

    /// Parse `fixed N`, `adaptive B_MAX,B_MIN,LAMBDA`, or `top-p P[,N]`
    /// (`N` = the underlying fixed beam, default 16).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s
            .trim()
            .split_once(char::is_whitespace)
            .ok_or_else(|| format!("beam schedule {s:?} is missing parameters"))?;
        let rest = rest.trim();
        let schedule = match kind {
            "fixed" => BeamSchedule::Fixed(
                rest.parse::<u32>().map_err(|e| format!("bad fixed beam size {rest:?}: {e}"))?,
            ),
            "adaptive" => {
                let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
                let [b_max, b_min, lambda] = parts.as_slice() else {
                    return Err(format!(
                        "adaptive schedule needs B_MAX,B_MIN,LAMBDA, got {rest:?}"
                    ));
                };
                BeamSchedule::Adaptive {
                    b_max: b_max.parse().map_err(|e| format!("bad B_MAX {b_max:?}: {e}"))?,
                    b_min: b_min.parse().map_err(|e| format!("bad B_MIN {b_min:?}: {e}"))?,
                    lambda: lambda.parse().map_err(|e| format!("bad LAMBDA {lambda:?}: {e}"))?,
                }
            }
            "top-p" => {
                let (p, base) = match rest.split_once(',') {
                    Some((p, base)) => (p.trim(), base.trim().parse::<u32>()
                        .map(BeamSchedule::Fixed)
                        .map_err(|e| format!("bad top-p base beam {rest:?}: {e}"))?),
                    None => (rest, BeamSchedule::Fixed(16)),
                };
                BeamSchedule::TopPFilter {
                    base: Box::new(base),
                    p: p.parse().map_err(|e| format!("bad top-p threshold {p:?}: {e}"))?,
                }
            }
            other => {
                return Err(format!(
                    "unknown beam schedule kind {other:?} (expected fixed, adaptive, or top-p)"
                ))
            }
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

/// The adaptive beam size at expansion `e` of `total`:
/// `round(b_min + (b_max − b_min) × max(1 − λ·e/total, 0))`, rounded
/// half-to-even and clamped to `[b_min, b_max]`.
pub fn beam_schedule_size(e: u32, total: u32, b_max: u32, b_min: u32, lambda: f64) -> u32 {
    let progress = if total == 0 { 1.0 } else { f64::from(e) / f64::from(total) };
    let decay = (1.0 - lambda * progress).max(0.0);
    let raw = f64::from(b_min) + f64::from(b_max - b_min) * decay;
    let rounded = raw.round_ties_even();
    (rounded as u32).clamp(b_min.max(1), b_max)
}

/// Guard for float comparisons against cumulative-mass thresholds.
const MASS_EPSILON: f64 = 1e-12;

/// Keep the shortest prefix of `candidates` (already sorted by logprob
/// descending) whose normalized probability mass reaches `p`. Always keeps at
/// least one candidate.
pub fn top_p_filter(candidates: &[ScoredCandidate], p: f64) -> Vec<ScoredCandidate> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let total: f64 = candidates.iter().map(|c| c.logprob.exp()).sum();
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for cand in candidates {
        kept.push(cand.clone());
        mass += cand.logprob.exp() / total;
        if mass >= p - MASS_EPSILON {
            break;
        }
    }
    kept
}

/// Ceiling that forgives floating-point droop just below an integer, so a
/// quota like `0.25 × 32` cannot come out as 9.
pub(crate) fn ceil_quota(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

// ---------------------------------------------------------------------------
// scoring
// ---------------------------------------------------------------------------

/// How a child's score is derived from its parent and the proposal beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scorer {
    /// Child score = parent score + the candidate's own logprob (the running
    /// sum of step logprobs along the path).
    PathSum,
    /// Child score = parent score + the arithmetic mean of the beam's
    /// logprobs; all children of one expansion share a score. Edges still
    /// record each candidate's own logprob.
    MeanBeamLogprob,
}

impl Scorer {
    /// Per-candidate score contributions for one expansion's beam.
    fn contributions(self, beam: &[ScoredCandidate]) -> Vec<f64> {
        match self {
            Scorer::PathSum => beam.iter().map(|c| c.logprob).collect(),
            Scorer::MeanBeamLogprob => {
                let mean = if beam.is_empty() {
                    0.0
                } else {
                    beam.iter().map(|c| c.logprob).sum::<f64>() / beam.len() as f64
                };
                vec![mean; beam.len()]
            }
        }
    }
}

/// Absolute child scores for `beam` proposed at `parent`.
pub fn score_candidates(
    scorer: Scorer,
    parent: &crate::dag::SearchNode,
    beam: &[ScoredCandidate],
) -> Vec<f64> {
    scorer.contributions(beam).into_iter().map(|c| parent.score + c).collect()
}

// ---------------------------------------------------------------------------
// configuration and outcomes
// ---------------------------------------------------------------------------

/// Knobs for one best-first search.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Independent searches per theorem (Pass@k).
    pub k: u32,
    /// Maximum expansions per search.
    pub expansions: u32,
    pub schedule: BeamSchedule,
    pub scorer: Scorer,
    pub global_timeout: Duration,
    pub step_timeout: Duration,
    /// A node is abandoned when its error children exceed
    /// `⌈error_abort_fraction × beam⌉`.
    pub error_abort_fraction: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k: 1,
            expansions: 600,
            schedule: BeamSchedule::Fixed(8),
            scorer: Scorer::PathSum,
            global_timeout: Duration::from_secs(1800),
            step_timeout: Duration::from_secs(20),
            error_abort_fraction: 0.5,
            seed: 0,
        }
    }
}

/// Bookkeeping for a finished search.
#[derive(Debug, Clone)]
pub struct SearchStats {
    pub expansions: u32,
    pub wall: Duration,
    pub open_nodes: usize,
    pub error_nodes: usize,
    pub finished_nodes: usize,
    pub max_depth: u32,
}

/// How a search ended.
#[derive(Debug)]
pub enum SearchOutcome {
    Proved { proof: Vec<ProofStep>, dag: SearchDag, stats: SearchStats },
    Exhausted { dag: SearchDag, stats: SearchStats },
    TimedOut { dag: SearchDag, stats: SearchStats },
}

impl SearchOutcome {
    /// The report word for this outcome.
    pub fn word(&self) -> &'static str {
        match self {
            SearchOutcome::Proved { .. } => "proved",
            SearchOutcome::Exhausted { .. } => "exhausted",
            SearchOutcome::TimedOut { .. } => "timeout",
        }
    }

    pub fn proof(&self) -> Option<&[ProofStep]> {
        match self {
            SearchOutcome::Proved { proof, .. } => Some(proof),
            _ => None,
        }
    }

    pub fn dag(&self) -> &SearchDag {
        match self {
            SearchOutcome::Proved { dag, .. }
            | SearchOutcome::Exhausted { dag, .. }
            | SearchOutcome::TimedOut { dag, .. } => dag,
        }
    }

    pub fn stats(&self) -> &SearchStats {
        match self {
            SearchOutcome::Proved { stats, .. }
            | SearchOutcome::Exhausted { stats, .. }
            | SearchOutcome::TimedOut { stats, .. } => stats,
        }
    }
}

// ---------------------------------------------------------------------------
// the frontier
// ---------------------------------------------------------------------------

/// Max-heap entry: higher score wins; equal scores pop in insertion order.
struct FrontierItem {
    score: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for FrontierItem {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for FrontierItem {}

impl PartialOrd for FrontierItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FrontierItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .partial_cmp(&other.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

// ---------------------------------------------------------------------------
// best-first search
// ---------------------------------------------------------------------------

/// Run one best-first search for `theorem`.
///
/// Only theorem initialization can fail; policy and prover faults during the
/// search are absorbed as error children.
pub fn best_first_search(
    theorem: &TheoremSpec,
    policy: &dyn PolicyBackend,
    prover: &mut dyn ProverBackend,
    cfg: &SearchConfig,
) -> Result<SearchOutcome, ProverError> {
    let started = Instant::now();
    let root_state = prover.init_theorem(theorem)?;
    let mut dag = SearchDag::new(root_state);
    let mut frontier: BinaryHeap<FrontierItem> = BinaryHeap::new();
    let mut seq = 0u64;
    frontier.push(FrontierItem { score: 0.0, seq, node: dag.root() });

    let finish = |kind: Finish, dag: SearchDag, expansions: u32| {
        let (open_nodes, error_nodes, finished_nodes) = dag.status_counts();
        let stats = SearchStats {
            expansions,
            wall: started.elapsed(),
            open_nodes,
            error_nodes,
            finished_nodes,
            max_depth: dag.max_depth(),
        };
        match kind {
            Finish::Proved(proof) => SearchOutcome::Proved { proof, dag, stats },
            Finish::Exhausted => SearchOutcome::Exhausted { dag, stats },
            Finish::TimedOut => SearchOutcome::TimedOut { dag, stats },
        }
    };

    let mut expansions = 0u32;
    while expansions < cfg.expansions {
        if started.elapsed() >= cfg.global_timeout {
            return Ok(finish(Finish::TimedOut, dag, expansions));
        }
        let Some(item) = frontier.pop() else {
            return Ok(finish(Finish::Exhausted, dag, expansions));
        };
        let requested = cfg.schedule.size_at(expansions, cfg.expansions);
        expansions += 1;
        dag.mark_expanded(item.node);
        let state = dag
            .node(item.node)
            .state
            .clone()
            .expect("frontier nodes carry a proof state");

        let mut beam = match policy.propose(&state, requested) {
            Ok(beam) => beam,
            Err(e) => {
                log::warn!("policy failed at node {}: {e}; treating as empty beam", item.node);
                Vec::new()
            }
        };
        if let Some(p) = cfg.schedule.top_p() {
            beam = top_p_filter(&beam, p);
        }

        let contributions = cfg.scorer.contributions(&beam);
        let abort_threshold = ceil_quota(cfg.error_abort_fraction * f64::from(requested));
        let mut error_children = 0usize;

        for (cand, contribution) in beam.iter().zip(contributions) {
            if started.elapsed() >= cfg.global_timeout {
                return Ok(finish(Finish::TimedOut, dag, expansions));
            }
            let result = prover.run_step(&state, &cand.step, cfg.step_timeout);
            let (child, kind) = dag
                .add_child_weighted(
                    item.node,
                    cand.step.clone(),
                    cand.logprob,
                    contribution,
                    &result,
                )
                .expect("expanded node is open and known");
            if kind == EdgeKind::Back {
                continue;
            }
            match dag.node(child).status {
                NodeStatus::ProofFinished => {
                    let proof = dag.extract_proof(child).expect("finished node has a tree path");
                    return Ok(finish(Finish::Proved(proof), dag, expansions));
                }
                NodeStatus::Error(_) => {
                    error_children += 1;
                    if error_children > abort_threshold {
                        // Too many failures: abandon the remaining candidates
                        // and discard this node for good.
                        break;
                    }
                }
                NodeStatus::Open => {
                    seq += 1;
                    frontier.push(FrontierItem {
                        score: dag.node(child).score,
                        seq,
                        node: child,
                    });
                }
            }
        }
    }
    Ok(finish(Finish::Exhausted, dag, expansions))
}

enum Finish {
    Proved(Vec<ProofStep>),
    Exhausted,
    TimedOut,
}

// ---------------------------------------------------------------------------
// Pass@k evaluation
// ---------------------------------------------------------------------------

/// Harness settings on top of [`SearchConfig`].
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub search: SearchConfig,
    /// Evaluation rounds; the aggregate reports mean ± sample standard
    /// deviation of the per-round pass rates.
    pub rounds: u32,
    /// Concurrent per-theorem searches.
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            search: SearchConfig::default(),
            rounds: 3,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

/// One line of the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem: String,
    pub outcome: String,
    pub proof: Vec<String>,
    pub expansions: u32,
    pub wall_ms: u64,
    pub max_depth: u32,
    pub round: u32,
    pub seed: u64,
}

/// The report's summary record. Contains no wall-clock fields, so identical
/// configurations and seeds serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub theorems: usize,
    pub k: u32,
    pub rounds: u32,
    pub seed: u64,
    /// Fraction of theorems proved, one entry per round.
    pub pass_rates: Vec<f64>,
    pub mean_pass_rate: f64,
    pub stddev_pass_rate: f64,
}

/// Everything `evaluate_pass_at_k` produces.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub lines: Vec<TheoremReport>,
    pub aggregate: AggregateReport,
}

/// Mean and sample standard deviation (n−1 denominator; 0 when n < 2).
pub fn mean_and_stddev(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The deterministic seed for one search attempt, independent of scheduling.
pub fn attempt_seed(base: u64, round: u32, theorem_index: usize, attempt: u32) -> u64 {
    let mut s = splitmix64(base ^ 0xA076_1D64_78BD_642F);
    s = splitmix64(s ^ u64::from(round));
    s = splitmix64(s ^ theorem_index as u64);
    s = splitmix64(s ^ u64::from(attempt));
    s
}

/// Factory producing one prover per search (provers are per-search; the
/// policy is shared).
pub type ProverFactory<'a> = &'a (dyn Fn() -> Result<Box<dyn ProverBackend>, ProverError> + Sync);

/// Observer invoked with the search DAG behind every reported line.
pub type DagSink<'a> = &'a (dyn Fn(&str, u32, &SearchDag) + Sync);

/// Run the Pass@k evaluation: `rounds × |corpus| × k` searches, each with its
/// own deterministic seed. A theorem passes a round when any of its `k`
/// searches proves it. Per-theorem failures are recorded, never fatal.
pub fn evaluate_pass_at_k(
    corpus: &[TheoremSpec],
    policy: &dyn PolicyBackend,
    prover_factory: ProverFactory,
    cfg: &EvalConfig,
    dag_sink: Option<DagSink>,
) -> EvalReport {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .expect("worker pool");

    let mut lines: Vec<TheoremReport> = Vec::with_capacity(corpus.len() * cfg.rounds as usize);
    let mut pass_rates = Vec::with_capacity(cfg.rounds as usize);

    for round in 0..cfg.rounds {
        use rayon::prelude::*;
        let round_lines: Vec<TheoremReport> = pool.install(|| {
            corpus
                .par_iter()
                .enumerate()
                .map(|(index, theorem)| {
                    run_theorem(theorem, index, round, policy, prover_factory, cfg, dag_sink)
                })
                .collect()
        });
        let proved = round_lines.iter().filter(|l| l.outcome == "proved").count();
        let rate = if corpus.is_empty() { 0.0 } else { proved as f64 / corpus.len() as f64 };
        pass_rates.push(rate);
        lines.extend(round_lines);
    }

    let (mean, stddev) = mean_and_stddev(&pass_rates);
    EvalReport {
        lines,
        aggregate: AggregateReport {
            theorems: corpus.len(),
            k: cfg.search.k,
            rounds: cfg.rounds,
            seed: cfg.search.seed,
            pass_rates,
            mean_pass_rate: mean,
            stddev_pass_rate: stddev,
        },
    }
}

/// Run the k attempts for one theorem in one round and build its report
/// line: the first proving attempt's search, or the last attempt's if none
/// proves it.
fn run_theorem(
    theorem: &TheoremSpec,
    index: usize,
    round: u32,
    policy: &dyn PolicyBackend,
    prover_factory: ProverFactory,
    cfg: &EvalConfig,
    dag_sink: Option<DagSink>,
) -> TheoremReport {
    let k = cfg.search.k.max(1);
    let mut reported: Option<(SearchOutcome, u64)> = None;
    for attempt in 0..k {
        let seed = attempt_seed(cfg.search.seed, round, index, attempt);
        let attempt_policy = policy.reseeded(seed);
        let mut search_cfg = cfg.search.clone();
        search_cfg.seed = seed;
        let outcome = match prover_factory() {
            Ok(mut prover) => {
                match best_first_search(theorem, attempt_policy.as_ref(), prover.as_mut(), &search_cfg)
                {
                    Ok(outcome) => Some(outcome),
                    Err(e) => {
                        log::warn!("search for {:?} failed to initialize: {e}", theorem.name);
                        None
                    }
                }
            }
            Err(e) => {
                log::warn!("prover for {:?} failed to start: {e}", theorem.name);
                None
            }
        };
        let Some(outcome) = outcome else { continue };
        let proved = matches!(outcome, SearchOutcome::Proved { .. });
        reported = Some((outcome, seed));
        if proved {
            break;
        }
    }

    match reported {
        Some((outcome, seed)) => {
            if let Some(sink) = dag_sink {
                sink(&theorem.name, round, outcome.dag());
            }
            let stats = outcome.stats();
            TheoremReport {
                theorem: theorem.name.clone(),
                outcome: outcome.word().to_string(),
                proof: outcome
                    .proof()
                    .map(|steps| steps.iter().map(|s| s.full_text.clone()).collect())
                    .unwrap_or_default(),
                expansions: stats.expansions,
                wall_ms: stats.wall.as_millis() as u64,
                max_depth: stats.max_depth,
                round,
                seed,
            }
        }
        // Even initialization never worked: report an exhausted search that
        // did nothing.
        None => TheoremReport {
            theorem: theorem.name.clone(),
            outcome: "exhausted".to_string(),
            proof: Vec::new(),
            expansions: 0,
            wall_ms: 0,
            max_depth: 0,
            round,
            seed: attempt_seed(cfg.search.seed, round, index, k - 1),
        },
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
