//! `tacsearch` — proof search, exploration-based data synthesis, tactic-set
//! distillation, dataset curation, and search-graph visualization from one
//! binary.
//!
//! Every tunable resolves through the same layers (highest first): flag,
//! `TACSEARCH_<SECTION>_<KEY>` environment variable, `[<section>]` entry in
//! the TOML config file, built-in default. `--dry-run` prints the resolved
//! configuration as JSON and exits without doing any work.
//!
//! JSONL outputs are append-only: re-running a command adds lines, it never
//! rewrites history. Remote policy endpoints read their API key exclusively
//! from the `TACSEARCH_API_KEY` environment variable — there is deliberately
//! no flag for it, so keys cannot leak into shell history or process lists.

mod backends;
mod config;

use std::fs::OpenOptions;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand};

use backends::{build_policy, build_prover, PolicySpec, ProverSpec};
use config::Layers;
use tacsearch::dag::SearchDag;
use tacsearch::explore::{explore_theorem, build_tactic_set, ExploreConfig, Transition};
use tacsearch::policy::TacticSet;
use tacsearch::postprocess::{
    curate, decontaminate, dedup, emit_training_records, CurationCounts, ProvenanceMeta,
};
use tacsearch::prover::{parse_corpus, TheoremSpec};
use tacsearch::search::{
    attempt_seed, evaluate_pass_at_k, BeamSchedule, DagSink, EvalConfig, SearchConfig,
};
use tacsearch::viz::{export_dot, export_json, import_json, render_html};

// ---------------------------------------------------------------------------
// command line
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "tacsearch",
    version,
    about = "Proof search, exploration, and dataset curation for tactic provers"
)]
struct Cli {
    /// TOML config file; flags and TACSEARCH_* environment variables
    /// override its values. Defaults to the file named by TACSEARCH_CONFIG.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Resolve the effective configuration, print it as JSON, and exit.
    #[arg(long, global = true)]
    dry_run: bool,

    /// More logging on stderr (-v: info, -vv: debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Best-first proof search over a corpus, reporting pass@k.
    Search(SearchArgs),
    /// Randomized exploration from seed theorems, recording transitions.
    Explore(ExploreArgs),
    /// Distill a tactic set from recorded proof steps.
    Tacticset(TacticsetArgs),
    /// Curate a transitions dump: dedup, decontaminate, replay-validate.
    Postprocess(PostprocessArgs),
    /// Convert a search-graph JSON export to DOT or HTML.
    Viz(VizArgs),
}

#[derive(Args)]
struct SearchArgs {
    /// Theorem corpus: JSONL lines of {"name", "statement"}.
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,

    /// Candidate source: scripted:FILE, remote:URL, or exhaustive-toy.
    /// Remote endpoints take their API key only from the TACSEARCH_API_KEY
    /// environment variable.
    #[arg(long, value_name = "SPEC")]
    policy: Option<String>,

    /// Proof checker: toy, or external:CMD [ARGS…] for a subprocess speaking
    /// the line protocol.
    #[arg(long, value_name = "SPEC")]
    prover: Option<String>,

    /// Beam schedule: N, `fixed N`, `adaptive B_MAX B_MIN LAMBDA`, or
    /// `top-p P` (the default width behind a nucleus filter).
    #[arg(long, num_args = 1..=4, value_name = "SPEC")]
    beam: Option<Vec<String>>,

    /// Keep only candidates covering this probability mass per expansion.
    #[arg(long, value_name = "P")]
    top_p: Option<f64>,

    /// Maximum expansions per search.
    #[arg(long, value_name = "N")]
    expansions: Option<u32>,

    /// Independent attempts per theorem and round (pass@k).
    #[arg(long, value_name = "K")]
    k: Option<u32>,

    /// Evaluation rounds; the aggregate reports mean ± stddev across rounds.
    #[arg(long, value_name = "N")]
    rounds: Option<u32>,

    /// Concurrent per-theorem searches.
    #[arg(long, value_name = "N")]
    workers: Option<usize>,

    /// Base seed for the per-attempt seed chain.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Node scoring rule: path-sum or mean-beam.
    #[arg(long, value_name = "NAME")]
    scorer: Option<String>,

    /// Abandon an expansion when its failed children exceed ⌈fraction × beam⌉.
    #[arg(long, value_name = "F")]
    error_abort: Option<f64>,

    /// Wall-clock budget for one search, in seconds.
    #[arg(long, value_name = "SECS")]
    global_timeout: Option<f64>,

    /// Wall-clock budget for one proof step, in seconds.
    #[arg(long, value_name = "SECS")]
    step_timeout: Option<f64>,

    /// Startup budget for an external prover, in seconds.
    #[arg(long, value_name = "SECS")]
    init_timeout: Option<f64>,

    /// Gaussian perturbation of scripted logprobs (reproducible via --seed).
    #[arg(long, value_name = "SIGMA")]
    noise_sigma: Option<f64>,

    /// Model name sent to remote policy endpoints.
    #[arg(long, value_name = "NAME")]
    model: Option<String>,

    /// Append one JSON report line per theorem and round to this file.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Also write the aggregate JSON (always printed to stdout) to this file.
    #[arg(long, value_name = "FILE")]
    aggregate_out: Option<PathBuf>,

    /// Write one search-graph JSON export per theorem and round here.
    #[arg(long, value_name = "DIR")]
    dag_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExploreArgs {
    /// Seed theorems: JSONL lines of {"name", "statement"}.
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,

    /// Candidate source: scripted:FILE, remote:URL, or exhaustive-toy.
    #[arg(long, value_name = "SPEC")]
    policy: Option<String>,

    /// Proof checker: toy, or external:CMD [ARGS…].
    #[arg(long, value_name = "SPEC")]
    prover: Option<String>,

    /// Tactic set JSON restricting what the policy may propose.
    #[arg(long, value_name = "FILE")]
    tactics: Option<PathBuf>,

    /// Tactic candidates requested per expansion.
    #[arg(long, value_name = "N")]
    beam: Option<u32>,

    /// Fraction of the beam enqueued per expansion (quota ⌈α·beam⌉).
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,

    /// Quota slots reserved for the highest-scored children (default: half).
    #[arg(long, value_name = "N")]
    beta: Option<usize>,

    /// Budget decay applied whenever an expansion finds a new finish path.
    #[arg(long, value_name = "G")]
    gamma: Option<f64>,

    /// Expansion budget per seed theorem.
    #[arg(long, value_name = "N")]
    budget: Option<u32>,

    /// Base seed; each theorem explores with its own derived seed.
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Wall-clock budget for one proof step, in seconds.
    #[arg(long, value_name = "SECS")]
    step_timeout: Option<f64>,

    /// Startup budget for an external prover, in seconds.
    #[arg(long, value_name = "SECS")]
    init_timeout: Option<f64>,

    /// Model name sent to remote policy endpoints.
    #[arg(long, value_name = "NAME")]
    model: Option<String>,

    /// Append a provenance header plus one JSON transition per line here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TacticsetArgs {
    /// Plain text file with one recorded proof step per line.
    #[arg(long, value_name = "FILE")]
    steps: Option<PathBuf>,

    /// Transitions JSONL; valid transitions contribute their steps.
    #[arg(long, value_name = "FILE")]
    transitions: Option<PathBuf>,

    /// Keep the smallest tactic prefix covering this frequency mass.
    #[arg(long, value_name = "P")]
    p: Option<f64>,

    /// Write the distilled tactic set JSON here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PostprocessArgs {
    /// Transitions JSONL produced by `explore`.
    #[arg(long, value_name = "FILE")]
    transitions: Option<PathBuf>,

    /// Benchmark statements (one per line) to decontaminate against.
    #[arg(long, value_name = "FILE")]
    benchmark: Option<PathBuf>,

    /// Drop a seed or transition whose goal reaches this BLEU overlap with
    /// any benchmark statement.
    #[arg(long, value_name = "T")]
    bleu_threshold: Option<f64>,

    /// Prover used to replay-validate transitions: toy, or external:CMD.
    #[arg(long, value_name = "SPEC")]
    prover: Option<String>,

    /// Wall-clock budget for one replayed step, in seconds.
    #[arg(long, value_name = "SECS")]
    step_timeout: Option<f64>,

    /// Startup budget for an external prover, in seconds.
    #[arg(long, value_name = "SECS")]
    init_timeout: Option<f64>,

    /// Skip the replay-validation stage.
    #[arg(long)]
    skip_rejection: bool,

    /// Append the curated transitions (with provenance header) here.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Also append prompt/completion training records here.
    #[arg(long, value_name = "FILE")]
    records_out: Option<PathBuf>,
}

#[derive(Args)]
struct VizArgs {
    /// Search-graph JSON export (from `search --dag-dir`).
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,

    /// Output format: dot, html, or json (validated and canonicalized).
    #[arg(long, value_name = "FMT")]
    format: Option<String>,

    /// Output file; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// entry
// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (config_path, file) = config::load_config_file(cli.config.as_deref())?;
    if let Some(path) = &config_path {
        log::info!("using config file {}", path.display());
    }
    match cli.command {
        Command::Search(args) => run_search(args, &file, cli.dry_run),
        Command::Explore(args) => run_explore(args, &file, cli.dry_run),
        Command::Tacticset(args) => run_tacticset(args, &file, cli.dry_run),
        Command::Postprocess(args) => run_postprocess(args, &file, cli.dry_run),
        Command::Viz(args) => run_viz(args, &file, cli.dry_run),
    }
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

fn run_search(args: SearchArgs, file: &toml::Table, dry_run: bool) -> Result<()> {
    let layers = Layers::new("search", file);
    let search_defaults = SearchConfig::default();
    let eval_defaults = EvalConfig::default();

    let corpus_path: PathBuf = layers.require("corpus", args.corpus)?;
    let policy_text: String = layers.require("policy", args.policy)?;
    let prover_text: String = layers.resolve("prover", args.prover, "toy".to_string())?;

    let beam_flag = args.beam.map(|tokens| tokens.join(" "));
    let beam_text: String =
        layers.resolve("beam", beam_flag, config::beam_to_string(&search_defaults.schedule))?;
    let top_p: Option<f64> = layers.resolve_opt("top_p", args.top_p)?;
    let schedule = config::apply_top_p(config::parse_beam(&beam_text)?, top_p)?;

    let scorer_text: String = layers.resolve("scorer", args.scorer, "path-sum".to_string())?;
    let scorer = config::parse_scorer(&scorer_text)?;

    let expansions = layers.resolve("expansions", args.expansions, search_defaults.expansions)?;
    let k = layers.resolve("k", args.k, search_defaults.k)?;
    let rounds = layers.resolve("rounds", args.rounds, eval_defaults.rounds)?;
    let workers = layers.resolve("workers", args.workers, eval_defaults.workers)?;
    let seed = layers.resolve("seed", args.seed, search_defaults.seed)?;
    let error_abort = layers.resolve(
        "error_abort",
        args.error_abort,
        search_defaults.error_abort_fraction,
    )?;
    let global_timeout_secs = layers.resolve(
        "global_timeout",
        args.global_timeout,
        search_defaults.global_timeout.as_secs_f64(),
    )?;
    let step_timeout_secs = layers.resolve(
        "step_timeout",
        args.step_timeout,
        search_defaults.step_timeout.as_secs_f64(),
    )?;
    let init_timeout_secs = layers.resolve("init_timeout", args.init_timeout, 30.0)?;
    let noise_sigma: Option<f64> = layers.resolve_opt("noise_sigma", args.noise_sigma)?;
    let model: Option<String> = layers.resolve_opt("model", args.model)?;
    let out: Option<PathBuf> = layers.resolve_opt("out", args.out)?;
    let aggregate_out: Option<PathBuf> = layers.resolve_opt("aggregate_out", args.aggregate_out)?;
    let dag_dir: Option<PathBuf> = layers.resolve_opt("dag_dir", args.dag_dir)?;

    if dry_run {
        // `--beam top-p P` folds the filter into the schedule itself; echo
        // the filter back through the `top_p` field either way.
        let effective_top_p = match &schedule {
            BeamSchedule::TopPFilter { p, .. } => Some(*p),
            _ => None,
        };
        let echo = serde_json::json!({ "search": {
            "corpus": corpus_path,
            "policy": policy_text,
            "prover": prover_text,
            "beam": config::beam_to_string(&schedule),
            "top_p": effective_top_p,
            "expansions": expansions,
            "k": k,
            "rounds": rounds,
            "workers": workers,
            "seed": seed,
            "scorer": config::scorer_to_string(scorer),
            "error_abort": error_abort,
            "global_timeout": global_timeout_secs,
            "step_timeout": step_timeout_secs,
            "init_timeout": init_timeout_secs,
            "noise_sigma": noise_sigma,
            "model": model,
            "out": out,
            "aggregate_out": aggregate_out,
            "dag_dir": dag_dir,
        }});
        println!("{}", serde_json::to_string_pretty(&echo)?);
        return Ok(());
    }

    let policy_spec = PolicySpec::from_str(&policy_text).map_err(|e| anyhow!(e))?;
    let prover_spec = ProverSpec::from_str(&prover_text).map_err(|e| anyhow!(e))?;
    let corpus = load_corpus(&corpus_path)?;
    let policy = build_policy(&policy_spec, noise_sigma.map(|s| (s, seed)), model.as_deref())?;
    let init_timeout = config::duration_from_secs(init_timeout_secs, "init_timeout")?;

    let eval_cfg = EvalConfig {
        search: SearchConfig {
            k,
            expansions,
            schedule,
            scorer,
            global_timeout: config::duration_from_secs(global_timeout_secs, "global_timeout")?,
            step_timeout: config::duration_from_secs(step_timeout_secs, "step_timeout")?,
            error_abort_fraction: error_abort,
            seed,
        },
        rounds,
        workers,
    };

    let factory = move || build_prover(&prover_spec, init_timeout);

    let dag_writer = dag_dir
        .as_ref()
        .map(|dir| -> Result<_> {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating DAG directory {}", dir.display()))?;
            let dir = dir.clone();
            Ok(move |name: &str, round: u32, dag: &SearchDag| {
                let path = dir.join(format!("{}_r{round}.json", sanitize_file_stem(name)));
                if let Err(e) = std::fs::write(&path, export_json(dag)) {
                    log::error!("writing DAG export {}: {e}", path.display());
                }
            })
        })
        .transpose()?;
    let sink: Option<DagSink> =
        dag_writer.as_ref().map(|f| f as &(dyn Fn(&str, u32, &SearchDag) + Sync));

    let report = evaluate_pass_at_k(&corpus, policy.as_ref(), &factory, &eval_cfg, sink);

    if let Some(path) = &out {
        let lines = report
            .lines
            .iter()
            .map(|line| serde_json::to_string(line).expect("report lines serialize"));
        append_jsonl(path, lines)?;
        log::info!("appended {} report lines to {}", report.lines.len(), path.display());
    }

    let aggregate = serde_json::to_string_pretty(&report.aggregate)?;
    if let Some(path) = &aggregate_out {
        std::fs::write(path, format!("{aggregate}\n"))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("{aggregate}");
    log::info!(
        "mean pass rate {:.4} over {} rounds of {} theorems",
        report.aggregate.mean_pass_rate,
        rounds,
        corpus.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// explore
// ---------------------------------------------------------------------------

fn run_explore(args: ExploreArgs, file: &toml::Table, dry_run: bool) -> Result<()> {
    let layers = Layers::new("explore", file);
    let defaults = ExploreConfig::default();

    let corpus_path: PathBuf = layers.require("corpus", args.corpus)?;
    let policy_text: String = layers.require("policy", args.policy)?;
    let prover_text: String = layers.resolve("prover", args.prover, "toy".to_string())?;
    let tactics_path: PathBuf = layers.require("tactics", args.tactics)?;
    let beam = layers.resolve("beam", args.beam, defaults.beam)?;
    let alpha = layers.resolve("alpha", args.alpha, defaults.alpha)?;
    let beta: Option<usize> = layers.resolve_opt("beta", args.beta)?;
    let gamma = layers.resolve("gamma", args.gamma, defaults.gamma)?;
    let budget = layers.resolve("budget", args.budget, defaults.budget)?;
    let seed = layers.resolve("seed", args.seed, defaults.seed)?;
    let step_timeout_secs = layers.resolve(
        "step_timeout",
        args.step_timeout,
        defaults.step_timeout.as_secs_f64(),
    )?;
    let init_timeout_secs = layers.resolve("init_timeout", args.init_timeout, 30.0)?;
    let model: Option<String> = layers.resolve_opt("model", args.model)?;
    let out: PathBuf = layers.require("out", args.out)?;

    if dry_run {
        let echo = serde_json::json!({ "explore": {
            "corpus": corpus_path,
            "policy": policy_text,
            "prover": prover_text,
            "tactics": tactics_path,
            "beam": beam,
            "alpha": alpha,
            "beta": beta,
            "gamma": gamma,
            "budget": budget,
            "seed": seed,
            "step_timeout": step_timeout_secs,
            "init_timeout": init_timeout_secs,
            "model": model,
            "out": out,
        }});
        println!("{}", serde_json::to_string_pretty(&echo)?);
        return Ok(());
    }

    let template = ExploreConfig {
        beam,
        alpha,
        beta,
        gamma,
        budget,
        seed,
        step_timeout: config::duration_from_secs(step_timeout_secs, "step_timeout")?,
    };
    template.validate().map_err(|e| anyhow!("invalid exploration settings: {e}"))?;

    let policy_spec = PolicySpec::from_str(&policy_text).map_err(|e| anyhow!(e))?;
    let prover_spec = ProverSpec::from_str(&prover_text).map_err(|e| anyhow!(e))?;
    let corpus = load_corpus(&corpus_path)?;
    let tactics = TacticSet::load(&tactics_path)
        .map_err(|e| anyhow!("loading tactic set {}: {e}", tactics_path.display()))?;
    let base_policy = build_policy(&policy_spec, None, model.as_deref())?;
    let init_timeout = config::duration_from_secs(init_timeout_secs, "init_timeout")?;

    let mut lines = vec![ProvenanceMeta::from_explore(&template, None).to_header_line()];
    let mut total = 0usize;
    for (i, theorem) in corpus.iter().enumerate() {
        let cfg = ExploreConfig { seed: attempt_seed(seed, 0, i, 0), ..template.clone() };
        let policy = base_policy.reseeded(cfg.seed);
        let mut prover = build_prover(&prover_spec, init_timeout)
            .with_context(|| format!("starting prover for {}", theorem.name))?;
        let transitions = explore_theorem(theorem, policy.as_ref(), prover.as_mut(), &cfg, &tactics);
        log::info!("{}: {} transitions", theorem.name, transitions.len());
        total += transitions.len();
        for t in &transitions {
            lines.push(serde_json::to_string(t)?);
        }
    }
    append_jsonl(&out, lines)?;

    let summary = serde_json::json!({
        "seeds": corpus.len(),
        "transitions": total,
        "out": out,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// tacticset
// ---------------------------------------------------------------------------

fn run_tacticset(args: TacticsetArgs, file: &toml::Table, dry_run: bool) -> Result<()> {
    let layers = Layers::new("tacticset", file);
    let steps_path: Option<PathBuf> = layers.resolve_opt("steps", args.steps)?;
    let transitions_path: Option<PathBuf> = layers.resolve_opt("transitions", args.transitions)?;
    let top_p = layers.resolve("p", args.p, 0.999)?;
    let out: PathBuf = layers.require("out", args.out)?;

    if dry_run {
        let echo = serde_json::json!({ "tacticset": {
            "steps": steps_path,
            "transitions": transitions_path,
            "p": top_p,
            "out": out,
        }});
        println!("{}", serde_json::to_string_pretty(&echo)?);
        return Ok(());
    }

    let steps: Vec<String> = match (&steps_path, &transitions_path) {
        (Some(path), None) => read_lines(path)?,
        (None, Some(path)) => {
            let (_, transitions) = read_transitions(path)?;
            transitions
                .iter()
                .filter(|t| t.valid())
                .map(|t| t.step.full_text.clone())
                .collect()
        }
        _ => bail!("pass exactly one of --steps or --transitions"),
    };

    let build = build_tactic_set(&steps, top_p).map_err(|e| anyhow!(e))?;
    std::fs::write(&out, format!("{}\n", serde_json::to_string_pretty(&build.set)?))
        .with_context(|| format!("writing {}", out.display()))?;

    let summary = serde_json::json!({
        "parsed": build.parsed,
        "skipped": build.skipped,
        "distinct": build.distinct,
        "kept": build.set.len(),
        "out": out,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// postprocess
// ---------------------------------------------------------------------------

fn run_postprocess(args: PostprocessArgs, file: &toml::Table, dry_run: bool) -> Result<()> {
    let layers = Layers::new("postprocess", file);
    let transitions_path: PathBuf = layers.require("transitions", args.transitions)?;
    let benchmarks_path: Option<PathBuf> = layers.resolve_opt("benchmark", args.benchmark)?;
    let bleu_threshold = layers.resolve("bleu_threshold", args.bleu_threshold, 0.8)?;
    let prover_text: String = layers.resolve("prover", args.prover, "toy".to_string())?;
    let step_timeout_secs = layers.resolve("step_timeout", args.step_timeout, 5.0)?;
    let init_timeout_secs = layers.resolve("init_timeout", args.init_timeout, 30.0)?;
    let skip_rejection = layers.resolve(
        "skip_rejection",
        args.skip_rejection.then_some(true),
        false,
    )?;
    let out: PathBuf = layers.require("out", args.out)?;
    let records_out: Option<PathBuf> = layers.resolve_opt("records_out", args.records_out)?;

    if dry_run {
        let echo = serde_json::json!({ "postprocess": {
            "transitions": transitions_path,
            "benchmark": benchmarks_path,
            "bleu_threshold": bleu_threshold,
            "prover": prover_text,
            "step_timeout": step_timeout_secs,
            "init_timeout": init_timeout_secs,
            "skip_rejection": skip_rejection,
            "out": out,
            "records_out": records_out,
        }});
        println!("{}", serde_json::to_string_pretty(&echo)?);
        return Ok(());
    }

    if !(bleu_threshold > 0.0 && bleu_threshold <= 1.0) {
        bail!("bleu_threshold must be in (0, 1], got {bleu_threshold}");
    }

    let (meta, transitions) = read_transitions(&transitions_path)?;
    let benchmarks = match &benchmarks_path {
        Some(path) => read_lines(path)?
            .into_iter()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect(),
        None => Vec::new(),
    };

    let step_timeout = config::duration_from_secs(step_timeout_secs, "step_timeout")?;
    let (kept, records, counts) = if skip_rejection {
        let input = transitions.len();
        let deduped = dedup(transitions);
        let after_dedup = deduped.len();
        let (clean, _) = decontaminate(deduped, &benchmarks, bleu_threshold);
        let records = emit_training_records(&clean);
        let counts = CurationCounts {
            input,
            after_dedup,
            after_decontamination: clean.len(),
            after_rejection: clean.len(),
            dropped_invalid: 0,
            dropped_disagreement: 0,
        };
        (clean, records, counts)
    } else {
        let prover_spec = ProverSpec::from_str(&prover_text).map_err(|e| anyhow!(e))?;
        let init_timeout = config::duration_from_secs(init_timeout_secs, "init_timeout")?;
        let mut prover = build_prover(&prover_spec, init_timeout)
            .context("starting the replay prover")?;
        let output = curate(transitions, &benchmarks, bleu_threshold, prover.as_mut(), step_timeout);
        (output.kept, output.records, output.counts)
    };

    // Carry the dump's provenance forward, stamped with this run's threshold.
    let mut lines = Vec::with_capacity(kept.len() + 1);
    if let Some(mut meta) = meta {
        meta.bleu_threshold = Some(bleu_threshold);
        lines.push(meta.to_header_line());
    }
    for t in &kept {
        lines.push(serde_json::to_string(t)?);
    }
    append_jsonl(&out, lines)?;

    if let Some(path) = &records_out {
        append_jsonl(
            path,
            records.iter().map(|r| serde_json::to_string(r).expect("records serialize")),
        )?;
    }

    let summary = serde_json::json!({
        "counts": counts,
        "rejection_skipped": skip_rejection,
        "out": out,
        "records_out": records_out,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

// ---------------------------------------------------------------------------
// viz
// ---------------------------------------------------------------------------

fn run_viz(args: VizArgs, file: &toml::Table, dry_run: bool) -> Result<()> {
    let layers = Layers::new("viz", file);
    let input: PathBuf = layers.require("input", args.input)?;
    let format: String = layers.resolve("format", args.format, "html".to_string())?;
    let out: Option<PathBuf> = layers.resolve_opt("out", args.out)?;

    if dry_run {
        let echo = serde_json::json!({ "viz": {
            "input": input,
            "format": format,
            "out": out,
        }});
        println!("{}", serde_json::to_string_pretty(&echo)?);
        return Ok(());
    }

    let text = std::fs::read_to_string(&input)
        .with_context(|| format!("reading {}", input.display()))?;
    let rendered = match format.as_str() {
        "dot" => {
            let dag = import_json(&text).map_err(|e| anyhow!("{}: {e}", input.display()))?;
            export_dot(&dag)
        }
        "html" => render_html(&text).map_err(|e| anyhow!("{}: {e}", input.display()))?,
        "json" => {
            let dag = import_json(&text).map_err(|e| anyhow!("{}: {e}", input.display()))?;
            format!("{}\n", export_json(&dag))
        }
        other => bail!("unknown format {other:?}: expected dot, html, or json"),
    };

    match &out {
        Some(path) => std::fs::write(path, rendered)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{rendered}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// shared I/O helpers
// ---------------------------------------------------------------------------

fn load_corpus(path: &Path) -> Result<Vec<TheoremSpec>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading corpus {}", path.display()))?;
    let corpus =
        parse_corpus(&text).map_err(|e| anyhow!("parsing corpus {}: {e}", path.display()))?;
    if corpus.is_empty() {
        bail!("corpus {} has no theorems", path.display());
    }
    Ok(corpus)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(String::from).collect())
}

/// Read a transitions dump: provenance header lines (the first wins) plus one
/// transition per remaining non-blank line.
fn read_transitions(path: &Path) -> Result<(Option<ProvenanceMeta>, Vec<Transition>)> {
    let mut meta = None;
    let mut transitions = Vec::new();
    for (idx, line) in read_lines(path)?.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(parsed) = ProvenanceMeta::parse_header_line(&line) {
            meta.get_or_insert(parsed);
            continue;
        }
        let t: Transition = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", path.display(), idx + 1))?;
        transitions.push(t);
    }
    Ok((meta, transitions))
}

/// Append lines to a JSONL file, creating it (and its directory) on first use.
fn append_jsonl(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    for line in lines {
        writeln!(writer, "{line}").with_context(|| format!("writing {}", path.display()))?;
    }
    writer.flush().with_context(|| format!("flushing {}", path.display()))?;
    Ok(())
}

fn sanitize_file_stem(name: &str) -> String {
    let stem: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if stem.is_empty() {
        "unnamed".to_string()
    } else {
        stem
    }
}
