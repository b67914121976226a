//! End-to-end tests of the external prover adapter against the real
//! `toy-server` binary over stdio.

use std::time::Duration;
use tacsearch::prover::external::{ExternalProver, ExternalProverConfig};
use tacsearch::prover::{ProverBackend, ProverError, StepResult, TheoremSpec};
use tacsearch::search::{best_first_search, BeamSchedule, SearchConfig, SearchOutcome};
use tacsearch::state::{ErrorKind, ProofState, ProofStep};

fn server_command() -> Vec<String> {
    vec![env!("CARGO_BIN_EXE_toy-server").to_string()]
}

fn connect() -> ExternalProver {
    ExternalProver::new(ExternalProverConfig {
        command: server_command(),
        init_timeout: Duration::from_secs(30),
    })
}

const STEP_TIMEOUT: Duration = Duration::from_secs(10);

fn new_state(result: StepResult) -> ProofState {
    match result {
        StepResult::NewState(s) => s,
        other => panic!("expected a new state, got {other:?}"),
    }
}

#[test]
fn proves_a_two_step_theorem_over_the_wire() {
    let mut prover = connect();
    let root = prover
        .init_theorem(&TheoremSpec::new("add_zero_right", "x + 0 = x"))
        .expect("theorem initializes");
    assert_eq!(root.goal_text, "x + 0 = x");
    assert_eq!(root.depth, 0);

    let mid = new_state(prover.run_step(
        &root,
        &ProofStep::new("rw add_zero", "l"),
        STEP_TIMEOUT,
    ));
    assert_eq!(mid.goal_text, "x = x");
    assert_eq!(mid.depth, 1);

    let done = prover.run_step(&mid, &ProofStep::new("refl", ""), STEP_TIMEOUT);
    assert!(matches!(done, StepResult::ProofFinished), "got {done:?}");
}

#[test]
fn init_rejection_carries_the_remote_message() {
    let mut prover = connect();
    let err = prover
        .init_theorem(&TheoremSpec::new("nonsense", "not ( an equation"))
        .expect_err("unparseable theorem must be rejected");
    match err {
        ProverError::Init { message } => {
            assert!(
                message.contains("cannot parse theorem"),
                "message should come from the server, got {message:?}"
            );
        }
        other => panic!("expected an init error, got {other:?}"),
    }
}

#[test]
fn step_errors_flow_back_in_band() {
    let mut prover = connect();
    let root = prover
        .init_theorem(&TheoremSpec::new("t", "x + 0 = x"))
        .unwrap();

    // A rewrite that does not apply and a malformed step both come back as
    // in-band step errors, and the session keeps going.
    let inapplicable = prover.run_step(&root, &ProofStep::new("refl", ""), STEP_TIMEOUT);
    match inapplicable {
        StepResult::StepError { kind, ref message } => {
            assert_eq!(kind, ErrorKind::Syntax);
            assert!(message.contains("sides differ"), "got {message:?}");
        }
        other => panic!("expected a step error, got {other:?}"),
    }

    let unknown = prover.run_step(&root, &ProofStep::new("frobnicate", ""), STEP_TIMEOUT);
    assert!(matches!(unknown, StepResult::StepError { .. }), "got {unknown:?}");

    // The session is still healthy afterwards.
    let mid = new_state(prover.run_step(
        &root,
        &ProofStep::new("rw add_zero", "l"),
        STEP_TIMEOUT,
    ));
    assert_eq!(mid.goal_text, "x = x");
}

#[test]
fn foreign_states_are_refused_without_killing_the_session() {
    let mut prover = connect();
    let root = prover
        .init_theorem(&TheoremSpec::new("t", "x + 0 = x"))
        .unwrap();

    let foreign = ProofState::new(999, "y = y", 3);
    let result = prover.run_step(&foreign, &ProofStep::new("refl", ""), STEP_TIMEOUT);
    match result {
        StepResult::StepError { kind, ref message } => {
            assert_eq!(kind, ErrorKind::Crash);
            assert!(message.contains("not produced by this prover"), "got {message:?}");
        }
        other => panic!("expected a crash-kind error, got {other:?}"),
    }

    let mid = new_state(prover.run_step(
        &root,
        &ProofStep::new("rw add_zero", "l"),
        STEP_TIMEOUT,
    ));
    assert_eq!(mid.goal_text, "x = x");
}

/// The recovery-liveness contract: after one step times out (killing and
/// restarting the stuck process), a step against a sibling state from before
/// the restart still succeeds, because the adapter replays that sibling's
/// step lineage on the fresh process.
#[test]
fn timed_out_step_leaves_sibling_states_usable() {
    let mut prover = connect();
    let root = prover
        .init_theorem(&TheoremSpec::new("t", "0 + a = a"))
        .unwrap();

    let flipped = new_state(prover.run_step(
        &root,
        &ProofStep::new("rw comm_add", "l"),
        STEP_TIMEOUT,
    ));
    assert_eq!(flipped.goal_text, "a + 0 = a");

    let sibling = new_state(prover.run_step(
        &flipped,
        &ProofStep::new("rw add_zero", "l"),
        STEP_TIMEOUT,
    ));
    assert_eq!(sibling.goal_text, "a = a");

    // `spin` blocks the server far beyond the 100ms deadline.
    let stuck = prover.run_step(&flipped, &ProofStep::new("spin", ""), Duration::from_millis(100));
    assert!(matches!(stuck, StepResult::StepTimeout), "got {stuck:?}");

    // The sibling was created by the killed process; finishing from it works
    // only if the adapter restores its context on the replacement process.
    let done = prover.run_step(&sibling, &ProofStep::new("refl", ""), STEP_TIMEOUT);
    assert!(matches!(done, StepResult::ProofFinished), "got {done:?}");
}

#[test]
fn process_crash_is_reported_and_recovered_from() {
    let mut prover = connect();
    let root = prover
        .init_theorem(&TheoremSpec::new("t", "x + 0 = x"))
        .unwrap();

    // `die` exits the server without a response.
    let crashed = prover.run_step(&root, &ProofStep::new("die", ""), STEP_TIMEOUT);
    match crashed {
        StepResult::StepError { kind, .. } => assert_eq!(kind, ErrorKind::Crash),
        other => panic!("expected a crash-kind error, got {other:?}"),
    }

    // The next step against the old root transparently re-initializes the
    // theorem on a fresh process.
    let mid = new_state(prover.run_step(
        &root,
        &ProofStep::new("rw add_zero", "l"),
        STEP_TIMEOUT,
    ));
    assert_eq!(mid.goal_text, "x = x");

    let done = prover.run_step(&mid, &ProofStep::new("refl", ""), STEP_TIMEOUT);
    assert!(matches!(done, StepResult::ProofFinished), "got {done:?}");
}

#[test]
fn replay_reruns_a_proof_from_the_root() {
    let mut prover = connect();
    let theorem = TheoremSpec::new("t", "x + 0 = x");
    let steps = [ProofStep::new("rw add_zero", "l"), ProofStep::new("refl", "")];
    let outcome = prover.replay(&theorem, &steps, STEP_TIMEOUT).unwrap();
    assert!(matches!(outcome, StepResult::ProofFinished), "got {outcome:?}");

    // Short replays end on the intermediate state they reach.
    let partial = prover
        .replay(&theorem, &steps[..1], STEP_TIMEOUT)
        .unwrap();
    assert_eq!(new_state(partial).goal_text, "x = x");
}

#[test]
fn unlaunchable_commands_fail_at_init() {
    let mut prover = ExternalProver::new(ExternalProverConfig {
        command: vec!["/nonexistent/prover-binary".into()],
        init_timeout: Duration::from_secs(5),
    });
    let err = prover
        .init_theorem(&TheoremSpec::new("t", "x = x"))
        .expect_err("spawning a missing binary must fail");
    assert!(matches!(err, ProverError::Init { .. }), "got {err:?}");
}

#[test]
fn best_first_search_proves_a_theorem_through_the_adapter() {
    let table = r#"
{"pattern": "x + (0 + 0) = x", "candidates": [{"tactic": "rw add_zero", "premise": "l.1", "logprob": -0.3}, {"tactic": "rw comm_add", "premise": "l", "logprob": -1.4}, {"tactic": "refl", "logprob": -3.0}]}
{"pattern": "x + 0 = x", "candidates": [{"tactic": "rw add_zero", "premise": "l", "logprob": -0.2}, {"tactic": "refl", "logprob": -2.5}]}
{"pattern": "x = x", "candidates": [{"tactic": "refl", "logprob": -0.1}]}
"#;
    let policy = tacsearch::policy::ScriptedPolicy::from_json_lines(table).unwrap();
    let mut prover = connect();
    let cfg = SearchConfig {
        expansions: 50,
        schedule: BeamSchedule::Fixed(4),
        ..SearchConfig::default()
    };
    let outcome = best_first_search(
        &TheoremSpec::new("nested", "x + (0 + 0) = x"),
        &policy,
        &mut prover,
        &cfg,
    )
    .unwrap();
    match outcome {
        SearchOutcome::Proved { proof, .. } => {
            let texts: Vec<&str> = proof.iter().map(|s| s.full_text.as_str()).collect();
            assert_eq!(texts, ["rw add_zero l.1", "rw add_zero l", "refl"]);
        }
        other => panic!("expected a proof, got {}", other.word()),
    }
}
