//! Adapter for an external prover process speaking a JSON-lines protocol
//! over its standard streams.
//!
//! Requests (one JSON object per line on the child's stdin):
//!   {"cmd":"init","id":N,"theorem":TEXT}
//!   {"cmd":"run","id":N,"state":STATE_ID,"step":TEXT}
//!   {"cmd":"shutdown","id":N}
//! Responses (one per line on the child's stdout):
//!   {"id":N,"ok":true,"result":{"kind":"state","state":ID,"goal":TEXT}}
//!   {"id":N,"ok":true,"result":{"kind":"finished"}}
//!   {"id":N,"ok":true,"result":{"kind":"error","message":TEXT}}
//!   {"id":N,"ok":false,"message":TEXT}
//!
//! A step that outlives its deadline leaves the remote process in an
//! unknown state, so the adapter kills and restarts it, re-initializes the
//! theorem, and reports [`StepResult::StepTimeout`]. States created before
//! the restart are rebound lazily: the first step run against one replays
//! its root-to-state step sequence on the fresh process first. The same
//! restart path serves a crashed process, reported as an `ErrorKind::Crash`
//! step error.

use crate::prover::{ProverBackend, ProverError, StepResult, TheoremSpec};
use crate::state::{ErrorKind, ProofState, ProofStep};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

// ---------------------------------------------------------------------------
// wire format
// ---------------------------------------------------------------------------

#[derive(Serialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
enum Request<'a> {
    Init { id: u64, theorem: &'a str },
    Run { id: u64, state: u64, step: &'a str },
    Shutdown { id: u64 },
}

#[derive(Deserialize, Debug)]
struct Response {
    id: u64,
    ok: bool,
    #[serde(default)]
    result: Option<RemoteResult>,
    #[serde(default)]
    message: Option<String>,
}

#[derive(Deserialize, Debug)]
struct RemoteResult {
    kind: String,
    #[serde(default)]
    state: Option<u64>,
    #[serde(default)]
    goal: Option<String>,
    #[serde(default)]
    message: Option<String>,
}

// ---------------------------------------------------------------------------
// the adapter
// ---------------------------------------------------------------------------

/// How to launch and talk to the external prover.
#[derive(Debug, Clone)]
pub struct ExternalProverConfig {
    /// Program and arguments of the prover process.
    pub command: Vec<String>,
    /// Deadline for initialization and context-restoration steps (these are
    /// not covered by the per-step timeout the caller passes to `run_step`).
    pub init_timeout: Duration,
}

impl ExternalProverConfig {
    /// Build from a command line, split on whitespace.
    pub fn from_command_line(line: &str) -> Result<ExternalProverConfig, ProverError> {
        let command: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if command.is_empty() {
            return Err(ProverError::Protocol { message: "empty prover command".into() });
        }
        Ok(ExternalProverConfig { command, init_timeout: Duration::from_secs(30) })
    }
}

/// One running child process plus its reader thread.
struct Connection {
    child: Child,
    stdin: ChildStdin,
    responses: mpsc::Receiver<Response>,
}

impl Connection {
    fn open(config: &ExternalProverConfig) -> Result<Connection, ProverError> {
        let mut child = Command::new(&config.command[0])
            .args(&config.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| ProverError::Init {
                message: format!("cannot start prover {:?}: {e}", config.command[0]),
            })?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                let Ok(line) = line else { break };
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Response>(&line) {
                    Ok(resp) => {
                        if tx.send(resp).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        log::warn!("unparseable prover response {line:?}: {e}");
                    }
                }
            }
            // Dropping the sender disconnects the channel, which the adapter
            // observes as a dead process.
        });
        Ok(Connection { child, stdin, responses: rx })
    }

    fn send(&mut self, request: &Request) -> Result<(), ProverError> {
        let mut line = serde_json::to_string(request).expect("requests serialize");
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|()| self.stdin.flush())
            .map_err(|e| ProverError::Protocol { message: format!("prover stdin closed: {e}") })
    }

    /// Wait for the response matching `id`, discarding stale ones.
    fn receive(&mut self, id: u64, deadline: Instant) -> Result<Response, RecvFailure> {
        loop {
            let now = Instant::now();
            let remaining = deadline.checked_duration_since(now).unwrap_or(Duration::ZERO);
            match self.responses.recv_timeout(remaining) {
                Ok(resp) if resp.id == id => return Ok(resp),
                Ok(stale) => log::warn!("discarding stale prover response id {}", stale.id),
                Err(mpsc::RecvTimeoutError::Timeout) => return Err(RecvFailure::Timeout),
                Err(mpsc::RecvTimeoutError::Disconnected) => return Err(RecvFailure::Died),
            }
        }
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

enum RecvFailure {
    Timeout,
    Died,
}

/// Everything the adapter remembers about one local state.
struct StateEntry {
    /// The remote prover's id for this state, valid for `epoch`.
    remote_id: u64,
    /// Which process incarnation `remote_id` belongs to.
    epoch: u64,
    /// Steps from the root to this state, for context restoration.
    lineage: Vec<String>,
}

/// JSON-lines adapter implementing [`ProverBackend`] over a child process.
pub struct ExternalProver {
    config: ExternalProverConfig,
    connection: Option<Connection>,
    /// Incremented on every restart; entries from older epochs are rebound
    /// before use.
    epoch: u64,
    next_request: u64,
    next_local_id: u64,
    theorem: Option<TheoremSpec>,
    states: HashMap<u64, StateEntry>,
}

impl ExternalProver {
    pub fn new(config: ExternalProverConfig) -> ExternalProver {
        ExternalProver {
            config,
            connection: None,
            epoch: 0,
            next_request: 0,
            next_local_id: 0,
            theorem: None,
            states: HashMap::new(),
        }
    }

    /// Launch the prover from a whitespace-separated command line.
    pub fn spawn(command_line: &str) -> Result<ExternalProver, ProverError> {
        Ok(ExternalProver::new(ExternalProverConfig::from_command_line(command_line)?))
    }

    fn request_id(&mut self) -> u64 {
        self.next_request += 1;
        self.next_request
    }

    fn local_id(&mut self) -> u64 {
        let id = self.next_local_id;
        self.next_local_id += 1;
        id
    }

    fn connection(&mut self) -> Result<&mut Connection, ProverError> {
        if self.connection.is_none() {
            self.connection = Some(Connection::open(&self.config)?);
        }
        Ok(self.connection.as_mut().expect("just opened"))
    }

    /// Kill the current process (if any) and start a new epoch.
    fn restart(&mut self) -> Result<(), ProverError> {
        if let Some(mut conn) = self.connection.take() {
            conn.kill();
        }
        self.epoch += 1;
        self.connection = Some(Connection::open(&self.config)?);
        Ok(())
    }

    /// One request/response exchange under a deadline.
    fn exchange(
        &mut self,
        build: impl FnOnce(u64) -> serde_json::Value,
        timeout: Duration,
    ) -> Result<RemoteResult, ExchangeFailure> {
        let id = self.request_id();
        let request = build(id);
        let conn = self
            .connection()
            .map_err(|e| ExchangeFailure::Broken(e.to_string()))?;
        let mut line = request.to_string();
        line.push('\n');
        if let Err(e) = conn.stdin.write_all(line.as_bytes()).and_then(|()| conn.stdin.flush()) {
            return Err(ExchangeFailure::Died(format!("prover stdin closed: {e}")));
        }
        match conn.receive(id, Instant::now() + timeout) {
            Ok(resp) => {
                if !resp.ok {
                    return Err(ExchangeFailure::Rejected(
                        resp.message.unwrap_or_else(|| "request rejected".into()),
                    ));
                }
                resp.result.ok_or_else(|| {
                    ExchangeFailure::Rejected("response carried no result".into())
                })
            }
            Err(RecvFailure::Timeout) => Err(ExchangeFailure::Timeout),
            Err(RecvFailure::Died) => Err(ExchangeFailure::Died("prover process exited".into())),
        }
    }

    /// Initialize the current theorem on the current process. Returns the
    /// remote root state id and goal.
    fn init_remote(&mut self) -> Result<(u64, String), ProverError> {
        let theorem = self
            .theorem
            .clone()
            .ok_or_else(|| ProverError::Protocol { message: "no theorem initialized".into() })?;
        let timeout = self.config.init_timeout;
        let result = self
            .exchange(
                |id| {
                    serde_json::to_value(Request::Init { id, theorem: &theorem.statement })
                        .expect("requests serialize")
                },
                timeout,
            )
            .map_err(|f| ProverError::Init { message: f.describe() })?;
        match result.kind.as_str() {
            "state" => {
                let remote_id = result.state.ok_or_else(|| ProverError::Init {
                    message: "init response missing state id".into(),
                })?;
                let goal = result.goal.ok_or_else(|| ProverError::Init {
                    message: "init response missing goal".into(),
                })?;
                Ok((remote_id, goal))
            }
            "error" => Err(ProverError::Init {
                message: result.message.unwrap_or_else(|| "theorem rejected".into()),
            }),
            other => {
                Err(ProverError::Init { message: format!("unexpected init result {other:?}") })
            }
        }
    }

    /// Run one step remotely, by remote state id.
    fn run_remote(
        &mut self,
        remote_state: u64,
        step: &str,
        timeout: Duration,
    ) -> Result<RemoteResult, ExchangeFailure> {
        self.exchange(
            |id| {
                serde_json::to_value(Request::Run { id, state: remote_state, step })
                    .expect("requests serialize")
            },
            timeout,
        )
    }

    /// Make sure `entry` refers to a live remote state, replaying its
    /// lineage on the fresh process if it predates the current epoch.
    fn rebind(&mut self, local_id: u64) -> Result<u64, String> {
        let (epoch, remote_id, lineage) = {
            let entry = self
                .states
                .get(&local_id)
                .ok_or_else(|| format!("state {local_id} was not produced by this prover"))?;
            (entry.epoch, entry.remote_id, entry.lineage.clone())
        };
        if epoch == self.epoch && self.connection.is_some() {
            return Ok(remote_id);
        }
        let (root_remote, _) = self
            .init_remote()
            .map_err(|e| format!("context restoration failed: {e}"))?;
        let mut current = root_remote;
        let init_timeout = self.config.init_timeout;
        for step in &lineage {
            let result = self
                .run_remote(current, step, init_timeout)
                .map_err(|f| format!("context restoration failed: {}", f.describe()))?;
            if result.kind != "state" {
                return Err(format!(
                    "context restoration step {step:?} produced {:?} instead of a state",
                    result.kind
                ));
            }
            current = result.state.ok_or("restored state missing its id".to_string())?;
        }
        let entry = self.states.get_mut(&local_id).expect("looked up above");
        entry.epoch = self.epoch;
        entry.remote_id = current;
        Ok(current)
    }
}

enum ExchangeFailure {
    /// No response before the deadline; the process must be restarted.
    Timeout,
    /// The process is gone (stdin closed or stdout disconnected).
    Died(String),
    /// The prover answered `ok: false`.
    Rejected(String),
    /// The adapter could not even launch a process.
    Broken(String),
}

impl ExchangeFailure {
    fn describe(&self) -> String {
        match self {
            ExchangeFailure::Timeout => "prover did not answer in time".into(),
            ExchangeFailure::Died(m) | ExchangeFailure::Rejected(m) | ExchangeFailure::Broken(m) => {
                m.clone()
            }
        }
    }
}

impl ProverBackend for ExternalProver {
    fn init_theorem(&mut self, theorem: &TheoremSpec) -> Result<ProofState, ProverError> {
        self.theorem = Some(theorem.clone());
        self.states.clear();
        if self.connection.is_none() {
            self.connection = Some(Connection::open(&self.config)?);
        }
        let (remote_id, goal) = self.init_remote()?;
        let local = self.local_id();
        self.states.insert(
            local,
            StateEntry { remote_id, epoch: self.epoch, lineage: Vec::new() },
        );
        Ok(ProofState::new(local, goal, 0))
    }

    fn run_step(&mut self, state: &ProofState, step: &ProofStep, timeout: Duration) -> StepResult {
        let remote_id = match self.rebind(state.state_id) {
            Ok(id) => id,
            Err(message) => return StepResult::error(ErrorKind::Crash, message),
        };
        match self.run_remote(remote_id, &step.full_text, timeout) {
            Ok(result) => match result.kind.as_str() {
                "state" => {
                    let (Some(child_remote), Some(goal)) = (result.state, result.goal) else {
                        return StepResult::error(
                            ErrorKind::Crash,
                            "malformed state response from prover",
                        );
                    };
                    let parent_lineage = self.states[&state.state_id].lineage.clone();
                    let local = self.local_id();
                    let mut lineage = parent_lineage;
                    lineage.push(step.full_text.clone());
                    self.states.insert(
                        local,
                        StateEntry { remote_id: child_remote, epoch: self.epoch, lineage },
                    );
                    StepResult::NewState(ProofState::new(local, goal, state.depth + 1))
                }
                "finished" => StepResult::ProofFinished,
                "error" => StepResult::error(
                    ErrorKind::Syntax,
                    result.message.unwrap_or_else(|| "step rejected".into()),
                ),
                other => StepResult::error(
                    ErrorKind::Crash,
                    format!("unknown result kind {other:?} from prover"),
                ),
            },
            Err(ExchangeFailure::Timeout) => {
                // The remote is stuck mid-step: replace the process. Other
                // states rebind lazily on their next use.
                if let Err(e) = self.restart() {
                    log::warn!("prover restart after timeout failed: {e}");
                }
                StepResult::StepTimeout
            }
            Err(ExchangeFailure::Died(message)) => {
                if let Err(e) = self.restart() {
                    log::warn!("prover restart after crash failed: {e}");
                }
                StepResult::error(ErrorKind::Crash, message)
            }
            Err(ExchangeFailure::Rejected(message)) => {
                StepResult::error(ErrorKind::Syntax, message)
            }
            Err(ExchangeFailure::Broken(message)) => StepResult::error(ErrorKind::Crash, message),
        }
    }
}

impl Drop for ExternalProver {
    fn drop(&mut self) {
        if let Some(mut conn) = self.connection.take() {
            let id = self.next_request + 1;
            let _ = conn.send(&Request::Shutdown { id });
            // Give a cooperative prover a moment, then make sure it is gone.
            std::thread::sleep(Duration::from_millis(20));
            conn.kill();
        }
    }
}
