//! Toy rewrite prover behind the JSON-lines wire protocol.
//!
//! Reads one request per line from stdin and answers one response per line
//! on stdout, for exercising the external-prover adapter end to end:
//!
//!   {"cmd":"init","id":N,"theorem":TEXT}
//!   {"cmd":"run","id":N,"state":STATE_ID,"step":TEXT}
//!   {"cmd":"shutdown","id":N}
//!
//! Two steps exist purely to simulate misbehaving provers: `spin` blocks for
//! `--spin-secs` seconds (default 3600) before answering, and `die` exits the
//! process immediately without responding.

use serde::Deserialize;
use serde_json::json;
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::time::Duration;
use tacsearch::prover::toy::{execute_toy_step, ToyStepOutcome};
use tacsearch::term::{parse_goal, ToyGoal};

#[derive(Deserialize)]
#[serde(tag = "cmd", rename_all = "lowercase")]
enum Request {
    Init { id: u64, theorem: String },
    Run { id: u64, state: u64, step: String },
    Shutdown { id: u64 },
}

fn spin_duration() -> Duration {
    let mut args = std::env::args().skip(1);
    let mut secs = 3600u64;
    while let Some(arg) = args.next() {
        if arg == "--spin-secs" {
            let value = args.next().unwrap_or_default();
            secs = value.parse().unwrap_or_else(|_| {
                eprintln!("toy-server: bad --spin-secs value {value:?}");
                std::process::exit(2);
            });
        } else {
            eprintln!("toy-server: unknown argument {arg:?}");
            std::process::exit(2);
        }
    }
    Duration::from_secs(secs)
}

fn main() {
    let spin = spin_duration();
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut states: HashMap<u64, ToyGoal> = HashMap::new();
    let mut next_state: u64 = 0;

    let mut respond = move |value: serde_json::Value| {
        let mut line = value.to_string();
        line.push('\n');
        if out.write_all(line.as_bytes()).and_then(|()| out.flush()).is_err() {
            // The client hung up; nothing left to serve.
            std::process::exit(0);
        }
    };

    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let request: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                respond(json!({"id": 0, "ok": false, "message": format!("bad request: {e}")}));
                continue;
            }
        };
        match request {
            Request::Init { id, theorem } => match parse_goal(&theorem) {
                Ok(goal) => {
                    let state = next_state;
                    next_state += 1;
                    let rendered = goal.render();
                    states.insert(state, goal);
                    respond(json!({
                        "id": id,
                        "ok": true,
                        "result": {"kind": "state", "state": state, "goal": rendered},
                    }));
                }
                Err(e) => respond(json!({
                    "id": id,
                    "ok": true,
                    "result": {"kind": "error", "message": format!("cannot parse theorem: {e}")},
                })),
            },
            Request::Run { id, state, step } => {
                if step.trim() == "die" {
                    std::process::exit(3);
                }
                let Some(goal) = states.get(&state) else {
                    respond(json!({
                        "id": id,
                        "ok": false,
                        "message": format!("unknown state {state}"),
                    }));
                    continue;
                };
                match execute_toy_step(goal, &step, spin) {
                    ToyStepOutcome::NewGoal(next) => {
                        let child = next_state;
                        next_state += 1;
                        let rendered = next.render();
                        states.insert(child, next);
                        respond(json!({
                            "id": id,
                            "ok": true,
                            "result": {"kind": "state", "state": child, "goal": rendered},
                        }));
                    }
                    ToyStepOutcome::Finished => respond(json!({
                        "id": id,
                        "ok": true,
                        "result": {"kind": "finished"},
                    })),
                    ToyStepOutcome::Error(_, message) => respond(json!({
                        "id": id,
                        "ok": true,
                        "result": {"kind": "error", "message": message},
                    })),
                    ToyStepOutcome::Timeout => respond(json!({
                        "id": id,
                        "ok": true,
                        "result": {"kind": "error", "message": "step deadline exceeded"},
                    })),
                }
            }
            Request::Shutdown { id } => {
                respond(json!({"id": id, "ok": true}));
                std::process::exit(0);
            }
        }
    }
}
