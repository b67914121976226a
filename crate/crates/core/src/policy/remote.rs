//! HTTP client for OpenAI-style completion servers.
//!
//! The prompt is the plain goal template (`[GOAL]\n<goal>\n[PROOFSTEP]\n`);
//! whole-step proposals are requested as n-best completions with per-token
//! logprobs, and a candidate's logprob is the sum over its tokens.
//!
//! Constrained decoding is realized by prefix-forcing: each member of 𝒯 is
//! appended to the prompt and scored via an echoed zero-length completion
//! (`max_tokens: 0, echo: true`), summing the token logprobs that fall inside
//! the forced region. Premise completion forces the tactic the same way and
//! lets the model finish the line. This needs nothing beyond a standard
//! completion API, at the cost of one request per tactic.
//!
//! Failures retry with exponential backoff (default: 60 s timeout, 2
//! retries); a server that stays unreachable surfaces as a transport error,
//! which the search layer treats as an expansion with zero candidates. A
//! small semaphore bounds in-flight requests so many concurrent searches
//! cannot stampede one inference server.

use super::{dedup_and_rank, CompletedStep, PolicyBackend, PolicyError, TacticSet};
use crate::state::{goal_prompt, ProofState, ProofStep, ScoredCandidate};
use serde::Deserialize;
use serde_json::{json, Value};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

/// Environment variable holding the bearer token sent to the server. The key
/// is never accepted through flags or config files.
pub const API_KEY_ENV: &str = "TACSEARCH_API_KEY";

/// Logprob recorded for a premise completion whose request failed outright.
const FAILED_COMPLETION_LOGPROB: f64 = -30.0;

/// Connection settings for a remote completion endpoint.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Server base URL, e.g. `http://127.0.0.1:8000`. `/v1/completions` is
    /// appended unless the URL already ends with `/completions`.
    pub url: String,
    /// Model name passed through in every request.
    pub model: String,
    /// Completion budget per candidate.
    pub max_tokens: u32,
    /// Per-request timeout.
    pub timeout: Duration,
    /// Retries after the first failed attempt.
    pub retries: u32,
    /// Maximum concurrent requests across all searches sharing this client.
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> RemoteConfig {
        RemoteConfig {
            url: url.into(),
            model: "default".to_string(),
            max_tokens: 128,
            timeout: Duration::from_secs(60),
            retries: 2,
            max_in_flight: 4,
        }
    }
}

// ---------------------------------------------------------------------------
// completion wire format
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    #[serde(default)]
    text: String,
    #[serde(default)]
    logprobs: Option<LogProbs>,
}

#[derive(Debug, Default, Deserialize)]
struct LogProbs {
    #[serde(default)]
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    text_offset: Vec<usize>,
}

impl Choice {
    /// Sum of all token logprobs (nulls skipped).
    fn total_logprob(&self) -> f64 {
        self.logprobs
            .as_ref()
            .map(|lp| lp.token_logprobs.iter().flatten().sum())
            .unwrap_or(0.0)
    }

    /// Sum of token logprobs for tokens starting at or after `offset` —
    /// the forced-prefix region when echoing.
    fn logprob_from_offset(&self, offset: usize) -> f64 {
        let Some(lp) = self.logprobs.as_ref() else { return 0.0 };
        lp.token_logprobs
            .iter()
            .zip(lp.text_offset.iter())
            .filter(|(_, off)| **off >= offset)
            .filter_map(|(p, _)| *p)
            .sum()
    }
}

// ---------------------------------------------------------------------------
// in-flight limiter
// ---------------------------------------------------------------------------

#[derive(Debug)]
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore { permits: Mutex::new(permits.max(1)), available: Condvar::new() }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut n = self.permits.lock().expect("limiter poisoned");
        while *n == 0 {
            n = self.available.wait(n).expect("limiter poisoned");
        }
        *n -= 1;
        SemaphoreGuard { sem: self }
    }
}

struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.sem.permits.lock().expect("limiter poisoned") += 1;
        self.sem.available.notify_one();
    }
}

// ---------------------------------------------------------------------------
// the client
// ---------------------------------------------------------------------------

/// Policy backed by a remote completion server.
#[derive(Clone)]
pub struct RemotePolicy {
    config: RemoteConfig,
    endpoint: String,
    agent: ureq::Agent,
    limiter: Arc<Semaphore>,
}

impl std::fmt::Debug for RemotePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemotePolicy").field("endpoint", &self.endpoint).finish()
    }
}

impl RemotePolicy {
    pub fn new(config: RemoteConfig) -> RemotePolicy {
        let base = config.url.trim_end_matches('/');
        let endpoint = if base.ends_with("/completions") {
            base.to_string()
        } else {
            format!("{base}/v1/completions")
        };
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder()
                .timeout_global(Some(config.timeout))
                .build(),
        );
        let limiter = Arc::new(Semaphore::new(config.max_in_flight));
        RemotePolicy { config, endpoint, agent, limiter }
    }

    fn attempt(&self, body: &Value) -> Result<CompletionResponse, String> {
        let mut request = self.agent.post(&self.endpoint);
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                request = request.header("Authorization", format!("Bearer {key}"));
            }
        }
        let mut response = request.send_json(body).map_err(|e| e.to_string())?;
        response.body_mut().read_json().map_err(|e| format!("bad response body: {e}"))
    }

    /// POST with retries and the in-flight bound applied.
    fn request(&self, body: &Value) -> Result<CompletionResponse, PolicyError> {
        let _permit = self.limiter.acquire();
        let mut delay = Duration::from_millis(200);
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(body) {
                Ok(response) => return Ok(response),
                Err(e) => last = e,
            }
        }
        Err(PolicyError::Transport(format!(
            "{} failed after {} attempts: {last}",
            self.endpoint,
            self.config.retries + 1
        )))
    }
}

impl PolicyBackend for RemotePolicy {
    fn propose(
        &self,
        state: &ProofState,
        beam_size: u32,
    ) -> Result<Vec<ScoredCandidate>, PolicyError> {
        let prompt = goal_prompt(&state.goal_text);
        let body = json!({
            "model": self.config.model,
            "prompt": prompt,
            "n": beam_size,
            "max_tokens": self.config.max_tokens,
            "logprobs": 1,
            "stop": ["\n"],
        });
        let response = self.request(&body)?;
        let mut candidates = Vec::new();
        for choice in &response.choices {
            let text = choice.text.trim();
            if text.is_empty() {
                continue;
            }
            candidates.push(ScoredCandidate::new(
                ProofStep::from_full_text(text),
                choice.total_logprob().min(0.0),
            ));
        }
        let mut out = dedup_and_rank(candidates);
        out.truncate(beam_size as usize);
        Ok(out)
    }

    fn propose_tactics(
        &self,
        state: &ProofState,
        beam_size: u32,
        constraint: &TacticSet,
    ) -> Result<Vec<(String, f64)>, PolicyError> {
        let prompt = goal_prompt(&state.goal_text);
        let mut scored: Vec<(String, f64)> = Vec::with_capacity(constraint.len());
        for tactic in &constraint.tactics {
            let body = json!({
                "model": self.config.model,
                "prompt": format!("{prompt}{tactic}"),
                "max_tokens": 0,
                "echo": true,
                "logprobs": 1,
            });
            let response = self.request(&body)?;
            let score = response
                .choices
                .first()
                .map(|c| c.logprob_from_offset(prompt.len()))
                .unwrap_or(0.0);
            scored.push((tactic.clone(), score.min(0.0)));
        }
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        scored.truncate((beam_size as usize).min(constraint.len()));
        Ok(scored)
    }

    fn complete_premises(
        &self,
        state: &ProofState,
        tactics: &[String],
    ) -> Result<Vec<CompletedStep>, PolicyError> {
        let prompt = goal_prompt(&state.goal_text);
        let mut out = Vec::with_capacity(tactics.len());
        for tactic in tactics {
            let forced = format!("{prompt}{tactic}");
            let body = json!({
                "model": self.config.model,
                "prompt": forced,
                "max_tokens": self.config.max_tokens,
                "echo": true,
                "logprobs": 1,
                "stop": ["\n"],
            });
            match self.request(&body) {
                Ok(response) => {
                    let choice = response.choices.into_iter().next().unwrap_or(Choice {
                        text: String::new(),
                        logprobs: None,
                    });
                    // With echo the text starts with the forced prompt; the
                    // suffix beyond it is the premise.
                    let premise = choice
                        .text
                        .strip_prefix(&forced)
                        .unwrap_or(&choice.text)
                        .trim()
                        .to_string();
                    out.push(CompletedStep {
                        step: ProofStep::new(tactic.clone(), premise),
                        logprob: choice.logprob_from_offset(prompt.len()).min(0.0),
                        premise_failed: false,
                    });
                }
                Err(e) => {
                    log::warn!("premise completion for {tactic:?} failed: {e}");
                    out.push(CompletedStep {
                        step: ProofStep::new(tactic.clone(), ""),
                        logprob: FAILED_COMPLETION_LOGPROB,
                        premise_failed: true,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Remote sampling is not client-seedable; reseeding returns an identical
    /// client sharing the same in-flight limiter.
    fn reseeded(&self, _seed: u64) -> Box<dyn PolicyBackend> {
        Box::new(self.clone())
    }
}

// ---------------------------------------------------------------------------
// tests (against a local fake completion server)
// ---------------------------------------------------------------------------
