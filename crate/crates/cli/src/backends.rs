//! Parsing of `--policy` and `--prover` specs and construction of the
//! corresponding backends.

use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use tacsearch::policy::{
    ExhaustiveToyPolicy, PolicyBackend, RemoteConfig, RemotePolicy, ScriptedPolicy,
};
use tacsearch::prover::external::{ExternalProver, ExternalProverConfig};
use tacsearch::prover::toy::ToyProver;
use tacsearch::prover::{ProverBackend, ProverError};

/// A parsed `--policy` spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySpec {
    /// `scripted:FILE` — candidates from a JSONL pattern table.
    Scripted(PathBuf),
    /// `remote:URL` — a completion endpoint. The API key, when one is
    /// needed, comes only from the `TACSEARCH_API_KEY` environment variable.
    Remote(String),
    /// `exhaustive-toy` — every applicable toy rewrite, uniformly scored.
    ExhaustiveToy,
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(text: &str) -> Result<PolicySpec, String> {
        if let Some(path) = text.strip_prefix("scripted:") {
            if path.is_empty() {
                return Err("scripted: needs a file path".into());
            }
            return Ok(PolicySpec::Scripted(PathBuf::from(path)));
        }
        if let Some(url) = text.strip_prefix("remote:") {
            if url.is_empty() {
                return Err("remote: needs a URL".into());
            }
            return Ok(PolicySpec::Remote(url.to_string()));
        }
        if text == "exhaustive-toy" {
            return Ok(PolicySpec::ExhaustiveToy);
        }
        Err(format!(
            "unknown policy {text:?}: expected scripted:FILE, remote:URL, or exhaustive-toy"
        ))
    }
}

/// Build the policy behind a spec. `noise` perturbs scripted logprobs with
/// the given (sigma, seed) and is rejected for backends that have no score
/// table to perturb.
pub fn build_policy(
    spec: &PolicySpec,
    noise: Option<(f64, u64)>,
    model: Option<&str>,
) -> Result<Box<dyn PolicyBackend>> {
    match spec {
        PolicySpec::Scripted(path) => {
            let policy = ScriptedPolicy::load(path)
                .with_context(|| format!("loading scripted policy {}", path.display()))?;
            Ok(match noise {
                Some((sigma, seed)) => Box::new(policy.with_noise(sigma, seed)),
                None => Box::new(policy),
            })
        }
        PolicySpec::Remote(url) => {
            if noise.is_some() {
                bail!("--noise-sigma only applies to scripted policies");
            }
            let mut config = RemoteConfig::new(url.clone());
            if let Some(model) = model {
                config.model = model.to_string();
            }
            Ok(Box::new(RemotePolicy::new(config)))
        }
        PolicySpec::ExhaustiveToy => {
            if noise.is_some() {
                bail!("--noise-sigma only applies to scripted policies");
            }
            Ok(Box::new(ExhaustiveToyPolicy::new()))
        }
    }
}

/// A parsed `--prover` spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProverSpec {
    /// `toy` — the in-process rewrite prover.
    Toy,
    /// `external:CMD [ARGS…]` — a subprocess speaking the line protocol.
    /// The command is split on whitespace; no shell quoting is applied.
    External(Vec<String>),
}

impl FromStr for ProverSpec {
    type Err = String;

    fn from_str(text: &str) -> Result<ProverSpec, String> {
        if text == "toy" {
            return Ok(ProverSpec::Toy);
        }
        if let Some(command) = text.strip_prefix("external:") {
            let parts: Vec<String> = command.split_whitespace().map(String::from).collect();
            if parts.is_empty() {
                return Err("external: needs a command".into());
            }
            return Ok(ProverSpec::External(parts));
        }
        Err(format!("unknown prover {text:?}: expected toy or external:CMD [ARGS…]"))
    }
}

/// Build one prover session for a spec.
pub fn build_prover(spec: &ProverSpec, init_timeout: Duration) -> Result<Box<dyn ProverBackend>, ProverError> {
    match spec {
        ProverSpec::Toy => Ok(Box::new(ToyProver::new())),
        ProverSpec::External(command) => Ok(Box::new(ExternalProver::new(ExternalProverConfig {
            command: command.clone(),
            init_timeout,
        }))),
    }
}
