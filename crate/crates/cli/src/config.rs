//! Layered configuration resolution.
//!
//! Every tunable is resolved through the same four layers, highest
//! precedence first:
//!
//! 1. the command-line flag,
//! 2. the `TACSEARCH_<SECTION>_<KEY>` environment variable,
//! 3. the `[<section>]` table of the TOML config file (`--config`, or the
//!    file named by `TACSEARCH_CONFIG`),
//! 4. the built-in default.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use tacsearch::search::{BeamSchedule, Scorer, SearchConfig};

/// Load the TOML config file, if any. Returns the path actually used so it
/// can be echoed in `--dry-run` output.
pub fn load_config_file(flag: Option<&Path>) -> Result<(Option<PathBuf>, toml::Table)> {
    let path = match flag {
        Some(p) => Some(p.to_path_buf()),
        None => std::env::var_os("TACSEARCH_CONFIG").map(PathBuf::from),
    };
    let Some(path) = path else {
        return Ok((None, toml::Table::new()));
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config file {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing config file {}", path.display()))?;
    Ok((Some(path), table))
}

/// One subcommand's slice of the layered configuration.
pub struct Layers {
    section: &'static str,
    file: toml::Table,
}

impl Layers {
    pub fn new(section: &'static str, file: &toml::Table) -> Layers {
        let section_table = file
            .get(section)
            .and_then(|v| v.as_table())
            .cloned()
            .unwrap_or_default();
        Layers { section, file: section_table }
    }

    fn env_key(&self, key: &str) -> String {
        format!(
            "TACSEARCH_{}_{}",
            self.section.to_ascii_uppercase(),
            key.to_ascii_uppercase()
        )
    }

    /// The raw layered value for `key`: environment beats the config file.
    fn lookup(&self, key: &str) -> Result<Option<String>> {
        let env_key = self.env_key(key);
        if let Some(value) = std::env::var_os(&env_key) {
            let value = value
                .into_string()
                .map_err(|_| anyhow!("{env_key} is not valid UTF-8"))?;
            return Ok(Some(value));
        }
        match self.file.get(key) {
            Some(value) => Ok(Some(scalar_to_string(value).with_context(|| {
                format!("config key {}.{key}", self.section)
            })?)),
            None => Ok(None),
        }
    }

    /// Resolve a value with a default.
    pub fn resolve<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.resolve_opt(key, flag)?.unwrap_or(default))
    }

    /// Resolve a value that has no default.
    pub fn resolve_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.lookup(key)? {
            Some(text) => {
                let value = text.parse::<T>().map_err(|e| {
                    anyhow!("bad value {text:?} for {}.{key}: {e}", self.section)
                })?;
                Ok(Some(value))
            }
            None => Ok(None),
        }
    }

    /// Resolve a value that must be present in some layer.
    pub fn require<T>(&self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.resolve_opt(key, flag)?.ok_or_else(|| {
            anyhow!(
                "{key} is required: pass --{}, set {}, or add {}.{key} to the config file",
                key.replace('_', "-"),
                self.env_key(key),
                self.section
            )
        })
    }
}

fn scalar_to_string(value: &toml::Value) -> Result<String> {
    Ok(match value {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => f.to_string(),
        toml::Value::Boolean(b) => b.to_string(),
        other => bail!("expected a scalar, found {other}"),
    })
}

// ---------------------------------------------------------------------------
// value parsers
// ---------------------------------------------------------------------------

/// Parse a beam schedule from its textual form. Tokens may be separated by
/// spaces or commas:
///
/// - `8` or `fixed 8` — constant width;
/// - `adaptive B_MAX B_MIN LAMBDA` — linear decay over the expansion budget.
pub fn parse_beam(text: &str) -> Result<BeamSchedule> {
    let tokens: Vec<&str> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .collect();
    let schedule = match tokens.as_slice() {
        [n] => BeamSchedule::Fixed(
            n.parse().map_err(|e| anyhow!("bad beam width {n:?}: {e}"))?,
        ),
        ["fixed", n] => BeamSchedule::Fixed(
            n.parse().map_err(|e| anyhow!("bad beam width {n:?}: {e}"))?,
        ),
        ["adaptive", b_max, b_min, lambda] => BeamSchedule::Adaptive {
            b_max: b_max.parse().map_err(|e| anyhow!("bad b_max {b_max:?}: {e}"))?,
            b_min: b_min.parse().map_err(|e| anyhow!("bad b_min {b_min:?}: {e}"))?,
            lambda: lambda.parse().map_err(|e| anyhow!("bad lambda {lambda:?}: {e}"))?,
        },
        // Nucleus filtering over the default width; `--top-p` composes the
        // same filter with an explicit base schedule instead.
        ["top-p" | "top_p", p] => BeamSchedule::TopPFilter {
            base: Box::new(SearchConfig::default().schedule),
            p: p.parse().map_err(|e| anyhow!("bad top-p mass {p:?}: {e}"))?,
        },
        _ => bail!(
            "bad beam spec {text:?}: expected N, `fixed N`, `adaptive B_MAX B_MIN LAMBDA`, \
             or `top-p P`"
        ),
    };
    schedule.validate().map_err(|e| anyhow!("bad beam spec {text:?}: {e}"))?;
    Ok(schedule)
}

/// Wrap a schedule in a nucleus filter when a mass threshold is configured.
pub fn apply_top_p(schedule: BeamSchedule, top_p: Option<f64>) -> Result<BeamSchedule> {
    let schedule = match top_p {
        Some(p) => BeamSchedule::TopPFilter { base: Box::new(schedule), p },
        None => schedule,
    };
    schedule.validate().map_err(|e| anyhow!("invalid beam schedule: {e}"))?;
    Ok(schedule)
}

/// Render a schedule back to the textual form `parse_beam` accepts, for
/// `--dry-run` echoes.
pub fn beam_to_string(schedule: &BeamSchedule) -> String {
    match schedule {
        BeamSchedule::Fixed(n) => format!("fixed {n}"),
        BeamSchedule::Adaptive { b_max, b_min, lambda } => {
            format!("adaptive {b_max} {b_min} {lambda}")
        }
        BeamSchedule::TopPFilter { base, .. } => beam_to_string(base),
    }
}

pub fn parse_scorer(text: &str) -> Result<Scorer> {
    match text.replace('_', "-").as_str() {
        "path-sum" => Ok(Scorer::PathSum),
        "mean-beam" => Ok(Scorer::MeanBeamLogprob),
        other => bail!("unknown scorer {other:?}: expected path-sum or mean-beam"),
    }
}

pub fn scorer_to_string(scorer: Scorer) -> &'static str {
    match scorer {
        Scorer::PathSum => "path-sum",
        Scorer::MeanBeamLogprob => "mean-beam",
    }
}

pub fn duration_from_secs(secs: f64, what: &str) -> Result<Duration> {
    if !secs.is_finite() || secs < 0.0 {
        bail!("{what} must be a non-negative number of seconds, got {secs}");
    }
    Ok(Duration::from_secs_f64(secs))
}
