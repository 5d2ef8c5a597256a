use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::PromptBundle;
use crate::envs::base_name;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpProvider {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: String,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_attempts() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ProviderMode {
    /// JSON file `{task_id: {"raw": text}}`.
    Fixture { path: PathBuf },
    /// Canonical hand-written decompositions of a builtin layout.
    Scripted { env: String },
    Http(HttpProvider),
}

/// Canonical decompositions of the builtin layouts (mini variants share
/// their parent's).
pub fn scripted_sequences(env: &str) -> Option<Vec<Vec<&'static str>>> {
    let seqs = match base_name(env) {
        "four_rooms" => vec![vec!["key", "lock"]],
        "point_maze" => vec![vec!["key", "remote", "door"]],
        "e_maze" => vec![vec!["key1", "key2", "goal"], vec!["key2", "key1", "goal"]],
        "tunnel" => vec![
            vec!["checkpoint", "key1", "goal"],
            vec!["checkpoint", "key1", "key2", "goal"],
            vec!["checkpoint", "key2", "key1", "goal"],
        ],
        _ => return None,
    };
    Some(seqs)
}

#[derive(Serialize, Deserialize)]
struct FixtureEntry {
    raw: String,
}

fn query_fixture(path: &Path, task_id: usize) -> Result<String> {
    let text = fs::read_to_string(path)?;
    let entries: BTreeMap<String, FixtureEntry> = serde_json::from_str(&text)?;
    entries
        .get(&task_id.to_string())
        .map(|e| e.raw.clone())
        .ok_or(Error::FixtureMissing(task_id))
}

/// Write raw answers keyed by task id in the format `Fixture` mode reads.
pub fn write_fixture(path: &Path, raw: &BTreeMap<usize, String>) -> Result<()> {
    let entries: BTreeMap<String, FixtureEntry> = raw
        .iter()
        .map(|(id, r)| (id.to_string(), FixtureEntry { raw: r.clone() }))
        .collect();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(&entries)?)?;
    Ok(())
}

fn write_transcript(dir: Option<&Path>, task_id: usize, attempt: u32, record: &serde_json::Value) -> Result<()> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
        let path = dir.join(format!("task_{task_id}_attempt_{attempt}.json"));
        fs::write(path, serde_json::to_string_pretty(record)?)?;
    }
    Ok(())
}

fn query_http(cfg: &HttpProvider, prompt: &PromptBundle, task_id: usize, transcripts: Option<&Path>) -> Result<String> {
    let token = std::env::var(&cfg.auth_env).map_err(|_| Error::Provider {
        attempts: 0,
        message: format!("auth variable {} is not set", cfg.auth_env),
    })?;
    let body = json!({
        "model": cfg.model,
        "messages": [{"role": "user", "content": prompt.render()}],
    });
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
        .http_status_as_error(false)
        .build()
        .into();

    let attempts = cfg.max_attempts.max(1);
    let mut last_error = String::new();
    for attempt in 1..=attempts {
        let outcome = agent
            .post(&cfg.endpoint)
            .header("Authorization", &format!("Bearer {token}"))
            .send_json(&body)
            .and_then(|mut resp| {
                let status = resp.status().as_u16();
                resp.body_mut().read_to_string().map(|text| (status, text))
            });
        let (status, response) = match &outcome {
            Ok((status, text)) => (Some(*status), json!(text)),
            Err(_) => (None, json!(null)),
        };
        write_transcript(
            transcripts,
            task_id,
            attempt,
            &json!({"request": body, "status": status, "response": response,
                    "error": outcome.as_ref().err().map(|e| e.to_string())}),
        )?;
        match outcome {
            Ok((200..=299, text)) => {
                let reply: serde_json::Value = serde_json::from_str(&text)?;
                return reply["choices"][0]["message"]["content"]
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::Provider {
                        attempts: attempt,
                        message: "reply has no choices[0].message.content".into(),
                    });
            }
            Ok((status, text)) => last_error = format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
            Err(e) => last_error = e.to_string(),
        }
        if attempt < attempts && cfg.backoff_ms > 0 {
            std::thread::sleep(Duration::from_millis(cfg.backoff_ms * attempt as u64));
        }
    }
    Err(Error::Provider { attempts, message: last_error })
}

/// Raw decomposition text for `task_id`.
///
/// HTTP request and response bodies are written under `transcripts` when
/// given; the bearer token never is.
pub fn query_provider(
    prompt: &PromptBundle,
    task_id: usize,
    mode: &ProviderMode,
    transcripts: Option<&Path>,
) -> Result<String> {
    match mode {
        ProviderMode::Fixture { path } => query_fixture(path, task_id),
        ProviderMode::Scripted { env } => {
            let seqs = scripted_sequences(env).ok_or_else(|| Error::UnknownLayout(env.clone()))?;
            Ok(serde_json::to_string(&seqs)?)
        }
        ProviderMode::Http(cfg) => query_http(cfg, prompt, task_id, transcripts),
    }
}
