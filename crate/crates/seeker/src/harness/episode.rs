//! Episode logs: enough to re-run a logged episode deterministically (env
//! config + map seed + action sequence) and verify the recorded rewards.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::env::{EnvConfig, SeekerEnv};
use crate::error::{Result, SeekerError};

use super::config;
use super::eval::EpisodeOutcome;

const MAGIC: &str = "seeker-episode";
pub const EPISODE_LOG_VERSION: &str = "v1";

/// A logged episode: the environment it ran in, the map seed that rebuilds
/// the exact scene, and what happened.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub env: EnvConfig,
    pub map_seed: u64,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub total_reward: f64,
}

impl EpisodeLog {
    pub fn from_outcome(env: &EnvConfig, outcome: &EpisodeOutcome) -> EpisodeLog {
        EpisodeLog {
            env: env.clone(),
            map_seed: outcome.map_seed,
            actions: outcome.actions.clone(),
            rewards: outcome.rewards.clone(),
            total_reward: outcome.episode_reward,
        }
    }
}

pub fn save_episode_log(path: &Path, log: &EpisodeLog) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{MAGIC} {EPISODE_LOG_VERSION}")?;
    writeln!(out, "[env]")?;
    out.write_all(config::format_kv(&config::env_config_to_kv(&log.env)).as_bytes())?;
    writeln!(out, "[episode]")?;
    writeln!(out, "map_seed = {}", log.map_seed)?;
    let actions: Vec<String> = log.actions.iter().map(|a| a.to_string()).collect();
    writeln!(out, "actions = {}", actions.join(","))?;
    let rewards: Vec<String> = log.rewards.iter().map(|r| r.to_string()).collect();
    writeln!(out, "rewards = {}", rewards.join(","))?;
    writeln!(out, "total_reward = {}", log.total_reward)?;
    out.flush()?;
    Ok(())
}

pub fn load_episode_log(path: &Path) -> Result<EpisodeLog> {
    let bad = |msg: &str| SeekerError::Config(format!("episode log: {msg}"));
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next().and_then(|l| l.strip_prefix(MAGIC)) {
        Some(v) if v.trim() == EPISODE_LOG_VERSION => {}
        Some(v) => return Err(SeekerError::UnsupportedVersion(v.trim().to_string())),
        None => return Err(bad("missing header")),
    }
    if lines.next() != Some("[env]") {
        return Err(bad("missing [env] section"));
    }
    let mut env_text = String::new();
    for line in lines.by_ref() {
        if line == "[episode]" {
            break;
        }
        env_text.push_str(line);
        env_text.push('\n');
    }
    let env = config::env_config_from_kv(&config::parse_kv(&env_text)?, EnvConfig::default())?;
    let pairs = config::parse_kv(&lines.collect::<Vec<_>>().join("\n"))?;
    let get = |key: &str| {
        pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| bad(&format!("missing key '{key}'")))
    };
    let map_seed = get("map_seed")?.parse().map_err(|_| bad("bad map_seed"))?;
    fn parse_list(raw: &str) -> Vec<&str> {
        if raw.is_empty() {
            vec![]
        } else {
            raw.split(',').collect()
        }
    }
    let actions = parse_list(get("actions")?)
        .iter()
        .map(|s| s.parse().map_err(|_| bad("bad action value")))
        .collect::<Result<Vec<usize>>>()?;
    let rewards = parse_list(get("rewards")?)
        .iter()
        .map(|s| s.parse().map_err(|_| bad("bad reward value")))
        .collect::<Result<Vec<f64>>>()?;
    if actions.len() != rewards.len() {
        return Err(bad("actions and rewards differ in length"));
    }
    let total_reward = get("total_reward")?
        .parse()
        .map_err(|_| bad("bad total_reward"))?;
    Ok(EpisodeLog {
        env,
        map_seed,
        actions,
        rewards,
        total_reward,
    })
}

/// Result of re-running a logged episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub steps: usize,
    pub recomputed_total: f64,
    /// True iff every per-step reward and the total match the log exactly.
    pub matches: bool,
    pub first_mismatch: Option<usize>,
}

/// Re-run a logged episode from its map seed and action sequence, comparing
/// recomputed rewards against the log. Exact (bitwise) agreement is expected
/// because the environment is deterministic.
pub fn replay_episode(log: &EpisodeLog) -> Result<ReplayOutcome> {
    let mut env = SeekerEnv::new(log.env.clone())?;
    env.reset_from_seed(log.map_seed)?;
    let mut total = 0.0;
    let mut first_mismatch = None;
    for (i, (&action, &logged)) in log.actions.iter().zip(&log.rewards).enumerate() {
        let result = env.step(action)?;
        total += result.reward;
        if result.reward != logged && first_mismatch.is_none() {
            first_mismatch = Some(i);
        }
        if result.done && i + 1 < log.actions.len() {
            return Err(SeekerError::Config(format!(
                "episode ended at step {} but log has {} actions",
                i + 1,
                log.actions.len()
            )));
        }
    }
    Ok(ReplayOutcome {
        steps: log.actions.len(),
        recomputed_total: total,
        matches: first_mismatch.is_none() && total == log.total_reward,
        first_mismatch,
    })
}
