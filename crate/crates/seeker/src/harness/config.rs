//! Flat `key = value` configuration format: one pair per line, `#` comments,
//! no nesting. One file carries both environment and training keys.

use crate::dqn::TrainConfig;
use crate::env::{EnvConfig, Mode};
use crate::error::{Result, SeekerError};

pub const ENV_KEYS: [&str; 12] = [
    "width",
    "height",
    "n_obstacles",
    "max_steps",
    "mode",
    "fov_deg",
    "n_slices",
    "move_scale",
    "turn_scale",
    "near_threshold",
    "reach_threshold",
    "seed",
];

pub const TRAIN_KEYS: [&str; 16] = [
    "phases",
    "eval_interval",
    "eval_maps",
    "lr",
    "gamma",
    "buffer_capacity",
    "episode_capacity",
    "batch_size",
    "seq_len",
    "target_sync_interval",
    "epsilon_start",
    "epsilon_end",
    "epsilon_decay_steps",
    "clear_buffer_at_phase",
    "hidden_dim",
    "seed",
];

/// Parse `key = value` lines, preserving order. Blank lines and `#` comments
/// are skipped; duplicate keys are an error.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            SeekerError::Config(format!("line {}: expected 'key = value'", idx + 1))
        })?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if pairs.iter().any(|(k, _)| *k == key) {
            return Err(SeekerError::Config(format!(
                "line {}: duplicate key '{key}'",
                idx + 1
            )));
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}

fn parse_field<T: std::str::FromStr>(
    pairs: &[(String, String)],
    key: &str,
    into: &mut T,
) -> Result<()> {
    if let Some(raw) = lookup(pairs, key) {
        *into = raw
            .parse()
            .map_err(|_| SeekerError::Config(format!("bad value for '{key}': '{raw}'")))?;
    }
    Ok(())
}

/// Environment config from key-value pairs, starting from `base` and
/// overriding any key present. Keys outside the environment set are ignored
/// (a combined run config also carries training keys).
pub fn env_config_from_kv(pairs: &[(String, String)], base: EnvConfig) -> Result<EnvConfig> {
    let mut cfg = base;
    parse_field(pairs, "width", &mut cfg.width)?;
    parse_field(pairs, "height", &mut cfg.height)?;
    parse_field(pairs, "n_obstacles", &mut cfg.n_obstacles)?;
    parse_field(pairs, "max_steps", &mut cfg.max_steps)?;
    if let Some(raw) = lookup(pairs, "mode") {
        cfg.mode = Mode::parse(raw)?;
    }
    parse_field(pairs, "fov_deg", &mut cfg.fov_deg)?;
    parse_field(pairs, "n_slices", &mut cfg.n_slices)?;
    parse_field(pairs, "move_scale", &mut cfg.move_scale)?;
    parse_field(pairs, "turn_scale", &mut cfg.turn_scale)?;
    parse_field(pairs, "near_threshold", &mut cfg.near_threshold)?;
    parse_field(pairs, "reach_threshold", &mut cfg.reach_threshold)?;
    parse_field(pairs, "seed", &mut cfg.seed)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Environment config as ordered key-value pairs (the canonical key order).
pub fn env_config_to_kv(cfg: &EnvConfig) -> Vec<(String, String)> {
    vec![
        ("width".into(), cfg.width.to_string()),
        ("height".into(), cfg.height.to_string()),
        ("n_obstacles".into(), cfg.n_obstacles.to_string()),
        ("max_steps".into(), cfg.max_steps.to_string()),
        ("mode".into(), cfg.mode.as_str().to_string()),
        ("fov_deg".into(), cfg.fov_deg.to_string()),
        ("n_slices".into(), cfg.n_slices.to_string()),
        ("move_scale".into(), cfg.move_scale.to_string()),
        ("turn_scale".into(), cfg.turn_scale.to_string()),
        ("near_threshold".into(), cfg.near_threshold.to_string()),
        ("reach_threshold".into(), cfg.reach_threshold.to_string()),
        ("seed".into(), cfg.seed.to_string()),
    ]
}

/// Training config from key-value pairs over `base`. The `seed` key is
/// shared with the environment section of a run config. If the phases change
/// and no explicit `epsilon_decay_steps` is given, the decay window resets to
/// 10% of the new total.
pub fn train_config_from_kv(pairs: &[(String, String)], base: TrainConfig) -> Result<TrainConfig> {
    let mut cfg = base;
    if let Some(raw) = lookup(pairs, "phases") {
        cfg.phases = TrainConfig::parse_phases(raw)?;
        if lookup(pairs, "epsilon_decay_steps").is_none() {
            cfg.epsilon_decay_steps = cfg.total_steps() / 10;
        }
    }
    parse_field(pairs, "eval_interval", &mut cfg.eval_interval)?;
    parse_field(pairs, "eval_maps", &mut cfg.eval_maps)?;
    parse_field(pairs, "lr", &mut cfg.lr)?;
    parse_field(pairs, "gamma", &mut cfg.gamma)?;
    parse_field(pairs, "buffer_capacity", &mut cfg.buffer_capacity)?;
    parse_field(pairs, "episode_capacity", &mut cfg.episode_capacity)?;
    parse_field(pairs, "batch_size", &mut cfg.batch_size)?;
    parse_field(pairs, "seq_len", &mut cfg.seq_len)?;
    parse_field(pairs, "target_sync_interval", &mut cfg.target_sync_interval)?;
    parse_field(pairs, "epsilon_start", &mut cfg.epsilon_start)?;
    parse_field(pairs, "epsilon_end", &mut cfg.epsilon_end)?;
    parse_field(pairs, "epsilon_decay_steps", &mut cfg.epsilon_decay_steps)?;
    parse_field(
        pairs,
        "clear_buffer_at_phase",
        &mut cfg.clear_buffer_at_phase,
    )?;
    parse_field(pairs, "hidden_dim", &mut cfg.hidden_dim)?;
    parse_field(pairs, "seed", &mut cfg.seed)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn train_config_to_kv(cfg: &TrainConfig) -> Vec<(String, String)> {
    vec![
        ("phases".into(), cfg.phases_string()),
        ("eval_interval".into(), cfg.eval_interval.to_string()),
        ("eval_maps".into(), cfg.eval_maps.to_string()),
        ("lr".into(), cfg.lr.to_string()),
        ("gamma".into(), cfg.gamma.to_string()),
        ("buffer_capacity".into(), cfg.buffer_capacity.to_string()),
        ("episode_capacity".into(), cfg.episode_capacity.to_string()),
        ("batch_size".into(), cfg.batch_size.to_string()),
        ("seq_len".into(), cfg.seq_len.to_string()),
        (
            "target_sync_interval".into(),
            cfg.target_sync_interval.to_string(),
        ),
        ("epsilon_start".into(), cfg.epsilon_start.to_string()),
        ("epsilon_end".into(), cfg.epsilon_end.to_string()),
        (
            "epsilon_decay_steps".into(),
            cfg.epsilon_decay_steps.to_string(),
        ),
        (
            "clear_buffer_at_phase".into(),
            cfg.clear_buffer_at_phase.to_string(),
        ),
        ("hidden_dim".into(), cfg.hidden_dim.to_string()),
        ("seed".into(), cfg.seed.to_string()),
    ]
}

/// Parse a combined run config (environment + training keys in one flat
/// file) over desk-scale defaults. Unknown keys are an error.
pub fn parse_run_config(text: &str) -> Result<(EnvConfig, TrainConfig)> {
    let pairs = parse_kv(text)?;
    for (key, _) in &pairs {
        if !ENV_KEYS.contains(&key.as_str()) && !TRAIN_KEYS.contains(&key.as_str()) {
            return Err(SeekerError::Config(format!("unknown config key '{key}'")));
        }
    }
    let env = env_config_from_kv(&pairs, EnvConfig::desk_default())?;
    let train = train_config_from_kv(&pairs, TrainConfig::desk_default())?;
    Ok((env, train))
}

pub fn format_kv(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blanks() {
        let pairs = parse_kv("# a comment\n\nwidth = 6\nmode = impure\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(lookup(&pairs, "width"), Some("6"));
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        assert!(parse_kv("a = 1\na = 2").is_err());
        assert!(parse_kv("not a pair").is_err());
    }

    #[test]
    fn env_round_trip_through_kv() {
        let mut cfg = EnvConfig::desk_default();
        cfg.mode = Mode::Impure;
        cfg.n_obstacles = 4;
        cfg.seed = 99;
        let pairs = env_config_to_kv(&cfg);
        let back = env_config_from_kv(&pairs, EnvConfig::default()).unwrap();
        assert_eq!(back, cfg);
        // Serialized text is stable.
        assert_eq!(format_kv(&pairs), format_kv(&env_config_to_kv(&back)));
    }

    #[test]
    fn train_round_trip_through_kv() {
        let mut cfg = TrainConfig::desk_default();
        cfg.lr = 5e-4;
        cfg.clear_buffer_at_phase = true;
        let pairs = train_config_to_kv(&cfg);
        let back = train_config_from_kv(&pairs, TrainConfig::paper_scale()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn run_config_rejects_unknown_keys() {
        assert!(parse_run_config("widht = 6").is_err());
    }

    #[test]
    fn run_config_overrides_defaults() {
        let (env, train) =
            parse_run_config("width = 8\nheight = 6\nmode = impure\nphases = 0:100\nseed = 5")
                .unwrap();
        assert_eq!(env.width, 8);
        assert_eq!(env.mode, Mode::Impure);
        assert_eq!(env.seed, 5);
        assert_eq!(train.seed, 5);
        assert_eq!(train.total_steps(), 100);
        assert_eq!(train.epsilon_decay_steps, 10);
    }
}
