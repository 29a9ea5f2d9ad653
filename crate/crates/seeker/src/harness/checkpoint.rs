//! Versioned text checkpoints: architecture, config snapshot, and every
//! tensor with 17 significant digits, which round-trips f64 exactly. The
//! writer is canonical (fixed key order, fixed float formatting), so
//! save -> load -> save reproduces the file byte for byte.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dqn::TrainConfig;
use crate::env::EnvConfig;
use crate::error::{Result, SeekerError};
use crate::neural::{ArchDescriptor, ArchKind, QNetParams};

use super::config;

pub const CHECKPOINT_VERSION: &str = "v1";
const MAGIC: &str = "seeker-checkpoint";

/// Everything needed to resume or evaluate a trained network.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: QNetParams,
    pub env: EnvConfig,
    pub train: TrainConfig,
}

impl Checkpoint {
    pub fn new(params: QNetParams, env: EnvConfig, train: TrainConfig) -> Checkpoint {
        Checkpoint { params, env, train }
    }
}

fn corrupt(msg: impl Into<String>) -> SeekerError {
    SeekerError::CorruptCheckpoint(msg.into())
}

/// Write a checkpoint atomically (temp file + rename), so an interrupted
/// writer never leaves a half-written checkpoint behind.
pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    {
        let mut out = BufWriter::new(fs::File::create(&tmp)?);
        let arch = checkpoint.params.arch;
        writeln!(out, "{MAGIC} {CHECKPOINT_VERSION}")?;
        writeln!(out, "arch = {}", arch.kind.as_str())?;
        writeln!(out, "input_dim = {}", arch.input_dim)?;
        writeln!(out, "hidden_dim = {}", arch.hidden_dim)?;
        writeln!(out, "n_actions = {}", arch.n_actions)?;
        writeln!(out, "mode = {}", checkpoint.env.mode.as_str())?;
        writeln!(out, "[env]")?;
        out.write_all(config::format_kv(&config::env_config_to_kv(&checkpoint.env)).as_bytes())?;
        writeln!(out, "[train]")?;
        out.write_all(
            config::format_kv(&config::train_config_to_kv(&checkpoint.train)).as_bytes(),
        )?;
        for (name, tensor) in checkpoint.params.named_tensors() {
            writeln!(out, "[tensor {name} {} {}]", tensor.rows(), tensor.cols())?;
            for r in 0..tensor.rows() {
                let row: Vec<String> = tensor.row(r).iter().map(|v| format!("{v:.16e}")).collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        writeln!(out, "[end]")?;
        out.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate().peekable();

    let (_, first) = lines.next().ok_or_else(|| corrupt("empty file"))?;
    match first.strip_prefix(MAGIC) {
        Some(rest) if rest.trim() == CHECKPOINT_VERSION => {}
        Some(rest) => return Err(SeekerError::UnsupportedVersion(rest.trim().to_string())),
        None => return Err(corrupt("missing checkpoint header")),
    }

    // Header pairs up to the [env] marker.
    let mut header = Vec::new();
    loop {
        let (n, line) = lines.next().ok_or_else(|| corrupt("truncated header"))?;
        if line == "[env]" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| corrupt(format!("line {}: bad header line", n + 1)))?;
        header.push((k.trim().to_string(), v.trim().to_string()));
    }
    let header_get = |key: &str| {
        header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| corrupt(format!("missing header key '{key}'")))
    };
    let kind = ArchKind::parse(header_get("arch")?)?;
    let parse_dim = |key: &str| -> Result<usize> {
        header_get(key)?
            .parse()
            .map_err(|_| corrupt(format!("bad header value for '{key}'")))
    };
    let arch = ArchDescriptor::new(
        kind,
        parse_dim("input_dim")?,
        parse_dim("hidden_dim")?,
        parse_dim("n_actions")?,
    );
    let declared_mode = header_get("mode")?.to_string();

    // [env] section up to [train].
    let mut env_lines = String::new();
    loop {
        let (_, line) = lines
            .next()
            .ok_or_else(|| corrupt("truncated env section"))?;
        if line == "[train]" {
            break;
        }
        env_lines.push_str(line);
        env_lines.push('\n');
    }
    let env = config::env_config_from_kv(&config::parse_kv(&env_lines)?, EnvConfig::default())?;

    // [train] section up to the first tensor block.
    let mut train_lines = String::new();
    loop {
        match lines.peek() {
            Some((_, line)) if line.starts_with("[tensor ") || *line == "[end]" => break,
            Some(_) => {
                let (_, line) = lines.next().unwrap();
                train_lines.push_str(line);
                train_lines.push('\n');
            }
            None => return Err(corrupt("truncated train section")),
        }
    }
    let train = config::train_config_from_kv(
        &config::parse_kv(&train_lines)?,
        TrainConfig::desk_default(),
    )?;

    if env.mode.as_str() != declared_mode {
        return Err(corrupt(format!(
            "mode header '{declared_mode}' disagrees with env section '{}'",
            env.mode.as_str()
        )));
    }
    if env.obs_dim() != arch.input_dim {
        return Err(SeekerError::ShapeMismatch {
            context: "checkpoint".into(),
            expected: format!("input_dim {} for this env config", env.obs_dim()),
            got: format!("input_dim {}", arch.input_dim),
        });
    }

    // Tensor blocks, filled into a zeroed parameter set by name.
    let mut params = QNetParams::zeros(arch);
    let expected_names: Vec<String> = params
        .named_tensors()
        .into_iter()
        .map(|(name, _)| name)
        .collect();
    let mut seen = vec![false; expected_names.len()];
    {
        let mut tensors = params.tensors_mut();
        loop {
            let (n, line) = lines
                .next()
                .ok_or_else(|| corrupt("missing [end] marker"))?;
            if line == "[end]" {
                break;
            }
            let spec = line
                .strip_prefix("[tensor ")
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| corrupt(format!("line {}: expected tensor block", n + 1)))?;
            let parts: Vec<&str> = spec.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(corrupt(format!("line {}: malformed tensor header", n + 1)));
            }
            let name = parts[0];
            let rows: usize = parts[1]
                .parse()
                .map_err(|_| corrupt(format!("line {}: bad tensor rows", n + 1)))?;
            let cols: usize = parts[2]
                .parse()
                .map_err(|_| corrupt(format!("line {}: bad tensor cols", n + 1)))?;
            let idx = expected_names
                .iter()
                .position(|e| e == name)
                .ok_or_else(|| corrupt(format!("unknown tensor '{name}'")))?;
            if seen[idx] {
                return Err(corrupt(format!("duplicate tensor '{name}'")));
            }
            seen[idx] = true;
            let tensor = &mut tensors[idx];
            if tensor.rows() != rows || tensor.cols() != cols {
                return Err(SeekerError::ShapeMismatch {
                    context: format!("tensor '{name}'"),
                    expected: format!("{} x {}", tensor.rows(), tensor.cols()),
                    got: format!("{rows} x {cols}"),
                });
            }
            for r in 0..rows {
                let (vn, vline) = lines
                    .next()
                    .ok_or_else(|| corrupt(format!("tensor '{name}' truncated")))?;
                let mut count = 0;
                for (c, field) in vline.split_whitespace().enumerate() {
                    if c >= cols {
                        return Err(corrupt(format!("line {}: too many values", vn + 1)));
                    }
                    let v: f64 = field
                        .parse()
                        .map_err(|_| corrupt(format!("line {}: bad float '{field}'", vn + 1)))?;
                    tensor.set(r, c, v);
                    count += 1;
                }
                if count != cols {
                    return Err(corrupt(format!("line {}: expected {cols} values", vn + 1)));
                }
            }
        }
    }
    if let Some(missing) = expected_names.iter().zip(&seen).find(|(_, s)| !**s) {
        return Err(corrupt(format!("missing tensor '{}'", missing.0)));
    }
    if lines.next().is_some() {
        return Err(corrupt("trailing data after [end]"));
    }

    Ok(Checkpoint { params, env, train })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Mode;
    use crate::neural::init_params;
    use crate::rng::Rng;

    fn sample_checkpoint(kind: ArchKind) -> Checkpoint {
        let mut env = EnvConfig::desk_default();
        env.mode = Mode::Impure;
        env.n_obstacles = 3;
        let train = TrainConfig::desk_default();
        let arch = ArchDescriptor::new(kind, env.obs_dim(), 12, 5);
        let params = init_params(arch, &mut Rng::new(42));
        Checkpoint::new(params, env, train)
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [ArchKind::Dqn, ArchKind::DqnGru, ArchKind::DqnLstm] {
            let ckpt = sample_checkpoint(kind);
            let p1 = dir.path().join(format!("{}_a.ckpt", kind.as_str()));
            let p2 = dir.path().join(format!("{}_b.ckpt", kind.as_str()));
            save_checkpoint(&p1, &ckpt).unwrap();
            let loaded = load_checkpoint(&p1).unwrap();
            assert_eq!(loaded, ckpt);
            save_checkpoint(&p2, &loaded).unwrap();
            assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        }
    }

    #[test]
    fn truncated_file_is_corrupt_not_a_crash() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ckpt");
        save_checkpoint(&path, &sample_checkpoint(ArchKind::Dqn)).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let cut = text.len() / 2;
        fs::write(&path, &text[..cut]).unwrap();
        match load_checkpoint(&path) {
            Err(SeekerError::CorruptCheckpoint(_)) => {}
            other => panic!("expected corrupt checkpoint, got {other:?}"),
        }
    }

    #[test]
    fn tampered_shape_is_a_shape_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ckpt");
        save_checkpoint(&path, &sample_checkpoint(ArchKind::Dqn)).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("[tensor l4.w 12 5]", "[tensor l4.w 12 4]");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(SeekerError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.ckpt");
        save_checkpoint(&path, &sample_checkpoint(ArchKind::Dqn)).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("seeker-checkpoint v1", "seeker-checkpoint v9");
        fs::write(&path, text).unwrap();
        match load_checkpoint(&path) {
            Err(SeekerError::UnsupportedVersion(v)) => assert_eq!(v, "v9"),
            other => panic!("expected version error, got {other:?}"),
        }
    }
}
