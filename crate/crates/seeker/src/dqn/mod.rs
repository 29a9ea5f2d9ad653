//! DQN training: epsilon-greedy collection, experience replay, target
//! network, TD(0) targets, and the three-phase obstacle curriculum with
//! periodic intermediate evaluation.
//!
//! The loop is single-threaded and fully seeded: parameters, exploration,
//! map generation, batch sampling, and evaluation map seeds each draw from
//! their own stream forked off the run seed, so a rerun with the same config
//! reproduces the metrics log byte for byte.

mod replay;

pub use replay::{EpisodeRecord, ReplayBuffer, Transition};

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::env::{EnvConfig, SeekerEnv, N_ACTIONS};
use crate::error::{Result, SeekerError};
use crate::harness;
use crate::neural::{self, Adam, ArchDescriptor, ArchKind, HiddenState, QNetParams, Tensor2};
use crate::rng::Rng;

/// One curriculum phase: a fixed obstacle count held for a step budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub n_obstacles: usize,
    pub n_steps: u64,
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub phases: Vec<Phase>,
    /// Evaluate the greedy policy every this many environment steps.
    pub eval_interval: u64,
    /// Maps per intermediate evaluation.
    pub eval_maps: usize,
    pub lr: f64,
    pub gamma: f64,
    /// Replay capacity in transitions (dense variant).
    pub buffer_capacity: usize,
    /// Replay capacity in episodes (recurrent variants).
    pub episode_capacity: usize,
    pub batch_size: usize,
    /// Training window length for recurrent replay.
    pub seq_len: usize,
    pub target_sync_interval: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    /// Drop replay contents when a new curriculum phase begins.
    pub clear_buffer_at_phase: bool,
    pub hidden_dim: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Desk-scale defaults: 12k/6k/6k curriculum on small maps, mirroring the
    /// 2:1:1 phase ratio of the full schedule.
    pub fn desk_default() -> TrainConfig {
        let phases = vec![
            Phase {
                n_obstacles: 0,
                n_steps: 12_000,
            },
            Phase {
                n_obstacles: 3,
                n_steps: 6_000,
            },
            Phase {
                n_obstacles: 5,
                n_steps: 6_000,
            },
        ];
        let total: u64 = phases.iter().map(|p| p.n_steps).sum();
        TrainConfig {
            phases,
            eval_interval: 3_000,
            eval_maps: 5,
            lr: 1e-3,
            gamma: 0.99,
            buffer_capacity: 50_000,
            episode_capacity: 5_000,
            batch_size: 64,
            seq_len: 8,
            target_sync_interval: 1_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: total / 10,
            clear_buffer_at_phase: false,
            hidden_dim: 128,
            seed: 0,
        }
    }

    /// The full-scale schedule: 500k steps with no obstacles, then 250k with
    /// 3 and 250k with 5, evaluating on 5 maps every 25k steps, learning rate
    /// 1e-5, discount 0.99.
    pub fn paper_scale() -> TrainConfig {
        TrainConfig {
            phases: vec![
                Phase {
                    n_obstacles: 0,
                    n_steps: 500_000,
                },
                Phase {
                    n_obstacles: 3,
                    n_steps: 250_000,
                },
                Phase {
                    n_obstacles: 5,
                    n_steps: 250_000,
                },
            ],
            eval_interval: 25_000,
            eval_maps: 5,
            lr: 1e-5,
            epsilon_decay_steps: 100_000,
            ..TrainConfig::desk_default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(SeekerError::Config("phases must not be empty".into()));
        }
        if self.phases.iter().any(|p| p.n_steps == 0) {
            return Err(SeekerError::Config(
                "phase step counts must be positive".into(),
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(SeekerError::Config(format!(
                "gamma must be in (0, 1], got {}",
                self.gamma
            )));
        }
        if self.batch_size == 0 || self.seq_len == 0 || self.hidden_dim == 0 {
            return Err(SeekerError::Config(
                "batch_size, seq_len, and hidden_dim must be positive".into(),
            ));
        }
        if self.eval_interval == 0 || self.target_sync_interval == 0 {
            return Err(SeekerError::Config(
                "eval_interval and target_sync_interval must be positive".into(),
            ));
        }
        for (name, v) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SeekerError::Config(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        if self.lr <= 0.0 {
            return Err(SeekerError::Config("lr must be positive".into()));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        self.phases.iter().map(|p| p.n_steps).sum()
    }

    /// 1-based index of the phase containing global step `step` (steps are
    /// 1-based; phase 1 covers steps 1..=phases[0].n_steps).
    pub fn phase_at(&self, step: u64) -> usize {
        let mut end = 0;
        for (i, p) in self.phases.iter().enumerate() {
            end += p.n_steps;
            if step <= end {
                return i + 1;
            }
        }
        self.phases.len()
    }

    /// Exploration rate after `t` completed environment steps: linear from
    /// start to end over the decay window, constant afterwards.
    pub fn epsilon(&self, t: u64) -> f64 {
        if t >= self.epsilon_decay_steps || self.epsilon_decay_steps == 0 {
            return self.epsilon_end;
        }
        let frac = t as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    /// Parse a curriculum like `0:12000,3:6000,5:6000`.
    pub fn parse_phases(s: &str) -> Result<Vec<Phase>> {
        let bad = |msg: String| SeekerError::Config(msg);
        let mut phases = Vec::new();
        for part in s.split(',') {
            let (obstacles, steps) = part
                .split_once(':')
                .ok_or_else(|| bad(format!("phase '{part}' must be obstacles:steps")))?;
            phases.push(Phase {
                n_obstacles: obstacles
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad obstacle count '{obstacles}'")))?,
                n_steps: steps
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("bad step count '{steps}'")))?,
            });
        }
        Ok(phases)
    }

    pub fn phases_string(&self) -> String {
        self.phases
            .iter()
            .map(|p| format!("{}:{}", p.n_obstacles, p.n_steps))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Greedy argmax with lowest-index tie-break.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action choice. The hidden state advances through the
/// network regardless of whether the action is exploratory, so recurrent
/// state always tracks the trajectory actually taken. Greedy selection
/// (eps = 0) consumes no randomness.
pub fn select_action(
    params: &QNetParams,
    obs: &[f64],
    hidden: Option<&HiddenState>,
    eps: f64,
    rng: &mut Rng,
) -> Result<(usize, Option<HiddenState>)> {
    let x = Tensor2::row_from(obs);
    let (q, hidden_new) = neural::forward(params, &x, hidden)?;
    let action = if eps > 0.0 && rng.next_f64() < eps {
        rng.below(N_ACTIONS as u64) as usize
    } else {
        argmax(q.row(0))
    };
    Ok((action, hidden_new))
}

/// Deep copy of the online network for use as the bootstrap target.
pub fn sync_target(params: &QNetParams) -> QNetParams {
    params.clone()
}

/// TD targets for equal-length windows of transitions: the target network
/// replays each window's successor-observation sequence from a zero initial
/// state, and `y = r + gamma * max_a Q_target(next, a)` for non-terminal
/// transitions, `y = r` where the target was reached (terminal discount 0).
fn window_td_targets(
    windows: &[Vec<&Transition>],
    target_params: &QNetParams,
    gamma: f64,
) -> Result<Vec<Vec<f64>>> {
    let len = windows[0].len();
    debug_assert!(windows.iter().all(|w| w.len() == len));
    let xs: Vec<Tensor2> = (0..len)
        .map(|t| {
            let rows: Vec<&[f64]> = windows.iter().map(|w| w[t].next_obs.as_slice()).collect();
            Tensor2::stack_rows(&rows)
        })
        .collect();
    let (qs, _, _) = neural::forward_seq(target_params, &xs, None)?;
    let mut out = vec![vec![0.0; len]; windows.len()];
    for t in 0..len {
        for (g, w) in windows.iter().enumerate() {
            let tr = w[t];
            out[g][t] = if tr.terminal {
                tr.reward
            } else {
                let best = qs[t]
                    .row(g)
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                tr.reward + gamma * best
            };
        }
    }
    Ok(out)
}

/// TD targets for a flat batch of independent transitions (each treated as a
/// length-1 sequence from a zero state).
pub fn td_targets(
    batch: &[&Transition],
    target_params: &QNetParams,
    gamma: f64,
) -> Result<Vec<f64>> {
    let windows: Vec<Vec<&Transition>> = batch.iter().map(|t| vec![*t]).collect();
    Ok(window_td_targets(&windows, target_params, gamma)?
        .into_iter()
        .map(|v| v[0])
        .collect())
}

/// TD targets along one stored episode window, replayed in order.
pub fn td_targets_seq(
    window: &[&Transition],
    target_params: &QNetParams,
    gamma: f64,
) -> Result<Vec<f64>> {
    Ok(window_td_targets(&[window.to_vec()], target_params, gamma)?.remove(0))
}

/// One gradient step over a set of sampled windows (dense batches are
/// length-1 windows). Loss is the mean squared TD error over every sampled
/// transition. Returns the loss.
fn update_from_windows(
    params: &mut QNetParams,
    target_params: &QNetParams,
    windows: Vec<Vec<&Transition>>,
    cfg: &TrainConfig,
    adam: &mut Adam,
) -> Result<f64> {
    let n_total: usize = windows.iter().map(|w| w.len()).sum();
    // Group by window length so each group batches into rectangular tensors.
    // BTreeMap keeps group order deterministic.
    let mut groups: std::collections::BTreeMap<usize, Vec<Vec<&Transition>>> =
        std::collections::BTreeMap::new();
    for w in windows {
        groups.entry(w.len()).or_default().push(w);
    }

    let mut grads = params.zeros_like();
    let mut sse = 0.0;
    for (len, group) in groups {
        let ys = window_td_targets(&group, target_params, cfg.gamma)?;
        let xs: Vec<Tensor2> = (0..len)
            .map(|t| {
                let rows: Vec<&[f64]> = group.iter().map(|w| w[t].obs.as_slice()).collect();
                Tensor2::stack_rows(&rows)
            })
            .collect();
        let (qs, trace, _) = neural::forward_seq(params, &xs, None)?;
        let mut dqs: Vec<Tensor2> = qs.iter().map(|q| q.zeros_like()).collect();
        for t in 0..len {
            for (g, w) in group.iter().enumerate() {
                let action = w[t].action;
                let err = qs[t].get(g, action) - ys[g][t];
                sse += err * err;
                dqs[t].set(g, action, 2.0 * err / n_total as f64);
            }
        }
        grads.accumulate(&neural::backward(params, &trace, &dqs));
    }
    adam.step(params, &grads, cfg.lr);
    Ok(sse / n_total as f64)
}

/// One training step for the dense variant. Returns None while the buffer
/// holds fewer transitions than a batch (warm-up).
pub fn train_step_transitions(
    params: &mut QNetParams,
    target_params: &QNetParams,
    buffer: &ReplayBuffer<Transition>,
    cfg: &TrainConfig,
    rng: &mut Rng,
    adam: &mut Adam,
) -> Result<Option<f64>> {
    if buffer.len() < cfg.batch_size {
        return Ok(None);
    }
    let windows: Vec<Vec<&Transition>> = buffer
        .sample(cfg.batch_size, rng)
        .into_iter()
        .map(|t| vec![t])
        .collect();
    update_from_windows(params, target_params, windows, cfg, adam).map(Some)
}

/// One training step for recurrent variants: samples `batch_size` contiguous
/// windows of up to `seq_len` transitions, each from a single stored episode.
/// Returns None while the buffer holds fewer total transitions than a batch.
pub fn train_step_episodes(
    params: &mut QNetParams,
    target_params: &QNetParams,
    buffer: &ReplayBuffer<EpisodeRecord>,
    stored_transitions: usize,
    cfg: &TrainConfig,
    rng: &mut Rng,
    adam: &mut Adam,
) -> Result<Option<f64>> {
    if stored_transitions < cfg.batch_size || buffer.is_empty() {
        return Ok(None);
    }
    let mut windows = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.batch_size {
        let episode = buffer.get(rng.below(buffer.len() as u64) as usize);
        let len = episode.len().min(cfg.seq_len);
        let start_max = episode.len() - len;
        let start = if start_max == 0 {
            0
        } else {
            rng.below(start_max as u64 + 1) as usize
        };
        windows.push(episode.transitions[start..start + len].iter().collect());
    }
    update_from_windows(params, target_params, windows, cfg, adam).map(Some)
}

/// When each intermediate evaluation and each checkpoint happens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulePlan {
    pub total_steps: u64,
    /// (1-based phase index, global step) of each intermediate evaluation.
    pub evals: Vec<(usize, u64)>,
    /// (1-based phase index, global step) of each phase-boundary checkpoint.
    pub checkpoints: Vec<(usize, u64)>,
}

impl SchedulePlan {
    pub fn evals_in_phase(&self, phase: usize) -> usize {
        self.evals.iter().filter(|(p, _)| *p == phase).count()
    }
}

/// Pure schedule arithmetic: evaluations fall on every multiple of
/// `eval_interval` within the run, attributed to the phase containing that
/// step; checkpoints fall on phase boundaries (including the final step).
pub fn plan_schedule(cfg: &TrainConfig) -> SchedulePlan {
    let total = cfg.total_steps();
    let evals = (1..=total / cfg.eval_interval)
        .map(|k| {
            let step = k * cfg.eval_interval;
            (cfg.phase_at(step), step)
        })
        .collect();
    let mut checkpoints = Vec::new();
    let mut end = 0;
    for (i, p) in cfg.phases.iter().enumerate() {
        end += p.n_steps;
        checkpoints.push((i + 1, end));
    }
    SchedulePlan {
        total_steps: total,
        evals,
        checkpoints,
    }
}

enum Buffers {
    Dense(ReplayBuffer<Transition>),
    Recurrent {
        ring: ReplayBuffer<EpisodeRecord>,
        stored_transitions: usize,
    },
}

impl Buffers {
    fn new(kind: ArchKind, cfg: &TrainConfig) -> Buffers {
        if kind.is_recurrent() {
            Buffers::Recurrent {
                ring: ReplayBuffer::new(cfg.episode_capacity),
                stored_transitions: 0,
            }
        } else {
            Buffers::Dense(ReplayBuffer::new(cfg.buffer_capacity))
        }
    }

    fn clear(&mut self) {
        match self {
            Buffers::Dense(b) => b.clear(),
            Buffers::Recurrent {
                ring,
                stored_transitions,
            } => {
                ring.clear();
                *stored_transitions = 0;
            }
        }
    }

    fn push_episode(&mut self, episode: EpisodeRecord) {
        if let Buffers::Recurrent {
            ring,
            stored_transitions,
        } = self
        {
            if episode.is_empty() {
                return;
            }
            if ring.len() == ring.capacity() {
                *stored_transitions -= ring.get(0).len();
            }
            *stored_transitions += episode.len();
            ring.push(episode);
        }
    }
}

/// Paths and final weights produced by a training run.
#[derive(Debug)]
pub struct TrainArtifacts {
    pub final_params: QNetParams,
    pub checkpoint_paths: Vec<PathBuf>,
    pub metrics_path: PathBuf,
}

struct EpisodeAccounting {
    map_seed: u64,
    reward: f64,
    steps: usize,
    path_len: f64,
    reached: bool,
}

impl EpisodeAccounting {
    fn new(map_seed: u64) -> EpisodeAccounting {
        EpisodeAccounting {
            map_seed,
            reward: 0.0,
            steps: 0,
            path_len: 0.0,
            reached: false,
        }
    }
}

fn write_row(
    out: &mut impl Write,
    phase: usize,
    step: u64,
    event: &str,
    ep: &EpisodeAccounting,
) -> Result<()> {
    writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        phase, step, event, ep.map_seed, ep.reward, ep.steps, ep.path_len, ep.reached
    )?;
    Ok(())
}

/// Run the full curriculum. Writes `metrics.csv` and one checkpoint per
/// phase boundary under `out_dir`, and returns the trained parameters.
///
/// Within each episode the recurrent hidden state starts from zero; episodes
/// end on reaching the target or at `max_steps`, and an episode cut short by
/// a phase boundary is logged as truncated. Intermediate evaluations run the
/// greedy policy on freshly seeded maps at the current phase's obstacle
/// count.
pub fn train(
    train_cfg: &TrainConfig,
    env_cfg: &EnvConfig,
    kind: ArchKind,
    out_dir: &Path,
) -> Result<TrainArtifacts> {
    train_cfg.validate()?;
    env_cfg.validate()?;
    fs::create_dir_all(out_dir)?;

    let arch = ArchDescriptor::new(kind, env_cfg.obs_dim(), train_cfg.hidden_dim, N_ACTIONS);
    let mut master = Rng::new(train_cfg.seed);
    let mut params_rng = master.fork();
    let mut action_rng = master.fork();
    let mut sample_rng = master.fork();
    let mut map_rng = master.fork();
    let mut eval_rng = master.fork();

    let mut params = neural::init_params(arch, &mut params_rng);
    let mut target = sync_target(&params);
    let mut adam = Adam::new(&params);
    let mut buffers = Buffers::new(kind, train_cfg);

    let mut env = SeekerEnv::new(env_cfg.clone())?;
    env.set_n_obstacles(train_cfg.phases[0].n_obstacles)?;

    let plan = plan_schedule(train_cfg);
    let metrics_path = out_dir.join("metrics.csv");
    let mut metrics = BufWriter::new(fs::File::create(&metrics_path)?);
    writeln!(
        metrics,
        "phase,global_step,event,map_seed,episode_reward,episode_len,path_len,success"
    )?;

    let mut checkpoint_paths = Vec::new();
    let mut phase_idx = 1usize;

    let mut obs = env.reset_from_seed(map_rng.next_u64())?;
    let mut hidden = HiddenState::initial(&arch, 1);
    let mut ep = EpisodeAccounting::new(env.map_seed());
    let mut ep_transitions: Vec<Transition> = Vec::new();

    log::info!(
        "training {} ({} params) for {} steps over {} phases",
        arch.kind.as_str(),
        params.param_count(),
        plan.total_steps,
        train_cfg.phases.len()
    );

    for step in 1..=plan.total_steps {
        let phase_now = train_cfg.phase_at(step);
        if phase_now != phase_idx {
            // Episode in flight when the curriculum advances: log as
            // truncated under the phase it ran in.
            if ep.steps > 0 {
                write_row(&mut metrics, phase_idx, step - 1, "train_episode", &ep)?;
                buffers.push_episode(EpisodeRecord {
                    transitions: std::mem::take(&mut ep_transitions),
                });
            }
            phase_idx = phase_now;
            env.set_n_obstacles(train_cfg.phases[phase_idx - 1].n_obstacles)?;
            if train_cfg.clear_buffer_at_phase {
                buffers.clear();
            }
            obs = env.reset_from_seed(map_rng.next_u64())?;
            hidden = HiddenState::initial(&arch, 1);
            ep = EpisodeAccounting::new(env.map_seed());
            ep_transitions.clear();
        }

        let eps = train_cfg.epsilon(step - 1);
        let (action, hidden_next) =
            select_action(&params, &obs, hidden.as_ref(), eps, &mut action_rng)?;
        hidden = hidden_next;
        let result = env.step(action)?;
        let transition = Transition {
            obs: std::mem::take(&mut obs),
            action,
            reward: result.reward,
            next_obs: result.observation.clone(),
            terminal: result.info.reached,
        };
        match &mut buffers {
            Buffers::Dense(b) => b.push(transition),
            Buffers::Recurrent { .. } => ep_transitions.push(transition),
        }
        ep.reward += result.reward;
        ep.steps += 1;
        ep.path_len = result.info.path_length;
        ep.reached = result.info.reached;
        obs = result.observation;

        let loss = match &mut buffers {
            Buffers::Dense(b) => train_step_transitions(
                &mut params,
                &target,
                b,
                train_cfg,
                &mut sample_rng,
                &mut adam,
            )?,
            Buffers::Recurrent {
                ring,
                stored_transitions,
            } => train_step_episodes(
                &mut params,
                &target,
                ring,
                *stored_transitions,
                train_cfg,
                &mut sample_rng,
                &mut adam,
            )?,
        };
        if let Some(loss) = loss {
            if !loss.is_finite() {
                return Err(SeekerError::Config(format!(
                    "training diverged: non-finite loss at step {step}"
                )));
            }
            if step % 1000 == 0 {
                log::debug!("step {step}: loss {loss:.6}, eps {eps:.3}");
            }
        }

        if step % train_cfg.target_sync_interval == 0 {
            target = sync_target(&params);
        }

        if result.done {
            write_row(&mut metrics, phase_idx, step, "train_episode", &ep)?;
            buffers.push_episode(EpisodeRecord {
                transitions: std::mem::take(&mut ep_transitions),
            });
            obs = env.reset_from_seed(map_rng.next_u64())?;
            hidden = HiddenState::initial(&arch, 1);
            ep = EpisodeAccounting::new(env.map_seed());
        }

        if step % train_cfg.eval_interval == 0 {
            let base = eval_rng.next_u64();
            let mut eval_cfg = env_cfg.clone();
            eval_cfg.n_obstacles = train_cfg.phases[phase_idx - 1].n_obstacles;
            let report = harness::evaluate(&params, &eval_cfg, train_cfg.eval_maps, base)?;
            for row in &report.rows {
                let acc = EpisodeAccounting {
                    map_seed: row.map_seed,
                    reward: row.episode_reward,
                    steps: row.episode_len,
                    path_len: row.path_len,
                    reached: row.success,
                };
                write_row(&mut metrics, phase_idx, step, "eval_episode", &acc)?;
            }
            log::info!(
                "eval at step {step}: success {:.2}, mean reward {:.2}",
                report.success_rate,
                report.avg_reward
            );
        }

        if plan.checkpoints.iter().any(|&(_, s)| s == step) {
            let path = out_dir.join(format!("phase-{phase_idx}.ckpt"));
            let checkpoint =
                harness::Checkpoint::new(params.clone(), env_cfg.clone(), train_cfg.clone());
            harness::save_checkpoint(&path, &checkpoint)?;
            checkpoint_paths.push(path);
        }
    }

    if ep.steps > 0 {
        write_row(
            &mut metrics,
            phase_idx,
            plan.total_steps,
            "train_episode",
            &ep,
        )?;
    }
    metrics.flush()?;

    Ok(TrainArtifacts {
        final_params: params,
        checkpoint_paths,
        metrics_path,
    })
}
