//! Evaluation protocol: run one greedy episode per map over a seeded map
//! sequence and aggregate the per-episode metrics. The map sequence is a
//! pure function of the base seed, so different models evaluated with the
//! same base face identical maps.
//!
//! Episodes are independent, so with the `parallel` feature the per-map
//! rollouts fan out across a rayon pool; results are collected by map index
//! and are identical to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;

use crate::dqn::select_action;
use crate::env::{decode_action, EnvConfig, SeekerEnv, N_ACTIONS};
use crate::error::{Result, SeekerError};
use crate::neural::{HiddenState, QNetParams};
use crate::rng::Rng;

/// Action source for one evaluation episode.
pub trait Policy {
    /// Called once right after the environment reset.
    fn begin_episode(&mut self, env: &SeekerEnv);
    /// Choose the next action. Baseline policies may inspect the true world
    /// state through `env`; learned policies use only `obs`.
    fn act(&mut self, env: &SeekerEnv, obs: &[f64]) -> Result<usize>;
}

/// Greedy Q-network policy (epsilon = 0), carrying recurrent state across
/// the episode.
pub struct GreedyPolicy<'a> {
    params: &'a QNetParams,
    hidden: Option<HiddenState>,
    rng: Rng,
}

impl<'a> GreedyPolicy<'a> {
    pub fn new(params: &'a QNetParams) -> GreedyPolicy<'a> {
        GreedyPolicy {
            params,
            hidden: None,
            rng: Rng::new(0),
        }
    }
}

impl Policy for GreedyPolicy<'_> {
    fn begin_episode(&mut self, _env: &SeekerEnv) {
        self.hidden = HiddenState::initial(&self.params.arch, 1);
    }

    fn act(&mut self, _env: &SeekerEnv, obs: &[f64]) -> Result<usize> {
        let (action, hidden) =
            select_action(self.params, obs, self.hidden.as_ref(), 0.0, &mut self.rng)?;
        self.hidden = hidden;
        Ok(action)
    }
}

/// Uniform-random baseline.
pub struct RandomPolicy {
    rng: Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> RandomPolicy {
        RandomPolicy {
            rng: Rng::new(seed),
        }
    }
}

impl Policy for RandomPolicy {
    fn begin_episode(&mut self, _env: &SeekerEnv) {}

    fn act(&mut self, _env: &SeekerEnv, _obs: &[f64]) -> Result<usize> {
        Ok(self.rng.below(N_ACTIONS as u64) as usize)
    }
}

/// Scripted privileged baseline: reads the true agent pose and target center
/// and picks the action whose turn best aligns the new heading with the
/// bearing to the target, preferring the larger forward move on ties.
pub struct StraightToTargetPolicy;

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

impl Policy for StraightToTargetPolicy {
    fn begin_episode(&mut self, _env: &SeekerEnv) {}

    fn act(&mut self, env: &SeekerEnv, _obs: &[f64]) -> Result<usize> {
        let world = env
            .world()
            .ok_or_else(|| SeekerError::Config("policy queried before reset".into()))?;
        let (tx, ty) = world.target.center();
        let bearing = (ty - world.agent.y).atan2(tx - world.agent.x);
        let turn_scale = env.config().turn_scale;
        let mut best = 0;
        let mut best_err = f64::INFINITY;
        let mut best_move = f64::NEG_INFINITY;
        for a in 0..N_ACTIONS {
            let (move_value, turn_value) = decode_action(a)?;
            let err = wrap_angle(bearing - world.agent.heading - turn_value * turn_scale).abs();
            if err < best_err - 1e-12 || (err < best_err + 1e-12 && move_value > best_move) {
                best = a;
                best_err = err;
                best_move = move_value;
            }
        }
        Ok(best)
    }
}

/// Complete record of one evaluation episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub map_seed: u64,
    pub episode_reward: f64,
    pub episode_len: usize,
    pub path_len: f64,
    pub success: bool,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

/// One CSV row of an evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub map_seed: u64,
    pub episode_reward: f64,
    pub episode_len: usize,
    pub path_len: f64,
    pub success: bool,
}

impl From<&EpisodeOutcome> for EvalRow {
    fn from(o: &EpisodeOutcome) -> EvalRow {
        EvalRow {
            map_seed: o.map_seed,
            episode_reward: o.episode_reward,
            episode_len: o.episode_len,
            path_len: o.path_len,
            success: o.success,
        }
    }
}

/// Per-map rows plus their arithmetic means.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub avg_episode_len: f64,
    pub avg_reward: f64,
    pub avg_path_len: f64,
    pub success_rate: f64,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<EvalRow>) -> EvalReport {
        let n = rows.len().max(1) as f64;
        EvalReport {
            avg_episode_len: rows.iter().map(|r| r.episode_len as f64).sum::<f64>() / n,
            avg_reward: rows.iter().map(|r| r.episode_reward).sum::<f64>() / n,
            avg_path_len: rows.iter().map(|r| r.path_len).sum::<f64>() / n,
            success_rate: rows.iter().filter(|r| r.success).count() as f64 / n,
            rows,
        }
    }

    /// Rows plus an `aggregate` footer, RFC-4180 style (no field needs
    /// quoting in this schema).
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "map_seed,episode_reward,episode_len,path_len,success")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.map_seed, r.episode_reward, r.episode_len, r.path_len, r.success
            )?;
        }
        writeln!(
            out,
            "aggregate,{},{},{},{}",
            self.avg_reward, self.avg_episode_len, self.avg_path_len, self.success_rate
        )?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut out)
    }
}

/// Run one full episode of `policy` on the map derived from `map_seed`.
pub fn run_policy_episode(
    env_cfg: &EnvConfig,
    map_seed: u64,
    policy: &mut dyn Policy,
) -> Result<EpisodeOutcome> {
    let mut env = SeekerEnv::new(env_cfg.clone())?;
    let mut obs = env.reset_from_seed(map_seed)?;
    policy.begin_episode(&env);
    let mut outcome = EpisodeOutcome {
        map_seed,
        episode_reward: 0.0,
        episode_len: 0,
        path_len: 0.0,
        success: false,
        actions: Vec::new(),
        rewards: Vec::new(),
    };
    loop {
        let action = policy.act(&env, &obs)?;
        let result = env.step(action)?;
        outcome.actions.push(action);
        outcome.rewards.push(result.reward);
        outcome.episode_reward += result.reward;
        outcome.episode_len = result.info.steps_taken;
        outcome.path_len = result.info.path_length;
        obs = result.observation;
        if result.done {
            outcome.success = result.info.reached;
            return Ok(outcome);
        }
    }
}

fn run_indexed<P, F>(
    env_cfg: &EnvConfig,
    n_maps: usize,
    map_seed_base: u64,
    make: F,
) -> Result<Vec<EpisodeOutcome>>
where
    P: Policy,
    F: Fn(usize) -> P + Sync,
{
    let run_one = |i: usize| {
        let mut policy = make(i);
        run_policy_episode(env_cfg, map_seed_base.wrapping_add(i as u64), &mut policy)
    };
    #[cfg(feature = "parallel")]
    {
        (0..n_maps).into_par_iter().map(run_one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_maps).map(run_one).collect()
    }
}

fn run_indexed_sequential<P, F>(
    env_cfg: &EnvConfig,
    n_maps: usize,
    map_seed_base: u64,
    make: F,
) -> Result<Vec<EpisodeOutcome>>
where
    P: Policy,
    F: Fn(usize) -> P,
{
    (0..n_maps)
        .map(|i| {
            let mut policy = make(i);
            run_policy_episode(env_cfg, map_seed_base.wrapping_add(i as u64), &mut policy)
        })
        .collect()
}

/// Evaluate an arbitrary policy over the seeded map sequence
/// `map_seed_base + i` for `i in 0..n_maps`. The factory builds one policy
/// per map so recurrent or stochastic policies stay independent across maps.
pub fn evaluate_policy<P, F>(
    env_cfg: &EnvConfig,
    n_maps: usize,
    map_seed_base: u64,
    make: F,
) -> Result<EvalReport>
where
    P: Policy,
    F: Fn(usize) -> P + Sync,
{
    let outcomes = run_indexed(env_cfg, n_maps, map_seed_base, make)?;
    Ok(EvalReport::from_rows(
        outcomes.iter().map(EvalRow::from).collect(),
    ))
}

fn check_dims(params: &QNetParams, env_cfg: &EnvConfig) -> Result<()> {
    if env_cfg.obs_dim() != params.arch.input_dim {
        return Err(SeekerError::Config(format!(
            "observation dim {} ({} mode, {} slices) does not match network input dim {}",
            env_cfg.obs_dim(),
            env_cfg.mode.as_str(),
            env_cfg.n_slices,
            params.arch.input_dim
        )));
    }
    Ok(())
}

/// Evaluate the greedy policy of a trained network over the seeded map
/// sequence. Dimension mismatches between the observation mode and the
/// network are reported before any episode runs.
pub fn evaluate(
    params: &QNetParams,
    env_cfg: &EnvConfig,
    n_maps: usize,
    map_seed_base: u64,
) -> Result<EvalReport> {
    check_dims(params, env_cfg)?;
    evaluate_policy(env_cfg, n_maps, map_seed_base, |_| {
        GreedyPolicy::new(params)
    })
}

/// Sequential twin of [`evaluate`], kept callable regardless of features for
/// order-independence tests and benchmarks.
pub fn evaluate_sequential(
    params: &QNetParams,
    env_cfg: &EnvConfig,
    n_maps: usize,
    map_seed_base: u64,
) -> Result<EvalReport> {
    check_dims(params, env_cfg)?;
    let outcomes = run_indexed_sequential(env_cfg, n_maps, map_seed_base, |_| {
        GreedyPolicy::new(params)
    })?;
    Ok(EvalReport::from_rows(
        outcomes.iter().map(EvalRow::from).collect(),
    ))
}

/// Full episode records for the greedy policy, for logging and replay.
pub fn evaluate_with_outcomes(
    params: &QNetParams,
    env_cfg: &EnvConfig,
    n_maps: usize,
    map_seed_base: u64,
) -> Result<Vec<EpisodeOutcome>> {
    check_dims(params, env_cfg)?;
    run_indexed(env_cfg, n_maps, map_seed_base, |_| {
        GreedyPolicy::new(params)
    })
}
