//! The episodic environment: reset, discrete actions, reward, termination.
//!
//! Each reset generates a fresh solvable map (never reusing a previous one),
//! converts it to a continuous scene, and returns the initial observation.
//! Steps decode one of five discrete actions into a (move, turn) pair, apply
//! the motion, and score the result.

use std::f64::consts::PI;

use crate::error::{Result, SeekerError};
use crate::gridgen;
use crate::rng::Rng;
use crate::vision::{self, DEFAULT_N_SLICES};
use crate::world::{self, WorldState};

/// Reward values. Exactly one fires per step, picked by priority:
/// reached > near > moved away > moved toward > default.
pub const REWARD_REACHED: f64 = 0.0;
pub const REWARD_NEAR: f64 = -1.0;
pub const REWARD_AWAY: f64 = -1.5;
pub const REWARD_TOWARD: f64 = -0.2;
pub const REWARD_DEFAULT: f64 = -0.7;

/// Number of discrete actions.
pub const N_ACTIONS: usize = 5;

/// The (move, turn) pairs behind the five discrete actions. Move is scaled
/// by `move_scale` into world units, turn by `turn_scale` into radians; a
/// positive turn is to the left. Every action moves at least a little and
/// reverse is not available.
const ACTION_TABLE: [(f64, f64); N_ACTIONS] = [
    (0.05, -1.0),
    (0.5, -0.5),
    (1.0, 0.0),
    (0.5, 0.5),
    (0.05, 1.0),
];

/// Map a discrete action index to its continuous (move, turn) pair.
pub fn decode_action(a: usize) -> Result<(f64, f64)> {
    ACTION_TABLE
        .get(a)
        .copied()
        .ok_or(SeekerError::InvalidAction(a))
}

/// What the agent gets to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Vision only.
    Pure,
    /// Vision plus agent position, heading, and target center.
    Impure,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Pure => "pure",
            Mode::Impure => "impure",
        }
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "pure" => Ok(Mode::Pure),
            "impure" => Ok(Mode::Impure),
            other => Err(SeekerError::Config(format!(
                "mode must be 'pure' or 'impure', got '{other}'"
            ))),
        }
    }
}

/// Environment parameters. World lengths are in cell units.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub width: usize,
    pub height: usize,
    pub n_obstacles: usize,
    pub max_steps: usize,
    pub mode: Mode,
    /// Field of view in degrees. Degrees are the stored and serialized unit
    /// so config and checkpoint round trips are exact; use
    /// [`EnvConfig::fov_radians`] for geometry.
    pub fov_deg: f64,
    pub n_slices: usize,
    /// World units of advance per unit of action move value.
    pub move_scale: f64,
    /// Radians per unit of action turn value.
    pub turn_scale: f64,
    /// Clearance below which the near-obstacle / near-boundary penalty fires.
    pub near_threshold: f64,
    /// Distance to the target center that counts as reaching it.
    pub reach_threshold: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            width: 10,
            height: 8,
            n_obstacles: 0,
            max_steps: 1000,
            mode: Mode::Pure,
            fov_deg: 90.0,
            n_slices: DEFAULT_N_SLICES,
            move_scale: 0.5,
            turn_scale: PI / 6.0,
            near_threshold: 0.25,
            reach_threshold: 0.5,
            seed: 0,
        }
    }
}

impl EnvConfig {
    /// Small maps and short episodes for fast desk-scale runs.
    pub fn desk_default() -> Self {
        EnvConfig {
            width: 6,
            height: 5,
            max_steps: 200,
            ..EnvConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(SeekerError::Config(format!(
                "map must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        if self.n_obstacles > self.width * self.height - 2 {
            return Err(SeekerError::Config(format!(
                "{} obstacles do not fit in a {}x{} map",
                self.n_obstacles, self.width, self.height
            )));
        }
        if self.max_steps == 0 {
            return Err(SeekerError::Config("max_steps must be at least 1".into()));
        }
        if self.n_slices == 0 {
            return Err(SeekerError::Config("n_slices must be at least 1".into()));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return Err(SeekerError::Config(format!(
                "fov_deg must be in (0, 360], got {}",
                self.fov_deg
            )));
        }
        Ok(())
    }

    /// Field of view in radians.
    pub fn fov_radians(&self) -> f64 {
        self.fov_deg.to_radians()
    }

    /// Length of the observation vector for this config.
    pub fn obs_dim(&self) -> usize {
        match self.mode {
            Mode::Pure => 2 * self.n_slices,
            Mode::Impure => 2 * self.n_slices + 6,
        }
    }
}

/// Score one transition. Conditions are checked in priority order so exactly
/// one fires: reaching the target dominates everything, proximity penalties
/// dominate movement scoring, and an exact distance tie falls through to the
/// default move cost.
pub fn compute_reward(prev: &WorldState, next: &WorldState, cfg: &EnvConfig) -> f64 {
    if next.target_reached(cfg.reach_threshold) {
        return REWARD_REACHED;
    }
    let (obstacle, boundary) = next.clearance();
    if obstacle.min(boundary) < cfg.near_threshold {
        return REWARD_NEAR;
    }
    let before = prev.distance_to_target();
    let after = next.distance_to_target();
    if after > before {
        REWARD_AWAY
    } else if after < before {
        REWARD_TOWARD
    } else {
        REWARD_DEFAULT
    }
}

/// Flatten the world into the network input vector.
///
/// Pure mode: `[d_1/D, k_1, ..., d_n/D, k_n]` with D the map diagonal.
/// Impure mode appends `[x/w, y/h, sin(heading), cos(heading), tx/w, ty/h]`.
pub fn assemble_observation(world: &WorldState, mode: Mode, fov: f64, n_slices: usize) -> Vec<f64> {
    let diag = world.diagonal();
    let obs = vision::observe(world, fov, n_slices);
    let mut v = Vec::with_capacity(2 * n_slices + 6);
    for hit in &obs.hits {
        v.push(hit.distance / diag);
        v.push(hit.kind as f64);
    }
    if mode == Mode::Impure {
        let (w, h) = (world.boundary.width(), world.boundary.height());
        let (tx, ty) = world.target.center();
        v.push(world.agent.x / w);
        v.push(world.agent.y / h);
        v.push(world.agent.heading.sin());
        v.push(world.agent.heading.cos());
        v.push(tx / w);
        v.push(ty / h);
    }
    v
}

/// Extra bookkeeping reported with every step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub reached: bool,
    pub path_length: f64,
    pub steps_taken: usize,
    pub distance_to_target: f64,
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Attempts per reset before map generation gives up. Reasonable obstacle
/// densities succeed on the first few tries.
const RESET_MAX_ATTEMPTS: usize = 1000;

/// One environment instance. Owns a deterministic seed stream: identical
/// config and seed replay the exact same episodes for the same actions.
#[derive(Debug, Clone)]
pub struct SeekerEnv {
    cfg: EnvConfig,
    rng: Rng,
    world: Option<WorldState>,
    done: bool,
    /// Seed that produced the current episode's map and spawn pose.
    map_seed: u64,
}

impl SeekerEnv {
    pub fn new(cfg: EnvConfig) -> Result<SeekerEnv> {
        cfg.validate()?;
        let rng = Rng::new(cfg.seed);
        Ok(SeekerEnv {
            cfg,
            rng,
            world: None,
            done: false,
            map_seed: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    /// Obstacle count for subsequent episodes (curriculum phases).
    pub fn set_n_obstacles(&mut self, n: usize) -> Result<()> {
        let mut cfg = self.cfg.clone();
        cfg.n_obstacles = n;
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    /// World of the current episode. None before the first reset.
    pub fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn map_seed(&self) -> u64 {
        self.map_seed
    }

    /// Start a new episode on a freshly generated solvable map drawn from the
    /// environment's seed stream.
    pub fn reset(&mut self) -> Result<Vec<f64>> {
        let seed = self.rng.next_u64();
        self.reset_from_seed(seed)
    }

    /// Start a new episode from an explicit map seed. The same seed rebuilds
    /// the identical map and spawn pose, which is what evaluation sequences
    /// and replay rely on.
    pub fn reset_from_seed(&mut self, map_seed: u64) -> Result<Vec<f64>> {
        let mut episode_rng = Rng::new(map_seed);
        let grid = gridgen::generate_solvable(
            self.cfg.width,
            self.cfg.height,
            self.cfg.n_obstacles,
            &mut episode_rng,
            RESET_MAX_ATTEMPTS,
        )?;
        let world = world::to_world(&grid, &mut episode_rng)?;
        let obs = assemble_observation(
            &world,
            self.cfg.mode,
            self.cfg.fov_radians(),
            self.cfg.n_slices,
        );
        self.world = Some(world);
        self.done = false;
        self.map_seed = map_seed;
        Ok(obs)
    }

    /// Apply one discrete action. Errors if the episode is already done or
    /// was never reset.
    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        if self.done {
            return Err(SeekerError::EpisodeFinished);
        }
        let world = self
            .world
            .as_mut()
            .ok_or_else(|| SeekerError::Config("step before reset".into()))?;
        let (move_value, turn_value) = decode_action(action)?;

        let prev = world.clone();
        world.move_agent(
            move_value * self.cfg.move_scale,
            turn_value * self.cfg.turn_scale,
        );
        let reward = compute_reward(&prev, world, &self.cfg);
        let reached = world.target_reached(self.cfg.reach_threshold);
        let done = reached || world.steps_taken >= self.cfg.max_steps;
        let observation = assemble_observation(
            world,
            self.cfg.mode,
            self.cfg.fov_radians(),
            self.cfg.n_slices,
        );
        let info = StepInfo {
            reached,
            path_length: world.path_length,
            steps_taken: world.steps_taken,
            distance_to_target: world.distance_to_target(),
        };
        self.done = done;
        Ok(StepResult {
            observation,
            reward,
            done,
            info,
        })
    }
}
