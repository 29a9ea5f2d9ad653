//! Harness: CLI, configuration, evaluation protocol, checkpoints, episode
//! replay, and static rendering.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod episode;
pub mod eval;
pub mod render;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use episode::{load_episode_log, replay_episode, save_episode_log, EpisodeLog, ReplayOutcome};
pub use eval::{
    evaluate, evaluate_policy, evaluate_sequential, evaluate_with_outcomes, EpisodeOutcome,
    EvalReport, EvalRow, GreedyPolicy, Policy, RandomPolicy, StraightToTargetPolicy,
};
pub use render::{render_depth_plot, render_scene};
