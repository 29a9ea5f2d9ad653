//! Command-line interface: map generation, training, evaluation, rendering,
//! and deterministic episode replay.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. Log verbosity
//! comes from the `SEEKER_LOG_LEVEL` environment variable
//! (error|warn|info|debug).

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::dqn::{self, TrainConfig};
use crate::env::{EnvConfig, Mode, SeekerEnv};
use crate::error::{Result, SeekerError};
use crate::gridgen;
use crate::neural::ArchKind;
use crate::rng::Rng;

use super::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use super::config;
use super::episode::{load_episode_log, replay_episode, save_episode_log, EpisodeLog};
use super::eval;
use super::render;

#[derive(Parser)]
#[command(
    name = "seeker",
    version,
    about = "Partially observable 2D pathfinding environment with DQN training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random maps in the bordered ASCII format.
    GenMaps(GenMapsArgs),
    /// Train a model through the obstacle curriculum.
    Train(TrainArgs),
    /// Evaluate a checkpoint over a seeded map sequence.
    Eval(EvalArgs),
    /// Render a map or a greedy episode as SVG.
    Render(RenderArgs),
    /// Re-run a logged episode and verify its rewards.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct GenMapsArgs {
    #[arg(long, default_value_t = 10)]
    width: usize,
    #[arg(long, default_value_t = 8)]
    height: usize,
    #[arg(long, default_value_t = 0)]
    obstacles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Regenerate until breadth-first search confirms the target is
    /// reachable.
    #[arg(long, default_value_t = false)]
    require_solvable: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Flat key = value config file (environment + training keys).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ArchKind::parse)]
    arch: ArchKind,
    /// Observation mode; overrides the config file.
    #[arg(long, value_parser = Mode::parse)]
    mode: Option<Mode>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Override the obstacle count from the checkpoint's env config.
    #[arg(long)]
    obstacles: Option<usize>,
    #[arg(long, default_value_t = 100)]
    maps: usize,
    /// Base map seed; map i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-map rows plus an aggregate footer to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write one replayable episode log per map into this directory.
    #[arg(long)]
    episode_log_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// ASCII map file to render as a static scene.
    #[arg(long, conflicts_with = "checkpoint")]
    map: Option<PathBuf>,
    /// Checkpoint to roll one greedy episode from (with --episode).
    #[arg(long, requires = "episode")]
    checkpoint: Option<PathBuf>,
    /// Roll out and draw a greedy episode trajectory.
    #[arg(long, default_value_t = false)]
    episode: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the obstacle count from the checkpoint's env config.
    #[arg(long)]
    obstacles: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the agent's first depth view to this file.
    #[arg(long)]
    depth_out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Episode log written by `eval --episode-log-dir`.
    #[arg(long)]
    episode: PathBuf,
}

/// Run the CLI against an argument vector and return the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ =
        env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEEKER_LOG_LEVEL", "warn"))
            .try_init();

    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenMaps(args) => gen_maps(args),
        Command::Train(args) => train(args),
        Command::Eval(args) => eval_cmd(args),
        Command::Render(args) => render_cmd(args),
        Command::Replay(args) => replay_cmd(args),
    }
}

fn gen_maps(args: GenMapsArgs) -> Result<()> {
    let mut rng = Rng::new(args.seed);
    for i in 0..args.count {
        let grid = if args.require_solvable {
            gridgen::generate_solvable(args.width, args.height, args.obstacles, &mut rng, 1000)?
        } else {
            gridgen::generate_gridworld(args.width, args.height, args.obstacles, &mut rng)?
        };
        if i > 0 {
            println!();
        }
        println!("{}", gridgen::render_ascii(&grid));
    }
    Ok(())
}

fn load_run_config(path: Option<&PathBuf>) -> Result<(EnvConfig, TrainConfig)> {
    match path {
        Some(p) => config::parse_run_config(&fs::read_to_string(p)?),
        None => Ok((EnvConfig::desk_default(), TrainConfig::desk_default())),
    }
}

fn train(args: TrainArgs) -> Result<()> {
    let (mut env_cfg, train_cfg) = load_run_config(args.config.as_ref())?;
    if let Some(mode) = args.mode {
        env_cfg.mode = mode;
    }
    let artifacts = dqn::train(&train_cfg, &env_cfg, args.arch, &args.out_dir)?;
    println!("metrics: {}", artifacts.metrics_path.display());
    for path in &artifacts.checkpoint_paths {
        println!("checkpoint: {}", path.display());
    }
    Ok(())
}

fn eval_cmd(args: EvalArgs) -> Result<()> {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let mut env_cfg = checkpoint.env.clone();
    if let Some(o) = args.obstacles {
        env_cfg.n_obstacles = o;
        env_cfg.validate()?;
    }
    let outcomes =
        eval::evaluate_with_outcomes(&checkpoint.params, &env_cfg, args.maps, args.seed)?;
    let report = eval::EvalReport::from_rows(outcomes.iter().map(eval::EvalRow::from).collect());
    if let Some(csv) = &args.csv {
        report.save_csv(csv)?;
    }
    if let Some(dir) = &args.episode_log_dir {
        fs::create_dir_all(dir)?;
        for (i, outcome) in outcomes.iter().enumerate() {
            let log = EpisodeLog::from_outcome(&env_cfg, outcome);
            save_episode_log(&dir.join(format!("episode_{i:04}.log")), &log)?;
        }
    }
    println!(
        "maps: {}  success_rate: {:.3}  avg_reward: {:.3}  avg_episode_len: {:.2}  avg_path_len: {:.3}",
        report.rows.len(),
        report.success_rate,
        report.avg_reward,
        report.avg_episode_len,
        report.avg_path_len
    );
    Ok(())
}

fn render_cmd(args: RenderArgs) -> Result<()> {
    match (&args.map, &args.checkpoint) {
        (Some(map_path), None) => {
            let text = fs::read_to_string(map_path)?;
            let grid = gridgen::parse_ascii_with(&text, gridgen::ParseStrictness::Lenient)?;
            let world = crate::world::to_world(&grid, &mut Rng::new(args.seed))?;
            render::render_scene(&world, None, &args.out)?;
            if let Some(depth) = &args.depth_out {
                let obs = crate::vision::observe(
                    &world,
                    EnvConfig::default().fov_radians(),
                    crate::vision::DEFAULT_N_SLICES,
                );
                render::render_depth_plot(&obs, depth)?;
            }
            println!("scene: {}", args.out.display());
            Ok(())
        }
        (None, Some(ckpt_path)) => {
            let checkpoint = load_checkpoint(ckpt_path)?;
            let mut env_cfg = checkpoint.env.clone();
            if let Some(o) = args.obstacles {
                env_cfg.n_obstacles = o;
                env_cfg.validate()?;
            }
            // Re-run the greedy episode while recording the agent's track.
            let mut env = SeekerEnv::new(env_cfg.clone())?;
            let mut obs = env.reset_from_seed(args.seed)?;
            if let Some(depth) = &args.depth_out {
                let view = crate::vision::observe(
                    env.world().unwrap(),
                    env_cfg.fov_radians(),
                    env_cfg.n_slices,
                );
                render::render_depth_plot(&view, depth)?;
            }
            let mut policy = eval::GreedyPolicy::new(&checkpoint.params);
            {
                use eval::Policy;
                policy.begin_episode(&env);
                let mut track = vec![{
                    let a = &env.world().unwrap().agent;
                    (a.x, a.y)
                }];
                loop {
                    let action = policy.act(&env, &obs)?;
                    let result = env.step(action)?;
                    let agent = &env.world().unwrap().agent;
                    track.push((agent.x, agent.y));
                    obs = result.observation;
                    if result.done {
                        break;
                    }
                }
                render::render_scene(env.world().unwrap(), Some(&track), &args.out)?;
            }
            println!("scene: {}", args.out.display());
            Ok(())
        }
        _ => Err(SeekerError::Config(
            "render needs either --map FILE or --checkpoint FILE --episode".into(),
        )),
    }
}

fn replay_cmd(args: ReplayArgs) -> Result<()> {
    let log = load_episode_log(&args.episode)?;
    let outcome = replay_episode(&log)?;
    if !outcome.matches {
        return Err(SeekerError::Config(format!(
            "replay mismatch: recomputed total {} vs logged {}{}",
            outcome.recomputed_total,
            log.total_reward,
            outcome
                .first_mismatch
                .map(|i| format!(", first differing step {i}"))
                .unwrap_or_default()
        )));
    }
    println!(
        "replay OK: {} steps, total reward {}",
        outcome.steps, outcome.recomputed_total
    );
    Ok(())
}

// Re-exported so integration tests can reuse the checkpoint writer without
// a trained model.
pub fn write_fresh_checkpoint(
    path: &std::path::Path,
    params: crate::neural::QNetParams,
    env: EnvConfig,
    train: TrainConfig,
) -> Result<()> {
    save_checkpoint(path, &Checkpoint::new(params, env, train))
}
