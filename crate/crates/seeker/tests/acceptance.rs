//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

mod common;

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::time::Instant;

use seeker::dqn::{self, Phase, TrainConfig, Transition};
use seeker::env::{EnvConfig, Mode, SeekerEnv, N_ACTIONS};
use seeker::gridgen::{self, CellKind, GridMap};
use seeker::harness::{self, load_checkpoint, save_checkpoint, Checkpoint};
use seeker::neural::{self, ArchDescriptor, ArchKind};
use seeker::rng::Rng;
use seeker::vision;
use seeker::world::DEFAULT_AGENT_RADIUS;

fn criterion<F: FnOnce() + UnwindSafe>(id: u32, name: &str, f: F) {
    match catch_unwind(f) {
        Ok(()) => println!("criterion {id:02} PASS: {name}"),
        Err(e) => {
            println!("criterion {id:02} FAIL: {name}");
            resume_unwind(e);
        }
    }
}

#[test]
fn acceptance_01_generation_census() {
    criterion(1, "generation census over 10^4 random maps", || {
        let start = Instant::now();
        let mut rng = Rng::new(0xC0FFEE);
        for _ in 0..10_000 {
            let w = 3 + rng.below(10) as usize;
            let h = 3 + rng.below(10) as usize;
            let o = rng.below((w * h - 2) as u64 + 1) as usize;
            let grid = gridgen::generate_gridworld(w, h, o, &mut rng).unwrap();
            let (empty, obstacles, targets, agents) = grid.census();
            assert_eq!(agents, 1);
            assert_eq!(targets, 1);
            assert_eq!(obstacles, o);
            assert_eq!(empty, w * h - o - 2);
        }
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    });
}

#[test]
fn acceptance_02_bfs_matches_flood_fill_oracle() {
    criterion(2, "reachability equals flood-fill oracle", || {
        let start = Instant::now();
        // Exhaustive 3x3: every agent/target placement x every obstacle
        // subset of the remaining 7 cells.
        let mut checked = 0u64;
        for agent in 0..9usize {
            for target in 0..9usize {
                if target == agent {
                    continue;
                }
                let free: Vec<usize> = (0..9).filter(|&c| c != agent && c != target).collect();
                for mask in 0..(1u32 << free.len()) {
                    let mut grid = GridMap::empty(3, 3).unwrap();
                    grid.set(agent % 3, agent / 3, CellKind::Agent);
                    grid.set(target % 3, target / 3, CellKind::Target);
                    for (bit, &cell) in free.iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            grid.set(cell % 3, cell / 3, CellKind::Obstacle);
                        }
                    }
                    assert_eq!(
                        gridgen::check_reachability(&grid),
                        common::flood_fill_reachable(&grid),
                        "exhaustive disagreement on\n{grid}"
                    );
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 9 * 8 * 128);
        // Random 10x8 maps across the full obstacle range.
        let mut rng = Rng::new(0xBF5);
        for _ in 0..10_000 {
            let o = rng.below(41) as usize;
            let grid = gridgen::generate_gridworld(10, 8, o, &mut rng).unwrap();
            assert_eq!(
                gridgen::check_reachability(&grid),
                common::flood_fill_reachable(&grid),
                "random disagreement on\n{grid}"
            );
        }
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    });
}

#[test]
fn acceptance_03_raycast_matches_marching_oracle() {
    criterion(3, "ray casts match 1e-4-step marching oracle", || {
        let start = Instant::now();
        let mut rng = Rng::new(0x7AC3);
        let fov = std::f64::consts::FRAC_PI_2;
        let n_slices = 32;
        for _ in 0..100 {
            let o = rng.below(11) as usize;
            let grid = gridgen::generate_solvable(10, 8, o, &mut rng, 200).unwrap();
            let world = seeker::world::to_world(&grid, &mut rng).unwrap();
            let slice = fov / n_slices as f64;
            let first = world.agent.heading - 0.5 * fov;
            for i in 0..n_slices {
                let angle = first + (i as f64 + 0.5) * slice;
                let hit = vision::cast_ray(&world, angle);
                let (march_d, march_kind) = common::ray_march(&world, angle, 1e-4);
                assert!(
                    (hit.distance - march_d).abs() < 1e-3,
                    "distance {} vs march {}",
                    hit.distance,
                    march_d
                );
                assert_eq!(hit.kind, march_kind, "kind mismatch at distance {march_d}");
            }
        }
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    });
}

#[test]
fn acceptance_04_reward_exactness_and_codomain() {
    criterion(4, "reward values and priority order are exact", || {
        use seeker::env::{
            compute_reward, REWARD_AWAY, REWARD_DEFAULT, REWARD_NEAR, REWARD_REACHED, REWARD_TOWARD,
        };
        use seeker::world::{AgentPose, Box2D, WorldState};

        let cfg = EnvConfig::default();
        let base = WorldState {
            boundary: Box2D::new(0.0, 0.0, 10.0, 8.0),
            obstacles: vec![],
            target: Box2D::new(7.0, 5.0, 8.0, 6.0),
            agent: AgentPose {
                x: 4.0,
                y: 4.0,
                heading: 0.0,
            },
            agent_radius: DEFAULT_AGENT_RADIUS,
            steps_taken: 0,
            path_length: 0.0,
        };
        let at = |x: f64, y: f64| {
            let mut w = base.clone();
            w.agent.x = x;
            w.agent.y = y;
            w
        };

        // Each plain condition fires alone.
        assert_eq!(
            compute_reward(&at(4.0, 4.0), &at(7.45, 5.5), &cfg),
            REWARD_REACHED
        );
        assert_eq!(
            compute_reward(&at(4.0, 4.0), &at(4.0, 0.2), &cfg),
            REWARD_NEAR
        );
        assert_eq!(
            compute_reward(&at(4.0, 4.0), &at(3.5, 4.0), &cfg),
            REWARD_AWAY
        );
        assert_eq!(
            compute_reward(&at(4.0, 4.0), &at(4.5, 4.0), &cfg),
            REWARD_TOWARD
        );
        let mut turned = at(4.0, 4.0);
        turned.agent.heading = 1.0;
        assert_eq!(compute_reward(&at(4.0, 4.0), &turned, &cfg), REWARD_DEFAULT);

        // Priority overlaps.
        // Reached while hugging an obstacle: reached wins.
        let mut reached_near = at(7.45, 5.5);
        reached_near.obstacles.push(Box2D::new(6.4, 5.0, 7.4, 6.0));
        assert!(reached_near.clearance().0 < cfg.near_threshold);
        assert_eq!(
            compute_reward(&at(4.0, 4.0), &reached_near, &cfg),
            REWARD_REACHED
        );
        // Near while moving toward: near wins.
        let mut near_toward = at(5.0, 5.0);
        near_toward.obstacles.push(Box2D::new(4.5, 3.9, 5.5, 4.9));
        assert!(near_toward.distance_to_target() < at(4.0, 4.0).distance_to_target());
        assert_eq!(
            compute_reward(&at(4.0, 4.0), &near_toward, &cfg),
            REWARD_NEAR
        );
        // Near while moving away: near still wins.
        let mut near_away = at(3.0, 4.0);
        near_away.obstacles.push(Box2D::new(2.5, 2.9, 3.5, 3.9));
        assert!(near_away.distance_to_target() > at(4.0, 4.0).distance_to_target());
        assert_eq!(compute_reward(&at(4.0, 4.0), &near_away, &cfg), REWARD_NEAR);
        // Reached while boundary-near and moving away from center: reached wins.
        let mut target_corner = base.clone();
        target_corner.target = Box2D::new(9.0, 7.0, 10.0, 8.0);
        let mut next_corner = target_corner.clone();
        next_corner.agent.x = 9.6;
        next_corner.agent.y = 7.9;
        assert!(next_corner.clearance().1 < cfg.near_threshold);
        assert!(next_corner.distance_to_target() < cfg.reach_threshold);
        assert_eq!(
            compute_reward(&target_corner, &next_corner, &cfg),
            REWARD_REACHED
        );

        // Codomain over 1e5 random environment steps.
        let allowed = [
            REWARD_REACHED,
            REWARD_NEAR,
            REWARD_AWAY,
            REWARD_TOWARD,
            REWARD_DEFAULT,
        ];
        let mut rng = Rng::new(0xD0C);
        let mut env = SeekerEnv::new(EnvConfig {
            n_obstacles: 4,
            seed: 4,
            ..EnvConfig::desk_default()
        })
        .unwrap();
        env.reset().unwrap();
        for _ in 0..100_000 {
            let r = env.step(rng.below(N_ACTIONS as u64) as usize).unwrap();
            assert!(
                allowed.contains(&r.reward),
                "reward {} outside codomain",
                r.reward
            );
            if r.done {
                env.reset().unwrap();
            }
        }
    });
}

#[test]
fn acceptance_05_safety_invariant() {
    criterion(5, "clearance never drops below radius - 1e-9", || {
        let mut rng = Rng::new(0x5AFE);
        let mut steps = 0u64;
        while steps < 100_000 {
            let o = rng.below(9) as usize;
            let cfg = EnvConfig {
                n_obstacles: o,
                seed: rng.next_u64(),
                max_steps: 300,
                ..EnvConfig::desk_default()
            };
            let mut env = SeekerEnv::new(cfg).unwrap();
            env.reset().unwrap();
            loop {
                let r = env.step(rng.below(N_ACTIONS as u64) as usize).unwrap();
                steps += 1;
                let world = env.world().unwrap();
                let (obstacle, boundary) = world.clearance();
                assert!(
                    obstacle >= world.agent_radius - 1e-9,
                    "obstacle clearance {obstacle} after {steps} steps"
                );
                assert!(
                    boundary >= world.agent_radius - 1e-9,
                    "boundary clearance {boundary} after {steps} steps"
                );
                if r.done || steps >= 100_000 {
                    break;
                }
            }
        }
    });
}

#[test]
fn acceptance_06_gradient_checks() {
    criterion(6, "gradients match finite differences (<1e-4)", || {
        let start = Instant::now();
        for (kind, seed) in [
            (ArchKind::Dqn, 101),
            (ArchKind::DqnGru, 102),
            (ArchKind::DqnLstm, 103),
        ] {
            let arch = ArchDescriptor::new(kind, 10, 16, N_ACTIONS);
            let err = common::finite_difference_check(arch, seed, 3, 2);
            assert!(
                err < 1e-4,
                "{} worst relative error {err:.3e}",
                kind.as_str()
            );
        }
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    });
}

#[test]
fn acceptance_07_terminal_targets_skip_bootstrap() {
    criterion(7, "terminal transitions bootstrap nothing", || {
        let mut rng = Rng::new(0x7E2);
        for kind in [ArchKind::Dqn, ArchKind::DqnGru, ArchKind::DqnLstm] {
            let arch = ArchDescriptor::new(kind, 6, 12, N_ACTIONS);
            let params = neural::init_params(arch, &mut rng);
            for gamma in [1e-12, 0.3, 0.99, 1.0] {
                let mk = |reward: f64, terminal: bool| Transition {
                    obs: (0..6).map(|_| 0.3).collect(),
                    action: 2,
                    reward,
                    next_obs: (0..6).map(|_| 0.6).collect(),
                    terminal,
                };
                let terminal = mk(0.0, true);
                let ys = dqn::td_targets(&[&terminal], &params, gamma).unwrap();
                assert_eq!(ys[0], 0.0);
                // And inside a window, only the terminal step skips the
                // bootstrap term.
                let a = mk(-0.2, false);
                let b = mk(0.0, true);
                let seq = dqn::td_targets_seq(&[&a, &b], &params, gamma).unwrap();
                assert_eq!(seq[1], 0.0);
                assert!(seq[0] != -0.2 || gamma < 1e-9);
            }
        }
    });
}

fn desk_determinism_cfg(seed: u64) -> (TrainConfig, EnvConfig) {
    let train = TrainConfig {
        phases: vec![
            Phase {
                n_obstacles: 0,
                n_steps: 2000,
            },
            Phase {
                n_obstacles: 3,
                n_steps: 1000,
            },
            Phase {
                n_obstacles: 5,
                n_steps: 1000,
            },
        ],
        eval_interval: 1000,
        eval_maps: 3,
        epsilon_decay_steps: 400,
        seed,
        ..TrainConfig::desk_default()
    };
    let env = EnvConfig {
        mode: Mode::Impure,
        seed,
        max_steps: 150,
        ..EnvConfig::desk_default()
    };
    (train, env)
}

#[test]
fn acceptance_08_training_and_replay_determinism() {
    criterion(
        8,
        "identical seeds yield identical runs and replays",
        || {
            let (train_cfg, env_cfg) = desk_determinism_cfg(2024);
            let dir_a = tempfile::tempdir().unwrap();
            let dir_b = tempfile::tempdir().unwrap();
            let a = dqn::train(&train_cfg, &env_cfg, ArchKind::Dqn, dir_a.path()).unwrap();
            let b = dqn::train(&train_cfg, &env_cfg, ArchKind::Dqn, dir_b.path()).unwrap();
            let csv_a = std::fs::read(&a.metrics_path).unwrap();
            let csv_b = std::fs::read(&b.metrics_path).unwrap();
            assert!(!csv_a.is_empty());
            assert_eq!(csv_a, csv_b, "metrics CSVs differ between identical runs");
            assert_eq!(a.final_params, b.final_params);

            // Replay: log greedy episodes from the trained model, then re-run
            // them from seed + actions and demand exact reward agreement.
            let eval_cfg = EnvConfig {
                n_obstacles: 5,
                ..env_cfg.clone()
            };
            let outcomes =
                harness::evaluate_with_outcomes(&a.final_params, &eval_cfg, 10, 31337).unwrap();
            for outcome in &outcomes {
                let log = harness::EpisodeLog::from_outcome(&eval_cfg, outcome);
                let replayed = harness::replay_episode(&log).unwrap();
                assert!(
                    replayed.matches,
                    "replay diverged on map {}",
                    outcome.map_seed
                );
                assert_eq!(replayed.recomputed_total, outcome.episode_reward);
            }
        },
    );
}

#[test]
fn acceptance_09_learning_smoke_test() {
    criterion(9, "30k-step impure DQN beats the random baseline", || {
        let start = Instant::now();
        let env_cfg = EnvConfig {
            mode: Mode::Impure,
            n_obstacles: 0,
            seed: 7,
            ..EnvConfig::desk_default()
        };
        let train_cfg = TrainConfig {
            phases: vec![Phase {
                n_obstacles: 0,
                n_steps: 30_000,
            }],
            eval_interval: 10_000,
            epsilon_decay_steps: 3_000,
            seed: 7,
            ..TrainConfig::desk_default()
        };
        let dir = tempfile::tempdir().unwrap();
        let artifacts = dqn::train(&train_cfg, &env_cfg, ArchKind::Dqn, dir.path()).unwrap();

        let n_maps = 100;
        let base = 900_000;
        let trained = harness::evaluate(&artifacts.final_params, &env_cfg, n_maps, base).unwrap();
        let random = harness::evaluate_policy(&env_cfg, n_maps, base, |i| {
            harness::RandomPolicy::new(base + i as u64)
        })
        .unwrap();
        let oracle =
            harness::evaluate_policy(&env_cfg, n_maps, base, |_| harness::StraightToTargetPolicy)
                .unwrap();

        println!(
            "  smoke: trained reward {:.2} success {:.2} | random {:.2} | oracle {:.2} | {:?}",
            trained.avg_reward,
            trained.success_rate,
            random.avg_reward,
            oracle.avg_reward,
            start.elapsed()
        );
        assert!(
            trained.success_rate >= 0.8,
            "success rate {} below 0.8",
            trained.success_rate
        );
        let gap_target = random.avg_reward + 0.5 * (oracle.avg_reward - random.avg_reward);
        assert!(
            trained.avg_reward >= gap_target,
            "trained reward {} below midpoint {} (random {}, oracle {})",
            trained.avg_reward,
            gap_target,
            random.avg_reward,
            oracle.avg_reward
        );
        assert!(
            start.elapsed().as_secs_f64() < 900.0,
            "took {:?}",
            start.elapsed()
        );
    });
}

#[test]
fn acceptance_10_paper_scale_schedule_arithmetic() {
    criterion(
        10,
        "full-scale schedule yields 20+10+10 evaluations",
        || {
            let cfg = TrainConfig::paper_scale();
            assert_eq!(cfg.total_steps(), 1_000_000);
            assert_eq!(cfg.eval_maps, 5);
            let plan = dqn::plan_schedule(&cfg);
            assert_eq!(plan.evals_in_phase(1), 20);
            assert_eq!(plan.evals_in_phase(2), 10);
            assert_eq!(plan.evals_in_phase(3), 10);
            assert_eq!(plan.evals.len(), 40);
            assert_eq!(plan.checkpoints.len(), 3);
            assert_eq!(
                plan.checkpoints,
                vec![(1, 500_000), (2, 750_000), (3, 1_000_000)]
            );
        },
    );
}

#[test]
fn acceptance_11_checkpoint_round_trip() {
    criterion(11, "checkpoints are lossless and byte-stable", || {
        let env_cfg = EnvConfig {
            mode: Mode::Impure,
            n_obstacles: 3,
            seed: 5,
            max_steps: 120,
            ..EnvConfig::desk_default()
        };
        let train_cfg = TrainConfig::desk_default();
        for (kind, seed) in [
            (ArchKind::Dqn, 61),
            (ArchKind::DqnGru, 62),
            (ArchKind::DqnLstm, 63),
        ] {
            let arch = ArchDescriptor::new(kind, env_cfg.obs_dim(), 24, N_ACTIONS);
            let params = neural::init_params(arch, &mut Rng::new(seed));
            let ckpt = Checkpoint::new(params.clone(), env_cfg.clone(), train_cfg.clone());
            let dir = tempfile::tempdir().unwrap();
            let p1 = dir.path().join("a.ckpt");
            let p2 = dir.path().join("b.ckpt");
            save_checkpoint(&p1, &ckpt).unwrap();
            let loaded = load_checkpoint(&p1).unwrap();
            save_checkpoint(&p2, &loaded).unwrap();
            assert_eq!(
                std::fs::read(&p1).unwrap(),
                std::fs::read(&p2).unwrap(),
                "save-load-save not byte identical for {}",
                kind.as_str()
            );
            // Evaluation through the loaded parameters matches in-memory
            // parameters row for row.
            let from_memory = harness::evaluate(&params, &env_cfg, 12, 777).unwrap();
            let from_disk = harness::evaluate(&loaded.params, &loaded.env, 12, 777).unwrap();
            assert_eq!(from_memory, from_disk);
        }
    });
}
