//! Independent oracles shared by the integration test suites. Everything in
//! here deliberately re-derives results through a different route than the
//! library code it checks.

#![allow(dead_code)]

use seeker::gridgen::{CellKind, GridMap};
use seeker::neural::{self, ArchDescriptor, QNetParams, Tensor2};
use seeker::rng::Rng;
use seeker::world::WorldState;

/// Depth-first flood fill from the agent cell over empty cells; reachable
/// means some visited cell (including the agent's own) has the target as a
/// 4-neighbor. Recursion-free stack walk, independent of the BFS under test.
pub fn flood_fill_reachable(grid: &GridMap) -> bool {
    let (ax, ay) = match grid.agent_cell() {
        Some(p) => p,
        None => return false,
    };
    let (w, h) = (grid.width(), grid.height());
    let mut seen = vec![false; w * h];
    let mut stack = vec![(ax, ay)];
    seen[ay * w + ax] = true;
    while let Some((x, y)) = stack.pop() {
        let mut neighbors = Vec::with_capacity(4);
        if x > 0 {
            neighbors.push((x - 1, y));
        }
        if x + 1 < w {
            neighbors.push((x + 1, y));
        }
        if y > 0 {
            neighbors.push((x, y - 1));
        }
        if y + 1 < h {
            neighbors.push((x, y + 1));
        }
        for (nx, ny) in neighbors {
            match grid.get(nx, ny) {
                CellKind::Target => return true,
                CellKind::Empty if !seen[ny * w + nx] => {
                    seen[ny * w + nx] = true;
                    stack.push((nx, ny));
                }
                _ => {}
            }
        }
    }
    false
}

/// Fine-step ray march through a world: walk `step` at a time from the agent
/// center until the point first leaves the boundary or lands inside an
/// obstacle or the target box. Returns (distance, kind) with kind 1 for the
/// target. Checks the target first so exact coincidences agree with the
/// library's target-optimistic tie-break.
pub fn ray_march(world: &WorldState, angle: f64, step: f64) -> (f64, u8) {
    let (dx, dy) = (angle.cos(), angle.sin());
    let inside = |b: &seeker::world::Box2D, x: f64, y: f64| {
        x >= b.min_x && x <= b.max_x && y >= b.min_y && y <= b.max_y
    };
    let mut t = 0.0;
    let limit = world.diagonal() + 1.0;
    while t <= limit {
        let (px, py) = (world.agent.x + t * dx, world.agent.y + t * dy);
        if inside(&world.target, px, py) {
            return (t, 1);
        }
        if world.obstacles.iter().any(|b| inside(b, px, py)) {
            return (t, 0);
        }
        if px < world.boundary.min_x
            || px > world.boundary.max_x
            || py < world.boundary.min_y
            || py > world.boundary.max_y
        {
            return (t, 0);
        }
        t += step;
    }
    (limit, 0)
}

/// Scalar loss for the gradient checks: 0.5 * sum of squared differences
/// between every Q output and a fixed random target, across all steps.
fn seq_loss(params: &QNetParams, xs: &[Tensor2], targets: &[Tensor2]) -> f64 {
    let (qs, _, _) = neural::forward_seq(params, xs, None).unwrap();
    qs.iter()
        .zip(targets)
        .map(|(q, y)| {
            q.values()
                .iter()
                .zip(y.values())
                .map(|(a, b)| 0.5 * (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

/// Compare analytic gradients against central finite differences for every
/// parameter of a small network. Returns the worst relative error.
#[allow(clippy::needless_range_loop)]
pub fn finite_difference_check(
    arch: ArchDescriptor,
    seed: u64,
    seq_len: usize,
    batch: usize,
) -> f64 {
    let mut rng = Rng::new(seed);
    let mut params = neural::init_params(arch, &mut rng);
    let xs: Vec<Tensor2> = (0..seq_len)
        .map(|_| {
            Tensor2::from_vec(
                batch,
                arch.input_dim,
                (0..batch * arch.input_dim)
                    .map(|_| rng.range_f64(-1.0, 1.0))
                    .collect(),
            )
        })
        .collect();
    let targets: Vec<Tensor2> = (0..seq_len)
        .map(|_| {
            Tensor2::from_vec(
                batch,
                arch.n_actions,
                (0..batch * arch.n_actions)
                    .map(|_| rng.range_f64(-1.0, 1.0))
                    .collect(),
            )
        })
        .collect();

    let (qs, trace, _) = neural::forward_seq(&params, &xs, None).unwrap();
    let dqs: Vec<Tensor2> = qs
        .iter()
        .zip(&targets)
        .map(|(q, y)| q.zip_map(y, |a, b| a - b))
        .collect();
    let grads = neural::backward(&params, &trace, &dqs);
    let analytic: Vec<Vec<f64>> = grads
        .named_tensors()
        .iter()
        .map(|(_, t)| t.values().to_vec())
        .collect();

    let eps = 1e-5;
    let mut worst = 0.0_f64;
    let n_tensors = analytic.len();
    for ti in 0..n_tensors {
        for i in 0..analytic[ti].len() {
            let original = {
                let t = &mut params.tensors_mut()[ti];
                let v = t.values()[i];
                t.values_mut()[i] = v + eps;
                v
            };
            let plus = seq_loss(&params, &xs, &targets);
            params.tensors_mut()[ti].values_mut()[i] = original - eps;
            let minus = seq_loss(&params, &xs, &targets);
            params.tensors_mut()[ti].values_mut()[i] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let g = analytic[ti][i];
            let denom = g.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((g - numeric).abs() / denom);
        }
    }
    worst
}
