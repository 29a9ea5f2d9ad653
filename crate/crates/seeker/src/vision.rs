//! Depth-and-label vision: 2D ray casting across a field of view.
//!
//! The FOV is centered on the agent heading and divided into equal slices;
//! one ray per slice is cast from the slice center. Every ray reports the
//! distance to the nearest surface and a type label: 1 for the target, 0 for
//! anything else (obstacle or boundary). Rays emanate from the agent center;
//! the agent radius affects motion, not vision.

use std::f64::consts::FRAC_PI_2;

use crate::world::{Box2D, WorldState};

/// Default field of view: 90 degrees.
pub const DEFAULT_FOV: f64 = FRAC_PI_2;
/// Default number of FOV slices.
pub const DEFAULT_N_SLICES: usize = 32;

/// Object type labels carried by a hit.
pub const KIND_OTHER: u8 = 0;
pub const KIND_TARGET: u8 = 1;

/// One ray result: distance from the agent center and the object label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub kind: u8,
}

/// Per-slice hits ordered from the first slice edge of the FOV to the last
/// (increasing ray angle).
#[derive(Debug, Clone, PartialEq)]
pub struct VisionObservation {
    pub hits: Vec<RayHit>,
}

/// Slab-method ray/box intersection: smallest `t >= 0` with
/// `origin + t * direction` on the box surface. Rays starting inside the box
/// return 0. `direction` must be normalized for `t` to be a distance.
pub fn ray_box_intersect(ox: f64, oy: f64, dx: f64, dy: f64, b: &Box2D) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for (o, d, lo, hi) in [(ox, dx, b.min_x, b.max_x), (oy, dy, b.min_y, b.max_y)] {
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
        } else {
            let t1 = (lo - o) / d;
            let t2 = (hi - o) / d;
            t_near = t_near.max(t1.min(t2));
            t_far = t_far.min(t1.max(t2));
        }
    }
    if t_near > t_far || t_far < 0.0 {
        None
    } else {
        Some(t_near.max(0.0))
    }
}

/// Distance at which a ray starting inside `b` exits through its surface.
fn ray_box_exit(ox: f64, oy: f64, dx: f64, dy: f64, b: &Box2D) -> f64 {
    let mut t_far = f64::INFINITY;
    for (o, d, lo, hi) in [(ox, dx, b.min_x, b.max_x), (oy, dy, b.min_y, b.max_y)] {
        if d != 0.0 {
            let t1 = (lo - o) / d;
            let t2 = (hi - o) / d;
            t_far = t_far.min(t1.max(t2));
        }
    }
    t_far.max(0.0)
}

/// Cast one ray from the agent center at an absolute world angle.
///
/// Candidates are every obstacle box and the boundary walls (label 0) plus
/// the target box (label 1). The nearest hit wins; an exact distance tie
/// between target and anything else resolves to the target.
pub fn cast_ray(world: &WorldState, angle: f64) -> RayHit {
    let (ox, oy) = (world.agent.x, world.agent.y);
    let (dx, dy) = (angle.cos(), angle.sin());

    // Boundary closure: the ray always exits the outer rectangle somewhere.
    let mut best = RayHit {
        distance: ray_box_exit(ox, oy, dx, dy, &world.boundary),
        kind: KIND_OTHER,
    };
    for b in &world.obstacles {
        if let Some(t) = ray_box_intersect(ox, oy, dx, dy, b) {
            if t < best.distance {
                best = RayHit {
                    distance: t,
                    kind: KIND_OTHER,
                };
            }
        }
    }
    if let Some(t) = ray_box_intersect(ox, oy, dx, dy, &world.target) {
        if t <= best.distance {
            best = RayHit {
                distance: t,
                kind: KIND_TARGET,
            };
        }
    }
    best
}

/// Cast one ray per slice at the slice centers:
/// `heading - fov/2 + (i + 0.5) * fov / n_slices` for `i = 0..n_slices`.
pub fn observe(world: &WorldState, fov: f64, n_slices: usize) -> VisionObservation {
    let slice = fov / n_slices as f64;
    let start = world.agent.heading - 0.5 * fov;
    VisionObservation {
        hits: (0..n_slices)
            .map(|i| cast_ray(world, start + (i as f64 + 0.5) * slice))
            .collect(),
    }
}
