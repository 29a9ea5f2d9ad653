//! Continuous 2D scene derived from a [`GridMap`] and the agent motion model.
//!
//! One grid cell maps to a 1.0 x 1.0 world-unit box. Obstacle cells become
//! solid four-sided walls, the target cell becomes a goal box that does not
//! block movement, and the boundary is the outer rectangle. The agent is a
//! disc of radius [`DEFAULT_AGENT_RADIUS`] that turns first and then advances
//! along its new heading until it runs out of requested distance or contacts
//! a wall (stop-at-contact, no sliding).

use std::f64::consts::TAU;

use crate::error::{Result, SeekerError};
use crate::gridgen::GridMap;
use crate::rng::Rng;

/// Side length of one grid cell in world units.
pub const CELL_SIZE: f64 = 1.0;
/// Radius of the agent disc in world units.
pub const DEFAULT_AGENT_RADIUS: f64 = 0.15;

/// Axis-aligned box in world units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box2D {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Box2D {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Box2D {
        debug_assert!(min_x < max_x && min_y < max_y);
        Box2D {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    /// Unit box covering grid cell (x, y).
    pub fn unit_cell(x: usize, y: usize) -> Box2D {
        Box2D::new(
            x as f64 * CELL_SIZE,
            y as f64 * CELL_SIZE,
            (x + 1) as f64 * CELL_SIZE,
            (y + 1) as f64 * CELL_SIZE,
        )
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.min_x + self.max_x),
            0.5 * (self.min_y + self.max_y),
        )
    }

    /// Box grown by `r` on every side.
    pub fn inflate(&self, r: f64) -> Box2D {
        Box2D {
            min_x: self.min_x - r,
            min_y: self.min_y - r,
            max_x: self.max_x + r,
            max_y: self.max_y + r,
        }
    }

    /// Distance from a point to the box surface; 0 inside or on it.
    pub fn distance_to_point(&self, x: f64, y: f64) -> f64 {
        let dx = (self.min_x - x).max(0.0).max(x - self.max_x);
        let dy = (self.min_y - y).max(0.0).max(y - self.max_y);
        dx.hypot(dy)
    }

    fn scaled(&self, k: f64) -> Box2D {
        Box2D {
            min_x: self.min_x * k,
            min_y: self.min_y * k,
            max_x: self.max_x * k,
            max_y: self.max_y * k,
        }
    }
}

/// Agent position and view direction. Heading is radians in [0, 2*pi); a
/// positive turn increases the heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Full continuous scene plus per-episode motion accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub boundary: Box2D,
    pub obstacles: Vec<Box2D>,
    pub target: Box2D,
    pub agent: AgentPose,
    pub agent_radius: f64,
    pub steps_taken: usize,
    /// Cumulative distance actually traveled, in world units.
    pub path_length: f64,
}

/// Convert a grid into a continuous scene. The agent lands uniformly inside
/// its cell shrunk by the agent radius (so it never starts in contact), with
/// a uniform heading. Draw order is x, y, heading.
pub fn to_world(grid: &GridMap, rng: &mut Rng) -> Result<WorldState> {
    let (ax, ay) = grid
        .agent_cell()
        .ok_or_else(|| SeekerError::InvalidParameter("grid has no unique agent cell".into()))?;
    let (tx, ty) = grid
        .target_cell()
        .ok_or_else(|| SeekerError::InvalidParameter("grid has no unique target cell".into()))?;

    let r = DEFAULT_AGENT_RADIUS;
    let cell = Box2D::unit_cell(ax, ay);
    let x = rng.range_f64(cell.min_x + r, cell.max_x - r);
    let y = rng.range_f64(cell.min_y + r, cell.max_y - r);
    let heading = rng.range_f64(0.0, TAU);

    Ok(WorldState {
        boundary: Box2D::new(
            0.0,
            0.0,
            grid.width() as f64 * CELL_SIZE,
            grid.height() as f64 * CELL_SIZE,
        ),
        obstacles: grid
            .obstacle_cells()
            .into_iter()
            .map(|(x, y)| Box2D::unit_cell(x, y))
            .collect(),
        target: Box2D::unit_cell(tx, ty),
        agent: AgentPose { x, y, heading },
        agent_radius: r,
        steps_taken: 0,
        path_length: 0.0,
    })
}

/// Direction components at or below this magnitude count as tangent motion.
/// Headings like pi/2 leave cos() at ~1e-16 instead of zero; without the
/// cutoff an agent in contact with a face could never move along it. The
/// worst-case penetration this admits over a map-sized advance is ~1e-11,
/// inside the 1e-9 clearance slack.
const DIR_EPS: f64 = 1e-12;

/// Entry distance of a ray into a box, treating the box as an open region:
/// grazing along a face does not count as penetration. Returns the largest
/// advance before penetration would begin, or None when the ray never enters.
fn penetration_entry(ox: f64, oy: f64, dx: f64, dy: f64, b: &Box2D) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for (o, d, lo, hi) in [(ox, dx, b.min_x, b.max_x), (oy, dy, b.min_y, b.max_y)] {
        if d.abs() <= DIR_EPS {
            if o <= lo || o >= hi {
                return None;
            }
        } else {
            let t1 = (lo - o) / d;
            let t2 = (hi - o) / d;
            t_near = t_near.max(t1.min(t2));
            t_far = t_far.min(t1.max(t2));
        }
    }
    if t_near < t_far && t_far > 0.0 {
        Some(t_near.max(0.0))
    } else {
        None
    }
}

impl WorldState {
    /// Largest advance from the agent center along (dx, dy) that keeps the
    /// center at least `agent_radius` away from every obstacle and wall.
    fn free_distance(&self, dx: f64, dy: f64) -> f64 {
        let (ox, oy) = (self.agent.x, self.agent.y);
        let r = self.agent_radius;
        let mut free = f64::INFINITY;

        // The center must stay inside the boundary shrunk by r.
        if dx > DIR_EPS {
            free = free.min(((self.boundary.max_x - r) - ox) / dx);
        } else if dx < -DIR_EPS {
            free = free.min(((self.boundary.min_x + r) - ox) / dx);
        }
        if dy > DIR_EPS {
            free = free.min(((self.boundary.max_y - r) - oy) / dy);
        } else if dy < -DIR_EPS {
            free = free.min(((self.boundary.min_y + r) - oy) / dy);
        }

        // ... and outside every obstacle box inflated by r.
        for b in &self.obstacles {
            if let Some(t) = penetration_entry(ox, oy, dx, dy, &b.inflate(r)) {
                free = free.min(t);
            }
        }
        free.max(0.0)
    }

    /// Turn by `dtheta`, then advance along the new heading by
    /// `min(distance, free_distance)`. Blocked movement yields a partial or
    /// zero advance, never an error. Requires `distance >= 0`.
    pub fn move_agent(&mut self, distance: f64, dtheta: f64) {
        assert!(distance >= 0.0, "reverse movement is disallowed");
        self.agent.heading = (self.agent.heading + dtheta).rem_euclid(TAU);
        let (dx, dy) = (self.agent.heading.cos(), self.agent.heading.sin());
        let advance = distance.min(self.free_distance(dx, dy));
        self.agent.x += advance * dx;
        self.agent.y += advance * dy;
        self.path_length += advance;
        self.steps_taken += 1;
    }

    /// Euclidean distance from the agent center to the target box center.
    pub fn distance_to_target(&self) -> f64 {
        let (tx, ty) = self.target.center();
        (self.agent.x - tx).hypot(self.agent.y - ty)
    }

    /// (obstacle clearance, boundary clearance): minimum distance from the
    /// agent center to any obstacle surface and to the nearest wall. With no
    /// obstacles the obstacle clearance is the map diagonal sentinel.
    pub fn clearance(&self) -> (f64, f64) {
        let obstacle = self
            .obstacles
            .iter()
            .map(|b| b.distance_to_point(self.agent.x, self.agent.y))
            .fold(self.diagonal(), f64::min);
        let boundary = (self.agent.x - self.boundary.min_x)
            .min(self.boundary.max_x - self.agent.x)
            .min(self.agent.y - self.boundary.min_y)
            .min(self.boundary.max_y - self.agent.y);
        (obstacle, boundary)
    }

    /// True iff the agent center is strictly closer than `threshold` to the
    /// target center.
    pub fn target_reached(&self, threshold: f64) -> bool {
        self.distance_to_target() < threshold
    }

    /// Length of the boundary diagonal; the upper bound on any distance in
    /// the scene and the sentinel for "nothing there".
    pub fn diagonal(&self) -> f64 {
        self.boundary.width().hypot(self.boundary.height())
    }

    /// Uniformly scale all geometry (including the agent radius) by `k`.
    pub fn scaled(&self, k: f64) -> WorldState {
        WorldState {
            boundary: self.boundary.scaled(k),
            obstacles: self.obstacles.iter().map(|b| b.scaled(k)).collect(),
            target: self.target.scaled(k),
            agent: AgentPose {
                x: self.agent.x * k,
                y: self.agent.y * k,
                heading: self.agent.heading,
            },
            agent_radius: self.agent_radius * k,
            steps_taken: self.steps_taken,
            path_length: self.path_length * k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridgen::{self, ParseStrictness};

    fn open_world(w: usize, h: usize, agent: AgentPose) -> WorldState {
        WorldState {
            boundary: Box2D::new(0.0, 0.0, w as f64, h as f64),
            obstacles: vec![],
            target: Box2D::unit_cell(w - 1, h - 1),
            agent,
            agent_radius: DEFAULT_AGENT_RADIUS,
            steps_taken: 0,
            path_length: 0.0,
        }
    }

    #[test]
    fn agent_spawns_inside_shrunk_cell() {
        let text = "-------\n\
                    |     |\n\
                    |     |\n\
                    |    !|\n\
                    | @   |\n\
                    |     |\n\
                    -------";
        let grid = gridgen::parse_ascii_with(text, ParseStrictness::Lenient).unwrap();
        let r = DEFAULT_AGENT_RADIUS;
        for seed in 0..200 {
            let w = to_world(&grid, &mut Rng::new(seed)).unwrap();
            assert!(w.agent.x > 1.0 + r && w.agent.x < 2.0 - r);
            assert!(w.agent.y > 3.0 + r && w.agent.y < 4.0 - r);
            assert!((0.0..TAU).contains(&w.agent.heading));
            assert_eq!(w.steps_taken, 0);
            assert_eq!(w.path_length, 0.0);
        }
    }

    #[test]
    fn conversion_matches_known_scene() {
        let text = "-------\n\
                    | !   |\n\
                    |     |\n\
                    |  #  |\n\
                    |     |\n\
                    |  @  |\n\
                    -------";
        let grid = gridgen::parse_ascii_with(text, ParseStrictness::Lenient).unwrap();
        let w = to_world(&grid, &mut Rng::new(0)).unwrap();
        assert_eq!(w.boundary, Box2D::new(0.0, 0.0, 5.0, 5.0));
        assert_eq!(w.obstacles, vec![Box2D::new(2.0, 2.0, 3.0, 3.0)]);
        assert_eq!(w.target, Box2D::new(1.0, 0.0, 2.0, 1.0));
    }

    #[test]
    fn conversion_is_deterministic() {
        let grid = gridgen::generate_gridworld(6, 5, 4, &mut Rng::new(8)).unwrap();
        let a = to_world(&grid, &mut Rng::new(123)).unwrap();
        let b = to_world(&grid, &mut Rng::new(123)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn free_motion_along_x() {
        let mut w = open_world(
            6,
            5,
            AgentPose {
                x: 2.0,
                y: 2.0,
                heading: 0.0,
            },
        );
        w.move_agent(0.5, 0.0);
        assert!((w.agent.x - 2.5).abs() < 1e-12);
        assert!((w.agent.y - 2.0).abs() < 1e-12);
        assert!((w.path_length - 0.5).abs() < 1e-12);
        assert_eq!(w.steps_taken, 1);
    }

    #[test]
    fn head_on_wall_stops_at_contact() {
        // Obstacle face at x = 3; agent 0.3 away, so free advance is 0.15.
        let mut w = open_world(
            8,
            5,
            AgentPose {
                x: 2.7,
                y: 2.5,
                heading: 0.0,
            },
        );
        w.obstacles.push(Box2D::new(3.0, 2.0, 4.0, 3.0));
        w.move_agent(1.0, 0.0);
        assert!((w.agent.x - 2.85).abs() < 1e-12);
        assert!((w.path_length - 0.15).abs() < 1e-12);
        let (obstacle, _) = w.clearance();
        assert!((obstacle - DEFAULT_AGENT_RADIUS).abs() < 1e-12);
    }

    #[test]
    fn boundary_stops_at_contact() {
        let mut w = open_world(
            4,
            4,
            AgentPose {
                x: 3.5,
                y: 2.0,
                heading: 0.0,
            },
        );
        w.move_agent(2.0, 0.0);
        assert!((w.agent.x - (4.0 - DEFAULT_AGENT_RADIUS)).abs() < 1e-12);
    }

    #[test]
    fn blocked_agent_can_turn_away_and_leave() {
        let mut w = open_world(
            8,
            5,
            AgentPose {
                x: 3.0 - DEFAULT_AGENT_RADIUS,
                y: 2.5,
                heading: 0.0,
            },
        );
        w.obstacles.push(Box2D::new(3.0, 2.0, 4.0, 3.0));
        w.move_agent(0.5, 0.0);
        assert!((w.path_length - 0.0).abs() < 1e-12);
        w.move_agent(0.5, std::f64::consts::PI);
        assert!((w.path_length - 0.5).abs() < 1e-12);
        assert!(w.agent.x < 2.5);
    }

    #[test]
    fn grazing_motion_along_contact_face_is_free() {
        // Agent in contact with the face at x = 3, moving straight along +y.
        let mut w = open_world(
            8,
            6,
            AgentPose {
                x: 3.0 - DEFAULT_AGENT_RADIUS,
                y: 2.5,
                heading: std::f64::consts::FRAC_PI_2,
            },
        );
        w.obstacles.push(Box2D::new(3.0, 2.0, 4.0, 3.0));
        w.move_agent(1.0, 0.0);
        assert!((w.path_length - 1.0).abs() < 1e-12);
        let (obstacle, _) = w.clearance();
        assert!(obstacle >= DEFAULT_AGENT_RADIUS - 1e-9);
    }

    #[test]
    fn turn_applies_before_translation() {
        let mut w = open_world(
            6,
            6,
            AgentPose {
                x: 3.0,
                y: 3.0,
                heading: 0.0,
            },
        );
        w.move_agent(1.0, std::f64::consts::FRAC_PI_2);
        assert!((w.agent.x - 3.0).abs() < 1e-12);
        assert!((w.agent.y - 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_distance_changes_only_heading_and_steps() {
        let mut w = open_world(
            6,
            5,
            AgentPose {
                x: 2.0,
                y: 2.0,
                heading: 1.0,
            },
        );
        w.move_agent(0.0, 0.25);
        assert!((w.agent.x - 2.0).abs() < 1e-15);
        assert!((w.agent.y - 2.0).abs() < 1e-15);
        assert!((w.agent.heading - 1.25).abs() < 1e-12);
        assert_eq!(w.steps_taken, 1);
        assert_eq!(w.path_length, 0.0);
    }

    #[test]
    fn swept_segment_keeps_clearance() {
        // Sample 1000 points along each actual displacement and check the
        // distance to every box and wall directly (point-to-segment algebra
        // is recomputed here, independent of the motion code).
        fn point_segment_distance(px: f64, py: f64, ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
            let (vx, vy) = (bx - ax, by - ay);
            let len2 = vx * vx + vy * vy;
            let t = if len2 == 0.0 {
                0.0
            } else {
                (((px - ax) * vx + (py - ay) * vy) / len2).clamp(0.0, 1.0)
            };
            (px - (ax + t * vx)).hypot(py - (ay + t * vy))
        }
        fn box_distance(px: f64, py: f64, b: &Box2D) -> f64 {
            [
                (b.min_x, b.min_y, b.max_x, b.min_y),
                (b.max_x, b.min_y, b.max_x, b.max_y),
                (b.max_x, b.max_y, b.min_x, b.max_y),
                (b.min_x, b.max_y, b.min_x, b.min_y),
            ]
            .iter()
            .map(|&(ax, ay, bx, by)| point_segment_distance(px, py, ax, ay, bx, by))
            .fold(f64::INFINITY, f64::min)
        }

        let mut rng = Rng::new(2024);
        for _ in 0..40 {
            let grid = gridgen::generate_solvable(6, 5, 6, &mut rng, 100).unwrap();
            let mut w = to_world(&grid, &mut rng).unwrap();
            for _ in 0..25 {
                let (x0, y0) = (w.agent.x, w.agent.y);
                w.move_agent(rng.range_f64(0.0, 1.0), rng.range_f64(-1.0, 1.0));
                let (x1, y1) = (w.agent.x, w.agent.y);
                for i in 0..=1000 {
                    let t = i as f64 / 1000.0;
                    let (px, py) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
                    for b in &w.obstacles {
                        assert!(
                            box_distance(px, py, b) >= w.agent_radius - 1e-9,
                            "obstacle penetration at ({px}, {py})"
                        );
                    }
                    let wall = px
                        .min(w.boundary.max_x - px)
                        .min(py)
                        .min(w.boundary.max_y - py);
                    assert!(wall >= w.agent_radius - 1e-9, "wall penetration");
                }
            }
        }
    }

    #[test]
    fn path_length_sums_displacements() {
        let mut rng = Rng::new(7);
        let grid = gridgen::generate_solvable(6, 5, 5, &mut rng, 100).unwrap();
        let mut w = to_world(&grid, &mut rng).unwrap();
        let mut total = 0.0;
        for _ in 0..200 {
            let (x0, y0) = (w.agent.x, w.agent.y);
            let before = w.path_length;
            w.move_agent(rng.range_f64(0.0, 0.8), rng.range_f64(-1.0, 1.0));
            let step = (w.agent.x - x0).hypot(w.agent.y - y0);
            assert!(w.path_length >= before);
            total += step;
            assert!((w.path_length - total).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_to_target_basics() {
        let mut w = open_world(
            6,
            6,
            AgentPose {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
            },
        );
        w.target = Box2D::new(3.0, 4.0, 4.0, 5.0);
        let (tx, ty) = w.target.center();
        w.agent.x = tx;
        w.agent.y = ty;
        assert_eq!(w.distance_to_target(), 0.0);
        w.agent.x = 0.5;
        w.agent.y = 0.5;
        assert!((w.distance_to_target() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn distance_matches_hypot_oracle() {
        let mut rng = Rng::new(31);
        let grid = gridgen::generate_solvable(10, 8, 4, &mut rng, 100).unwrap();
        let mut w = to_world(&grid, &mut rng).unwrap();
        let (tx, ty) = w.target.center();
        for _ in 0..1000 {
            w.agent.x = rng.range_f64(0.0, 10.0);
            w.agent.y = rng.range_f64(0.0, 8.0);
            let oracle = ((w.agent.x - tx).powi(2) + (w.agent.y - ty).powi(2)).sqrt();
            assert!((w.distance_to_target() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn clearance_sentinel_and_centered_agent() {
        let w = open_world(
            4,
            4,
            AgentPose {
                x: 2.0,
                y: 2.0,
                heading: 0.0,
            },
        );
        let (obstacle, boundary) = w.clearance();
        assert_eq!(obstacle, 32.0_f64.sqrt());
        assert!((boundary - 2.0).abs() < 1e-12);
    }

    #[test]
    fn target_reached_strict_inequality() {
        let mut w = open_world(
            6,
            6,
            AgentPose {
                x: 0.0,
                y: 0.0,
                heading: 0.0,
            },
        );
        let (tx, ty) = w.target.center();
        w.agent.x = tx - 0.49;
        w.agent.y = ty;
        assert!(w.target_reached(0.5));
        w.agent.x = tx - 0.5;
        assert!(!w.target_reached(0.5));
    }

    #[test]
    fn geometry_scales_linearly() {
        let mut rng = Rng::new(77);
        let grid = gridgen::generate_solvable(6, 5, 5, &mut rng, 100).unwrap();
        let w = to_world(&grid, &mut rng).unwrap();
        let k = 2.0;
        let mut small = w.clone();
        let mut big = w.scaled(k);
        assert!((big.distance_to_target() - k * small.distance_to_target()).abs() < 1e-9);
        let (so, sb) = small.clearance();
        let (bo, bb) = big.clearance();
        assert!((bo - k * so).abs() < 1e-9);
        assert!((bb - k * sb).abs() < 1e-9);
        for i in 0..50 {
            let d = 0.1 + 0.02 * i as f64;
            let turn = (i as f64 * 0.37).sin();
            small.move_agent(d, turn);
            big.move_agent(k * d, turn);
            assert!((big.agent.x - k * small.agent.x).abs() < 1e-9);
            assert!((big.agent.y - k * small.agent.y).abs() < 1e-9);
            assert!((big.path_length - k * small.path_length).abs() < 1e-9);
        }
    }
}
