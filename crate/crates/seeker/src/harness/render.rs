//! Static SVG rendering: the scene (green target box, black obstacle boxes,
//! blue agent disc with a heading tick) and the slice depth plot (green
//! points for target hits, red for everything else, height = distance).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::vision::{VisionObservation, KIND_TARGET};
use crate::world::WorldState;

const SCALE: f64 = 60.0;
const MARGIN: f64 = 20.0;

fn px(v: f64) -> String {
    format!("{:.2}", MARGIN + v * SCALE)
}

/// Draw the world (and optionally a trajectory polyline) as an SVG file.
pub fn render_scene(
    world: &WorldState,
    trajectory: Option<&[(f64, f64)]>,
    path: &Path,
) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let w = world.boundary.width() * SCALE + 2.0 * MARGIN;
    let h = world.boundary.height() * SCALE + 2.0 * MARGIN;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    )?;
    writeln!(
        out,
        r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#
    )?;
    writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{:.2}" height="{:.2}" fill="none" stroke="black" stroke-width="2"/>"#,
        px(world.boundary.min_x),
        px(world.boundary.min_y),
        world.boundary.width() * SCALE,
        world.boundary.height() * SCALE
    )?;
    writeln!(
        out,
        r#"<rect x="{}" y="{}" width="{:.2}" height="{:.2}" fill="green"/>"#,
        px(world.target.min_x),
        px(world.target.min_y),
        world.target.width() * SCALE,
        world.target.height() * SCALE
    )?;
    for b in &world.obstacles {
        writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{:.2}" height="{:.2}" fill="black"/>"#,
            px(b.min_x),
            px(b.min_y),
            b.width() * SCALE,
            b.height() * SCALE
        )?;
    }
    if let Some(points) = trajectory {
        if points.len() > 1 {
            let coords: Vec<String> = points
                .iter()
                .map(|(x, y)| format!("{},{}", px(*x), px(*y)))
                .collect();
            writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="orange" stroke-width="1.5"/>"#,
                coords.join(" ")
            )?;
        }
    }
    let (ax, ay) = (world.agent.x, world.agent.y);
    writeln!(
        out,
        r#"<circle cx="{}" cy="{}" r="{:.2}" fill="blue"/>"#,
        px(ax),
        px(ay),
        world.agent_radius * SCALE
    )?;
    // Heading tick: a short black line out of the disc.
    let tick = 2.5 * world.agent_radius;
    writeln!(
        out,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="2"/>"#,
        px(ax),
        px(ay),
        px(ax + tick * world.agent.heading.cos()),
        px(ay + tick * world.agent.heading.sin())
    )?;
    writeln!(out, "</svg>")?;
    out.flush()?;
    Ok(())
}

/// Draw one observation as a depth plot: x is the slice index, y the hit
/// distance, color the hit kind.
pub fn render_depth_plot(observation: &VisionObservation, path: &Path) -> Result<()> {
    let n = observation.hits.len().max(1);
    let max_d = observation
        .hits
        .iter()
        .map(|h| h.distance)
        .fold(1e-9, f64::max);
    let plot_w = 400.0;
    let plot_h = 240.0;
    let w = plot_w + 2.0 * MARGIN;
    let h = plot_h + 2.0 * MARGIN;
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
    )?;
    writeln!(
        out,
        r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#
    )?;
    // Axes.
    writeln!(
        out,
        r#"<line x1="{m:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1"/>"#,
        MARGIN + plot_h,
        MARGIN + plot_w,
        MARGIN + plot_h,
        m = MARGIN
    )?;
    writeln!(
        out,
        r#"<line x1="{m:.2}" y1="{m:.2}" x2="{m:.2}" y2="{:.2}" stroke="black" stroke-width="1"/>"#,
        MARGIN + plot_h,
        m = MARGIN
    )?;
    for (i, hit) in observation.hits.iter().enumerate() {
        let cx = MARGIN + (i as f64 + 0.5) / n as f64 * plot_w;
        let cy = MARGIN + plot_h - (hit.distance / max_d) * plot_h;
        let color = if hit.kind == KIND_TARGET {
            "green"
        } else {
            "red"
        };
        writeln!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{color}"/>"#
        )?;
    }
    writeln!(out, "</svg>")?;
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridgen::{self, ParseStrictness};
    use crate::rng::Rng;
    use crate::vision::{self, DEFAULT_FOV};
    use crate::world::to_world;

    fn sample_world() -> WorldState {
        let text = "-------\n\
                    | !   |\n\
                    |     |\n\
                    |  #  |\n\
                    |     |\n\
                    |  @  |\n\
                    -------";
        let grid = gridgen::parse_ascii_with(text, ParseStrictness::Lenient).unwrap();
        to_world(&grid, &mut Rng::new(3)).unwrap()
    }

    /// Minimal XML well-formedness walk: every opened tag closes, attributes
    /// are quoted, exactly one root element.
    fn assert_well_formed(text: &str) {
        let mut depth = 0usize;
        let mut roots = 0usize;
        let mut rest = text.trim();
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed tag") + start;
            let tag = &rest[start + 1..end];
            assert!(!tag.is_empty());
            assert_eq!(
                tag.matches('"').count() % 2,
                0,
                "unbalanced quotes in {tag}"
            );
            if tag.starts_with('/') {
                depth = depth.checked_sub(1).expect("closing tag without opener");
            } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
                if depth == 0 {
                    roots += 1;
                }
                depth += 1;
            } else if tag.ends_with('/') && depth == 0 {
                roots += 1;
            }
            rest = &rest[end + 1..];
        }
        assert_eq!(depth, 0, "unclosed elements remain");
        assert_eq!(roots, 1, "expected exactly one root element");
    }

    #[test]
    fn scene_is_well_formed_with_one_black_rect_per_obstacle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.svg");
        let world = sample_world();
        render_scene(&world, Some(&[(2.5, 4.5), (2.5, 3.0), (1.2, 2.0)]), &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_well_formed(&text);
        assert_eq!(
            text.matches(r#"fill="black""#).count(),
            world.obstacles.len()
        );
        assert_eq!(text.matches(r#"fill="green""#).count(), 1);
        assert_eq!(text.matches(r#"fill="blue""#).count(), 1);
        assert!(text.contains("polyline"));
    }

    #[test]
    fn depth_plot_of_walls_has_no_green() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("depth.svg");
        let mut world = sample_world();
        // Face the empty lower-left corner: no target in the FOV.
        world.agent.x = 2.5;
        world.agent.y = 4.5;
        world.agent.heading = std::f64::consts::FRAC_PI_2;
        let obs = vision::observe(&world, DEFAULT_FOV, 32);
        assert!(obs.hits.iter().all(|h| h.kind != KIND_TARGET));
        render_depth_plot(&obs, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_well_formed(&text);
        assert_eq!(text.matches(r#"fill="green""#).count(), 0);
        assert_eq!(text.matches(r#"fill="red""#).count(), 32);
    }
}
