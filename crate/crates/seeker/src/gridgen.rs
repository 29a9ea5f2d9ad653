//! Random gridworld generation, goal reachability, and the ASCII map format.
//!
//! A map is a `height x width` matrix of cells. Generation places obstacles
//! first, then the target, then the agent, each into a uniformly drawn empty
//! cell, so a seeded run reproduces the exact same map. Reachability is a
//! breadth-first search over empty cells in the four cardinal directions that
//! succeeds as soon as the target shows up as a neighbor.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Result, SeekerError};
use crate::rng::Rng;

/// Contents of one grid cell. Numeric codes are part of the map contract:
/// obstacle = 1, target = 2, agent = 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CellKind {
    Empty = 0,
    Obstacle = 1,
    Target = 2,
    Agent = 3,
}

impl CellKind {
    pub fn glyph(self) -> char {
        match self {
            CellKind::Empty => ' ',
            CellKind::Obstacle => '#',
            CellKind::Target => '!',
            CellKind::Agent => '@',
        }
    }

    pub fn from_glyph(c: char) -> Option<CellKind> {
        match c {
            ' ' => Some(CellKind::Empty),
            '#' => Some(CellKind::Obstacle),
            '!' => Some(CellKind::Target),
            '@' => Some(CellKind::Agent),
            _ => None,
        }
    }
}

/// Discrete `width x height` cell matrix holding exactly one agent, exactly
/// one target, and any number of obstacles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<CellKind>,
}

impl GridMap {
    /// All-empty grid. Both dimensions must be at least 2 so an agent and a
    /// target fit.
    pub fn empty(width: usize, height: usize) -> Result<GridMap> {
        if width < 2 || height < 2 {
            return Err(SeekerError::InvalidParameter(format!(
                "grid must be at least 2x2, got {width}x{height}"
            )));
        }
        Ok(GridMap {
            width,
            height,
            cells: vec![CellKind::Empty; width * height],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> CellKind {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, kind: CellKind) {
        self.cells[y * self.width + x] = kind;
    }

    /// Position of the unique agent cell.
    pub fn agent_cell(&self) -> Option<(usize, usize)> {
        self.find_unique(CellKind::Agent)
    }

    /// Position of the unique target cell.
    pub fn target_cell(&self) -> Option<(usize, usize)> {
        self.find_unique(CellKind::Target)
    }

    fn find_unique(&self, kind: CellKind) -> Option<(usize, usize)> {
        let mut found = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) == kind {
                    if found.is_some() {
                        return None;
                    }
                    found = Some((x, y));
                }
            }
        }
        found
    }

    pub fn count(&self, kind: CellKind) -> usize {
        self.cells.iter().filter(|&&c| c == kind).count()
    }

    /// Cells of each kind as (empty, obstacle, target, agent).
    pub fn census(&self) -> (usize, usize, usize, usize) {
        let mut n = [0usize; 4];
        for &c in &self.cells {
            n[c as usize] += 1;
        }
        (n[0], n[1], n[2], n[3])
    }

    /// Positions of all obstacle cells, row-major order.
    pub fn obstacle_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) == CellKind::Obstacle {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_ascii(self))
    }
}

/// Draw a uniformly random empty cell by rejection sampling: draw x, then y,
/// and redraw the pair until the cell is empty.
///
/// Errors with [`SeekerError::NoEmptyCell`] instead of looping forever when
/// the grid is full.
pub fn get_empty_cell(grid: &GridMap, rng: &mut Rng) -> Result<(usize, usize)> {
    if grid.count(CellKind::Empty) == 0 {
        return Err(SeekerError::NoEmptyCell);
    }
    loop {
        let x = rng.below(grid.width() as u64) as usize;
        let y = rng.below(grid.height() as u64) as usize;
        if grid.get(x, y) == CellKind::Empty {
            return Ok((x, y));
        }
    }
}

/// Generate a random `w x h` map with `o` obstacles, one target, and one
/// agent, placed in that order into empty cells.
///
/// Requires `o <= w*h - 2` so the target and agent always fit.
pub fn generate_gridworld(w: usize, h: usize, o: usize, rng: &mut Rng) -> Result<GridMap> {
    if w < 2 || h < 2 {
        return Err(SeekerError::InvalidParameter(format!(
            "grid must be at least 2x2, got {w}x{h}"
        )));
    }
    if o > w * h - 2 {
        return Err(SeekerError::InvalidParameter(format!(
            "{o} obstacles do not fit in a {w}x{h} grid (max {})",
            w * h - 2
        )));
    }
    let mut grid = GridMap::empty(w, h)?;
    for _ in 0..o {
        let (x, y) = get_empty_cell(&grid, rng)?;
        grid.set(x, y, CellKind::Obstacle);
    }
    let (x, y) = get_empty_cell(&grid, rng)?;
    grid.set(x, y, CellKind::Target);
    let (x, y) = get_empty_cell(&grid, rng)?;
    grid.set(x, y, CellKind::Agent);
    Ok(grid)
}

/// Moves in (dx, dy): left, up, right, down. Diagonals never count.
const MOVES: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// Breadth-first search from the agent cell over empty cells; true as soon as
/// the target appears as a 4-neighbor of a visited cell.
///
/// Works on a private copy of the matrix, so the caller's map is untouched.
pub fn check_reachability(grid: &GridMap) -> bool {
    let (ax, ay) = match grid.agent_cell() {
        Some(p) => p,
        None => return false,
    };
    let mut cells = grid.clone();
    let mut frontier = VecDeque::new();
    frontier.push_back((ax as i64, ay as i64));
    while let Some((cx, cy)) = frontier.pop_front() {
        for (dx, dy) in MOVES {
            let (nx, ny) = (cx + dx, cy + dy);
            if nx < 0 || ny < 0 || nx >= grid.width() as i64 || ny >= grid.height() as i64 {
                continue;
            }
            match cells.get(nx as usize, ny as usize) {
                CellKind::Target => return true,
                CellKind::Empty => {
                    // Mark visited so the cell is expanded once.
                    cells.set(nx as usize, ny as usize, CellKind::Obstacle);
                    frontier.push_back((nx, ny));
                }
                _ => {}
            }
        }
    }
    false
}

/// Regenerate maps until one passes [`check_reachability`], up to
/// `max_attempts` full regenerations.
pub fn generate_solvable(
    w: usize,
    h: usize,
    o: usize,
    rng: &mut Rng,
    max_attempts: usize,
) -> Result<GridMap> {
    if max_attempts == 0 {
        return Err(SeekerError::InvalidParameter(
            "max_attempts must be at least 1".into(),
        ));
    }
    for _ in 0..max_attempts {
        let grid = generate_gridworld(w, h, o, rng)?;
        if check_reachability(&grid) {
            return Ok(grid);
        }
    }
    Err(SeekerError::GenerationFailure {
        attempts: max_attempts,
    })
}

/// Render the map in the bordered ASCII format: `-` top/bottom edges, `|`
/// side edges, and cell glyphs ` `, `#`, `@`, `!`.
pub fn render_ascii(grid: &GridMap) -> String {
    let mut out = String::with_capacity((grid.width() + 3) * (grid.height() + 2));
    let border: String = "-".repeat(grid.width() + 2);
    out.push_str(&border);
    out.push('\n');
    for y in 0..grid.height() {
        out.push('|');
        for x in 0..grid.width() {
            out.push(grid.get(x, y).glyph());
        }
        out.push_str("|\n");
    }
    out.push_str(&border);
    out
}

/// How forgiving the ASCII parser is about whitespace after the right border.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseStrictness {
    /// Trailing characters after the border are an error.
    Strict,
    /// Trailing spaces/tabs after the border are dropped (pasted maps often
    /// carry them).
    Lenient,
}

/// Strict-mode [`parse_ascii_with`].
pub fn parse_ascii(text: &str) -> Result<GridMap> {
    parse_ascii_with(text, ParseStrictness::Strict)
}

/// Parse the bordered ASCII format back into a [`GridMap`].
///
/// The inverse of [`render_ascii`]: `parse_ascii(render_ascii(g)) == g`.
/// Errors carry the 1-based line and column of the offending character.
pub fn parse_ascii_with(text: &str, strictness: ParseStrictness) -> Result<GridMap> {
    let err = |line: usize, col: usize, msg: &str| SeekerError::MapParse {
        line,
        col,
        msg: msg.to_string(),
    };
    let lines: Vec<&str> = text
        .lines()
        .map(|l| match strictness {
            ParseStrictness::Strict => l,
            ParseStrictness::Lenient => l.trim_end(),
        })
        .collect();
    if lines.len() < 4 {
        return Err(err(1, 1, "map needs a border and at least 2 rows"));
    }
    let total = lines[0].chars().count();
    if total < 4 || !lines[0].chars().all(|c| c == '-') {
        return Err(err(1, 1, "top border must be dashes spanning width + 2"));
    }
    let width = total - 2;
    let height = lines.len() - 2;
    let last = lines.len() - 1;
    if lines[last].chars().count() != total || !lines[last].chars().all(|c| c == '-') {
        return Err(err(last + 1, 1, "bottom border must match the top border"));
    }

    let mut grid = GridMap::empty(width, height)?;
    let mut agents = 0usize;
    let mut targets = 0usize;
    for (y, line) in lines[1..last].iter().enumerate() {
        let row: Vec<char> = line.chars().collect();
        if row.len() != total {
            return Err(err(
                y + 2,
                row.len().max(1),
                "row width differs from border",
            ));
        }
        if row[0] != '|' {
            return Err(err(y + 2, 1, "row must start with '|'"));
        }
        if row[total - 1] != '|' {
            return Err(err(y + 2, total, "row must end with '|'"));
        }
        for (x, &c) in row[1..total - 1].iter().enumerate() {
            let kind = CellKind::from_glyph(c)
                .ok_or_else(|| err(y + 2, x + 2, "cell must be one of ' ', '#', '@', '!'"))?;
            match kind {
                CellKind::Agent => agents += 1,
                CellKind::Target => targets += 1,
                _ => {}
            }
            grid.set(x, y, kind);
        }
    }
    if agents != 1 {
        return Err(err(
            1,
            1,
            &format!("map must have exactly one '@', found {agents}"),
        ));
    }
    if targets != 1 {
        return Err(err(
            1,
            1,
            &format!("map must have exactly one '!', found {targets}"),
        ));
    }
    Ok(grid)
}
