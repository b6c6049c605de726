use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cell {
    #[serde(rename = "W")]
    Wall,
    #[serde(rename = "E")]
    Empty,
    #[serde(rename = "R")]
    Reward,
}

impl Cell {
    pub const ALL: [Cell; 3] = [Cell::Wall, Cell::Empty, Cell::Reward];

    pub fn symbol(self) -> char {
        match self {
            Cell::Wall => 'W',
            Cell::Empty => 'E',
            Cell::Reward => 'R',
        }
    }

    pub fn from_symbol(c: char) -> Option<Cell> {
        match c {
            'W' => Some(Cell::Wall),
            'E' => Some(Cell::Empty),
            'R' => Some(Cell::Reward),
            _ => None,
        }
    }

    /// Position in the `W, E, R` label order.
    pub fn index(self) -> usize {
        match self {
            Cell::Wall => 0,
            Cell::Empty => 1,
            Cell::Reward => 2,
        }
    }

    pub fn is_open(self) -> bool {
        self != Cell::Wall
    }
}

/// A rectangular grid of cells, row 0 at the top.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
}

impl Grid {
    pub fn new(width: usize, height: usize, cells: Vec<Cell>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        if cells.len() != width * height {
            return Err(Error::invalid(format!(
                "{} cells for a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn filled(width: usize, height: usize, cell: Cell) -> Result<Self> {
        Self::new(width, height, vec![cell; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Cell at `(x, y)`; anything outside the grid reads as a wall.
    pub fn get(&self, x: i64, y: i64) -> Cell {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return Cell::Wall;
        }
        self.cells[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, cell: Cell) {
        assert!(x < self.width && y < self.height, "({x}, {y}) outside grid");
        self.cells[y * self.width + x] = cell;
    }

    pub fn open_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height).flat_map(move |y| {
            (0..self.width)
                .filter_map(move |x| self.cells[y * self.width + x].is_open().then_some((x, y)))
        })
    }

    /// `"w h"` header, then one line per row, no trailing newline.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}", self.width, self.height);
        for row in self.cells.chunks(self.width) {
            out.push('\n');
            out.extend(row.iter().map(|c| c.symbol()));
        }
        out
    }

    /// Parses the text produced by [`Grid::to_text`]. Returns the grid and
    /// the number of lines consumed.
    fn parse_lines<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<Self> {
        let (line_no, header) = lines.next().ok_or(Error::MazeParse {
            line: 1,
            message: "missing `width height` header".into(),
        })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        let parse_dim = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|d| *d > 0)
                .ok_or_else(|| Error::MazeParse {
                    line: line_no,
                    message: format!("bad dimension `{s}`"),
                })
        };
        if dims.len() != 2 {
            return Err(Error::MazeParse {
                line: line_no,
                message: format!("expected `width height`, got `{header}`"),
            });
        }
        let (width, height) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
        let mut cells = Vec::with_capacity(width * height);
        for row in 0..height {
            let (line_no, text) = lines.next().ok_or(Error::MazeParse {
                line: line_no + row + 1,
                message: format!("expected {height} rows, found {row}"),
            })?;
            let text = text.trim_end();
            if text.chars().count() != width {
                return Err(Error::MazeParse {
                    line: line_no,
                    message: format!("row has {} cells, expected {width}", text.chars().count()),
                });
            }
            for c in text.chars() {
                cells.push(Cell::from_symbol(c).ok_or_else(|| Error::MazeParse {
                    line: line_no,
                    message: format!("unknown cell `{c}` (expected W, E or R)"),
                })?);
            }
        }
        Grid::new(width, height, cells)
    }
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate().map(|(i, l)| (i + 1, l));
        let grid = Grid::parse_lines(&mut lines)?;
        if let Some((line, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::MazeParse {
                line,
                message: format!("unexpected trailing line `{extra}`"),
            });
        }
        Ok(grid)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Up,
    Down,
    Left,
    Right,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Up,
        Orientation::Down,
        Orientation::Left,
        Orientation::Right,
    ];

    /// Unit step `(dx, dy)` with `y` growing downwards.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Orientation::Up => (0, -1),
            Orientation::Down => (0, 1),
            Orientation::Left => (-1, 0),
            Orientation::Right => (1, 0),
        }
    }

    pub fn turn_left(self) -> Orientation {
        match self {
            Orientation::Up => Orientation::Left,
            Orientation::Left => Orientation::Down,
            Orientation::Down => Orientation::Right,
            Orientation::Right => Orientation::Up,
        }
    }

    pub fn turn_right(self) -> Orientation {
        self.turn_left().turn_left().turn_left()
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "up" => Ok(Orientation::Up),
            "down" => Ok(Orientation::Down),
            "left" => Ok(Orientation::Left),
            "right" => Ok(Orientation::Right),
            _ => Err(Error::invalid(format!("unknown orientation `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentPose {
    pub x: usize,
    pub y: usize,
    pub orientation: Orientation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Move,
    FaceUp,
    FaceDown,
    FaceLeft,
    FaceRight,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Move,
        Action::FaceUp,
        Action::FaceDown,
        Action::FaceLeft,
        Action::FaceRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::Move => "move",
            Action::FaceUp => "face_up",
            Action::FaceDown => "face_down",
            Action::FaceLeft => "face_left",
            Action::FaceRight => "face_right",
        }
    }

    pub fn facing(o: Orientation) -> Action {
        match o {
            Orientation::Up => Action::FaceUp,
            Orientation::Down => Action::FaceDown,
            Orientation::Left => Action::FaceLeft,
            Orientation::Right => Action::FaceRight,
        }
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown action `{s}`")))
    }
}

/// Readings of the four sensors: left, front, right and the occupied cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SensorState(pub [Cell; 4]);

impl fmt::Display for SensorState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.0 {
            write!(f, "{}", c.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for SensorState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cells: Vec<Cell> = s.chars().filter_map(Cell::from_symbol).collect();
        match <[Cell; 4]>::try_from(cells) {
            Ok(c) if s.chars().count() == 4 => Ok(SensorState(c)),
            _ => Err(Error::invalid(format!(
                "`{s}` is not a four-letter W/E/R state"
            ))),
        }
    }
}

/// A validated maze: walled border, at least one open cell, open start pose.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MazeWorld {
    name: String,
    grid: Grid,
    start: AgentPose,
}

impl MazeWorld {
    /// Validates `grid`. Without an explicit start the agent begins on the
    /// lowest open cell (leftmost on ties), facing up.
    pub fn new(name: impl Into<String>, grid: Grid, start: Option<AgentPose>) -> Result<Self> {
        let (w, h) = (grid.width(), grid.height());
        for y in 0..h {
            for x in 0..w {
                let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
                if border && grid.get(x as i64, y as i64).is_open() {
                    return Err(Error::invalid(format!(
                        "border cell ({x}, {y}) must be a wall"
                    )));
                }
            }
        }
        let lowest = grid
            .open_cells()
            .max_by_key(|&(x, y)| (y, std::cmp::Reverse(x)))
            .ok_or_else(|| Error::invalid("maze has no open cell"))?;
        let start = start.unwrap_or(AgentPose {
            x: lowest.0,
            y: lowest.1,
            orientation: Orientation::Up,
        });
        if !grid.get(start.x as i64, start.y as i64).is_open() {
            return Err(Error::invalid(format!(
                "start ({}, {}) is not an open cell",
                start.x, start.y
            )));
        }
        Ok(Self {
            name: name.into(),
            grid,
            start,
        })
    }

    /// Parses the maze text format: a grid as in [`Grid::to_text`], optionally
    /// followed by a `start x y orientation` line.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let grid = Grid::parse_lines(&mut lines)?;
        let mut start = None;
        for (line, raw) in lines {
            let words: Vec<&str> = raw.split_whitespace().collect();
            match words.as_slice() {
                [] => {}
                ["start", x, y, o] if start.is_none() => {
                    let bad = |what: &str| Error::MazeParse {
                        line,
                        message: format!("bad start {what} in `{raw}`"),
                    };
                    start = Some(AgentPose {
                        x: x.parse().map_err(|_| bad("x"))?,
                        y: y.parse().map_err(|_| bad("y"))?,
                        orientation: o.parse().map_err(|_| bad("orientation"))?,
                    });
                }
                _ => {
                    return Err(Error::MazeParse {
                        line,
                        message: format!("unexpected line `{raw}`"),
                    })
                }
            }
        }
        MazeWorld::new(name, grid, start).map_err(|e| match e {
            Error::InvalidArgument(message) => Error::MazeParse { line: 1, message },
            other => other,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn start(&self) -> AgentPose {
        self.start
    }

    /// Maze text including the start line.
    pub fn to_file_text(&self) -> String {
        let o = match self.start.orientation {
            Orientation::Up => "up",
            Orientation::Down => "down",
            Orientation::Left => "left",
            Orientation::Right => "right",
        };
        format!(
            "{}\nstart {} {} {}\n",
            self.grid.to_text(),
            self.start.x,
            self.start.y,
            o
        )
    }

    /// Open cells connected to the start, in row-major order.
    pub fn reachable_cells(&self) -> Vec<(usize, usize)> {
        let (w, h) = (self.grid.width(), self.grid.height());
        let mut seen = vec![false; w * h];
        let mut stack = vec![(self.start.x, self.start.y)];
        seen[self.start.y * w + self.start.x] = true;
        while let Some((x, y)) = stack.pop() {
            for o in Orientation::ALL {
                let (dx, dy) = o.delta();
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if self.grid.get(nx, ny).is_open() {
                    let idx = ny as usize * w + nx as usize;
                    if !seen[idx] {
                        seen[idx] = true;
                        stack.push((nx as usize, ny as usize));
                    }
                }
            }
        }
        (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| seen[y * w + x])
            .collect()
    }
}

/// Reads the left, front, right and occupied cells relative to the pose.
pub fn sense(world: &MazeWorld, pose: AgentPose) -> SensorState {
    let look = |o: Orientation| {
        let (dx, dy) = o.delta();
        world.grid.get(pose.x as i64 + dx, pose.y as i64 + dy)
    };
    SensorState([
        look(pose.orientation.turn_left()),
        look(pose.orientation),
        look(pose.orientation.turn_right()),
        world.grid.get(pose.x as i64, pose.y as i64),
    ])
}

/// Rotations set an absolute heading; `Move` steps forward unless blocked.
pub fn apply_action(world: &MazeWorld, pose: AgentPose, action: Action) -> AgentPose {
    let face = |orientation| AgentPose {
        orientation,
        ..pose
    };
    match action {
        Action::FaceUp => face(Orientation::Up),
        Action::FaceDown => face(Orientation::Down),
        Action::FaceLeft => face(Orientation::Left),
        Action::FaceRight => face(Orientation::Right),
        Action::Move => {
            let (dx, dy) = pose.orientation.delta();
            let (nx, ny) = (pose.x as i64 + dx, pose.y as i64 + dy);
            if world.grid.get(nx, ny).is_open() {
                AgentPose {
                    x: nx as usize,
                    y: ny as usize,
                    ..pose
                }
            } else {
                pose
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_maze() -> MazeWorld {
        crate::maze::builtin("t-maze").unwrap()
    }

    fn s(text: &str) -> SensorState {
        text.parse().unwrap()
    }

    #[test]
    fn all_wall_grid_text() {
        let g = Grid::filled(3, 3, Cell::Wall).unwrap();
        assert_eq!(g.to_text(), "3 3\nWWW\nWWW\nWWW");
        assert_eq!(g.to_text().parse::<Grid>().unwrap(), g);
        assert!(MazeWorld::new("walls", g, None).is_err());
    }

    #[test]
    fn t_maze_table1_sequence() {
        let world = t_maze();
        let mut pose = world.start();
        assert_eq!(sense(&world, pose), s("WEWE"));
        let steps = [
            (Action::Move, "WEWE"),
            (Action::FaceLeft, "EWEE"),
            (Action::FaceDown, "WEWE"),
            (Action::Move, "WWWE"),
        ];
        for (action, expected) in steps {
            pose = apply_action(&world, pose, action);
            assert_eq!(sense(&world, pose), s(expected), "after {action:?}");
        }
        // Back on the start cell, pointing down.
        assert_eq!((pose.x, pose.y), (world.start().x, world.start().y));
        assert_eq!(pose.orientation, Orientation::Down);
    }

    #[test]
    fn blocked_move_keeps_pose() {
        let world = t_maze();
        let pose = AgentPose {
            orientation: Orientation::Down,
            ..world.start()
        };
        let after = apply_action(&world, pose, Action::Move);
        assert_eq!(after, pose);
        assert_eq!(sense(&world, after), sense(&world, pose));
    }

    #[test]
    fn rotation_is_idempotent_and_moves_shift_one_cell() {
        let world = t_maze();
        let once = apply_action(&world, world.start(), Action::FaceLeft);
        let twice = apply_action(&world, once, Action::FaceLeft);
        assert_eq!(once, twice);
        let moved = apply_action(&world, world.start(), Action::Move);
        assert_eq!((moved.x, moved.y + 1), (world.start().x, world.start().y));
    }

    #[test]
    fn single_cell_world_senses_walls() {
        let world = MazeWorld::parse("cell", "3 3\nWWW\nWEW\nWWW").unwrap();
        for o in Orientation::ALL {
            let pose = AgentPose {
                x: 1,
                y: 1,
                orientation: o,
            };
            assert_eq!(sense(&world, pose), s("WWWE"));
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = MazeWorld::parse("m", "3 3\nWWW\nWXW\nWWW").unwrap_err();
        assert!(matches!(err, Error::MazeParse { line: 3, .. }), "{err}");
        let err = MazeWorld::parse("m", "3 3\nWWW\nWEW").unwrap_err();
        assert!(matches!(err, Error::MazeParse { line: 4, .. }), "{err}");
        let err = MazeWorld::parse("m", "3 x\nWWW").unwrap_err();
        assert!(matches!(err, Error::MazeParse { line: 1, .. }), "{err}");
        let err = MazeWorld::parse("m", "3 3\nWWW\nWEW\nWWW\nbogus").unwrap_err();
        assert!(matches!(err, Error::MazeParse { line: 5, .. }), "{err}");
        let err = MazeWorld::parse("m", "3 3\nWEW\nWEW\nWWW").unwrap_err();
        assert!(matches!(err, Error::MazeParse { .. }), "{err}");
    }

    #[test]
    fn explicit_start_round_trips() {
        let world = MazeWorld::parse("m", "4 3\nWWWW\nWEEW\nWWWW\nstart 2 1 left\n").unwrap();
        assert_eq!(
            world.start(),
            AgentPose {
                x: 2,
                y: 1,
                orientation: Orientation::Left
            }
        );
        assert_eq!(MazeWorld::parse("m", &world.to_file_text()).unwrap(), world);
        assert!(MazeWorld::parse("m", "4 3\nWWWW\nWEEW\nWWWW\nstart 0 0 up").is_err());
    }

    #[test]
    fn default_start_is_lowest_open_cell() {
        let world = MazeWorld::parse("m", "5 4\nWWWWW\nWEEEW\nWWEEW\nWWWWW").unwrap();
        assert_eq!((world.start().x, world.start().y), (2, 2));
        assert_eq!(world.start().orientation, Orientation::Up);
    }
}
