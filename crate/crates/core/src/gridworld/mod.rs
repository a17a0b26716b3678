//! Seeded 5x5 lava gridworld.
//!
//! Everything outside the playable 5x5 area behaves as wall. The agent has a
//! pose (cell + heading) and three actions: turn left, turn right, forward.
//! Reaching the goal pays `1 + 0.9 * L*/t` where `L*` is the minimal action
//! count from the start pose and `t` the steps actually taken; stepping into
//! lava pays `-1`. Every other transition pays 0.

mod env;
mod layout;
mod suite;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use env::{
    encode_observation, extract_features, EnvState, FeatureFrame, Feature, Status, StepOutcome,
    DEFAULT_MAX_STEPS, OBSERVATION_LEN,
};
pub use layout::{
    generate_layout, is_solvable, layout_hash, optimal_plan, shortest_path_length, LavaParams, Layout,
};
pub use suite::{generate_suite, generate_suite_excluding, parse_suite, read_suite, render_suite, write_suite};

/// Side length of the playable area.
pub const GRID: usize = 5;

/// Contents of a single grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellKind {
    Empty,
    Wall,
    Lava,
    Goal,
}

impl CellKind {
    pub const ALL: [CellKind; 4] = [CellKind::Empty, CellKind::Wall, CellKind::Lava, CellKind::Goal];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            CellKind::Empty => 'E',
            CellKind::Wall => 'W',
            CellKind::Lava => 'L',
            CellKind::Goal => 'G',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c {
            'E' => Some(CellKind::Empty),
            'W' => Some(CellKind::Wall),
            'L' => Some(CellKind::Lava),
            'G' => Some(CellKind::Goal),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Empty => "Empty",
            CellKind::Wall => "Wall",
            CellKind::Lava => "Lava",
            CellKind::Goal => "Goal",
        }
    }

    /// Passable cells: the agent can stand on them.
    pub fn passable(self) -> bool {
        matches!(self, CellKind::Empty | CellKind::Goal)
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CellKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown cell kind `{s}`"))
    }
}

/// Agent heading. `North` is towards row 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::East, Direction::South, Direction::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn turn_left(self) -> Self {
        Direction::ALL[(self.index() + 3) % 4]
    }

    pub fn turn_right(self) -> Self {
        Direction::ALL[(self.index() + 1) % 4]
    }

    /// (row, col) displacement of one step along this heading.
    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::North => (-1, 0),
            Direction::East => (0, 1),
            Direction::South => (1, 0),
            Direction::West => (0, -1),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Direction::North => 'N',
            Direction::East => 'E',
            Direction::South => 'S',
            Direction::West => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        Direction::ALL.into_iter().find(|d| d.letter() == c)
    }
}

/// The three agent actions. Index order is the Q-network output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    TurnLeft,
    TurnRight,
    Forward,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::TurnLeft, Action::TurnRight, Action::Forward];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Action::ALL.get(i).copied()
    }

    pub fn is_turn(self) -> bool {
        !matches!(self, Action::Forward)
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::TurnLeft => "TurnLeft",
            Action::TurnRight => "TurnRight",
            Action::Forward => "Forward",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

/// A cell coordinate inside the playable area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub const fn new(row: usize, col: usize) -> Self {
        Pos { row, col }
    }

    /// Row-major index in `0..GRID*GRID`.
    pub fn flat(self) -> usize {
        self.row * GRID + self.col
    }

    pub fn from_flat(i: usize) -> Self {
        Pos { row: i / GRID, col: i % GRID }
    }

    /// Displaced position, or `None` if it leaves the grid.
    pub fn offset(self, (dr, dc): (i32, i32)) -> Option<Pos> {
        let r = self.row as i32 + dr;
        let c = self.col as i32 + dc;
        let range = 0..GRID as i32;
        (range.contains(&r) && range.contains(&c)).then(|| Pos::new(r as usize, c as usize))
    }

    pub fn step(self, dir: Direction) -> Option<Pos> {
        self.offset(dir.delta())
    }
}
