use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::layout::shortest_path_length;
use super::{Action, CellKind, Direction, Layout, Pos, GRID};
use crate::{Error, Result};

/// Episode step cap: 4 * width * height of the playable area.
pub const DEFAULT_MAX_STEPS: usize = 4 * GRID * GRID;

/// Length of [`encode_observation`] vectors: cell one-hots, agent position
/// one-hot and heading one-hot.
pub const OBSERVATION_LEN: usize = GRID * GRID * 4 + GRID * GRID + 4;

const GOAL_REWARD: f64 = 1.0;
const EFFICIENCY_BONUS: f64 = 0.9;
const LAVA_REWARD: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Running,
    Success,
    LavaDeath,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub done: bool,
}

/// Mutable episode state over an owned copy of the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    layout: Layout,
    agent_pos: Pos,
    agent_dir: Direction,
    steps_taken: usize,
    status: Status,
    max_steps: usize,
    optimal_steps: usize,
}

impl EnvState {
    /// Places the agent on the layout's start pose.
    pub fn new(layout: Layout, max_steps: usize) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::InvalidParams("max_steps must be positive".into()));
        }
        let optimal_steps = shortest_path_length(&layout)?;
        Ok(EnvState {
            agent_pos: layout.start_pos(),
            agent_dir: layout.start_dir(),
            layout,
            steps_taken: 0,
            status: Status::Running,
            max_steps,
            optimal_steps,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn agent_pos(&self) -> Pos {
        self.agent_pos
    }

    pub fn agent_dir(&self) -> Direction {
        self.agent_dir
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    /// Shortest-path action count `L*` for this layout's start pose.
    pub fn optimal_steps(&self) -> usize {
        self.optimal_steps
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    /// Applies one action. Fails if the episode already ended.
    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.status != Status::Running {
            return Err(Error::EpisodeFinished(self.status));
        }
        self.steps_taken += 1;
        let mut reward = 0.0;
        match action {
            Action::TurnLeft => self.agent_dir = self.agent_dir.turn_left(),
            Action::TurnRight => self.agent_dir = self.agent_dir.turn_right(),
            Action::Forward => {
                if let Some(next) = self.agent_pos.step(self.agent_dir) {
                    match self.layout.cell(next) {
                        CellKind::Wall => {}
                        CellKind::Empty => self.agent_pos = next,
                        CellKind::Lava => {
                            self.agent_pos = next;
                            self.status = Status::LavaDeath;
                            reward = LAVA_REWARD;
                        }
                        CellKind::Goal => {
                            self.agent_pos = next;
                            self.status = Status::Success;
                            let ratio = self.optimal_steps as f64 / self.steps_taken as f64;
                            reward = GOAL_REWARD + EFFICIENCY_BONUS * ratio;
                        }
                    }
                }
            }
        }
        if self.status == Status::Running && self.steps_taken >= self.max_steps {
            self.status = Status::Timeout;
        }
        Ok(StepOutcome { reward, done: self.status != Status::Running })
    }
}

/// The five relative cells around the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Left,
    Right,
    Forward,
    ForwardLeft,
    ForwardRight,
}

impl Feature {
    pub const ALL: [Feature; 5] =
        [Feature::Left, Feature::Right, Feature::Forward, Feature::ForwardLeft, Feature::ForwardRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Left => "left",
            Feature::Right => "right",
            Feature::Forward => "forward",
            Feature::ForwardLeft => "forward_left",
            Feature::ForwardRight => "forward_right",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown feature `{s}`"))
    }
}

/// The 3-wide, 2-deep window in front of the agent, minus the agent's own cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureFrame {
    pub left: CellKind,
    pub right: CellKind,
    pub forward: CellKind,
    pub forward_left: CellKind,
    pub forward_right: CellKind,
}

impl FeatureFrame {
    pub fn get(&self, f: Feature) -> CellKind {
        match f {
            Feature::Left => self.left,
            Feature::Right => self.right,
            Feature::Forward => self.forward,
            Feature::ForwardLeft => self.forward_left,
            Feature::ForwardRight => self.forward_right,
        }
    }

    pub fn from_cells(cells: [CellKind; 5]) -> Self {
        let [left, right, forward, forward_left, forward_right] = cells;
        FeatureFrame { left, right, forward, forward_left, forward_right }
    }

    pub fn cells(&self) -> [CellKind; 5] {
        Feature::ALL.map(|f| self.get(f))
    }

    /// Dense code in `0..1024`, features in order, 2 bits per cell.
    pub fn code(&self) -> usize {
        self.cells().iter().enumerate().map(|(i, c)| c.index() << (2 * i)).sum()
    }

    pub fn from_code(code: usize) -> Self {
        let cells = std::array::from_fn(|i| CellKind::ALL[(code >> (2 * i)) & 3]);
        FeatureFrame::from_cells(cells)
    }

    /// All 4^5 possible frames.
    pub fn all() -> impl Iterator<Item = FeatureFrame> {
        (0..1024).map(FeatureFrame::from_code)
    }
}

/// Reads the relative window under the agent's current heading.
pub fn extract_features(state: &EnvState) -> FeatureFrame {
    frame_at(state.layout(), state.agent_pos(), state.agent_dir())
}

pub(crate) fn frame_at(layout: &Layout, pos: Pos, dir: Direction) -> FeatureFrame {
    let (r, c) = (pos.row as i32, pos.col as i32);
    let (fr, fc) = dir.delta();
    let (lr, lc) = dir.turn_left().delta();
    let read = |dr: i32, dc: i32| layout.cell_at(r + dr, c + dc);
    FeatureFrame {
        left: read(lr, lc),
        right: read(-lr, -lc),
        forward: read(fr, fc),
        forward_left: read(fr + lr, fc + lc),
        forward_right: read(fr - lr, fc - lc),
    }
}

/// One-hot symbolic observation of length [`OBSERVATION_LEN`] with exactly
/// 27 ones.
pub fn encode_observation(state: &EnvState) -> Vec<f64> {
    let mut obs = vec![0.0; OBSERVATION_LEN];
    for (i, cell) in state.layout().cells().iter().flatten().enumerate() {
        obs[i * 4 + cell.index()] = 1.0;
    }
    obs[GRID * GRID * 4 + state.agent_pos().flat()] = 1.0;
    obs[GRID * GRID * 5 + state.agent_dir().index()] = 1.0;
    obs
}
