use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Action, CellKind, Direction, Pos, GRID};
use crate::{Error, Result};

const MAX_LAYOUT_ATTEMPTS: usize = 1000;

/// Bounds on the number of lava cells placed per layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LavaParams {
    pub lava_min: usize,
    pub lava_max: usize,
}

impl Default for LavaParams {
    fn default() -> Self {
        LavaParams { lava_min: 1, lava_max: 4 }
    }
}

impl LavaParams {
    pub fn validate(&self) -> Result<()> {
        if self.lava_min < 1 || self.lava_max > 6 || self.lava_min > self.lava_max {
            return Err(Error::InvalidParams(format!(
                "lava range [{}, {}] must satisfy 1 <= min <= max <= 6",
                self.lava_min, self.lava_max
            )));
        }
        Ok(())
    }
}

/// Immutable description of one board.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    cells: [[CellKind; GRID]; GRID],
    start_pos: Pos,
    start_dir: Direction,
    goal_pos: Pos,
    seed: u64,
    lava_count: usize,
}

impl Layout {
    /// Builds a layout from explicit cells, checking every structural invariant
    /// (single goal, empty start distinct from goal, lava-free path to goal).
    pub fn new(
        cells: [[CellKind; GRID]; GRID],
        start_pos: Pos,
        start_dir: Direction,
        seed: u64,
    ) -> Result<Self> {
        if start_pos.row >= GRID || start_pos.col >= GRID {
            return Err(Error::InvalidParams(format!("start {start_pos:?} outside the grid")));
        }
        let goals: Vec<Pos> = all_positions().filter(|p| cells[p.row][p.col] == CellKind::Goal).collect();
        let goal_pos = match goals.as_slice() {
            [g] => *g,
            _ => return Err(Error::InvalidParams(format!("expected exactly one goal, found {}", goals.len()))),
        };
        if cells[start_pos.row][start_pos.col] != CellKind::Empty {
            return Err(Error::InvalidParams("start cell must be Empty".into()));
        }
        let lava_count = cells.iter().flatten().filter(|&&c| c == CellKind::Lava).count();
        let layout = Layout { cells, start_pos, start_dir, goal_pos, seed, lava_count };
        if !is_solvable(&layout) {
            return Err(Error::Unreachable);
        }
        Ok(layout)
    }

    /// Parses five rows of `E/W/L/G` letters, e.g. `["EEEEG", ...]`.
    pub fn from_rows(rows: &[&str], start_pos: Pos, start_dir: Direction, seed: u64) -> Result<Self> {
        let cells = parse_cells(&rows.concat())
            .ok_or_else(|| Error::InvalidParams(format!("bad cell rows {rows:?}")))?;
        Layout::new(cells, start_pos, start_dir, seed)
    }

    pub fn cells(&self) -> &[[CellKind; GRID]; GRID] {
        &self.cells
    }

    pub fn start_pos(&self) -> Pos {
        self.start_pos
    }

    pub fn start_dir(&self) -> Direction {
        self.start_dir
    }

    pub fn goal_pos(&self) -> Pos {
        self.goal_pos
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn lava_count(&self) -> usize {
        self.lava_count
    }

    /// Cell at an arbitrary signed coordinate; out of bounds reads as wall.
    pub fn cell_at(&self, row: i32, col: i32) -> CellKind {
        if (0..GRID as i32).contains(&row) && (0..GRID as i32).contains(&col) {
            self.cells[row as usize][col as usize]
        } else {
            CellKind::Wall
        }
    }

    pub fn cell(&self, p: Pos) -> CellKind {
        self.cells[p.row][p.col]
    }

    /// The 25 cells as `E/W/L/G` letters, row-major.
    pub fn cell_string(&self) -> String {
        self.cells.iter().flatten().map(|c| c.letter()).collect()
    }

    pub fn hash(&self) -> u64 {
        layout_hash(self)
    }
}

pub(crate) fn parse_cells(s: &str) -> Option<[[CellKind; GRID]; GRID]> {
    let letters: Vec<char> = s.chars().collect();
    if letters.len() != GRID * GRID {
        return None;
    }
    let mut cells = [[CellKind::Empty; GRID]; GRID];
    for (i, c) in letters.into_iter().enumerate() {
        cells[i / GRID][i % GRID] = CellKind::from_letter(c)?;
    }
    Some(cells)
}

fn all_positions() -> impl Iterator<Item = Pos> {
    (0..GRID * GRID).map(Pos::from_flat)
}

/// Content digest over cells, start pose and goal. The seed is provenance,
/// not content, and is left out.
pub fn layout_hash(layout: &Layout) -> u64 {
    let mut h = Sha256::new();
    h.update(b"lava-layout/1");
    h.update(layout.cell_string().as_bytes());
    h.update([
        layout.start_pos.row as u8,
        layout.start_pos.col as u8,
        layout.start_dir.letter() as u8,
        layout.goal_pos.row as u8,
        layout.goal_pos.col as u8,
    ]);
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_be_bytes(first)
}

/// True if the goal can be reached from the start through passable cells.
pub fn is_solvable(layout: &Layout) -> bool {
    let mut seen = [false; GRID * GRID];
    let mut queue = VecDeque::from([layout.start_pos]);
    seen[layout.start_pos.flat()] = true;
    while let Some(p) = queue.pop_front() {
        if p == layout.goal_pos {
            return true;
        }
        for d in Direction::ALL {
            if let Some(q) = p.step(d) {
                if !seen[q.flat()] && layout.cell(q).passable() {
                    seen[q.flat()] = true;
                    queue.push_back(q);
                }
            }
        }
    }
    false
}

/// Minimal number of actions (turns count one each) from the start pose to
/// any pose on the goal cell, by breadth-first search over (cell, heading).
pub fn shortest_path_length(layout: &Layout) -> Result<usize> {
    let state = |p: Pos, d: Direction| p.flat() * 4 + d.index();
    let mut dist = [usize::MAX; GRID * GRID * 4];
    let mut queue = VecDeque::new();
    dist[state(layout.start_pos, layout.start_dir)] = 0;
    queue.push_back((layout.start_pos, layout.start_dir));
    while let Some((p, d)) = queue.pop_front() {
        let here = dist[state(p, d)];
        if p == layout.goal_pos {
            return Ok(here);
        }
        let mut next = vec![(p, d.turn_left()), (p, d.turn_right())];
        if let Some(q) = p.step(d) {
            if layout.cell(q).passable() {
                next.push((q, d));
            }
        }
        for (q, e) in next {
            let s = state(q, e);
            if dist[s] == usize::MAX {
                dist[s] = here + 1;
                queue.push_back((q, e));
            }
        }
    }
    Err(Error::Unreachable)
}

/// One shortest action sequence from `(pos, dir)` to the goal, or `None` if
/// the goal is unreachable from there.
pub fn optimal_plan(layout: &Layout, pos: Pos, dir: Direction) -> Option<Vec<Action>> {
    let state = |p: Pos, d: Direction| p.flat() * 4 + d.index();
    let mut parent: [Option<(usize, Action)>; GRID * GRID * 4] = [None; GRID * GRID * 4];
    let mut seen = [false; GRID * GRID * 4];
    let mut queue = VecDeque::from([(pos, dir)]);
    seen[state(pos, dir)] = true;
    while let Some((p, d)) = queue.pop_front() {
        if p == layout.goal_pos {
            let mut plan = Vec::new();
            let mut s = state(p, d);
            while let Some((prev, a)) = parent[s] {
                plan.push(a);
                s = prev;
            }
            plan.reverse();
            return Some(plan);
        }
        let mut next = vec![(p, d.turn_left(), Action::TurnLeft), (p, d.turn_right(), Action::TurnRight)];
        if let Some(q) = p.step(d) {
            if layout.cell(q).passable() {
                next.push((q, d, Action::Forward));
            }
        }
        for (q, e, a) in next {
            let s = state(q, e);
            if !seen[s] {
                seen[s] = true;
                parent[s] = Some((state(p, d), a));
                queue.push_back((q, e));
            }
        }
    }
    None
}

/// Draws a random solvable layout. Identical `(seed, params)` always yields an
/// identical layout.
pub fn generate_layout(seed: u64, params: LavaParams) -> Result<Layout> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        let lava = rng.gen_range(params.lava_min..=params.lava_max);
        // goal, lava cells and start are distinct cells
        let picks = sample(&mut rng, GRID * GRID, lava + 2).into_vec();
        let mut cells = [[CellKind::Empty; GRID]; GRID];
        let goal = Pos::from_flat(picks[0]);
        cells[goal.row][goal.col] = CellKind::Goal;
        for &i in &picks[1..=lava] {
            let p = Pos::from_flat(i);
            cells[p.row][p.col] = CellKind::Lava;
        }
        let start = Pos::from_flat(picks[lava + 1]);
        let dir = Direction::ALL[rng.gen_range(0..4)];
        let layout = Layout { cells, start_pos: start, start_dir: dir, goal_pos: goal, seed, lava_count: lava };
        if is_solvable(&layout) {
            return Ok(layout);
        }
    }
    Err(Error::LayoutGeneration { seed, attempts: MAX_LAYOUT_ATTEMPTS })
}
