use crate::gridworld::{CellKind, Direction, EnvState, Pos, GRID, OBSERVATION_LEN};

/// Where `p` lands once the grid is rotated so that `heading` points north.
pub fn rotate_to_north(p: Pos, heading: Direction) -> Pos {
    let n = GRID - 1;
    match heading {
        Direction::North => p,
        Direction::East => Pos::new(n - p.col, p.row),
        Direction::South => Pos::new(n - p.row, n - p.col),
        Direction::West => Pos::new(p.col, n - p.row),
    }
}

/// Window cell that holds the agent itself.
pub const VIEW_CENTER: Pos = Pos::new(GRID / 2, GRID / 2);

/// The network input, an agent-centred variant of
/// [`encode_observation`](crate::gridworld::encode_observation) with the same
/// length and 27 ones:
///
/// * cell block: a 5x5 window centred on the agent with the agent facing up
///   (window row 0 is ahead); cells off the board read as `Wall`;
/// * position block: the goal's position on the board, rotated the same way;
/// * direction block: always `North`.
///
/// The board's edges inside the window pin down the agent's position, so
/// the goal can always be located relative to the agent.
pub fn agent_observation(state: &EnvState) -> Vec<f64> {
    let heading = state.agent_dir();
    let mut rotated = [[CellKind::Wall; GRID]; GRID];
    for (i, cell) in state.layout().cells().iter().flatten().enumerate() {
        let q = rotate_to_north(Pos::from_flat(i), heading);
        rotated[q.row][q.col] = *cell;
    }
    let me = rotate_to_north(state.agent_pos(), heading);
    let mut obs = vec![0.0; OBSERVATION_LEN];
    for wr in 0..GRID {
        for wc in 0..GRID {
            let r = (me.row + wr).checked_sub(VIEW_CENTER.row).filter(|&r| r < GRID);
            let c = (me.col + wc).checked_sub(VIEW_CENTER.col).filter(|&c| c < GRID);
            let kind = match (r, c) {
                (Some(r), Some(c)) => rotated[r][c],
                _ => CellKind::Wall,
            };
            obs[(wr * GRID + wc) * 4 + kind.index()] = 1.0;
        }
    }
    obs[GRID * GRID * 4 + rotate_to_north(state.layout().goal_pos(), heading).flat()] = 1.0;
    obs[GRID * GRID * 5 + Direction::North.index()] = 1.0;
    obs
}
