use super::SimError;
use crate::geodata::Grid;
use serde::{Deserialize, Serialize};

/// Progress of one clearance operation over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearanceState {
    pub cleared: Vec<bool>,
    pub timestep: usize,
    /// Dataset indices of found mines, in order of discovery.
    pub found_mine_indices: Vec<usize>,
    pub route: Vec<usize>,
    /// Share of all mines found after each timestep.
    pub shares: Vec<f64>,
    pub total_mines: usize,
}

impl ClearanceState {
    pub fn new(grid: &Grid) -> Self {
        ClearanceState {
            cleared: vec![false; grid.len()],
            timestep: 0,
            found_mine_indices: Vec::new(),
            route: Vec::new(),
            shares: Vec::new(),
            total_mines: grid.mine_count(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.timestep == self.cleared.len()
    }

    pub fn is_reachable(&self, grid: &Grid, index: usize) -> bool {
        index < self.cleared.len()
            && !self.cleared[index]
            && (grid.is_border(index) || grid.neighbors8(index).any(|n| self.cleared[n]))
    }

    /// Uncleared border tiles and uncleared tiles next to a cleared one, ascending.
    pub fn reachable(&self, grid: &Grid) -> Vec<usize> {
        (0..self.cleared.len()).filter(|&i| self.is_reachable(grid, i)).collect()
    }

    /// Clear one reachable tile and return how many mines it held.
    pub fn step(&mut self, grid: &Grid, index: usize) -> Result<usize, SimError> {
        if index >= self.cleared.len() {
            return Err(SimError::TileOutOfRange(index));
        }
        if self.cleared[index] {
            return Err(SimError::AlreadyCleared(index));
        }
        if !self.is_reachable(grid, index) {
            return Err(SimError::Unreachable(index));
        }
        self.cleared[index] = true;
        self.timestep += 1;
        self.route.push(index);
        let mines = &grid.tiles[index].mine_indices;
        self.found_mine_indices.extend_from_slice(mines);
        self.shares.push(share(self.found_mine_indices.len(), self.total_mines));
        Ok(mines.len())
    }

    pub fn share_found(&self) -> f64 {
        share(self.found_mine_indices.len(), self.total_mines)
    }
}

/// With no mines at all, every timestep counts as having found all of them.
pub(crate) fn share(found: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        found as f64 / total as f64
    }
}

/// Starting side of a boustrophedon sweep. Row 0 is the southern edge and
/// column 0 the western edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Rows from south to north, the first row west to east.
    Northbound,
    /// Rows from north to south, the first row west to east.
    Southbound,
    /// Columns from west to east, the first column south to north.
    Eastbound,
    /// Columns from east to west, the first column south to north.
    Westbound,
}

impl Direction {
    pub const ALL: [Direction; 4] =
        [Direction::Northbound, Direction::Southbound, Direction::Eastbound, Direction::Westbound];
}

/// Serpentine clearance order: lines alternate their sweep direction.
pub fn serpentine_order(grid: &Grid, direction: Direction) -> Vec<usize> {
    let (nc, nr) = (grid.n_cols, grid.n_rows);
    let mut out = Vec::with_capacity(grid.len());
    match direction {
        Direction::Northbound | Direction::Southbound => {
            for k in 0..nr {
                let row = if direction == Direction::Northbound { k } else { nr - 1 - k };
                for j in 0..nc {
                    let col = if k % 2 == 0 { j } else { nc - 1 - j };
                    out.push(grid.index(col, row));
                }
            }
        }
        Direction::Eastbound | Direction::Westbound => {
            for k in 0..nc {
                let col = if direction == Direction::Eastbound { k } else { nc - 1 - k };
                for j in 0..nr {
                    let row = if k % 2 == 0 { j } else { nr - 1 - j };
                    out.push(grid.index(col, row));
                }
            }
        }
    }
    out
}

/// Check a full route against the clearance rules by replaying it.
pub fn audit_route(grid: &Grid, route: &[usize]) -> Result<(), SimError> {
    let mut state = ClearanceState::new(grid);
    for &t in route {
        state.step(grid, t)?;
    }
    if state.is_complete() {
        Ok(())
    } else {
        Err(SimError::IncompleteHistory { got: state.timestep, expected: grid.len() })
    }
}
