use super::metrics::ClearanceHistory;
use super::state::{serpentine_order, ClearanceState, Direction};
use super::SimError;
use crate::clustering::dbscan;
use crate::geodata::{Grid, MetricPoint};
use crate::pipeline::{FittedCluster, InstanceKind, PatternCache, RiskMap, RiskStack};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Recalculation cadence used for test-time clearance.
pub const TEST_RECALC_INTERVAL: usize = 25;
/// Recalculation cadence used inside cross-validation.
pub const CV_RECALC_INTERVAL: usize = 50;
pub const RANDOM_RUNS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeminerKind {
    Random,
    Sequential,
    Linear,
    Curved,
    Bayesian,
}

impl DeminerKind {
    pub const ALL: [DeminerKind; 5] =
        [DeminerKind::Random, DeminerKind::Sequential, DeminerKind::Linear, DeminerKind::Curved, DeminerKind::Bayesian];

    pub fn instance(self) -> Option<InstanceKind> {
        match self {
            DeminerKind::Linear => Some(InstanceKind::Linear),
            DeminerKind::Curved => Some(InstanceKind::Curved),
            DeminerKind::Bayesian => Some(InstanceKind::Bayesian),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeminerKind::Random => "random",
            DeminerKind::Sequential => "sequential",
            DeminerKind::Linear => "linear",
            DeminerKind::Curved => "curved",
            DeminerKind::Bayesian => "bayesian",
        }
    }
}

impl From<InstanceKind> for DeminerKind {
    fn from(k: InstanceKind) -> Self {
        match k {
            InstanceKind::Linear => DeminerKind::Linear,
            InstanceKind::Curved => DeminerKind::Curved,
            InstanceKind::Bayesian => DeminerKind::Bayesian,
        }
    }
}

impl fmt::Display for DeminerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeminerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(DeminerKind::Random),
            "sequential" => Ok(DeminerKind::Sequential),
            other => other.parse::<InstanceKind>().map(DeminerKind::from).map_err(|_| {
                format!("unknown deminer '{other}' (expected random, sequential, linear, curved or bayesian)")
            }),
        }
    }
}

/// Several independent runs and their pointwise mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedRun {
    pub average: ClearanceHistory,
    pub runs: Vec<ClearanceHistory>,
    /// Risk map rebuilds per run (pattern deminers only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recalcs: Vec<usize>,
}

impl AveragedRun {
    fn from_runs(runs: Vec<ClearanceHistory>, recalcs: Vec<usize>) -> Result<Self, SimError> {
        Ok(AveragedRun { average: ClearanceHistory::average(&runs)?, runs, recalcs })
    }
}

fn map_runs<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

fn history(state: ClearanceState) -> ClearanceHistory {
    ClearanceHistory { shares: state.shares, route: state.route }
}

/// One run picking uniformly among reachable tiles.
pub fn run_random_once(grid: &Grid, rng: &mut ChaCha8Rng) -> ClearanceHistory {
    let mut state = ClearanceState::new(grid);
    while !state.is_complete() {
        let reachable = state.reachable(grid);
        let &t = reachable.choose(rng).expect("an incomplete clearance always has a reachable tile");
        state.step(grid, t).expect("chosen from the reachable set");
    }
    history(state)
}

/// `runs` random clearances; run `i` draws from stream `i` of `seed`.
pub fn run_random(grid: &Grid, seed: u64, runs: usize) -> Result<AveragedRun, SimError> {
    let histories = map_runs(runs, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        run_random_once(grid, &mut rng)
    });
    AveragedRun::from_runs(histories, Vec::new())
}

pub fn run_sequential(grid: &Grid, direction: Direction) -> ClearanceHistory {
    let mut state = ClearanceState::new(grid);
    for t in serpentine_order(grid, direction) {
        state.step(grid, t).expect("serpentine order is always reachable");
    }
    history(state)
}

/// One sequential run per starting side.
pub fn run_sequential_suite(grid: &Grid) -> Result<AveragedRun, SimError> {
    let runs = Direction::ALL.iter().map(|&d| run_sequential(grid, d)).collect();
    AveragedRun::from_runs(runs, Vec::new())
}

/// Next-tile choice with the risk behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub tile: usize,
    /// `None` while no pattern has been found.
    pub risk: Option<f64>,
}

/// Online state of a pattern-based deminer: found mines, patterns and the
/// current risk map, refreshed on a fixed cadence once the first pattern appears.
#[derive(Debug, Clone)]
pub struct PatternPlanner {
    recalc_interval: usize,
    recalc_on_find: bool,
    order_position: Vec<usize>,
    found: Vec<MetricPoint>,
    pending_finds: bool,
    first_pattern_at: Option<usize>,
    recalcs: usize,
    patterns: Vec<FittedCluster>,
    risk: RiskMap,
    cache: PatternCache,
}

impl PatternPlanner {
    pub fn new(grid: &Grid, direction: Direction, recalc_interval: usize) -> Result<Self, SimError> {
        if recalc_interval == 0 {
            return Err(SimError::InvalidRecalcInterval);
        }
        let mut order_position = vec![0; grid.len()];
        for (pos, t) in serpentine_order(grid, direction).into_iter().enumerate() {
            order_position[t] = pos;
        }
        Ok(PatternPlanner {
            recalc_interval,
            recalc_on_find: false,
            order_position,
            found: Vec::new(),
            pending_finds: false,
            first_pattern_at: None,
            recalcs: 0,
            patterns: Vec::new(),
            risk: RiskMap::empty(grid.len()),
            cache: PatternCache::default(),
        })
    }

    /// Also rebuild the risk map whenever a new mine is reported.
    pub fn with_recalc_on_find(mut self, on: bool) -> Self {
        self.recalc_on_find = on;
        self
    }

    pub fn observe(&mut self, mines: &[MetricPoint]) {
        if !mines.is_empty() {
            self.found.extend_from_slice(mines);
            self.pending_finds = true;
        }
    }

    /// Rebuild the risk map if one is due after the latest step. Returns
    /// whether it was rebuilt.
    pub fn update(&mut self, stack: &RiskStack, grid: &Grid, state: &ClearanceState) -> bool {
        if state.is_complete() {
            return false;
        }
        let t = state.timestep;
        let due = match self.first_pattern_at {
            None => {
                self.pending_finds
                    && dbscan(&self.found, stack.hyperparameters.clustering()).clusters.iter().any(|c| c.len() >= 2)
            }
            Some(t0) => (t - t0) % self.recalc_interval == 0 || (self.recalc_on_find && self.pending_finds),
        };
        if !due {
            return false;
        }
        self.first_pattern_at.get_or_insert(t);
        self.patterns = stack.fit_patterns_cached(&self.found, &mut self.cache);
        self.risk = stack.risk_map(grid, &self.patterns, &state.cleared);
        self.recalcs += 1;
        self.pending_finds = false;
        true
    }

    /// Reachable tile with the highest risk; without estimates, the earliest in
    /// serpentine order. Equal risks go to the smaller row-major index.
    pub fn choose(&self, grid: &Grid, state: &ClearanceState) -> Option<Suggestion> {
        let mut best: Option<(usize, Option<f64>)> = None;
        for t in state.reachable(grid) {
            let r = self.risk.risk[t];
            let better = match best {
                None => true,
                Some((b, br)) => match (r, br) {
                    (Some(_), None) => true,
                    (None, Some(_)) => false,
                    (Some(x), Some(y)) => x > y || (x == y && t < b),
                    (None, None) => self.order_position[t] < self.order_position[b],
                },
            };
            if better {
                best = Some((t, r));
            }
        }
        best.map(|(tile, risk)| Suggestion { tile, risk })
    }

    pub fn risk_map(&self) -> &RiskMap {
        &self.risk
    }

    pub fn patterns(&self) -> &[FittedCluster] {
        &self.patterns
    }

    pub fn found(&self) -> &[MetricPoint] {
        &self.found
    }

    pub fn recalcs(&self) -> usize {
        self.recalcs
    }

    pub fn first_pattern_at(&self) -> Option<usize> {
        self.first_pattern_at
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternRun {
    pub history: ClearanceHistory,
    pub recalcs: usize,
    pub first_pattern_at: Option<usize>,
}

/// A full clearance by a pattern-based deminer starting from one side.
pub fn run_pattern_once(
    grid: &Grid,
    mines: &[MetricPoint],
    stack: &RiskStack,
    direction: Direction,
    recalc_interval: usize,
) -> Result<PatternRun, SimError> {
    let mut planner = PatternPlanner::new(grid, direction, recalc_interval)?;
    let mut state = ClearanceState::new(grid);
    while !state.is_complete() {
        let s = planner.choose(grid, &state).expect("an incomplete clearance always has a reachable tile");
        state.step(grid, s.tile)?;
        let found: Vec<MetricPoint> = grid.tiles[s.tile].mine_indices.iter().map(|&i| mines[i]).collect();
        planner.observe(&found);
        planner.update(stack, grid, &state);
    }
    Ok(PatternRun { recalcs: planner.recalcs(), first_pattern_at: planner.first_pattern_at(), history: history(state) })
}

/// Pattern-based clearance from all four sides.
pub fn run_pattern_deminer(
    grid: &Grid,
    mines: &[MetricPoint],
    stack: &RiskStack,
    recalc_interval: usize,
) -> Result<AveragedRun, SimError> {
    let runs =
        map_runs(Direction::ALL.len(), |i| run_pattern_once(grid, mines, stack, Direction::ALL[i], recalc_interval))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
    let recalcs = runs.iter().map(|r| r.recalcs).collect();
    AveragedRun::from_runs(runs.into_iter().map(|r| r.history).collect(), recalcs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub seed: u64,
    pub random_runs: usize,
    pub recalc_interval: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { seed: 0, random_runs: RANDOM_RUNS, recalc_interval: TEST_RECALC_INTERVAL }
    }
}

/// Run any deminer. Pattern deminers need a stack of the matching kind.
pub fn simulate(
    grid: &Grid,
    mines: &[MetricPoint],
    kind: DeminerKind,
    stack: Option<&RiskStack>,
    config: &SimulationConfig,
) -> Result<AveragedRun, SimError> {
    match kind {
        DeminerKind::Random => run_random(grid, config.seed, config.random_runs),
        DeminerKind::Sequential => run_sequential_suite(grid),
        pattern => {
            let wanted = pattern.instance().expect("pattern deminer");
            let stack = stack.ok_or(SimError::MissingModel(wanted))?;
            if stack.kind != wanted {
                return Err(SimError::ModelMismatch { wanted, got: stack.kind });
            }
            run_pattern_deminer(grid, mines, stack, config.recalc_interval)
        }
    }
}
