//! One clearance session: grid, progress, policy and the planner behind suggestions.
//!
//! All mutations go through [`Session::clear`], which is also what the action
//! log replays, so a replayed session ends in the same state.

use crate::error::ApiError;
use minerisk_core::geodata::{build_grid, Grid, GridSummary, MetricPoint};
use minerisk_core::io::DatasetFile;
use minerisk_core::patterns::Pattern;
use minerisk_core::pipeline::{InstanceKind, RiskStack};
use minerisk_core::simulator::{
    generate_synthetic_minefield, serpentine_order, ClearanceState, DeminerKind, Direction, PatternPlanner, SimError,
    SyntheticSpec, TEST_RECALC_INTERVAL,
};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Arc;

/// Reach of linear pattern overlays either side of the cluster center (m).
const OVERLAY_REACH: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionMode {
    /// Findings come from the loaded dataset.
    #[default]
    Simulation,
    /// The operator reports findings; the dataset only provides the grid.
    Live,
}

fn default_kind() -> DeminerKind {
    DeminerKind::Sequential
}

fn default_interval() -> usize {
    TEST_RECALC_INTERVAL
}

fn default_direction() -> Direction {
    Direction::Northbound
}

/// Body of `POST /sessions`. Exactly one of `dataset` and `synthetic` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    #[serde(default)]
    pub dataset: Option<DatasetFile>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default = "default_kind")]
    pub instance: DeminerKind,
    #[serde(default)]
    pub mode: SessionMode,
    #[serde(default = "default_interval")]
    pub recalc_interval: usize,
    #[serde(default)]
    pub recalc_on_find: bool,
    /// Starting side of the serpentine fallback order.
    #[serde(default = "default_direction")]
    pub direction: Direction,
    /// Seed for the random policy's suggestions.
    #[serde(default)]
    pub seed: u64,
}

/// Body of `POST /sessions/{id}/clear`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClearRequest {
    pub tile: usize,
    /// Revision the client last saw; a mismatch is rejected as stale.
    #[serde(default)]
    pub revision: Option<u64>,
    /// Mines found in the tile (live mode only).
    #[serde(default)]
    pub mines: Vec<MetricPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearOutcome {
    pub revision: u64,
    pub tile: usize,
    pub timestep: usize,
    pub found: usize,
    pub found_total: usize,
    pub risk_changed: bool,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridView {
    pub n_cols: usize,
    pub n_rows: usize,
    pub tile_size: f64,
    pub origin: MetricPoint,
    /// Mine counts are only known in simulation mode.
    pub summary: Option<GridSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSoFar {
    pub timestep: usize,
    pub share_found: f64,
    /// Sum of the shares so far over the tile count; the Demining Score once complete.
    pub demining_score: f64,
    pub t50: Option<f64>,
    pub t75: Option<f64>,
    pub t90: Option<f64>,
    pub t100: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRef {
    pub kind: InstanceKind,
    pub landmine_weight: f64,
    pub cluster_max_distance: f64,
    pub pc_smoothness_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub id: String,
    pub mode: SessionMode,
    pub instance: DeminerKind,
    pub model: Option<ModelRef>,
    pub revision: u64,
    pub grid: GridView,
    pub cleared: Vec<bool>,
    pub route: Vec<usize>,
    pub found_mines: Vec<MetricPoint>,
    /// Mines found at each timestep.
    pub found_per_step: Vec<usize>,
    /// Share of all mines found after each timestep (simulation mode).
    pub shares: Option<Vec<f64>>,
    pub scorecard: Option<ScoreSoFar>,
    pub first_pattern_at: Option<usize>,
    pub recalcs: usize,
    pub complete: bool,
    pub created_ms: u64,
    pub updated_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileRisk {
    pub tile: usize,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternOverlay {
    pub kind: String,
    pub center: MetricPoint,
    pub members: Vec<MetricPoint>,
    pub polyline: Vec<MetricPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskView {
    pub revision: u64,
    /// Uncleared tiles with an estimate, ascending by tile.
    pub tiles: Vec<TileRisk>,
    pub patterns: Vec<PatternOverlay>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionSource {
    Risk,
    Serpentine,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestionView {
    pub revision: u64,
    /// `None` once every tile is cleared.
    pub tile: Option<usize>,
    pub risk: Option<f64>,
    pub source: Option<SuggestionSource>,
}

/// Trained models available to new sessions, by instance kind.
pub type ModelRegistry = HashMap<InstanceKind, Arc<RiskStack>>;

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub spec: SessionSpec,
    grid: Grid,
    mines: Vec<MetricPoint>,
    state: ClearanceState,
    found: Vec<MetricPoint>,
    found_per_step: Vec<usize>,
    stack: Option<Arc<RiskStack>>,
    planner: Option<PatternPlanner>,
    serpentine: Vec<usize>,
    revision: u64,
    pub created_ms: u64,
    pub updated_ms: u64,
}

fn sim_error(e: SimError) -> ApiError {
    ApiError::bad_request(e.to_string())
}

impl Session {
    pub fn create(id: String, spec: SessionSpec, models: &ModelRegistry, now_ms: u64) -> Result<Session, ApiError> {
        if spec.recalc_interval == 0 {
            return Err(ApiError::bad_request("recalc_interval must be at least 1"));
        }
        let (grid, mines) = match (&spec.dataset, &spec.synthetic) {
            (Some(d), None) => {
                let region = d.to_region().map_err(|e| ApiError::bad_request(e.to_string()))?;
                (region.grid, region.dataset.mines)
            }
            (None, Some(s)) => {
                let field = generate_synthetic_minefield(s).map_err(sim_error)?;
                (field.grid, field.dataset.mines)
            }
            _ => return Err(ApiError::bad_request("give exactly one of 'dataset' and 'synthetic'")),
        };
        let (grid, mines) = match spec.mode {
            SessionMode::Simulation => (grid, mines),
            SessionMode::Live => (
                build_grid(grid.bounds(), grid.tile_size).map_err(|e| ApiError::bad_request(e.to_string()))?,
                Vec::new(),
            ),
        };
        let stack = match spec.instance.instance() {
            Some(kind) => Some(models.get(&kind).cloned().ok_or_else(|| {
                ApiError::conflict("model_missing", format!("no trained {kind} model is loaded; run `train` first"))
            })?),
            None => None,
        };
        let planner = match &stack {
            Some(_) => Some(
                PatternPlanner::new(&grid, spec.direction, spec.recalc_interval)
                    .map_err(sim_error)?
                    .with_recalc_on_find(spec.recalc_on_find),
            ),
            None => None,
        };
        Ok(Session {
            id,
            serpentine: serpentine_order(&grid, spec.direction),
            state: ClearanceState::new(&grid),
            spec,
            grid,
            mines,
            found: Vec::new(),
            found_per_step: Vec::new(),
            stack,
            planner,
            revision: 0,
            created_ms: now_ms,
            updated_ms: now_ms,
        })
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn is_complete(&self) -> bool {
        self.state.is_complete()
    }

    pub fn clear(&mut self, req: &ClearRequest, now_ms: u64) -> Result<ClearOutcome, ApiError> {
        if let Some(r) = req.revision {
            if r != self.revision {
                return Err(ApiError::stale(r, self.revision));
            }
        }
        let tile = req.tile;
        if tile >= self.grid.len() {
            return Err(ApiError::bad_request(format!("tile {tile} does not exist (grid has {})", self.grid.len())));
        }
        if self.state.cleared[tile] {
            return Err(ApiError::conflict("already_cleared", format!("tile {tile} is already cleared")));
        }
        if !self.state.is_reachable(&self.grid, tile) {
            return Err(ApiError::conflict(
                "unreachable",
                format!("tile {tile} is neither on the border nor next to a cleared tile"),
            ));
        }
        let found: Vec<MetricPoint> = match self.spec.mode {
            SessionMode::Simulation => {
                if !req.mines.is_empty() {
                    return Err(ApiError::bad_request("simulation sessions take findings from the dataset"));
                }
                self.grid.tiles[tile].mine_indices.iter().map(|&i| self.mines[i]).collect()
            }
            SessionMode::Live => {
                if let Some(p) = req.mines.iter().find(|p| self.grid.tile_index_of(p) != Some(tile)) {
                    return Err(ApiError::bad_request(format!(
                        "reported mine ({}, {}) is outside tile {tile}",
                        p.x, p.y
                    )));
                }
                req.mines.clone()
            }
        };
        self.state.step(&self.grid, tile).map_err(|e| ApiError::internal(e.to_string()))?;
        self.found.extend_from_slice(&found);
        self.found_per_step.push(found.len());
        let risk_changed = match (&mut self.planner, &self.stack) {
            (Some(planner), Some(stack)) => {
                planner.observe(&found);
                planner.update(stack, &self.grid, &self.state)
            }
            _ => false,
        };
        self.revision += 1;
        self.updated_ms = now_ms;
        Ok(ClearOutcome {
            revision: self.revision,
            tile,
            timestep: self.state.timestep,
            found: found.len(),
            found_total: self.found.len(),
            risk_changed,
            complete: self.state.is_complete(),
        })
    }

    fn score_so_far(&self) -> ScoreSoFar {
        let shares = &self.state.shares;
        let n = self.grid.len();
        let reached = |x: f64| shares.iter().position(|&l| l >= x - 1e-12).map(|i| 100.0 * (i + 1) as f64 / n as f64);
        ScoreSoFar {
            timestep: self.state.timestep,
            share_found: self.state.share_found(),
            demining_score: shares.iter().sum::<f64>() / n as f64,
            t50: reached(0.5),
            t75: reached(0.75),
            t90: reached(0.9),
            t100: reached(1.0),
        }
    }

    pub fn state_view(&self) -> StateView {
        let simulation = self.spec.mode == SessionMode::Simulation;
        StateView {
            id: self.id.clone(),
            mode: self.spec.mode,
            instance: self.spec.instance,
            model: self.stack.as_ref().map(|s| ModelRef {
                kind: s.kind,
                landmine_weight: s.hyperparameters.landmine_weight,
                cluster_max_distance: s.hyperparameters.cluster_max_distance,
                pc_smoothness_factor: s.hyperparameters.pc_smoothness_factor,
            }),
            revision: self.revision,
            grid: GridView {
                n_cols: self.grid.n_cols,
                n_rows: self.grid.n_rows,
                tile_size: self.grid.tile_size,
                origin: self.grid.origin,
                summary: simulation.then(|| self.grid.summary()),
            },
            cleared: self.state.cleared.clone(),
            route: self.state.route.clone(),
            found_mines: self.found.clone(),
            found_per_step: self.found_per_step.clone(),
            shares: simulation.then(|| self.state.shares.clone()),
            scorecard: simulation.then(|| self.score_so_far()),
            first_pattern_at: self.planner.as_ref().and_then(|p| p.first_pattern_at()),
            recalcs: self.planner.as_ref().map_or(0, |p| p.recalcs()),
            complete: self.state.is_complete(),
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
        }
    }

    pub fn risk_view(&self) -> RiskView {
        let Some(planner) = &self.planner else {
            return RiskView { revision: self.revision, tiles: Vec::new(), patterns: Vec::new() };
        };
        let tiles = planner
            .risk_map()
            .risk
            .iter()
            .enumerate()
            .filter(|&(t, _)| !self.state.cleared[t])
            .filter_map(|(tile, r)| r.map(|risk| TileRisk { tile, risk }))
            .collect();
        let patterns = planner
            .patterns()
            .iter()
            .map(|fc| PatternOverlay {
                kind: match fc.pattern {
                    Pattern::Linear(_) => "linear".into(),
                    Pattern::Curved(_) => "curved".into(),
                },
                center: fc.cluster.center,
                members: fc.cluster.points.clone(),
                polyline: fc.pattern.overlay(OVERLAY_REACH),
            })
            .collect();
        RiskView { revision: self.revision, tiles, patterns }
    }

    pub fn suggestion(&self) -> SuggestionView {
        let none = SuggestionView { revision: self.revision, tile: None, risk: None, source: None };
        if self.state.is_complete() {
            return none;
        }
        let (tile, risk, source) = match (&self.planner, self.spec.instance) {
            (Some(planner), _) => match planner.choose(&self.grid, &self.state) {
                Some(s) => {
                    let source = if s.risk.is_some() { SuggestionSource::Risk } else { SuggestionSource::Serpentine };
                    (s.tile, s.risk, source)
                }
                None => return none,
            },
            (None, DeminerKind::Random) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
                rng.set_stream(self.revision);
                match self.state.reachable(&self.grid).choose(&mut rng) {
                    Some(&t) => (t, None, SuggestionSource::Random),
                    None => return none,
                }
            }
            (None, _) => {
                let next = self.serpentine.iter().copied().find(|&t| self.state.is_reachable(&self.grid, t));
                match next {
                    Some(t) => (t, None, SuggestionSource::Serpentine),
                    None => return none,
                }
            }
        };
        SuggestionView { revision: self.revision, tile: Some(tile), risk, source: Some(source) }
    }
}
