//! Virtual clearance operations and their scores.

mod cv;
mod deminers;
mod metrics;
mod state;
mod synthetic;

pub use cv::{cross_validate, cross_validate_default, weighted_average, CvCell, CvReport, FoldResult};
pub use deminers::{
    run_pattern_deminer, run_pattern_once, run_random, run_random_once, run_sequential, run_sequential_suite, simulate,
    AveragedRun, DeminerKind, PatternPlanner, PatternRun, SimulationConfig, Suggestion, CV_RECALC_INTERVAL,
    RANDOM_RUNS, TEST_RECALC_INTERVAL,
};
pub use metrics::{demining_score, t_x, ClearanceHistory, Scorecard};
pub use state::{audit_route, serpentine_order, ClearanceState, Direction};
pub use synthetic::{generate_synthetic_minefield, SyntheticMinefield, SyntheticPattern, SyntheticSpec};

use crate::geodata::GeoError;
use crate::pipeline::InstanceKind;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("tile {0} does not exist")]
    TileOutOfRange(usize),
    #[error("tile {0} is already cleared")]
    AlreadyCleared(usize),
    #[error("tile {0} is not reachable")]
    Unreachable(usize),
    #[error("history has {got} entries, expected {expected}")]
    IncompleteHistory { got: usize, expected: usize },
    #[error("no runs to average")]
    NoRuns,
    #[error("recalculation interval must be at least 1")]
    InvalidRecalcInterval,
    #[error("the {0} deminer needs a trained model; run `train` first")]
    MissingModel(InstanceKind),
    #[error("the {wanted} deminer cannot use a {got} model")]
    ModelMismatch { wanted: InstanceKind, got: InstanceKind },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("no hyperparameter cell could be evaluated: {0}")]
    AllCellsFailed(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("a jittered mine stayed outside the region after 100 attempts")]
    JitterEscaped,
    #[error(transparent)]
    Geo(#[from] GeoError),
}
