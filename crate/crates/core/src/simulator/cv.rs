//! Two-fold cross-validation over a hyperparameter grid.

use super::deminers::{run_pattern_deminer, CV_RECALC_INTERVAL};
use super::SimError;
use crate::pipeline::{train_stack, Hyperparameters, InstanceKind, TrainOptions, TrainingRegion};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub train_region: String,
    pub validation_region: String,
    pub validation_tiles: usize,
    /// `None` when training failed; the message is in `error`.
    pub demining_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub hyperparameters: Hyperparameters,
    pub folds: Vec<FoldResult>,
    /// Tile-weighted mean of the fold scores; `None` if any fold failed.
    pub weighted_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub kind: InstanceKind,
    pub recalc_interval: usize,
    pub cells: Vec<CvCell>,
    pub best_index: usize,
    pub best: Hyperparameters,
    pub best_score: f64,
}

/// Weighted mean of `(score, weight)` pairs.
pub fn weighted_average(parts: &[(f64, usize)]) -> f64 {
    let total: usize = parts.iter().map(|p| p.1).sum();
    parts.iter().map(|&(s, w)| s * w as f64).sum::<f64>() / total as f64
}

fn evaluate_cell(
    regions: &[TrainingRegion; 2],
    kind: InstanceKind,
    hyper: &Hyperparameters,
    options: &TrainOptions,
    recalc_interval: usize,
) -> CvCell {
    let folds: Vec<FoldResult> = [(0usize, 1usize), (1, 0)]
        .iter()
        .map(|&(a, b)| {
            let (train, valid) = (&regions[a], &regions[b]);
            let outcome = train_stack(std::slice::from_ref(train), kind, hyper, options)
                .map_err(|e| e.to_string())
                .and_then(|stack| {
                    run_pattern_deminer(&valid.grid, &valid.dataset.mines, &stack, recalc_interval)
                        .and_then(|run| run.average.scorecard(valid.grid.len()))
                        .map(|s| s.demining_score)
                        .map_err(|e| e.to_string())
                });
            FoldResult {
                train_region: train.id.clone(),
                validation_region: valid.id.clone(),
                validation_tiles: valid.grid.len(),
                demining_score: outcome.as_ref().ok().copied(),
                error: outcome.err(),
            }
        })
        .collect();
    let weighted_score = folds
        .iter()
        .map(|f| f.demining_score.map(|s| (s, f.validation_tiles)))
        .collect::<Option<Vec<_>>>()
        .map(|parts| weighted_average(&parts));
    CvCell { hyperparameters: *hyper, folds, weighted_score }
}

/// Train on one region and validate on the other, both ways, for every grid
/// cell. The best cell has the highest weighted score; ties go to the earlier cell.
pub fn cross_validate(
    regions: &[TrainingRegion; 2],
    kind: InstanceKind,
    grid: &[Hyperparameters],
    options: &TrainOptions,
    recalc_interval: usize,
) -> Result<CvReport, SimError> {
    if grid.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    if recalc_interval == 0 {
        return Err(SimError::InvalidRecalcInterval);
    }
    #[cfg(feature = "parallel")]
    let cells: Vec<CvCell> = {
        use rayon::prelude::*;
        grid.par_iter().map(|h| evaluate_cell(regions, kind, h, options, recalc_interval)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cells: Vec<CvCell> = grid.iter().map(|h| evaluate_cell(regions, kind, h, options, recalc_interval)).collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, c) in cells.iter().enumerate() {
        if let Some(s) = c.weighted_score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    let (best_index, best_score) = best.ok_or_else(|| {
        SimError::AllCellsFailed(cells[0].folds.iter().filter_map(|f| f.error.clone()).next().unwrap_or_default())
    })?;
    Ok(CvReport { kind, recalc_interval, best: cells[best_index].hyperparameters, best_index, best_score, cells })
}

/// Cross-validation with the reference cadence.
pub fn cross_validate_default(
    regions: &[TrainingRegion; 2],
    kind: InstanceKind,
    options: &TrainOptions,
) -> Result<CvReport, SimError> {
    cross_validate(regions, kind, &Hyperparameters::grid(kind), options, CV_RECALC_INTERVAL)
}
