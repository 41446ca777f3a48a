//! Geometric mine patterns and the (progress, distance) representation.

mod curve;
mod linear;
pub mod spline;

pub use curve::{
    build_anchors, fit_principal_curve, mean_squared_distance, point_at_arc, project_onto_polyline, transform_curve,
    CurveKnot, CurvedPattern, Projection, ANCHOR_SPACING, TRAINING_EXTENT,
};
pub use linear::{fit_linear, principal_direction, transform_linear, LinearPattern};

use crate::geodata::MetricPoint;
use crate::risk::RiskModel;
use serde::{Deserialize, Serialize};

/// Risk threshold defining the effective extent of a curved pattern.
pub const EXTENT_RISK_THRESHOLD: f64 = 0.05;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PatternError {
    #[error("a pattern needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("cluster points are coincident")]
    Degenerate,
    #[error("invalid pattern fit configuration: {0}")]
    InvalidConfig(&'static str),
}

/// A point expressed relative to a pattern (both in meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternCoordinates {
    /// Progress: distance from the cluster center along the pattern.
    pub gamma: f64,
    /// Distance from the point to its projection on the pattern.
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternFitConfig {
    pub pc_smoothness_factor: f64,
    pub max_spline_degree: usize,
    /// Relative change in mean squared projection distance that ends the iteration.
    pub convergence_threshold: f64,
    pub max_iterations: usize,
}

impl Default for PatternFitConfig {
    fn default() -> Self {
        PatternFitConfig {
            pc_smoothness_factor: 10.0,
            max_spline_degree: 2,
            convergence_threshold: 1e-3,
            max_iterations: 50,
        }
    }
}

impl PatternFitConfig {
    pub fn validate(&self) -> Result<(), PatternError> {
        if !(self.pc_smoothness_factor.is_finite() && self.pc_smoothness_factor > 0.0) {
            return Err(PatternError::InvalidConfig("pc_smoothness_factor must be positive"));
        }
        if self.max_spline_degree == 0 {
            return Err(PatternError::InvalidConfig("max_spline_degree must be positive"));
        }
        if !(self.convergence_threshold > 0.0) || self.max_iterations == 0 {
            return Err(PatternError::InvalidConfig("convergence settings must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pattern {
    Linear(LinearPattern),
    Curved(CurvedPattern),
}

impl Pattern {
    pub fn transform(&self, p: &MetricPoint) -> PatternCoordinates {
        match self {
            Pattern::Linear(l) => l.transform(p),
            Pattern::Curved(c) => c.transform(p),
        }
    }

    /// Polyline for drawing the pattern, reaching `reach` meters either side of
    /// the center for linear patterns; curved patterns use their anchors.
    pub fn overlay(&self, reach: f64) -> Vec<MetricPoint> {
        match self {
            Pattern::Linear(l) => vec![l.point_at(-reach), l.point_at(reach)],
            Pattern::Curved(c) => c.anchors.clone(),
        }
    }
}

/// Smallest progress on the anchor lattice where the model's risk on the
/// pattern itself (distance zero) falls below 5%, capped at the training extent.
pub fn effective_extent(model: &RiskModel) -> f64 {
    let steps = (TRAINING_EXTENT / ANCHOR_SPACING).round() as usize;
    (0..=steps)
        .map(|k| k as f64 * ANCHOR_SPACING)
        .find(|&gamma| model.predict(PatternCoordinates { gamma, delta: 0.0 }) < EXTENT_RISK_THRESHOLD)
        .unwrap_or(TRAINING_EXTENT)
}
