use super::{PatternCoordinates, PatternError};
use crate::clustering::{centroid, Cluster};
use crate::geodata::MetricPoint;
use serde::{Deserialize, Serialize};

/// Total variance below which a cluster counts as a single location (m²).
const MIN_VARIANCE: f64 = 1e-12;

/// First principal component of a cluster, anchored at the cluster center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPattern {
    pub center: MetricPoint,
    /// Unit vector with non-negative x (non-negative y when x is zero).
    pub direction: MetricPoint,
}

/// Largest-eigenvalue eigenvector of the 2x2 covariance of `points`.
pub fn principal_direction(points: &[MetricPoint]) -> Result<(MetricPoint, MetricPoint), PatternError> {
    if points.len() < 2 {
        return Err(PatternError::TooFewPoints(points.len()));
    }
    let c = centroid(points);
    let n = points.len() as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.x - c.x, p.y - c.y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let (a, b, d) = (sxx / n, sxy / n, syy / n);
    if a + d <= MIN_VARIANCE {
        return Err(PatternError::Degenerate);
    }
    let half_gap = ((a - d) / 2.0).hypot(b);
    let lambda = (a + d) / 2.0 + half_gap;
    let v = if b == 0.0 {
        if a >= d {
            MetricPoint::new(1.0, 0.0)
        } else {
            MetricPoint::new(0.0, 1.0)
        }
    } else if a >= d {
        MetricPoint::new(lambda - d, b)
    } else {
        MetricPoint::new(b, lambda - a)
    };
    let mut dir = v * (1.0 / v.norm());
    if dir.x < 0.0 || (dir.x == 0.0 && dir.y < 0.0) {
        dir = dir * -1.0;
    }
    Ok((c, dir))
}

pub fn fit_linear(cluster: &Cluster) -> Result<LinearPattern, PatternError> {
    let (center, direction) = principal_direction(&cluster.points)?;
    Ok(LinearPattern { center, direction })
}

impl LinearPattern {
    /// Signed position of the orthogonal projection along the direction.
    pub fn projection_offset(&self, p: &MetricPoint) -> f64 {
        (*p - self.center).dot(&self.direction)
    }

    pub fn transform(&self, p: &MetricPoint) -> PatternCoordinates {
        let v = *p - self.center;
        let along = v.dot(&self.direction);
        let across = v.x * self.direction.y - v.y * self.direction.x;
        PatternCoordinates { gamma: along.abs(), delta: across.abs() }
    }

    pub fn point_at(&self, offset: f64) -> MetricPoint {
        self.center + self.direction * offset
    }
}

pub fn transform_linear(pattern: &LinearPattern, p: &MetricPoint) -> PatternCoordinates {
    pattern.transform(p)
}
