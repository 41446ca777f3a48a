//! Seeded synthetic minefields with planted mine patterns.

use super::SimError;
use crate::geodata::{assign_mines, build_grid, Bounds, Grid, MetricPoint, MinefieldDataset, DEFAULT_TILE_SIZE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MAX_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticPattern {
    Line,
    Arc,
    /// Alternating lines and arcs.
    Multi,
    /// No structure: mines uniform over the region.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub pattern: SyntheticPattern,
    /// Total mine count, split evenly over the clusters.
    pub n_mines: usize,
    /// Distance between consecutive mines along a pattern, meters.
    pub spacing: f64,
    /// Standard deviation of the Gaussian position noise, meters.
    pub jitter: f64,
    pub width: f64,
    pub height: f64,
    pub tile_size: f64,
    pub clusters: usize,
    pub arc_radius: f64,
    /// Minimum distance between mines of different planted patterns, meters.
    pub separation: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            pattern: SyntheticPattern::Line,
            n_mines: 24,
            spacing: 15.0,
            jitter: 2.0,
            width: 500.0,
            height: 500.0,
            tile_size: DEFAULT_TILE_SIZE,
            clusters: 2,
            arc_radius: 200.0,
            separation: 150.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMinefield {
    pub grid: Grid,
    pub dataset: MinefieldDataset,
    /// Cluster index of every mine (empty for uniform fields).
    pub labels: Vec<usize>,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), SimError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if self.n_mines < 2 {
            return Err(SimError::InvalidSpec("n_mines must be at least 2".into()));
        }
        if !(pos(self.spacing) && pos(self.width) && pos(self.height) && pos(self.tile_size) && pos(self.arc_radius)) {
            return Err(SimError::InvalidSpec("lengths must be positive".into()));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) || !(self.separation >= 0.0) {
            return Err(SimError::InvalidSpec("jitter and separation must be non-negative".into()));
        }
        if self.pattern != SyntheticPattern::Uniform && (self.clusters == 0 || self.clusters > self.n_mines / 2) {
            return Err(SimError::InvalidSpec("need at least two mines per cluster".into()));
        }
        Ok(())
    }
}

/// Noise-free mine positions of one planted pattern.
fn planted(shape: SyntheticPattern, n: usize, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<MetricPoint> {
    let center = MetricPoint::new(rng.random_range(0.0..spec.width), rng.random_range(0.0..spec.height));
    let heading = rng.random_range(0.0..PI);
    let offsets = (0..n).map(|i| (i as f64 - (n - 1) as f64 / 2.0) * spec.spacing);
    match shape {
        SyntheticPattern::Arc => {
            // the arc bulges to one side of its chord; pick the side at random
            let r = spec.arc_radius;
            let side = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let normal = MetricPoint::new(-heading.sin(), heading.cos()) * side;
            let circle_center = center + normal * r;
            let base = (center - circle_center).y.atan2((center - circle_center).x);
            offsets
                .map(|s| {
                    let a = base + s / r;
                    circle_center + MetricPoint::new(a.cos(), a.sin()) * r
                })
                .collect()
        }
        _ => {
            let dir = MetricPoint::new(heading.cos(), heading.sin());
            offsets.map(|s| center + dir * s).collect()
        }
    }
}

pub fn generate_synthetic_minefield(spec: &SyntheticSpec) -> Result<SyntheticMinefield, SimError> {
    spec.validate()?;
    let bounds = Bounds::new(MetricPoint::new(0.0, 0.0), MetricPoint::new(spec.width, spec.height));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let inside = |p: &MetricPoint| p.x >= 0.0 && p.y >= 0.0 && p.x < spec.width && p.y < spec.height;

    let (mines, labels) = if spec.pattern == SyntheticPattern::Uniform {
        let mines: Vec<MetricPoint> = (0..spec.n_mines)
            .map(|_| MetricPoint::new(rng.random_range(0.0..spec.width), rng.random_range(0.0..spec.height)))
            .collect();
        (mines, Vec::new())
    } else {
        let noise = Normal::new(0.0, spec.jitter).map_err(|e| SimError::InvalidSpec(e.to_string()))?;
        let mut mines = Vec::with_capacity(spec.n_mines);
        let mut labels = Vec::with_capacity(spec.n_mines);
        for k in 0..spec.clusters {
            let n = spec.n_mines / spec.clusters + usize::from(k < spec.n_mines % spec.clusters);
            let shape = match spec.pattern {
                SyntheticPattern::Multi if k % 2 == 1 => SyntheticPattern::Arc,
                SyntheticPattern::Multi => SyntheticPattern::Line,
                p => p,
            };
            let margin = 3.0 * spec.jitter;
            let placed = (0..MAX_ATTEMPTS)
                .map(|_| planted(shape, n, spec, &mut rng))
                .find(|pts| {
                    pts.iter().all(|p| {
                        p.x >= margin && p.y >= margin && p.x < spec.width - margin && p.y < spec.height - margin
                    }) && pts.iter().all(|p| mines.iter().all(|q: &MetricPoint| p.distance(q) >= spec.separation))
                })
                .ok_or_else(|| SimError::InvalidSpec(format!("pattern {k} does not fit inside the region")))?;
            for p in placed {
                let jittered = (0..MAX_ATTEMPTS)
                    .map(|_| p + MetricPoint::new(noise.sample(&mut rng), noise.sample(&mut rng)))
                    .find(|q| inside(q))
                    .ok_or(SimError::JitterEscaped)?;
                mines.push(jittered);
                labels.push(k);
            }
        }
        (mines, labels)
    };

    let dataset = MinefieldDataset::from_points(mines);
    let grid = assign_mines(build_grid(bounds, spec.tile_size)?, &dataset)?;
    Ok(SyntheticMinefield { grid, dataset, labels })
}
