//! DBSCAN over found mine locations.
//!
//! Neighborhoods are inclusive (`distance <= eps`) and count the query point
//! itself, so `min_pts = 1` makes every point a core point and the clusters are
//! exactly the connected components of the eps-distance graph.

use crate::geodata::MetricPoint;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClusteringError {
    #[error("invalid clustering parameters: eps={eps}, min_pts={min_pts}")]
    InvalidParams { eps: f64, min_pts: usize },
    #[error("incremental update requested with different parameters than the previous result")]
    ParamsMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringParams {
    /// Neighborhood radius in meters.
    pub eps: f64,
    pub min_pts: usize,
}

impl ClusteringParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self, ClusteringError> {
        let p = ClusteringParams { eps, min_pts };
        p.validate()?;
        Ok(p)
    }

    /// The configuration used for mine clustering: `min_pts = 1`.
    pub fn mines(eps: f64) -> Self {
        ClusteringParams { eps, min_pts: 1 }
    }

    pub fn validate(&self) -> Result<(), ClusteringError> {
        if self.eps.is_finite() && self.eps > 0.0 && self.min_pts >= 1 {
            Ok(())
        } else {
            Err(ClusteringError::InvalidParams { eps: self.eps, min_pts: self.min_pts })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Indices into the clustered point set, ascending.
    pub member_indices: Vec<usize>,
    pub points: Vec<MetricPoint>,
    /// Centroid of `points`.
    pub center: MetricPoint,
}

impl Cluster {
    pub fn from_members(points: &[MetricPoint], mut member_indices: Vec<usize>) -> Self {
        member_indices.sort_unstable();
        let members: Vec<MetricPoint> = member_indices.iter().map(|&i| points[i]).collect();
        let center = centroid(&members);
        Cluster { member_indices, points: members, center }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn centroid(points: &[MetricPoint]) -> MetricPoint {
    let n = points.len().max(1) as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    MetricPoint::new(sx / n, sy / n)
}

/// Result of one clustering pass, kept so it can be extended incrementally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub params: ClusteringParams,
    pub points: Vec<MetricPoint>,
    /// Ordered by smallest member index.
    pub clusters: Vec<Cluster>,
    pub noise: Vec<usize>,
}

pub fn dbscan(points: &[MetricPoint], params: ClusteringParams) -> Clustering {
    let n = points.len();
    let eps_sq = params.eps * params.eps;
    let neighborhoods: Vec<Vec<usize>> =
        (0..n).map(|i| (0..n).filter(|&j| points[i].distance_sq(&points[j]) <= eps_sq).collect()).collect();
    let is_core: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= params.min_pts).collect();

    // Core points form clusters through core-to-core reachability.
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut next_label = 0;
    for seed in 0..n {
        if !is_core[seed] || label[seed].is_some() {
            continue;
        }
        label[seed] = Some(next_label);
        let mut stack = vec![seed];
        while let Some(q) = stack.pop() {
            for &r in &neighborhoods[q] {
                if is_core[r] && label[r].is_none() {
                    label[r] = Some(next_label);
                    stack.push(r);
                }
            }
        }
        next_label += 1;
    }

    // Border points join the cluster of their nearest core neighbor, which
    // keeps membership independent of input order.
    let mut noise = Vec::new();
    for i in 0..n {
        if is_core[i] {
            continue;
        }
        let nearest_core = neighborhoods[i].iter().filter(|&&j| is_core[j]).min_by(|&&a, &&b| {
            points[i].distance_sq(&points[a]).total_cmp(&points[i].distance_sq(&points[b])).then(a.cmp(&b))
        });
        match nearest_core {
            Some(&c) => label[i] = label[c],
            None => noise.push(i),
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); next_label];
    for (i, l) in label.iter().enumerate() {
        if let Some(l) = l {
            members[*l].push(i);
        }
    }
    let mut clusters: Vec<Cluster> =
        members.into_iter().filter(|m| !m.is_empty()).map(|m| Cluster::from_members(points, m)).collect();
    clusters.sort_by_key(|c| c.member_indices[0]);

    Clustering { params, points: points.to_vec(), clusters, noise }
}

/// Extend a previous clustering with new points. Equivalent to rerunning
/// [`dbscan`] on the union, which is what it does.
pub fn incremental_recluster(
    previous: &Clustering,
    new_points: &[MetricPoint],
    params: ClusteringParams,
) -> Result<Clustering, ClusteringError> {
    if previous.params != params {
        return Err(ClusteringError::ParamsMismatch);
    }
    let mut all = previous.points.clone();
    all.extend_from_slice(new_points);
    Ok(dbscan(&all, params))
}
