//! Pattern-based residual landmine risk estimation.
//!
//! The pipeline runs in three steps over the locations of mines found so far:
//! found mines are grouped with DBSCAN ([`clustering`]), a linear or curved
//! pattern is fitted to every cluster ([`patterns`]), and a logistic risk
//! model maps each tile's (progress, distance) pattern coordinates to a mine
//! probability ([`risk`]). Per-cluster probabilities are combined into one
//! risk per tile. [`simulator`] runs virtual clearance operations over a
//! [`geodata::Grid`] to score clearance strategies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod geodata;
pub mod io;
pub mod patterns;
pub mod pipeline;
pub mod risk;
pub mod simulator;

pub use clustering::{dbscan, Cluster, Clustering, ClusteringParams};
pub use geodata::{Bounds, GeoPoint, Grid, MetricPoint, MinefieldDataset, Tile};
pub use patterns::{CurvedPattern, LinearPattern, Pattern, PatternCoordinates, PatternFitConfig};
pub use pipeline::{Hyperparameters, InstanceKind, RiskStack, TrainingRegion};
pub use risk::{combine, Coefficients, RiskModel};
