//! Training and applying a full risk stack: clustering, patterns and a risk model.

use crate::clustering::{dbscan, Cluster, ClusteringError, ClusteringParams};
use crate::geodata::{Grid, MetricPoint, MinefieldDataset};
use crate::patterns::{
    build_anchors, effective_extent, fit_linear, fit_principal_curve, Pattern, PatternError, PatternFitConfig,
    ANCHOR_SPACING,
};
use crate::risk::{
    combine, derive_priors, fit_bayesian, fit_logistic, ExpertEstimates, LogisticReport, PriorDerivation, RiskError,
    RiskModel, Sample, SamplerConfig, TrainingSet,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
}

/// Which pattern-based deminer a stack implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Linear,
    Curved,
    Bayesian,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 3] = [InstanceKind::Linear, InstanceKind::Curved, InstanceKind::Bayesian];

    pub fn uses_curves(self) -> bool {
        !matches!(self, InstanceKind::Linear)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InstanceKind::Linear => "linear",
            InstanceKind::Curved => "curved",
            InstanceKind::Bayesian => "bayesian",
        }
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(InstanceKind::Linear),
            "curved" => Ok(InstanceKind::Curved),
            "bayesian" => Ok(InstanceKind::Bayesian),
            other => Err(format!("unknown instance kind '{other}' (expected linear, curved or bayesian)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub landmine_weight: f64,
    /// DBSCAN neighborhood radius in meters.
    pub cluster_max_distance: f64,
    /// Maximal distance of the principal curve to any cluster member, meters.
    pub pc_smoothness_factor: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters { landmine_weight: 60.0, cluster_max_distance: 75.0, pc_smoothness_factor: 10.0 }
    }
}

pub const LANDMINE_WEIGHTS: [f64; 3] = [30.0, 60.0, 90.0];
pub const CLUSTER_MAX_DISTANCES: [f64; 3] = [50.0, 75.0, 100.0];
pub const PC_SMOOTHNESS_FACTORS: [f64; 3] = [5.0, 10.0, 25.0];

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.landmine_weight) && ok(self.cluster_max_distance) && ok(self.pc_smoothness_factor) {
            Ok(())
        } else {
            Err(PipelineError::InvalidHyperparameters(format!("{self:?}")))
        }
    }

    /// The cross-validation grid: weight outermost, smoothness innermost.
    /// Linear stacks ignore the smoothness factor, so their grid keeps the default.
    pub fn grid(kind: InstanceKind) -> Vec<Hyperparameters> {
        let smooth: Vec<f64> = if kind.uses_curves() {
            PC_SMOOTHNESS_FACTORS.to_vec()
        } else {
            vec![Hyperparameters::default().pc_smoothness_factor]
        };
        let mut out = Vec::new();
        for &landmine_weight in &LANDMINE_WEIGHTS {
            for &cluster_max_distance in &CLUSTER_MAX_DISTANCES {
                for &pc_smoothness_factor in &smooth {
                    out.push(Hyperparameters { landmine_weight, cluster_max_distance, pc_smoothness_factor });
                }
            }
        }
        out
    }

    pub fn clustering(&self) -> ClusteringParams {
        ClusteringParams::mines(self.cluster_max_distance)
    }

    pub fn pattern_config(&self) -> PatternFitConfig {
        PatternFitConfig { pc_smoothness_factor: self.pc_smoothness_factor, ..PatternFitConfig::default() }
    }
}

/// A fully cleared region with every mine location known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRegion {
    pub id: String,
    pub grid: Grid,
    pub dataset: MinefieldDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCluster {
    pub cluster: Cluster,
    pub pattern: Pattern,
}

/// Fit one pattern. Curved patterns carry anchors at the training extent.
pub fn fit_pattern(cluster: &Cluster, kind: InstanceKind, hyper: &Hyperparameters) -> Result<Pattern, PatternError> {
    if kind.uses_curves() {
        fit_principal_curve(cluster, &hyper.pattern_config()).map(Pattern::Curved)
    } else {
        fit_linear(cluster).map(Pattern::Linear)
    }
}

/// Cluster `points` and fit a pattern to every cluster that admits one.
/// Single mines and clusters of coincident mines are skipped.
pub fn fit_patterns(points: &[MetricPoint], kind: InstanceKind, hyper: &Hyperparameters) -> Vec<FittedCluster> {
    dbscan(points, hyper.clustering())
        .clusters
        .into_iter()
        .filter_map(|cluster| {
            let pattern = fit_pattern(&cluster, kind, hyper).ok()?;
            Some(FittedCluster { cluster, pattern })
        })
        .collect()
}

/// Pool labeled (progress, distance) samples over every pattern of every region.
pub fn build_training_set(
    regions: &[TrainingRegion],
    kind: InstanceKind,
    hyper: &Hyperparameters,
) -> Result<TrainingSet, PipelineError> {
    hyper.validate()?;
    let mut samples = Vec::new();
    let mut n_patterns = 0;
    for region in regions {
        let fitted = fit_patterns(&region.dataset.mines, kind, hyper);
        n_patterns += fitted.len();
        let empty_centers: Vec<MetricPoint> =
            region.grid.tiles.iter().filter(|t| t.mine_indices.is_empty()).map(|t| t.center).collect();
        for fc in &fitted {
            for m in &region.dataset.mines {
                let pc = fc.pattern.transform(m);
                samples.push(Sample { gamma: pc.gamma, delta: pc.delta, label: true, weight: hyper.landmine_weight });
            }
            for c in &empty_centers {
                let pc = fc.pattern.transform(c);
                samples.push(Sample { gamma: pc.gamma, delta: pc.delta, label: false, weight: 1.0 });
            }
        }
    }
    if n_patterns == 0 {
        return Err(RiskError::NoClusters.into());
    }
    Ok(TrainingSet::new(samples)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainOptions {
    pub sampler: SamplerConfig,
    pub estimates: ExpertEstimates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub region_ids: Vec<String>,
    pub seed: u64,
    pub n_samples: usize,
    pub positive_weight: f64,
    pub logistic: Option<LogisticReport>,
    pub sampler: Option<SamplerConfig>,
    pub warnings: Vec<String>,
}

/// A trained model artifact: everything needed to turn found mines into a risk map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskStack {
    pub kind: InstanceKind,
    pub hyperparameters: Hyperparameters,
    pub model: RiskModel,
    /// Anchor extent per side used for curved patterns at prediction time.
    pub extent: Option<f64>,
    pub priors: Option<PriorDerivation>,
    pub metadata: TrainingMetadata,
}

pub fn train_stack(
    regions: &[TrainingRegion],
    kind: InstanceKind,
    hyper: &Hyperparameters,
    options: &TrainOptions,
) -> Result<RiskStack, PipelineError> {
    let ts = build_training_set(regions, kind, hyper)?;
    let mut warnings = Vec::new();
    let (model, logistic, priors) = match kind {
        InstanceKind::Linear | InstanceKind::Curved => {
            let fit = fit_logistic(&ts)?;
            if fit.report.separated {
                warnings.push("training data look perfectly separable; coefficients diverged".to_string());
            } else if !fit.report.converged {
                warnings.push(format!("logistic fit stopped after {} iterations", fit.report.iterations));
            }
            (fit.model, Some(fit.report), None)
        }
        InstanceKind::Bayesian => {
            let derivation = derive_priors(&options.estimates)?;
            let model = fit_bayesian(&ts, &derivation.priors, &options.sampler)?;
            if let RiskModel::Bayesian { posterior, .. } = &model {
                warnings.extend(posterior.warnings.iter().cloned());
            }
            (model, None, Some(derivation))
        }
    };
    let extent = kind.uses_curves().then(|| effective_extent(&model).max(ANCHOR_SPACING));
    Ok(RiskStack {
        kind,
        hyperparameters: *hyper,
        model,
        extent,
        priors,
        metadata: TrainingMetadata {
            region_ids: regions.iter().map(|r| r.id.clone()).collect(),
            seed: options.sampler.seed,
            n_samples: ts.samples.len(),
            positive_weight: ts.positive_weight(),
            logistic,
            sampler: (kind == InstanceKind::Bayesian).then_some(options.sampler),
            warnings,
        },
    })
}

/// Per-tile risk; `None` marks cleared tiles and tiles without any estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskMap {
    pub risk: Vec<Option<f64>>,
}

impl RiskMap {
    pub fn empty(n_tiles: usize) -> Self {
        RiskMap { risk: vec![None; n_tiles] }
    }

    pub fn has_estimates(&self) -> bool {
        self.risk.iter().any(Option::is_some)
    }

    /// Tile with the highest risk, ties to the lower index.
    pub fn argmax(&self) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in self.risk.iter().enumerate() {
            if let Some(r) = *r {
                if best.is_none_or(|(_, b)| r > b) {
                    best = Some((i, r));
                }
            }
        }
        best
    }
}

/// Memoizes fitted patterns by the exact set of member points.
#[derive(Debug, Default, Clone)]
pub struct PatternCache {
    entries: HashMap<Vec<(u64, u64)>, Option<Pattern>>,
}

impl PatternCache {
    fn key(cluster: &Cluster) -> Vec<(u64, u64)> {
        let mut k: Vec<(u64, u64)> = cluster.points.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect();
        k.sort_unstable();
        k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl RiskStack {
    /// Patterns for the mines found so far, ready for prediction.
    pub fn fit_patterns(&self, found: &[MetricPoint]) -> Vec<FittedCluster> {
        self.fit_patterns_cached(found, &mut PatternCache::default())
    }

    pub fn fit_patterns_cached(&self, found: &[MetricPoint], cache: &mut PatternCache) -> Vec<FittedCluster> {
        let hyper = self.hyperparameters;
        dbscan(found, hyper.clustering())
            .clusters
            .into_iter()
            .filter_map(|cluster| {
                let pattern = cache
                    .entries
                    .entry(PatternCache::key(&cluster))
                    .or_insert_with(|| {
                        fit_pattern(&cluster, self.kind, &hyper).ok().map(|p| match (p, self.extent) {
                            (Pattern::Curved(c), Some(extent)) => Pattern::Curved(build_anchors(c, extent)),
                            (p, _) => p,
                        })
                    })
                    .clone()?;
                Some(FittedCluster { cluster, pattern })
            })
            .collect()
    }

    /// Combined risk of every uncleared tile under `patterns`.
    pub fn risk_map(&self, grid: &Grid, patterns: &[FittedCluster], cleared: &[bool]) -> RiskMap {
        if patterns.is_empty() {
            return RiskMap::empty(grid.len());
        }
        let risk = grid
            .tiles
            .iter()
            .enumerate()
            .map(|(i, tile)| {
                if cleared.get(i).copied().unwrap_or(false) {
                    return None;
                }
                let per: Vec<f64> =
                    patterns.iter().map(|fc| self.model.predict(fc.pattern.transform(&tile.center))).collect();
                Some(combine(&per))
            })
            .collect();
        RiskMap { risk }
    }
}
