use minerisk_core::clustering::dbscan;
use minerisk_core::geodata::MetricPoint;
use minerisk_core::pipeline::{fit_pattern, train_stack, Hyperparameters, InstanceKind, TrainOptions, TrainingRegion};
use minerisk_core::risk::{derive_priors, sigmoid, ExpertEstimates, PriorDerivation};
use minerisk_core::simulator::{
    generate_synthetic_minefield, simulate, DeminerKind, Scorecard, SimulationConfig, SyntheticSpec,
    TEST_RECALC_INTERVAL,
};
use serde::{Deserialize, Serialize};

fn parse<'a, T: Deserialize<'a>>(request: &'a str) -> Result<T, String> {
    serde_json::from_str(request).map_err(|e| format!("bad request: {e}"))
}

fn reply<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn default_runs() -> usize {
    4
}

fn default_interval() -> usize {
    TEST_RECALC_INTERVAL
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    #[serde(default)]
    pub spec: SyntheticSpec,
    #[serde(default = "default_runs")]
    pub random_runs: usize,
    #[serde(default = "default_interval")]
    pub recalc_interval: usize,
}

#[derive(Debug, Serialize)]
pub struct DeminerTrace {
    pub deminer: DeminerKind,
    pub scorecard: Scorecard,
    pub shares: Vec<f64>,
    /// Route of the first run, for replaying the clearance.
    pub route: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct SimulateReply {
    pub n_cols: usize,
    pub n_rows: usize,
    pub tile_size: f64,
    pub mines: Vec<MetricPoint>,
    pub mines_per_tile: Vec<usize>,
    pub traces: Vec<DeminerTrace>,
}

pub fn simulate_field(request: &str) -> Result<String, String> {
    let req: SimulateRequest = parse(request)?;
    let field = generate_synthetic_minefield(&req.spec).map_err(|e| e.to_string())?;
    let siblings = (1..=2)
        .map(|k| {
            let spec = SyntheticSpec { seed: req.spec.seed.wrapping_add(1000 * k), ..req.spec };
            generate_synthetic_minefield(&spec).map(|f| TrainingRegion {
                id: format!("sibling-{k}"),
                grid: f.grid,
                dataset: f.dataset,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let stack = train_stack(&siblings, InstanceKind::Linear, &Hyperparameters::default(), &TrainOptions::default())
        .map_err(|e| format!("training the linear model failed: {e}"))?;
    let config =
        SimulationConfig { seed: req.spec.seed, random_runs: req.random_runs, recalc_interval: req.recalc_interval };
    let grid = &field.grid;
    let traces = [DeminerKind::Random, DeminerKind::Sequential, DeminerKind::Linear]
        .into_iter()
        .map(|kind| {
            let run = simulate(grid, &field.dataset.mines, kind, Some(&stack), &config).map_err(|e| e.to_string())?;
            Ok(DeminerTrace {
                deminer: kind,
                scorecard: run.average.scorecard(grid.len()).map_err(|e| e.to_string())?,
                shares: run.average.shares,
                route: run.runs[0].route.clone(),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    reply(&SimulateReply {
        n_cols: grid.n_cols,
        n_rows: grid.n_rows,
        tile_size: grid.tile_size,
        mines: field.dataset.mines.clone(),
        mines_per_tile: grid.tiles.iter().map(|t| t.mine_indices.len()).collect(),
        traces,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExploreRequest {
    pub points: Vec<MetricPoint>,
    #[serde(default)]
    pub hyperparameters: Option<Hyperparameters>,
}

#[derive(Debug, Serialize)]
pub struct ClusterView {
    pub members: Vec<usize>,
    pub center: MetricPoint,
    /// Two points 300 m either side of the center.
    pub linear: Option<Vec<MetricPoint>>,
    /// Anchors of the principal curve.
    pub curved: Option<Vec<MetricPoint>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct ExploreReply {
    pub clusters: Vec<ClusterView>,
    pub noise: Vec<usize>,
}

pub fn explore_patterns(request: &str) -> Result<String, String> {
    let req: ExploreRequest = parse(request)?;
    let hyper = req.hyperparameters.unwrap_or_default();
    hyper.validate().map_err(|e| e.to_string())?;
    if req.points.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err("points must be finite".into());
    }
    let clustering = dbscan(&req.points, hyper.clustering());
    let clusters = clustering
        .clusters
        .iter()
        .map(|c| {
            let mut errors = Vec::new();
            let mut fit = |kind| match fit_pattern(c, kind, &hyper) {
                Ok(p) => Some(p.overlay(300.0)),
                Err(e) => {
                    errors.push(format!("{kind}: {e}"));
                    None
                }
            };
            let (linear, curved) = (fit(InstanceKind::Linear), fit(InstanceKind::Curved));
            ClusterView { members: c.member_indices.clone(), center: c.center, linear, curved, errors }
        })
        .collect();
    reply(&ExploreReply { clusters, noise: clustering.noise })
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub meters: f64,
    pub risk: f64,
}

#[derive(Debug, Serialize)]
pub struct PriorReply {
    pub derivation: PriorDerivation,
    /// Risk on the pattern as progress grows, at the prior means.
    pub along: Vec<CurvePoint>,
    /// Risk at the center as the distance to the pattern grows.
    pub across: Vec<CurvePoint>,
}

pub fn prior_curves(request: &str) -> Result<String, String> {
    let est: ExpertEstimates = parse(request)?;
    let derivation = derive_priors(&est).map_err(|e| e.to_string())?;
    let p = derivation.priors;
    let curve = |slope: f64, to: f64| {
        (0..=100)
            .map(|i| {
                let meters = to * i as f64 / 100.0;
                CurvePoint { meters, risk: sigmoid(p.beta0.mu + slope * meters) }
            })
            .collect()
    };
    let along = curve(p.beta1.mu, 2.0 * est.gamma50);
    let across = curve(p.beta2.mu, 2.0 * est.delta50);
    reply(&PriorReply { derivation, along, across })
}
