use crate::config::{pick, pick_list, require_seed, RunConfig};
use crate::{Cli, Command, CvArgs, IngestArgs, ModelArgs, ReportArgs, ServeArgs, SimulateArgs, SynthArgs, TrainArgs};
use anyhow::{anyhow, bail, Context, Result};
use minerisk_core::geodata::GridSummary;
use minerisk_core::io::{self, history_csv, read_json, to_sorted_json, write_text, DatasetFile};
use minerisk_core::pipeline::{train_stack, Hyperparameters, InstanceKind, RiskStack, TrainOptions, TrainingRegion};
use minerisk_core::risk::SamplerConfig;
use minerisk_core::simulator::{
    cross_validate, generate_synthetic_minefield, simulate, CvReport, DeminerKind, Scorecard, SimulationConfig,
    SyntheticPattern, SyntheticSpec, CV_RECALC_INTERVAL, RANDOM_RUNS, TEST_RECALC_INTERVAL,
};
use minerisk_service::{AppState, ModelRegistry, ServiceConfig, DEFAULT_BIND};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load_optional(cli.global.config.as_deref())?;
    let g = cli.global;
    let ctx = Settings {
        seed: pick(g.seed, cfg.seed),
        out: pick(g.out, cfg.out.clone()),
        instance: pick_list(g.instance, cfg.instance.clone().map(|i| i.into_vec()).unwrap_or_default()),
        recalc_interval: pick(g.recalc_interval, cfg.recalc_interval),
        cfg,
    };
    match cli.command {
        Command::Ingest(a) => ingest(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Cv(a) => cv(&ctx, a),
        Command::Simulate(a) => simulate_cmd(&ctx, a),
        Command::Report(a) => report(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
    }
}

/// Global settings after merging flags, environment and the config file.
struct Settings {
    seed: Option<u64>,
    out: Option<PathBuf>,
    instance: Vec<String>,
    recalc_interval: Option<usize>,
    cfg: RunConfig,
}

impl Settings {
    fn emit<T: Serialize>(&self, value: &T) -> Result<()> {
        let text = to_sorted_json(value)?;
        match &self.out {
            Some(p) => write_text(p, &text).with_context(|| format!("writing {}", p.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn single_instance(&self, command: &str) -> Result<InstanceKind> {
        match self.instance.as_slice() {
            [one] => one.parse().map_err(|e: String| anyhow!(e)),
            [] => bail!("`{command}` needs --instance linear|curved|bayesian"),
            _ => bail!("`{command}` takes a single --instance"),
        }
    }

    fn recalc_interval(&self, default: usize) -> Result<usize> {
        match self.recalc_interval.unwrap_or(default) {
            0 => bail!("--recalc-interval must be at least 1"),
            n => Ok(n),
        }
    }
}

fn parse_name<T: DeserializeOwned>(name: &str, what: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(name.to_ascii_lowercase()))
        .map_err(|_| anyhow!("unknown {what} '{name}'"))
}

fn load_dataset(path: &Path) -> Result<TrainingRegion> {
    let file: DatasetFile = read_json(path).with_context(|| format!("loading dataset {}", path.display()))?;
    Ok(file.to_region()?)
}

fn summary_table(id: &str, s: &GridSummary) -> String {
    format!(
        "{:<24} {:>16} {:>20} {:>15}\n{:<24} {:>16} {:>20} {:>14.2}%\n",
        "Region",
        "Number of tiles",
        "Number of landmines",
        "Share of tiles",
        id,
        s.tiles,
        s.mines,
        100.0 * s.share_of_mined_tiles
    )
}

fn ingest(ctx: &Settings, a: IngestArgs) -> Result<()> {
    let file = io::ingest(&a.mines, &a.region).with_context(|| format!("ingesting {}", a.mines.display()))?;
    ctx.emit(&file)?;
    let table = summary_table(&file.id, &file.summary);
    if ctx.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    Ok(())
}

fn synth(ctx: &Settings, a: SynthArgs) -> Result<()> {
    let mut spec: SyntheticSpec = match &a.spec {
        Some(p) => read_json(p).with_context(|| format!("reading {}", p.display()))?,
        None => SyntheticSpec::default(),
    };
    spec.seed = require_seed(ctx.seed, "synth")?;
    if let Some(p) = &a.pattern {
        spec.pattern = parse_name::<SyntheticPattern>(p, "pattern")?;
    }
    if let Some(n) = a.n_mines {
        spec.n_mines = n;
    }
    if let Some(c) = a.clusters {
        spec.clusters = c;
    }
    if let Some(s) = a.size {
        spec.width = s;
        spec.height = s;
    }
    let field = generate_synthetic_minefield(&spec)?;
    let region = TrainingRegion {
        id: a.id.unwrap_or_else(|| format!("synthetic-{}", spec.seed)),
        grid: field.grid,
        dataset: field.dataset,
    };
    let file = DatasetFile::from_training_region(&region);
    ctx.emit(&file)?;
    if ctx.out.is_some() {
        print!("{}", summary_table(&file.id, &file.summary));
    }
    Ok(())
}

fn hyperparameters(ctx: &Settings, m: &ModelArgs, base: Option<Hyperparameters>) -> Result<Hyperparameters> {
    let base = base.or(ctx.cfg.hyperparameters).unwrap_or_default();
    let h = Hyperparameters {
        landmine_weight: m.landmine_weight.unwrap_or(base.landmine_weight),
        cluster_max_distance: m.cluster_max_distance.unwrap_or(base.cluster_max_distance),
        pc_smoothness_factor: m.pc_smoothness_factor.unwrap_or(base.pc_smoothness_factor),
    };
    h.validate()?;
    Ok(h)
}

fn train_options(ctx: &Settings, m: &ModelArgs, seed: u64) -> TrainOptions {
    let d = SamplerConfig::default();
    let s = ctx.cfg.sampler;
    TrainOptions {
        sampler: SamplerConfig {
            chains: m.chains.or(s.chains).unwrap_or(d.chains),
            draws: m.draws.or(s.draws).unwrap_or(d.draws),
            warmup: m.warmup.or(s.warmup).unwrap_or(d.warmup),
            seed,
        },
        ..TrainOptions::default()
    }
}

fn train(ctx: &Settings, a: TrainArgs) -> Result<()> {
    let kind = ctx.single_instance("train")?;
    let paths = pick_list(a.datasets, ctx.cfg.datasets.clone());
    if paths.is_empty() {
        bail!("`train` needs at least one --dataset");
    }
    let regions = paths.iter().map(|p| load_dataset(p)).collect::<Result<Vec<_>>>()?;
    let from_cv = match &a.cv_report {
        Some(p) => {
            let report: CvReport = read_json(p).with_context(|| format!("reading cv report {}", p.display()))?;
            if report.kind != kind {
                bail!("{} is a {} cv report, not {kind}", p.display(), report.kind);
            }
            Some(report.best)
        }
        None => None,
    };
    let hyper = hyperparameters(ctx, &a.model, from_cv)?;
    let options = train_options(ctx, &a.model, ctx.seed.unwrap_or(0));
    let stack = train_stack(&regions, kind, &hyper, &options)?;
    for w in &stack.metadata.warnings {
        eprintln!("warning: {w}");
    }
    ctx.emit(&stack)
}

fn cv(ctx: &Settings, a: CvArgs) -> Result<()> {
    let kind = ctx.single_instance("cv")?;
    let seed = require_seed(ctx.seed, "cv")?;
    let paths = pick_list(a.datasets, ctx.cfg.datasets.clone());
    let [first, second] = paths.as_slice() else {
        bail!("`cv` needs exactly two --dataset regions, got {}", paths.len());
    };
    let regions = [load_dataset(first)?, load_dataset(second)?];
    let mut grid = Hyperparameters::grid(kind);
    // explicit hyperparameter flags pin that axis of the grid
    let m = &a.model;
    grid.retain(|h| {
        m.landmine_weight.is_none_or(|v| h.landmine_weight == v)
            && m.cluster_max_distance.is_none_or(|v| h.cluster_max_distance == v)
            && m.pc_smoothness_factor.is_none_or(|v| h.pc_smoothness_factor == v)
    });
    if grid.is_empty() {
        bail!("the hyperparameter flags select no cell of the grid");
    }
    let report =
        cross_validate(&regions, kind, &grid, &train_options(ctx, m, seed), ctx.recalc_interval(CV_RECALC_INTERVAL)?)?;
    eprintln!(
        "best of {} cells: weight {}, max distance {}, smoothness {} (score {:.4})",
        report.cells.len(),
        report.best.landmine_weight,
        report.best.cluster_max_distance,
        report.best.pc_smoothness_factor,
        report.best_score
    );
    ctx.emit(&report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kind: InstanceKind,
    pub hyperparameters: Hyperparameters,
    pub training_regions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeminerResult {
    pub deminer: DeminerKind,
    #[serde(default)]
    pub model: Option<ModelSummary>,
    pub scorecard: Scorecard,
    #[serde(default)]
    pub recalcs: Vec<usize>,
    /// Averaged share of mines found after every timestep.
    pub shares: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub dataset: String,
    pub tiles: usize,
    pub mines: usize,
    pub seed: u64,
    pub recalc_interval: usize,
    pub random_runs: usize,
    pub results: Vec<DeminerResult>,
}

fn load_models(paths: &[PathBuf]) -> Result<ModelRegistry> {
    let mut models = HashMap::new();
    for p in paths {
        let stack: RiskStack = read_json(p).with_context(|| format!("loading model {}", p.display()))?;
        if models.insert(stack.kind, Arc::new(stack)).is_some() {
            bail!("two {} models given; pass one per kind", models.keys().last().unwrap());
        }
    }
    Ok(models)
}

fn simulate_cmd(ctx: &Settings, a: SimulateArgs) -> Result<()> {
    let seed = require_seed(ctx.seed, "simulate")?;
    let path = pick(a.dataset, ctx.cfg.test_dataset.clone()).ok_or_else(|| anyhow!("`simulate` needs --dataset"))?;
    let region = load_dataset(&path)?;
    let kinds = if ctx.instance.is_empty() {
        vec![DeminerKind::Random, DeminerKind::Sequential]
    } else {
        ctx.instance.iter().map(|s| s.parse::<DeminerKind>().map_err(|e| anyhow!(e))).collect::<Result<Vec<_>>>()?
    };
    let models = load_models(&pick_list(a.models, ctx.cfg.models.clone()))?;
    let config = SimulationConfig {
        seed,
        random_runs: pick(a.random_runs, ctx.cfg.random_runs).unwrap_or(RANDOM_RUNS),
        recalc_interval: ctx.recalc_interval(TEST_RECALC_INTERVAL)?,
    };
    let history_dir = pick(a.history_dir, ctx.cfg.history_dir.clone());
    let n = region.grid.len();
    let mut results = Vec::new();
    for kind in kinds {
        let stack = kind.instance().and_then(|k| models.get(&k)).map(Arc::as_ref);
        if let (Some(k), None) = (kind.instance(), stack) {
            bail!("the {kind} deminer needs a trained {k} model: run `minerisk train --instance {k}` and pass it with --model");
        }
        let run = simulate(&region.grid, &region.dataset.mines, kind, stack, &config)?;
        if let Some(dir) = &history_dir {
            write_text(&dir.join(format!("{kind}.csv")), &history_csv(&run.average))?;
            for (i, h) in run.runs.iter().enumerate() {
                write_text(&dir.join(format!("{kind}_run{i}.csv")), &history_csv(h))?;
            }
        }
        results.push(DeminerResult {
            deminer: kind,
            model: stack.map(|s| ModelSummary {
                kind: s.kind,
                hyperparameters: s.hyperparameters,
                training_regions: s.metadata.region_ids.clone(),
            }),
            scorecard: run.average.scorecard(n)?,
            recalcs: run.recalcs,
            shares: run.average.shares,
        });
    }
    let output = SimulationOutput {
        dataset: region.id,
        tiles: n,
        mines: region.dataset.mines.len(),
        seed,
        recalc_interval: config.recalc_interval,
        random_runs: config.random_runs,
        results,
    };
    eprint!("{}", results_table(&[&output]));
    ctx.emit(&output)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ReportRow {
    dataset: String,
    deminer: DeminerKind,
    demining_score: f64,
    t50: f64,
    t75: f64,
    t90: f64,
    t100: f64,
}

/// One clearance-progress curve: percent of tiles cleared against share found.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct PlotSeries {
    dataset: String,
    deminer: DeminerKind,
    percent_cleared: Vec<f64>,
    share_found: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Report {
    rows: Vec<ReportRow>,
    plot: Vec<PlotSeries>,
}

fn results_table(outputs: &[&SimulationOutput]) -> String {
    let mut s = format!(
        "{:<20} {:<12} {:>15} {:>8} {:>8} {:>8} {:>8}\n",
        "Region", "Deminer", "Demining Score", "T50", "T75", "T90", "T100"
    );
    for o in outputs {
        for r in &o.results {
            let c = &r.scorecard;
            let _ = writeln!(
                s,
                "{:<20} {:<12} {:>15.4} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                o.dataset,
                r.deminer.as_str(),
                c.demining_score,
                c.t50,
                c.t75,
                c.t90,
                c.t100
            );
        }
    }
    s
}

fn report(ctx: &Settings, a: ReportArgs) -> Result<()> {
    let outputs = a
        .inputs
        .iter()
        .map(|p| read_json::<SimulationOutput>(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    for o in &outputs {
        for r in &o.results {
            let c = r.scorecard;
            rows.push(ReportRow {
                dataset: o.dataset.clone(),
                deminer: r.deminer,
                demining_score: c.demining_score,
                t50: c.t50,
                t75: c.t75,
                t90: c.t90,
                t100: c.t100,
            });
            let n = r.shares.len() as f64;
            plot.push(PlotSeries {
                dataset: o.dataset.clone(),
                deminer: r.deminer,
                percent_cleared: (1..=r.shares.len()).map(|i| 100.0 * i as f64 / n).collect(),
                share_found: r.shares.clone(),
            });
        }
    }
    let table = results_table(&outputs.iter().collect::<Vec<_>>());
    match &ctx.out {
        Some(_) => {
            print!("{table}");
            ctx.emit(&Report { rows, plot })
        }
        None => {
            print!("{table}");
            Ok(())
        }
    }
}

fn serve(ctx: &Settings, a: ServeArgs) -> Result<()> {
    let filter = tracing_subscriber::EnvFilter::try_from_env("MINERISK_LOG").unwrap_or_else(|_| "info".into());
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();

    let models = load_models(&pick_list(a.models, ctx.cfg.models.clone()))?;
    let mut loaded: Vec<_> = models.keys().map(|k| k.as_str()).collect();
    loaded.sort();
    if loaded.is_empty() {
        tracing::warn!("no models loaded; only random and sequential sessions can be created");
    }
    let bind = pick(a.bind, ctx.cfg.bind.clone()).unwrap_or_else(|| DEFAULT_BIND.to_string());
    let data_dir = pick(a.data_dir, ctx.cfg.data_dir.clone());
    let state = AppState::new(ServiceConfig { data_dir, models })?;

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
        let addr = listener.local_addr()?;
        tracing::info!(%addr, models = ?loaded, sessions = state.session_count().await, "serving");
        println!("listening on http://{addr}");
        minerisk_service::serve(listener, state, shutdown_signal()).await?;
        Ok(())
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
    tracing::info!("shutting down");
}
