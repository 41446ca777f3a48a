//! File formats: mine inputs, region records, normalized datasets and outputs.

use crate::geodata::{
    assign_mines, build_grid, project_to_metric, Bounds, GeoError, GeoPoint, GridSummary, MetricPoint, MineAttributes,
    MinefieldDataset, DEFAULT_TILE_SIZE,
};
use crate::pipeline::TrainingRegion;
use crate::simulator::ClearanceHistory;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("feature {index}{id}: {message}")]
    Feature { index: usize, id: String, message: String },
    #[error("{context}: {message}")]
    Json { context: String, message: String },
    #[error("unsupported mine file '{0}': expected .csv, .geojson or .json")]
    UnknownFormat(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("{0}")]
    Invalid(String),
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    let err = |source| IoError::Io { path: path.display().to_string(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(err)?;
    }
    std::fs::write(path, text).map_err(err)
}

/// Pretty JSON with object keys in sorted order, so equal values always
/// serialize to identical bytes.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String, IoError> {
    let v = serde_json::to_value(value)
        .map_err(|e| IoError::Json { context: "serialize".into(), message: e.to_string() })?;
    let mut s = serde_json::to_string_pretty(&v).expect("a JSON value always serializes");
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_text(path, &to_sorted_json(value)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = read_text(path)?;
    serde_json::from_str(&text)
        .map_err(|e| IoError::Json { context: path.display().to_string(), message: e.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateMode {
    Metric,
    Geo,
}

fn default_tile_size() -> f64 {
    DEFAULT_TILE_SIZE
}

/// Region record. In geo mode the bounds are degrees (`x` = longitude) and
/// the origin defaults to the south-west corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFile {
    #[serde(default)]
    pub id: Option<String>,
    pub mode: CoordinateMode,
    #[serde(default)]
    pub origin: Option<GeoPoint>,
    pub bounds: Bounds,
    #[serde(default = "default_tile_size")]
    pub tile_size_m: f64,
}

impl RegionFile {
    pub fn projection_origin(&self) -> Option<GeoPoint> {
        match self.mode {
            CoordinateMode::Geo => {
                Some(self.origin.unwrap_or(GeoPoint { lon: self.bounds.min_x, lat: self.bounds.min_y }))
            }
            CoordinateMode::Metric => self.origin,
        }
    }

    pub fn metric_bounds(&self) -> Result<Bounds, IoError> {
        match self.mode {
            CoordinateMode::Metric => Ok(self.bounds),
            CoordinateMode::Geo => {
                let b = self.bounds;
                let corners = [GeoPoint::new(b.min_x, b.min_y)?, GeoPoint::new(b.max_x, b.max_y)?];
                let m = project_to_metric(&corners, self.projection_origin().expect("geo mode has an origin"))?;
                Ok(Bounds::new(m[0], m[1]))
            }
        }
    }

    fn project(&self, geo: &[GeoPoint]) -> Result<Vec<MetricPoint>, IoError> {
        let origin = self
            .projection_origin()
            .ok_or_else(|| IoError::Invalid("geographic mine input needs a geo region or an explicit origin".into()))?;
        Ok(project_to_metric(geo, origin)?)
    }
}

/// Mines from CSV with an `x,y` (metric) or `lon,lat` (geographic) header and
/// optional `type`, `model` and `depth_m` columns.
pub fn parse_mines_csv(text: &str, region: &RegionFile) -> Result<MinefieldDataset, IoError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IoError::Csv { line: 1, message: e.to_string() })?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (a, b, geo) = match (col("x"), col("y"), col("lon"), col("lat")) {
        (Some(x), Some(y), _, _) => (x, y, false),
        (_, _, Some(lon), Some(lat)) => (lon, lat, true),
        _ => return Err(IoError::Csv { line: 1, message: "header must contain x,y or lon,lat".into() }),
    };
    let (kind_col, model_col, depth_col) = (col("type"), col("model"), col("depth_m"));

    let mut coords = Vec::new();
    let mut attributes = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| IoError::Csv { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize, name: &str| -> Result<f64, IoError> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IoError::Csv { line, message: format!("{name} '{raw}' is not a finite number") })
        };
        let text_field = |c: Option<usize>| c.and_then(|i| record.get(i)).filter(|s| !s.is_empty()).map(str::to_string);
        let depth_m = match depth_col.and_then(|i| record.get(i)).filter(|s| !s.is_empty()) {
            Some(_) => Some(num(depth_col.unwrap(), "depth_m")?),
            None => None,
        };
        coords.push((num(a, headers.get(a).unwrap_or("x"))?, num(b, headers.get(b).unwrap_or("y"))?, line));
        attributes.push(MineAttributes { kind: text_field(kind_col), model: text_field(model_col), depth_m });
    }

    let mines = if geo {
        let pts = coords
            .iter()
            .map(|&(lon, lat, line)| GeoPoint::new(lon, lat).map_err(|e| IoError::Csv { line, message: e.to_string() }))
            .collect::<Result<Vec<_>, _>>()?;
        region.project(&pts)?
    } else {
        coords.iter().map(|&(x, y, _)| MetricPoint::new(x, y)).collect()
    };
    Ok(MinefieldDataset { mines, attributes })
}

/// Mines from a GeoJSON FeatureCollection of Point features. Coordinates are
/// read as `[lon, lat]` for geo regions and as `[x, y]` for metric ones.
pub fn parse_mines_geojson(text: &str, region: &RegionFile) -> Result<MinefieldDataset, IoError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| IoError::Json { context: "GeoJSON".into(), message: e.to_string() })?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(IoError::Json {
            context: "GeoJSON".into(),
            message: "top level must be a FeatureCollection".into(),
        });
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| IoError::Json { context: "GeoJSON".into(), message: "missing features array".into() })?;

    let mut coords = Vec::with_capacity(features.len());
    let mut attributes = Vec::with_capacity(features.len());
    for (index, f) in features.iter().enumerate() {
        let id = match f.get("id") {
            Some(Value::String(s)) => format!(" (id \"{s}\")"),
            Some(Value::Number(n)) => format!(" (id {n})"),
            _ => String::new(),
        };
        let fail = |message: String| IoError::Feature { index, id: id.clone(), message };
        let geometry = f.get("geometry").filter(|g| !g.is_null()).ok_or_else(|| fail("has no geometry".into()))?;
        match geometry.get("type").and_then(Value::as_str) {
            Some("Point") => {}
            Some(other) => return Err(fail(format!("geometry type {other} is not Point"))),
            None => return Err(fail("geometry has no type".into())),
        }
        let c = geometry
            .get("coordinates")
            .and_then(Value::as_array)
            .filter(|c| c.len() >= 2)
            .ok_or_else(|| fail("Point needs two coordinates".into()))?;
        let (a, b) = match (c[0].as_f64(), c[1].as_f64()) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => (a, b),
            _ => return Err(fail("coordinates must be numbers".into())),
        };
        let props = f.get("properties").filter(|p| p.is_object());
        let text_prop = |k: &str| props.and_then(|p| p.get(k)).and_then(Value::as_str).map(str::to_string);
        let depth_m = match props.and_then(|p| p.get("depth_m")) {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_f64().ok_or_else(|| fail("depth_m must be a number".into()))?),
        };
        coords.push((a, b, index, id));
        attributes.push(MineAttributes { kind: text_prop("type"), model: text_prop("model"), depth_m });
    }

    let mines = match region.mode {
        CoordinateMode::Metric => coords.iter().map(|&(x, y, _, _)| MetricPoint::new(x, y)).collect(),
        CoordinateMode::Geo => {
            let pts = coords
                .iter()
                .map(|(lon, lat, index, id)| {
                    GeoPoint::new(*lon, *lat).map_err(|e| IoError::Feature {
                        index: *index,
                        id: id.clone(),
                        message: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            region.project(&pts)?
        }
    };
    Ok(MinefieldDataset { mines, attributes })
}

pub fn load_mines(path: &Path, region: &RegionFile) -> Result<MinefieldDataset, IoError> {
    let text = read_text(path)?;
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => parse_mines_csv(&text, region),
        Some("geojson") | Some("json") => parse_mines_geojson(&text, region),
        _ => Err(IoError::UnknownFormat(path.display().to_string())),
    }
}

/// A metric-space dataset bound to its region grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub id: String,
    pub bounds: Bounds,
    pub tile_size_m: f64,
    #[serde(default)]
    pub origin: Option<GeoPoint>,
    pub dataset: MinefieldDataset,
    pub summary: GridSummary,
}

impl DatasetFile {
    pub fn from_region(id: String, region: &RegionFile, dataset: MinefieldDataset) -> Result<Self, IoError> {
        dataset.validate()?;
        let bounds = region.metric_bounds()?;
        let grid = assign_mines(build_grid(bounds, region.tile_size_m)?, &dataset)?;
        Ok(DatasetFile {
            id,
            bounds,
            tile_size_m: region.tile_size_m,
            origin: region.projection_origin(),
            summary: grid.summary(),
            dataset,
        })
    }

    pub fn to_region(&self) -> Result<TrainingRegion, IoError> {
        let grid = assign_mines(build_grid(self.bounds, self.tile_size_m)?, &self.dataset)?;
        Ok(TrainingRegion { id: self.id.clone(), grid, dataset: self.dataset.clone() })
    }

    pub fn from_training_region(region: &TrainingRegion) -> Self {
        DatasetFile {
            id: region.id.clone(),
            bounds: region.grid.bounds(),
            tile_size_m: region.grid.tile_size,
            origin: None,
            dataset: region.dataset.clone(),
            summary: region.grid.summary(),
        }
    }
}

/// Read mines and region files into a normalized dataset.
pub fn ingest(mines_path: &Path, region_path: &Path) -> Result<DatasetFile, IoError> {
    let region: RegionFile = read_json(region_path)?;
    let dataset = load_mines(mines_path, &region)?;
    let id = region
        .id
        .clone()
        .or_else(|| mines_path.file_stem().and_then(|s| s.to_str()).map(str::to_string))
        .unwrap_or_else(|| "region".into());
    DatasetFile::from_region(id, &region, dataset)
}

/// `timestep,share_found` rows, timesteps counted from 1.
pub fn history_csv(history: &ClearanceHistory) -> String {
    let mut out = String::from("timestep,share_found\n");
    for (i, l) in history.shares.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, l);
    }
    out
}
