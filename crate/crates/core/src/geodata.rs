//! Mine locations, metric projection and the square-tile grid.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Sub};

/// Meters per degree of longitude at the equator.
pub const METERS_PER_DEG_LON: f64 = 111_320.0;
/// Meters per degree of latitude.
pub const METERS_PER_DEG_LAT: f64 = 110_574.0;
/// Largest offset from the projection origin, in degrees, for which the local
/// equirectangular projection is accepted.
pub const MAX_PROJECTION_OFFSET_DEG: f64 = 2.0;
/// Default tile edge length in meters.
pub const DEFAULT_TILE_SIZE: f64 = 25.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GeoError {
    #[error("coordinate ({lon}, {lat}) is not a valid WGS84 position")]
    InvalidCoordinate { lon: f64, lat: f64 },
    #[error("point {index} lies {offset:.3} degrees from the projection origin (limit {limit})")]
    OutOfProjectionRange { index: usize, offset: f64, limit: f64 },
    #[error("degenerate bounds: max must exceed min on both axes")]
    DegenerateBounds,
    #[error("tile size must be positive and finite, got {0}")]
    InvalidTileSize(f64),
    #[error("mines outside the grid: {0:?}")]
    MinesOutOfBounds(Vec<usize>),
    #[error("mine {0} has a non-finite coordinate")]
    NonFinite(usize),
}

/// WGS84 longitude/latitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        let p = GeoPoint { lon, lat };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(GeoError::InvalidCoordinate { lon, lat })
        }
    }

    pub fn is_valid(&self) -> bool {
        (-180.0..=180.0).contains(&self.lon) && (-90.0..=90.0).contains(&self.lat)
    }
}

/// A position in a local metric plane: meters east (`x`) and north (`y`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricPoint {
    pub x: f64,
    pub y: f64,
}

impl MetricPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        MetricPoint { x, y }
    }

    pub fn distance(&self, other: &MetricPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &MetricPoint) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dot(&self, other: &MetricPoint) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for MetricPoint {
    type Output = MetricPoint;
    fn add(self, rhs: MetricPoint) -> MetricPoint {
        MetricPoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for MetricPoint {
    type Output = MetricPoint;
    fn sub(self, rhs: MetricPoint) -> MetricPoint {
        MetricPoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for MetricPoint {
    type Output = MetricPoint;
    fn mul(self, rhs: f64) -> MetricPoint {
        MetricPoint::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for MetricPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Project geographic coordinates onto a local tangent plane centered at `origin`.
///
/// Uses the equirectangular approximation, which is adequate at minefield
/// scale but rejects anything further than [`MAX_PROJECTION_OFFSET_DEG`] from
/// the origin.
pub fn project_to_metric(points: &[GeoPoint], origin: GeoPoint) -> Result<Vec<MetricPoint>, GeoError> {
    if !origin.is_valid() {
        return Err(GeoError::InvalidCoordinate { lon: origin.lon, lat: origin.lat });
    }
    let lon_scale = (origin.lat.to_radians()).cos() * METERS_PER_DEG_LON;
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            if !p.is_valid() {
                return Err(GeoError::InvalidCoordinate { lon: p.lon, lat: p.lat });
            }
            let offset = (p.lon - origin.lon).abs().max((p.lat - origin.lat).abs());
            if offset > MAX_PROJECTION_OFFSET_DEG {
                return Err(GeoError::OutOfProjectionRange { index, offset, limit: MAX_PROJECTION_OFFSET_DEG });
            }
            Ok(MetricPoint::new((p.lon - origin.lon) * lon_scale, (p.lat - origin.lat) * METERS_PER_DEG_LAT))
        })
        .collect()
}

/// Optional per-mine attributes carried through from the source data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MineAttributes {
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_m: Option<f64>,
}

/// Found mine locations in metric coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MinefieldDataset {
    pub mines: Vec<MetricPoint>,
    #[serde(default)]
    pub attributes: Vec<MineAttributes>,
}

impl MinefieldDataset {
    pub fn from_points(mines: Vec<MetricPoint>) -> Self {
        let attributes = vec![MineAttributes::default(); mines.len()];
        MinefieldDataset { mines, attributes }
    }

    pub fn len(&self) -> usize {
        self.mines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mines.is_empty()
    }

    pub fn push(&mut self, p: MetricPoint, attrs: MineAttributes) -> usize {
        self.mines.push(p);
        self.attributes.resize(self.mines.len() - 1, MineAttributes::default());
        self.attributes.push(attrs);
        self.mines.len() - 1
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        match self.mines.iter().position(|p| !p.is_finite()) {
            Some(i) => Err(GeoError::NonFinite(i)),
            None => Ok(()),
        }
    }
}

/// Axis-aligned region bounds in metric coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn new(min: MetricPoint, max: MetricPoint) -> Self {
        Bounds { min_x: min.x, min_y: min.y, max_x: max.x, max_y: max.y }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn contains(&self, p: &MetricPoint) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub col: usize,
    pub row: usize,
    pub center: MetricPoint,
    pub mine_indices: Vec<usize>,
}

/// Row-major grid of square tiles. Row 0 is the southern edge, column 0 the western.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: MetricPoint,
    pub tile_size: f64,
    pub n_cols: usize,
    pub n_rows: usize,
    pub tiles: Vec<Tile>,
}

/// Summary columns used for region tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub tiles: usize,
    pub mines: usize,
    pub share_of_mined_tiles: f64,
}

pub fn build_grid(bounds: Bounds, tile_size: f64) -> Result<Grid, GeoError> {
    if !(tile_size.is_finite() && tile_size > 0.0) {
        return Err(GeoError::InvalidTileSize(tile_size));
    }
    let (w, h) = (bounds.width(), bounds.height());
    if !(w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0) {
        return Err(GeoError::DegenerateBounds);
    }
    let n_cols = (w / tile_size).ceil() as usize;
    let n_rows = (h / tile_size).ceil() as usize;
    let origin = MetricPoint::new(bounds.min_x, bounds.min_y);
    let tiles = (0..n_rows)
        .flat_map(|row| (0..n_cols).map(move |col| (col, row)))
        .map(|(col, row)| Tile {
            col,
            row,
            center: MetricPoint::new(
                origin.x + (col as f64 + 0.5) * tile_size,
                origin.y + (row as f64 + 0.5) * tile_size,
            ),
            mine_indices: Vec::new(),
        })
        .collect();
    Ok(Grid { origin, tile_size, n_cols, n_rows, tiles })
}

/// Attach every mine to the tile containing it. Mines on a shared edge go to
/// the tile with the lower index.
pub fn assign_mines(mut grid: Grid, dataset: &MinefieldDataset) -> Result<Grid, GeoError> {
    dataset.validate()?;
    let mut outside = Vec::new();
    let mut placement = Vec::with_capacity(dataset.len());
    for (i, p) in dataset.mines.iter().enumerate() {
        match grid.tile_index_of(p) {
            Some(t) => placement.push((t, i)),
            None => outside.push(i),
        }
    }
    if !outside.is_empty() {
        return Err(GeoError::MinesOutOfBounds(outside));
    }
    for tile in &mut grid.tiles {
        tile.mine_indices.clear();
    }
    for (t, i) in placement {
        grid.tiles[t].mine_indices.push(i);
    }
    Ok(grid)
}

/// Cell index along one axis with exact edges resolved toward the lower cell.
fn axis_cell(offset: f64, tile_size: f64, count: usize) -> Option<usize> {
    if !(offset >= 0.0) {
        return None;
    }
    let scaled = offset / tile_size;
    let cell = if scaled == 0.0 { 0 } else { scaled.ceil() as usize - 1 };
    (cell < count).then_some(cell)
}

impl Grid {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.n_cols + col
    }

    pub fn col_row(&self, index: usize) -> (usize, usize) {
        (index % self.n_cols, index / self.n_cols)
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            min_x: self.origin.x,
            min_y: self.origin.y,
            max_x: self.origin.x + self.n_cols as f64 * self.tile_size,
            max_y: self.origin.y + self.n_rows as f64 * self.tile_size,
        }
    }

    pub fn tile_index_of(&self, p: &MetricPoint) -> Option<usize> {
        let col = axis_cell(p.x - self.origin.x, self.tile_size, self.n_cols)?;
        let row = axis_cell(p.y - self.origin.y, self.tile_size, self.n_rows)?;
        Some(self.index(col, row))
    }

    pub fn is_border(&self, index: usize) -> bool {
        let (c, r) = self.col_row(index);
        c == 0 || r == 0 || c + 1 == self.n_cols || r + 1 == self.n_rows
    }

    /// Indices of the (up to eight) tiles surrounding `index`.
    pub fn neighbors8(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        let (c, r) = self.col_row(index);
        let (c, r) = (c as isize, r as isize);
        (-1isize..=1)
            .flat_map(move |dr| (-1isize..=1).map(move |dc| (dc, dr)))
            .filter(|&(dc, dr)| dc != 0 || dr != 0)
            .filter_map(move |(dc, dr)| {
                let (nc, nr) = (c + dc, r + dr);
                (nc >= 0 && nr >= 0 && (nc as usize) < self.n_cols && (nr as usize) < self.n_rows)
                    .then(|| self.index(nc as usize, nr as usize))
            })
    }

    pub fn mine_count(&self) -> usize {
        self.tiles.iter().map(|t| t.mine_indices.len()).sum()
    }

    pub fn summary(&self) -> GridSummary {
        let mined = self.tiles.iter().filter(|t| !t.mine_indices.is_empty()).count();
        GridSummary {
            tiles: self.len(),
            mines: self.mine_count(),
            share_of_mined_tiles: if self.is_empty() { 0.0 } else { mined as f64 / self.len() as f64 },
        }
    }
}
