//! Region map extraction, capacity scaling and chronological splits.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
use crate::region::{installed_at, CapacityEntry, GridMask, RegionSpec};
use crate::series::{MapSeries, PowerSeries};
use crate::time::year_of;

pub const DEFAULT_BUFFER_CELLS: f64 = 2.0;
pub const BUFFER_POLYGON_SIDES: usize = 16;

pub type Point = (f64, f64);

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull by monotone chain.
///
/// Vertices are counter-clockwise (positive signed area in `(x, y)`),
/// start at the lexicographically smallest point and contain no collinear
/// triples.
pub fn convex_hull(points: &[Point]) -> Result<Vec<Point>> {
    if let Some(p) = points.iter().find(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(CoreError::DegenerateHull(format!("non-finite point ({}, {})", p.0, p.1)));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return Err(CoreError::DegenerateHull(format!(
            "{} distinct point(s); widen the buffer",
            pts.len()
        )));
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    if hull.len() < 3 {
        return Err(CoreError::DegenerateHull("all points are collinear; widen the buffer".into()));
    }
    Ok(hull)
}

/// Point-in-convex-polygon test with the boundary counted as inside.
pub fn point_in_polygon(p: Point, polygon: &[Point]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let scale = polygon
        .iter()
        .map(|q| q.0.abs().max(q.1.abs()))
        .fold(1.0f64, f64::max);
    let tol = 1e-9 * scale * scale;
    (0..n).all(|i| cross(polygon[i], polygon[(i + 1) % n], p) >= -tol)
}

/// Vertices of a regular polygon approximating a disc around `c`.
pub fn buffer_polygon(c: Point, radius: f64) -> Vec<Point> {
    (0..BUFFER_POLYGON_SIDES)
        .map(|k| {
            let a = 2.0 * std::f64::consts::PI * k as f64 / BUFFER_POLYGON_SIDES as f64;
            (c.0 + radius * a.cos(), c.1 + radius * a.sin())
        })
        .collect()
}

/// A region's rectangular sub-map plus the hull geometry it was cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCrop {
    pub region_id: String,
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
    pub hull: Vec<Point>,
    /// Hull membership over the parent grid.
    pub grid_mask: GridMask,
    /// Hull membership over the crop.
    pub mask: GridMask,
    /// The cropped maps; cells outside the hull keep their values.
    pub maps: MapSeries,
}

impl RegionCrop {
    pub fn height(&self) -> usize {
        self.row1 - self.row0
    }

    pub fn width(&self) -> usize {
        self.col1 - self.col0
    }

    pub fn mask_density(&self) -> f64 {
        self.mask.count() as f64 / (self.height() * self.width()) as f64
    }

    /// Mean of the in-hull cells of crop step `t`.
    pub fn masked_mean(&self, t: usize) -> f64 {
        let f = self.maps.frame(t);
        let (sum, n) = f
            .iter()
            .zip(&self.mask.cells)
            .filter(|(_, m)| **m)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + *v as f64, n + 1));
        sum / n as f64
    }

    /// Plain-text geometry report.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "region {}", self.region_id);
        let _ = writeln!(
            s,
            "bbox rows {}..{} cols {}..{} ({}x{})",
            self.row0,
            self.row1,
            self.col0,
            self.col1,
            self.height(),
            self.width()
        );
        let _ = writeln!(s, "mask cells {} density {:.3}", self.mask.count(), self.mask_density());
        let _ = writeln!(s, "hull vertices {}", self.hull.len());
        for (x, y) in &self.hull {
            let _ = writeln!(s, "  {x:.3} {y:.3}");
        }
        for r in 0..self.mask.rows {
            let line: String = (0..self.mask.cols)
                .map(|c| if self.mask.get(r, c) { '#' } else { '.' })
                .collect();
            let _ = writeln!(s, "  {line}");
        }
        s
    }
}

/// Cuts the bounding box of a region's buffered farm hull out of `maps`.
pub fn build_region_crop(maps: &MapSeries, region: &RegionSpec, buffer_cells: f64) -> Result<RegionCrop> {
    if !(buffer_cells > 0.0 && buffer_cells.is_finite()) {
        return Err(CoreError::validation(format!("buffer_cells {buffer_cells} must be positive")));
    }
    if region.farms.is_empty() {
        return Err(CoreError::validation(format!("region {} has no farms", region.region_id)));
    }
    let points: Vec<Point> = region
        .farms
        .iter()
        .flat_map(|f| buffer_polygon((f.x, f.y), buffer_cells))
        .collect();
    let hull = convex_hull(&points)?;
    let (rows, cols) = (maps.rows(), maps.cols());
    let cells: Vec<bool> = (0..rows * cols)
        .map(|i| point_in_polygon(((i % cols) as f64, (i / cols) as f64), &hull))
        .collect();
    let grid_mask = GridMask { rows, cols, cells };
    let inside: Vec<(usize, usize)> = (0..rows * cols)
        .filter(|i| grid_mask.cells[*i])
        .map(|i| (i / cols, i % cols))
        .collect();
    if inside.is_empty() {
        return Err(CoreError::EmptyMask {
            region: region.region_id.clone(),
            buffer: buffer_cells,
        });
    }
    let mut row0 = inside.iter().map(|p| p.0).min().unwrap();
    let mut row1 = inside.iter().map(|p| p.0).max().unwrap() + 1;
    let mut col0 = inside.iter().map(|p| p.1).min().unwrap();
    let mut col1 = inside.iter().map(|p| p.1).max().unwrap() + 1;
    // maps must stay at least 2x2
    widen(&mut row0, &mut row1, rows);
    widen(&mut col0, &mut col1, cols);
    let crop_cells = (row0..row1)
        .flat_map(|r| (col0..col1).map(move |c| (r, c)))
        .map(|(r, c)| grid_mask.get(r, c))
        .collect();
    let mask = GridMask {
        rows: row1 - row0,
        cols: col1 - col0,
        cells: crop_cells,
    };
    Ok(RegionCrop {
        region_id: region.region_id.clone(),
        row0,
        row1,
        col0,
        col1,
        hull,
        maps: maps.crop(row0, row1, col0, col1)?,
        grid_mask,
        mask,
    })
}

fn widen(lo: &mut usize, hi: &mut usize, limit: usize) {
    if *hi - *lo >= 2 {
        return;
    }
    if *hi < limit {
        *hi += 1;
    } else {
        *lo -= 1;
    }
}

/// Installed capacity for every timestamp of `power`.
pub fn capacity_for(timestamps: &[i64], capacity: &[CapacityEntry]) -> Result<Vec<f64>> {
    timestamps.iter().map(|t| installed_at(capacity, *t)).collect()
}

/// Divides power by the capacity installed in each timestamp's quarter.
pub fn scale_by_capacity(power: &PowerSeries, capacity: &[CapacityEntry]) -> Result<PowerSeries> {
    let caps = capacity_for(power.timestamps(), capacity)?;
    let scaled = power.values().iter().zip(&caps).map(|(p, c)| p / c).collect();
    PowerSeries::new(power.timestamps().to_vec(), scaled)
}

/// Inverse of [`scale_by_capacity`].
pub fn unscale(scaled: &PowerSeries, capacity: &[CapacityEntry]) -> Result<PowerSeries> {
    let caps = capacity_for(scaled.timestamps(), capacity)?;
    let power = scaled.values().iter().zip(&caps).map(|(p, c)| p * c).collect();
    PowerSeries::new(scaled.timestamps().to_vec(), power)
}

/// Index range of the steps whose calendar year is in `years`.
fn year_range(ds: &Dataset, years: &BTreeSet<i32>) -> Result<std::ops::Range<usize>> {
    let ts = ds.maps.timestamps();
    let idx: Vec<usize> = (0..ts.len()).filter(|i| years.contains(&year_of(ts[*i]))).collect();
    let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
        return Err(CoreError::validation(format!("years {years:?} are not present in the dataset")));
    };
    if last - first + 1 != idx.len() {
        return Err(CoreError::validation(format!("years {years:?} are not contiguous")));
    }
    for y in years {
        if !idx.iter().any(|i| year_of(ts[*i]) == *y) {
            return Err(CoreError::validation(format!("year {y} is not present in the dataset")));
        }
    }
    Ok(first..last + 1)
}

/// Splits a dataset by calendar year; training must precede testing.
pub fn chronological_split(ds: &Dataset, train_years: &[i32], test_years: &[i32]) -> Result<(Dataset, Dataset)> {
    let train: BTreeSet<i32> = train_years.iter().copied().collect();
    let test: BTreeSet<i32> = test_years.iter().copied().collect();
    if train.is_empty() || test.is_empty() {
        return Err(CoreError::validation("train and test year sets must be non-empty"));
    }
    if let Some(y) = train.intersection(&test).next() {
        return Err(CoreError::validation(format!("year {y} is in both train and test sets")));
    }
    if train.last() >= test.first() {
        return Err(CoreError::validation("training years must precede test years"));
    }
    let a = year_range(ds, &train)?;
    let b = year_range(ds, &test)?;
    Ok((ds.slice(a)?, ds.slice(b)?))
}
