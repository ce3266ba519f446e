//! Synthetic wind fields, turbine power curves and benchmark datasets.
//!
//! The generator stands in for gridded NWP forecasts and metered regional
//! generation. A hidden "truth" field drives the power; the published maps
//! are that field plus a lead-time dependent forecast error, so map-based
//! models face the same kind of noise a real forecast would have.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{CoreError, Result};
use crate::region::{CapacityEntry, Farm, RegionSpec};
use crate::seed::{derive, derive_indexed};
use crate::series::{MapSeries, PowerSeries};
use crate::time::{year_start, EpochHour, ForecastRunIndex};

pub const MAX_SPEED: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldParams {
    pub mean_speed: f64,
    pub std_speed: f64,
    pub spatial_smoothing_cells: f64,
    pub temporal_ar1: f64,
    pub rng_seed: u64,
}

impl FieldParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_speed > 0.0 && self.mean_speed.is_finite()) {
            return Err(CoreError::validation(format!("mean_speed {} must be positive", self.mean_speed)));
        }
        if !(self.std_speed >= 0.0 && self.std_speed.is_finite()) {
            return Err(CoreError::validation(format!("std_speed {} must be >= 0", self.std_speed)));
        }
        if !(self.spatial_smoothing_cells >= 0.0 && self.spatial_smoothing_cells <= 64.0) {
            return Err(CoreError::validation(format!(
                "spatial_smoothing_cells {} must lie in [0, 64]",
                self.spatial_smoothing_cells
            )));
        }
        if !(0.0..1.0).contains(&self.temporal_ar1) {
            return Err(CoreError::validation(format!("temporal_ar1 {} must lie in [0, 1)", self.temporal_ar1)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbineParams {
    pub cut_in: f64,
    pub rated: f64,
    pub cut_out: f64,
}

impl Default for TurbineParams {
    fn default() -> Self {
        Self {
            cut_in: 3.0,
            rated: 12.0,
            cut_out: 25.0,
        }
    }
}

impl TurbineParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.cut_in && self.cut_in < self.rated && self.rated < self.cut_out) {
            return Err(CoreError::validation(format!(
                "turbine needs 0 < cut_in < rated < cut_out, got {} / {} / {}",
                self.cut_in, self.rated, self.cut_out
            )));
        }
        Ok(())
    }
}

/// Capacity factor at wind speed `speed`.
pub fn power_curve(speed: f64, t: &TurbineParams) -> f64 {
    if speed < t.cut_in || speed >= t.cut_out {
        0.0
    } else if speed >= t.rated {
        1.0
    } else {
        let c3 = t.cut_in.powi(3);
        (speed.powi(3) - c3) / (t.rated.powi(3) - c3)
    }
}

/// Truncated Gaussian taps of radius `ceil(3 s)`, scaled to unit sum of squares
/// so that one pass over white noise keeps unit variance.
fn smoothing_kernel(s: f64) -> Vec<f64> {
    if s <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * s).ceil() as i64;
    let w: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * s * s)).exp())
        .collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.into_iter().map(|v| v / norm).collect()
}

/// Draws unit-variance, spatially correlated noise fields of a fixed size.
struct SmoothNoise {
    rows: usize,
    cols: usize,
    kernel: Vec<f64>,
    raw: Vec<f64>,
    tmp: Vec<f64>,
}

impl SmoothNoise {
    fn new(rows: usize, cols: usize, smoothing: f64) -> Self {
        let kernel = smoothing_kernel(smoothing);
        let pad = kernel.len() - 1;
        Self {
            rows,
            cols,
            raw: vec![0.0; (rows + pad) * (cols + pad)],
            tmp: vec![0.0; (rows + pad) * cols],
            kernel,
        }
    }

    /// Fills `out` (rows x cols) with a fresh field.
    fn draw(&mut self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let k = self.kernel.len();
        let pw = self.cols + k - 1;
        let ph = self.rows + k - 1;
        for v in &mut self.raw {
            *v = StandardNormal.sample(rng);
        }
        // horizontal pass: ph x cols
        for r in 0..ph {
            let src = &self.raw[r * pw..(r + 1) * pw];
            for c in 0..self.cols {
                self.tmp[r * self.cols + c] = src[c..c + k].iter().zip(&self.kernel).map(|(a, b)| a * b).sum();
            }
        }
        // vertical pass: rows x cols
        for r in 0..self.rows {
            for c in 0..self.cols {
                let mut acc = 0.0;
                for (j, w) in self.kernel.iter().enumerate() {
                    acc += self.tmp[(r + j) * self.cols + c] * w;
                }
                out[r * self.cols + c] = acc;
            }
        }
    }
}

fn to_speed(z: f64, p: &FieldParams) -> f32 {
    (p.mean_speed + p.std_speed * z).clamp(0.0, MAX_SPEED) as f32
}

/// AR(1)-in-time, spatially smoothed Gaussian wind field starting at `start`.
pub fn generate_wind_fields(start: EpochHour, steps: usize, rows: usize, cols: usize, params: &FieldParams) -> Result<MapSeries> {
    params.validate()?;
    if steps == 0 || rows < 2 || cols < 2 {
        return Err(CoreError::validation(format!("invalid field dims {steps}x{rows}x{cols}")));
    }
    let cells = rows * cols;
    if steps.checked_mul(cells).is_none_or(|n| n > 1 << 31) {
        return Err(CoreError::validation(format!("field dims {steps}x{rows}x{cols} exceed the memory budget")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let mut noise = SmoothNoise::new(rows, cols, params.spatial_smoothing_cells);
    let a = params.temporal_ar1;
    let innovation = (1.0 - a * a).sqrt();
    let mut z = vec![0.0; cells];
    let mut e = vec![0.0; cells];
    noise.draw(&mut rng, &mut z);
    let mut values = Vec::with_capacity(steps * cells);
    values.extend(z.iter().map(|v| to_speed(*v, params)));
    for _ in 1..steps {
        noise.draw(&mut rng, &mut e);
        for (zi, ei) in z.iter_mut().zip(&e) {
            *zi = a * *zi + innovation * ei;
        }
        values.extend(z.iter().map(|v| to_speed(*v, params)));
    }
    MapSeries::new(start, steps, rows, cols, values)
}

/// Regional power from farm-level power curves plus Gaussian metering noise.
pub fn synthesize_power(
    maps: &MapSeries,
    region: &RegionSpec,
    turbine: &TurbineParams,
    noise_std_mw: f64,
    seed: u64,
) -> Result<PowerSeries> {
    turbine.validate()?;
    if !(noise_std_mw >= 0.0) {
        return Err(CoreError::validation(format!("noise_std_mw {noise_std_mw} must be >= 0")));
    }
    for f in &region.farms {
        if !maps.contains_point(f.x, f.y) {
            return Err(CoreError::validation(format!(
                "farm at ({}, {}) in region {} is outside the {}x{} grid",
                f.x,
                f.y,
                region.region_id,
                maps.rows(),
                maps.cols()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let power = (0..maps.steps())
        .map(|t| {
            let clean: f64 = region
                .farms
                .iter()
                .map(|f| f.capacity_mw * power_curve(maps.bilinear(t, f.x, f.y), turbine))
                .sum();
            let eps: f64 = if noise_std_mw > 0.0 {
                let z: f64 = StandardNormal.sample(&mut rng);
                noise_std_mw * z
            } else {
                0.0
            };
            (clean + eps).max(0.0)
        })
        .collect();
    PowerSeries::from_start(maps.start(), power)
}

/// Everything needed to generate a synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub regions: usize,
    pub farms_per_region: usize,
    pub rows: usize,
    pub cols: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Truncates the period to its first `max_hours` hours.
    pub max_hours: Option<usize>,
    pub mean_speed: f64,
    pub std_speed: f64,
    pub spatial_smoothing_cells: f64,
    pub temporal_ar1: f64,
    pub turbine: TurbineParams,
    pub noise_std_mw: f64,
    /// Forecast error std (m/s) at the longest lead; scales linearly with lead.
    pub nwp_error_std: f64,
    pub nwp_error_smoothing_cells: f64,
    /// Side of the square box each region's farms are scattered in.
    pub cluster_extent: usize,
    pub capacity_min_mw: f64,
    pub capacity_max_mw: f64,
    /// Fleet growth per quarter (0.02 = +2 % per quarter).
    pub quarterly_growth: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            regions: 4,
            farms_per_region: 6,
            rows: 32,
            cols: 32,
            first_year: 2018,
            last_year: 2020,
            max_hours: None,
            mean_speed: 8.5,
            std_speed: 3.0,
            spatial_smoothing_cells: 2.5,
            temporal_ar1: 0.97,
            turbine: TurbineParams::default(),
            noise_std_mw: 3.0,
            nwp_error_std: 0.8,
            nwp_error_smoothing_cells: 2.5,
            cluster_extent: 7,
            capacity_min_mw: 20.0,
            capacity_max_mw: 120.0,
            quarterly_growth: 0.02,
        }
    }
}

impl BenchmarkConfig {
    pub fn field_params(&self) -> FieldParams {
        FieldParams {
            mean_speed: self.mean_speed,
            std_speed: self.std_speed,
            spatial_smoothing_cells: self.spatial_smoothing_cells,
            temporal_ar1: self.temporal_ar1,
            rng_seed: derive(self.seed, "field"),
        }
    }

    pub fn start(&self) -> EpochHour {
        year_start(self.first_year)
    }

    pub fn steps(&self) -> usize {
        let full = (year_start(self.last_year + 1) - year_start(self.first_year)).max(0) as usize;
        self.max_hours.map_or(full, |m| m.min(full))
    }

    pub fn validate(&self) -> Result<()> {
        self.field_params().validate()?;
        self.turbine.validate()?;
        if self.regions == 0 || self.farms_per_region == 0 {
            return Err(CoreError::validation("benchmark needs at least one region and one farm per region"));
        }
        if self.last_year < self.first_year {
            return Err(CoreError::validation("last_year precedes first_year"));
        }
        if self.steps() == 0 {
            return Err(CoreError::validation("benchmark period is empty"));
        }
        if !(self.capacity_min_mw > 0.0 && self.capacity_min_mw <= self.capacity_max_mw) {
            return Err(CoreError::validation("farm capacity range must satisfy 0 < min <= max"));
        }
        if !(self.noise_std_mw >= 0.0 && self.nwp_error_std >= 0.0 && self.nwp_error_smoothing_cells >= 0.0) {
            return Err(CoreError::validation("noise levels must be >= 0"));
        }
        if !(self.quarterly_growth > -1.0) {
            return Err(CoreError::validation("quarterly_growth must exceed -1"));
        }
        if self.cluster_extent == 0 {
            return Err(CoreError::validation("cluster_extent must be positive"));
        }
        Ok(())
    }
}

/// Places each region's farms on distinct cells of its own grid tile.
pub fn layout_regions(cfg: &BenchmarkConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<Farm>>> {
    let tile_cols = (cfg.regions as f64).sqrt().ceil() as usize;
    let tile_rows = cfg.regions.div_ceil(tile_cols);
    let th = cfg.rows / tile_rows;
    let tw = cfg.cols / tile_cols;
    let infeasible = || {
        CoreError::validation(format!(
            "infeasible layout: {} regions x {} farms do not fit a {}x{} grid",
            cfg.regions, cfg.farms_per_region, cfg.rows, cfg.cols
        ))
    };
    if th == 0 || tw == 0 || th * tw < cfg.farms_per_region {
        return Err(infeasible());
    }
    // grow the cluster box until it can hold every farm
    let mut bh = cfg.cluster_extent.min(th);
    let mut bw = cfg.cluster_extent.min(tw);
    while bh * bw < cfg.farms_per_region {
        bh = (bh + 1).min(th);
        bw = (bw + 1).min(tw);
    }
    let max_x = (cfg.cols - 1) as f64;
    let max_y = (cfg.rows - 1) as f64;
    let mut out = Vec::with_capacity(cfg.regions);
    for k in 0..cfg.regions {
        let (tr, tc) = (k / tile_cols, k % tile_cols);
        let r0 = tr * th + rng.random_range(0..=th - bh);
        let c0 = tc * tw + rng.random_range(0..=tw - bw);
        let mut cells: Vec<usize> = (0..bh * bw).collect();
        // partial Fisher-Yates for distinct cells
        for i in 0..cfg.farms_per_region {
            let j = rng.random_range(i..cells.len());
            cells.swap(i, j);
        }
        let farms = cells[..cfg.farms_per_region]
            .iter()
            .map(|&cell| {
                let r = r0 + cell / bw;
                let c = c0 + cell % bw;
                let x = (c as f64 + rng.random_range(-0.4..0.4)).clamp(0.0, max_x);
                let y = (r as f64 + rng.random_range(-0.4..0.4)).clamp(0.0, max_y);
                let capacity_mw = rng.random_range(cfg.capacity_min_mw..=cfg.capacity_max_mw);
                Farm {
                    x,
                    y,
                    capacity_mw: (capacity_mw * 10.0).round() / 10.0,
                }
            })
            .collect();
        out.push(farms);
    }
    Ok(out)
}

/// Quarter starts (Jan, Apr, Jul, Oct) covering `[start, end)`.
pub fn quarters_covering(start: EpochHour, end: EpochHour) -> Vec<NaiveDate> {
    let first = crate::time::date_of(start);
    let mut year = first.year_ce().1 as i32;
    let mut month = (first.month0() / 3) * 3 + 1;
    let mut out = Vec::new();
    loop {
        let q = NaiveDate::from_ymd_opt(year, month, 1).expect("valid quarter start");
        if crate::time::date_start(q) >= end {
            break;
        }
        out.push(q);
        month += 3;
        if month > 12 {
            month = 1;
            year += 1;
        }
    }
    out
}

/// Forecast maps: truth plus a per-run correlated error growing with lead time.
pub fn forecast_maps(truth: &MapSeries, error_std: f64, smoothing: f64, seed: u64) -> Result<MapSeries> {
    if error_std == 0.0 {
        return Ok(truth.clone());
    }
    let runs = ForecastRunIndex::default();
    let (rows, cols) = (truth.rows(), truth.cols());
    let cells = rows * cols;
    let mut noise = SmoothNoise::new(rows, cols, smoothing);
    let mut xi = vec![0.0; cells];
    let mut current_run = None;
    let mut values = Vec::with_capacity(truth.values().len());
    for t in 0..truth.steps() {
        let ts = truth.timestamp(t);
        let run = runs.run_time(ts);
        if current_run != Some(run) {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(seed, "nwp-run", run as u64));
            noise.draw(&mut rng, &mut xi);
            current_run = Some(run);
        }
        let scale = error_std * runs.lead_time(ts) as f64 / runs.run_interval as f64;
        values.extend(
            truth
                .frame(t)
                .iter()
                .zip(&xi)
                .map(|(v, e)| (*v as f64 + scale * e).clamp(0.0, MAX_SPEED) as f32),
        );
    }
    MapSeries::new(truth.start(), truth.steps(), rows, cols, values)
}

/// Generates a complete synthetic dataset.
pub fn generate_benchmark(cfg: &BenchmarkConfig) -> Result<Dataset> {
    cfg.validate()?;
    let start = cfg.start();
    let steps = cfg.steps();
    let truth = generate_wind_fields(start, steps, cfg.rows, cfg.cols, &cfg.field_params())?;
    let maps = forecast_maps(
        &truth,
        cfg.nwp_error_std,
        cfg.nwp_error_smoothing_cells,
        derive(cfg.seed, "nwp-error"),
    )?;
    let mut layout_rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, "layout"));
    let layouts = layout_regions(cfg, &mut layout_rng)?;
    let end = start + steps as i64;
    let quarters = quarters_covering(start, end);
    let mut regions = Vec::with_capacity(cfg.regions);
    let mut power = BTreeMap::new();
    for (k, farms) in layouts.into_iter().enumerate() {
        let base: f64 = farms.iter().map(|f| f.capacity_mw).sum();
        let capacity_series: Vec<CapacityEntry> = quarters
            .iter()
            .enumerate()
            .map(|(q, d)| CapacityEntry {
                quarter_start: *d,
                installed_mw: base * (1.0 + cfg.quarterly_growth).powi(q as i32),
            })
            .collect();
        let region = RegionSpec {
            region_id: format!("R{:02}", k + 1),
            farms,
            capacity_series,
            hull_mask: None,
        };
        let raw = synthesize_power(
            &truth,
            &region,
            &cfg.turbine,
            cfg.noise_std_mw,
            derive_indexed(cfg.seed, "power-noise", k as u64),
        )?;
        // the fleet grows with installed capacity while the layout stays fixed
        let grown = raw
            .timestamps()
            .iter()
            .zip(raw.values())
            .map(|(t, v)| Ok(v * region.installed_at(*t)? / base))
            .collect::<Result<Vec<f64>>>()?;
        power.insert(region.region_id.clone(), PowerSeries::from_start(start, grown)?);
        regions.push(region);
    }
    Dataset::new(maps, regions, power)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(speed: f32, rows: usize, cols: usize, steps: usize) -> MapSeries {
        MapSeries::new(0, steps, rows, cols, vec![speed; steps * rows * cols]).unwrap()
    }

    fn region(farms: Vec<Farm>) -> RegionSpec {
        RegionSpec {
            region_id: "R01".into(),
            farms,
            capacity_series: vec![],
            hull_mask: None,
        }
    }

    #[test]
    fn curve_points() {
        let t = TurbineParams::default();
        assert_eq!(power_curve(2.0, &t), 0.0);
        assert_eq!(power_curve(12.0, &t), 1.0);
        assert_eq!(power_curve(25.0, &t), 0.0);
        let expected = (7.5f64.powi(3) - 27.0) / (1728.0 - 27.0);
        assert!((power_curve(7.5, &t) - expected).abs() < 1e-12);
        assert!((power_curve(7.5, &t) - 0.23214).abs() < 1e-5);
    }

    #[test]
    fn zero_variance_field_is_constant() {
        let p = FieldParams {
            mean_speed: 7.0,
            std_speed: 0.0,
            spatial_smoothing_cells: 2.0,
            temporal_ar1: 0.5,
            rng_seed: 3,
        };
        let m = generate_wind_fields(0, 10, 5, 6, &p).unwrap();
        assert!(m.values().iter().all(|v| *v == 7.0));
    }

    #[test]
    fn rated_and_calm_power() {
        let t = TurbineParams::default();
        let r = region(vec![Farm {
            x: 1.5,
            y: 1.0,
            capacity_mw: 10.0,
        }]);
        let p = synthesize_power(&flat(12.0, 4, 4, 5), &r, &t, 0.0, 1).unwrap();
        assert!(p.values().iter().all(|v| *v == 10.0));
        let p = synthesize_power(&flat(2.0, 4, 4, 5), &r, &t, 0.0, 1).unwrap();
        assert!(p.values().iter().all(|v| *v == 0.0));
        let out = region(vec![Farm {
            x: 4.0,
            y: 1.0,
            capacity_mw: 1.0,
        }]);
        assert!(synthesize_power(&flat(2.0, 4, 4, 5), &out, &t, 0.0, 1).is_err());
    }

    #[test]
    fn layout_rejects_overfull_grid() {
        let cfg = BenchmarkConfig {
            regions: 4,
            farms_per_region: 50,
            rows: 8,
            cols: 8,
            max_hours: Some(4),
            ..Default::default()
        };
        assert!(generate_benchmark(&cfg).is_err());
    }

    #[test]
    fn quarters_cover_period() {
        let s = year_start(2018);
        let q = quarters_covering(s, year_start(2021));
        assert_eq!(q.len(), 12);
        assert_eq!(q[1], NaiveDate::from_ymd_opt(2018, 4, 1).unwrap());
        let mid = s + 24 * 50;
        assert_eq!(quarters_covering(mid, mid + 1)[0], NaiveDate::from_ymd_opt(2018, 1, 1).unwrap());
    }
}
