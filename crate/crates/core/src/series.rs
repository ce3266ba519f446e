use crate::error::{CoreError, Result};
use crate::time::{format_iso, EpochHour};

/// A time-indexed stack of 2-D wind-speed grids (m/s), hourly.
///
/// Layout is time-major then row-major: `values[(t * rows + r) * cols + c]`.
/// Row 0 is the northern edge; cell centers sit at integer coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSeries {
    start: EpochHour,
    steps: usize,
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl MapSeries {
    pub const STEP_HOURS: i64 = 1;

    pub fn new(start: EpochHour, steps: usize, rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(CoreError::validation(format!("map grid must be at least 2x2, got {rows}x{cols}")));
        }
        if steps == 0 {
            return Err(CoreError::validation("map series has no time steps"));
        }
        if values.len() != steps * rows * cols {
            return Err(CoreError::validation(format!(
                "map series holds {} values, expected {steps}x{rows}x{cols}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::validation(format!("wind speed at flat index {i} is {} (must be finite and >= 0)", values[i])));
        }
        Ok(Self {
            start,
            steps,
            rows,
            cols,
            values,
        })
    }

    pub fn start(&self) -> EpochHour {
        self.start
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn frame_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let l = self.frame_len();
        &self.values[t * l..(t + 1) * l]
    }

    pub fn at(&self, t: usize, row: usize, col: usize) -> f32 {
        self.values[(t * self.rows + row) * self.cols + col]
    }

    pub fn timestamp(&self, t: usize) -> EpochHour {
        self.start + t as i64 * Self::STEP_HOURS
    }

    pub fn end(&self) -> EpochHour {
        self.timestamp(self.steps)
    }

    pub fn timestamps(&self) -> Vec<EpochHour> {
        (0..self.steps).map(|t| self.timestamp(t)).collect()
    }

    pub fn index_of(&self, ts: EpochHour) -> Option<usize> {
        let off = ts - self.start;
        (off >= 0 && (off as usize) < self.steps).then_some(off as usize)
    }

    /// Steps `range` of the series as a new series.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.steps || range.start >= range.end {
            return Err(CoreError::validation(format!("time slice {range:?} outside 0..{}", self.steps)));
        }
        let l = self.frame_len();
        Ok(Self {
            start: self.timestamp(range.start),
            steps: range.len(),
            rows: self.rows,
            cols: self.cols,
            values: self.values[range.start * l..range.end * l].to_vec(),
        })
    }

    /// Spatial window `[row0, row1) x [col0, col1)` over all time steps.
    pub fn crop(&self, row0: usize, row1: usize, col0: usize, col1: usize) -> Result<Self> {
        if row1 > self.rows || col1 > self.cols || row0 >= row1 || col0 >= col1 {
            return Err(CoreError::validation(format!(
                "crop rows {row0}..{row1} cols {col0}..{col1} outside {}x{} grid",
                self.rows, self.cols
            )));
        }
        let (h, w) = (row1 - row0, col1 - col0);
        let mut values = Vec::with_capacity(self.steps * h * w);
        for t in 0..self.steps {
            let f = self.frame(t);
            for r in row0..row1 {
                values.extend_from_slice(&f[r * self.cols + col0..r * self.cols + col1]);
            }
        }
        Self::new(self.start, self.steps, h, w, values)
    }

    /// Bilinear sample at fractional `(x = col, y = row)` of step `t`.
    pub fn bilinear(&self, t: usize, x: f64, y: f64) -> f64 {
        let f = self.frame(t);
        let x0 = (x.floor() as usize).min(self.cols - 2);
        let y0 = (y.floor() as usize).min(self.rows - 2);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let v = |r: usize, c: usize| f[r * self.cols + c] as f64;
        let top = v(y0, x0) * (1.0 - fx) + v(y0, x0 + 1) * fx;
        let bottom = v(y0 + 1, x0) * (1.0 - fx) + v(y0 + 1, x0 + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.cols - 1) as f64 && y <= (self.rows - 1) as f64
    }

    /// Appends `other`, which must start right after `self` on the same grid.
    pub fn concat(&self, other: &MapSeries) -> Result<Self> {
        if other.start != self.end() || other.rows != self.rows || other.cols != self.cols {
            return Err(CoreError::validation("map series are not contiguous on the same grid"));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Self::new(self.start, self.steps + other.steps, self.rows, self.cols, values)
    }
}

/// Hourly power in MW, either observed or forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeries {
    timestamps: Vec<EpochHour>,
    power_mw: Vec<f64>,
}

impl PowerSeries {
    pub fn new(timestamps: Vec<EpochHour>, power_mw: Vec<f64>) -> Result<Self> {
        if timestamps.len() != power_mw.len() {
            return Err(CoreError::validation(format!(
                "{} timestamps but {} power values",
                timestamps.len(),
                power_mw.len()
            )));
        }
        let mut missing = Vec::new();
        for w in timestamps.windows(2) {
            if w[1] <= w[0] {
                return Err(CoreError::validation(format!(
                    "timestamps not increasing at {}",
                    format_iso(w[1])
                )));
            }
            missing.extend((w[0] + 1..w[1]).map(format_iso));
        }
        if !missing.is_empty() {
            return Err(CoreError::Gap { missing });
        }
        if let Some(i) = power_mw.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(CoreError::validation(format!(
                "power at {} is {} (must be finite and >= 0)",
                format_iso(timestamps[i]),
                power_mw[i]
            )));
        }
        Ok(Self { timestamps, power_mw })
    }

    pub fn from_start(start: EpochHour, power_mw: Vec<f64>) -> Result<Self> {
        let ts = (0..power_mw.len() as i64).map(|k| start + k).collect();
        Self::new(ts, power_mw)
    }

    pub fn timestamps(&self) -> &[EpochHour] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.power_mw
    }

    pub fn len(&self) -> usize {
        self.power_mw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_mw.is_empty()
    }

    pub fn start(&self) -> Option<EpochHour> {
        self.timestamps.first().copied()
    }

    pub fn value_at(&self, ts: EpochHour) -> Option<f64> {
        let start = self.start()?;
        let off = ts - start;
        (off >= 0 && (off as usize) < self.len()).then(|| self.power_mw[off as usize])
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start > range.end {
            return Err(CoreError::validation(format!("slice {range:?} outside 0..{}", self.len())));
        }
        Ok(Self {
            timestamps: self.timestamps[range.clone()].to_vec(),
            power_mw: self.power_mw[range].to_vec(),
        })
    }

    /// Restriction to `[start, end)`.
    pub fn window(&self, start: EpochHour, end: EpochHour) -> Result<Self> {
        let Some(first) = self.start() else {
            return Err(CoreError::validation("empty series"));
        };
        let lo = (start - first).clamp(0, self.len() as i64) as usize;
        let hi = (end - first).clamp(0, self.len() as i64) as usize;
        self.slice(lo..hi.max(lo))
    }

    pub fn concat(&self, other: &PowerSeries) -> Result<Self> {
        let mut ts = self.timestamps.clone();
        ts.extend_from_slice(&other.timestamps);
        let mut p = self.power_mw.clone();
        p.extend_from_slice(&other.power_mw);
        Self::new(ts, p)
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.power_mw.iter().sum::<f64>() / self.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(steps: usize, rows: usize, cols: usize) -> MapSeries {
        let v = (0..steps * rows * cols).map(|i| i as f32).collect();
        MapSeries::new(100, steps, rows, cols, v).unwrap()
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(MapSeries::new(0, 1, 1, 4, vec![0.0; 4]).is_err());
        assert!(MapSeries::new(0, 1, 2, 2, vec![0.0, -1.0, 0.0, 0.0]).is_err());
        assert!(MapSeries::new(0, 1, 2, 2, vec![0.0, f32::NAN, 0.0, 0.0]).is_err());
        assert!(MapSeries::new(0, 2, 2, 2, vec![0.0; 4]).is_err());
    }

    #[test]
    fn bilinear_midpoint_and_corners() {
        let m = MapSeries::new(0, 1, 2, 2, vec![4.0, 8.0, 0.0, 2.0]).unwrap();
        assert_eq!(m.bilinear(0, 0.5, 0.0), 6.0);
        assert_eq!(m.bilinear(0, 1.0, 1.0), 2.0);
        assert_eq!(m.bilinear(0, 0.5, 0.5), 3.5);
    }

    #[test]
    fn crop_and_slice() {
        let m = ramp(3, 4, 5);
        let c = m.crop(1, 3, 2, 4).unwrap();
        assert_eq!((c.rows(), c.cols()), (2, 2));
        assert_eq!(c.at(1, 0, 0), m.at(1, 1, 2));
        let s = m.slice(1..3).unwrap();
        assert_eq!(s.start(), 101);
        assert_eq!(s.frame(0), m.frame(1));
        assert_eq!(m.slice(0..1).unwrap().concat(&m.slice(1..3).unwrap()).unwrap(), m);
    }

    #[test]
    fn power_gap_lists_missing_hours() {
        let err = PowerSeries::new(vec![0, 1, 4], vec![1.0, 2.0, 3.0]).unwrap_err();
        match err {
            CoreError::Gap { missing } => assert_eq!(missing.len(), 2),
            other => panic!("unexpected {other}"),
        }
        assert!(PowerSeries::new(vec![0, 1], vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn window_restricts_range() {
        let p = PowerSeries::from_start(10, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = p.window(11, 13).unwrap();
        assert_eq!(w.values(), &[2.0, 3.0]);
        assert_eq!(p.value_at(13), Some(4.0));
        assert_eq!(p.value_at(14), None);
    }
}
