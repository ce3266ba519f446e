use std::path::Path;

use chrono::{Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::time::{date_start, format_iso, EpochHour};

/// A wind farm at fractional grid coordinates `(x = col, y = row)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Farm {
    pub x: f64,
    pub y: f64,
    pub capacity_mw: f64,
}

/// Installed regional capacity from `quarter_start` for three months.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEntry {
    #[serde(deserialize_with = "de_date")]
    pub quarter_start: NaiveDate,
    pub installed_mw: f64,
}

/// Accepts both `"2020-01-01"` and a bare TOML date `2020-01-01`.
fn de_date<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<NaiveDate, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Toml(toml::value::Datetime),
    }
    let text = match Raw::deserialize(d)? {
        Raw::Text(s) => s,
        Raw::Toml(dt) => dt.to_string(),
    };
    NaiveDate::parse_from_str(&text, "%Y-%m-%d").map_err(serde::de::Error::custom)
}

impl CapacityEntry {
    pub fn start_hour(&self) -> EpochHour {
        date_start(self.quarter_start)
    }

    pub fn end_hour(&self) -> EpochHour {
        let end = self
            .quarter_start
            .checked_add_months(Months::new(3))
            .expect("quarter end in range");
        date_start(end)
    }
}

/// Boolean grid aligned with a map, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMask {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<bool>,
}

impl GridMask {
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.cols + col]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub region_id: String,
    pub farms: Vec<Farm>,
    pub capacity_series: Vec<CapacityEntry>,
    #[serde(skip)]
    pub hull_mask: Option<GridMask>,
}

impl RegionSpec {
    pub fn total_farm_capacity(&self) -> f64 {
        self.farms.iter().map(|f| f.capacity_mw).sum()
    }

    /// Checks farms against a `rows x cols` grid and capacity coverage of
    /// `[start, end)`.
    pub fn validate(&self, rows: usize, cols: usize, start: EpochHour, end: EpochHour) -> Result<()> {
        if self.farms.is_empty() {
            return Err(CoreError::validation(format!("region {} has no farms", self.region_id)));
        }
        for (i, f) in self.farms.iter().enumerate() {
            let inside = f.x >= 0.0 && f.y >= 0.0 && f.x <= (cols - 1) as f64 && f.y <= (rows - 1) as f64;
            if !inside || !f.x.is_finite() || !f.y.is_finite() {
                return Err(CoreError::validation(format!(
                    "region {} farm {i} at ({}, {}) is outside the {rows}x{cols} grid",
                    self.region_id, f.x, f.y
                )));
            }
            if !(f.capacity_mw > 0.0) {
                return Err(CoreError::validation(format!(
                    "region {} farm {i} has non-positive capacity",
                    self.region_id
                )));
            }
        }
        self.check_capacity_series()?;
        if end > start {
            self.installed_at(start)?;
            self.installed_at(end - 1)?;
        }
        if let Some(mask) = &self.hull_mask {
            if mask.rows != rows || mask.cols != cols {
                return Err(CoreError::validation(format!("region {} mask is not aligned with the grid", self.region_id)));
            }
        }
        Ok(())
    }

    fn check_capacity_series(&self) -> Result<()> {
        if self.capacity_series.is_empty() {
            return Err(CoreError::Capacity(format!("region {} has no capacity series", self.region_id)));
        }
        for w in self.capacity_series.windows(2) {
            if w[1].quarter_start <= w[0].quarter_start {
                return Err(CoreError::Capacity(format!("region {} capacity series is not sorted", self.region_id)));
            }
        }
        if let Some(e) = self.capacity_series.iter().find(|e| !(e.installed_mw > 0.0)) {
            return Err(CoreError::Capacity(format!(
                "region {} has non-positive installed capacity {} from {}",
                self.region_id, e.installed_mw, e.quarter_start
            )));
        }
        Ok(())
    }

    /// Installed capacity in force at `t`.
    pub fn installed_at(&self, t: EpochHour) -> Result<f64> {
        installed_at(&self.capacity_series, t)
    }
}

/// Capacity lookup on a sorted quarterly series.
pub fn installed_at(series: &[CapacityEntry], t: EpochHour) -> Result<f64> {
    let idx = series.partition_point(|e| e.start_hour() <= t);
    if idx == 0 {
        return Err(CoreError::Capacity(format!("{} precedes the first capacity quarter", format_iso(t))));
    }
    let e = &series[idx - 1];
    if t >= e.end_hour() {
        return Err(CoreError::Capacity(format!("{} is after the last capacity quarter", format_iso(t))));
    }
    if !(e.installed_mw > 0.0) {
        return Err(CoreError::Capacity(format!("installed capacity {} at {} is not positive", e.installed_mw, e.quarter_start)));
    }
    Ok(e.installed_mw)
}

/// On-disk region manifest (TOML).
///
/// ```toml
/// [[region]]
/// region_id = "R01"
/// farms = [{ x = 4.5, y = 7.25, capacity_mw = 42.0 }]
/// capacity_series = [{ quarter_start = "2018-01-01", installed_mw = 42.0 }]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionManifest {
    pub region: Vec<RegionSpec>,
}

impl RegionManifest {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CoreError::Manifest(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CoreError::Manifest(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| CoreError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::parse_iso;

    fn quarters() -> Vec<CapacityEntry> {
        vec![
            CapacityEntry {
                quarter_start: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
                installed_mw: 800.0,
            },
            CapacityEntry {
                quarter_start: NaiveDate::from_ymd_opt(2020, 4, 1).unwrap(),
                installed_mw: 1000.0,
            },
        ]
    }

    #[test]
    fn quarter_lookup_uses_the_quarter_in_force() {
        let q = quarters();
        assert_eq!(installed_at(&q, parse_iso("2020-03-31T23").unwrap()).unwrap(), 800.0);
        assert_eq!(installed_at(&q, parse_iso("2020-04-01T00").unwrap()).unwrap(), 1000.0);
        assert!(installed_at(&q, parse_iso("2019-12-31T23").unwrap()).is_err());
        assert!(installed_at(&q, parse_iso("2020-07-01T00").unwrap()).is_err());
    }

    #[test]
    fn manifest_round_trips() {
        let m = RegionManifest {
            region: vec![RegionSpec {
                region_id: "R01".into(),
                farms: vec![Farm {
                    x: 1.5,
                    y: 2.25,
                    capacity_mw: 40.0,
                }],
                capacity_series: quarters(),
                hull_mask: None,
            }],
        };
        let text = m.to_toml().unwrap();
        assert_eq!(RegionManifest::from_toml(&text).unwrap(), m);
    }

    #[test]
    fn validation_catches_out_of_grid_farms() {
        let mut r = RegionManifest::from_toml(
            "[[region]]\nregion_id='A'\nfarms=[{x=1.0,y=1.0,capacity_mw=5.0}]\ncapacity_series=[{quarter_start=2020-01-01,installed_mw=5.0}]\n",
        )
        .unwrap()
        .region
        .remove(0);
        let t = parse_iso("2020-01-01T00").unwrap();
        assert!(r.validate(4, 4, t, t + 24).is_ok());
        r.farms[0].x = 3.5;
        assert!(r.validate(4, 4, t, t + 24).is_err());
    }
}
