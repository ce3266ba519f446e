use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::format::{read_map_stack, read_power_csv, write_map_stack, write_power_csv};
use crate::region::{RegionManifest, RegionSpec};
use crate::series::{MapSeries, PowerSeries};

pub const DEFAULT_HORIZONS: [u32; 6] = [1, 2, 3, 4, 5, 6];

/// Maps, regions and per-region ground-truth power on a shared time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub maps: MapSeries,
    pub regions: Vec<RegionSpec>,
    pub power: BTreeMap<String, PowerSeries>,
    pub horizons: Vec<u32>,
}

impl Dataset {
    pub fn new(maps: MapSeries, regions: Vec<RegionSpec>, power: BTreeMap<String, PowerSeries>) -> Result<Self> {
        let ds = Self {
            maps,
            regions,
            power,
            horizons: DEFAULT_HORIZONS.to_vec(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(CoreError::validation("dataset has no regions"));
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|h| !(1..=6).contains(h)) {
            return Err(CoreError::validation(format!("horizon set {:?} must be a non-empty subset of 1..=6", self.horizons)));
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.regions {
            if !seen.insert(r.region_id.as_str()) {
                return Err(CoreError::validation(format!("duplicate region id {}", r.region_id)));
            }
            r.validate(self.maps.rows(), self.maps.cols(), self.maps.start(), self.maps.end())?;
            let p = self
                .power
                .get(&r.region_id)
                .ok_or_else(|| CoreError::validation(format!("no power series for region {}", r.region_id)))?;
            if p.len() != self.maps.steps() {
                return Err(CoreError::validation(format!(
                    "region {} has {} power values but the maps have {} steps",
                    r.region_id,
                    p.len(),
                    self.maps.steps()
                )));
            }
            if p.start() != Some(self.maps.start()) {
                return Err(CoreError::validation(format!("region {} power is not aligned with the maps", r.region_id)));
            }
        }
        if let Some(extra) = self.power.keys().find(|k| !seen.contains(k.as_str())) {
            return Err(CoreError::validation(format!("power series for unknown region {extra}")));
        }
        Ok(())
    }

    pub fn region(&self, id: &str) -> Option<&RegionSpec> {
        self.regions.iter().find(|r| r.region_id == id)
    }

    pub fn region_ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.region_id.clone()).collect()
    }

    /// Time steps `range` of every series.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        let maps = self.maps.slice(range.clone())?;
        let power = self
            .power
            .iter()
            .map(|(k, p)| Ok((k.clone(), p.slice(range.clone())?)))
            .collect::<Result<_>>()?;
        let ds = Self {
            maps,
            regions: self.regions.clone(),
            power,
            horizons: self.horizons.clone(),
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Writes `maps.wdgs`, `regions.toml` and `power/<region>.csv`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let power_dir = dir.join("power");
        std::fs::create_dir_all(&power_dir).map_err(|e| CoreError::io(&power_dir, e))?;
        write_map_stack(&self.maps, &dir.join("maps.wdgs"))?;
        RegionManifest {
            region: self.regions.clone(),
        }
        .write(&dir.join("regions.toml"))?;
        for (id, p) in &self.power {
            write_power_csv(p, &power_dir.join(format!("{id}.csv")))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let maps = read_map_stack(&dir.join("maps.wdgs"))?;
        let regions = RegionManifest::read(&dir.join("regions.toml"))?.region;
        let mut power = BTreeMap::new();
        for r in &regions {
            let p = read_power_csv(&dir.join("power").join(format!("{}.csv", r.region_id)))?;
            power.insert(r.region_id.clone(), p);
        }
        Self::new(maps, regions, power)
    }

    /// SHA-256 over the map bytes, region manifest and power values.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.maps.start().to_le_bytes());
        h.update((self.maps.steps() as u64).to_le_bytes());
        h.update((self.maps.rows() as u64).to_le_bytes());
        h.update((self.maps.cols() as u64).to_le_bytes());
        for v in self.maps.values() {
            h.update(v.to_le_bytes());
        }
        for r in &self.regions {
            h.update(r.region_id.as_bytes());
            for f in &r.farms {
                h.update(f.x.to_le_bytes());
                h.update(f.y.to_le_bytes());
                h.update(f.capacity_mw.to_le_bytes());
            }
            for c in &r.capacity_series {
                h.update(c.quarter_start.to_string().as_bytes());
                h.update(c.installed_mw.to_le_bytes());
            }
        }
        for (k, p) in &self.power {
            h.update(k.as_bytes());
            for v in p.values() {
                h.update(v.to_le_bytes());
            }
        }
        hex(&h.finalize())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
