//! Persistence forecasts and the regional mean-wind feature.

use ventus_core::prep::RegionCrop;
use ventus_core::{ForecastRunIndex, PowerSeries};

use crate::error::{ModelError, Result};

pub const MAX_HORIZON: u32 = 6;

/// `forecast(t + h) = observed(t)`, covering `observed`'s timestamps from
/// the `h`-th onwards.
pub fn persistence_forecast(observed: &PowerSeries, h: u32) -> Result<PowerSeries> {
    if !(1..=MAX_HORIZON).contains(&h) {
        return Err(ModelError::input(format!("horizon {h} outside 1..={MAX_HORIZON}")));
    }
    let h = h as usize;
    if observed.len() <= h {
        return Err(ModelError::input(format!(
            "series of {} points is too short for horizon {h}",
            observed.len()
        )));
    }
    let ts = observed.timestamps()[h..].to_vec();
    let vals = observed.values()[..observed.len() - h].to_vec();
    Ok(PowerSeries::new(ts, vals)?)
}

/// Persistence under the forecast-run schedule: each target hour repeats
/// the observation at its run time, so the horizon is the hour's lead time.
///
/// Returns forecasts for `targets` (a sub-range of `observed`'s timestamps);
/// the first targets use observations from before the range.
pub fn persistence_by_run(observed: &PowerSeries, targets: &[i64], runs: ForecastRunIndex) -> Result<PowerSeries> {
    let mut vals = Vec::with_capacity(targets.len());
    for &t in targets {
        let issue = runs.run_time(t);
        let v = observed.value_at(issue).ok_or_else(|| {
            ModelError::input(format!("no observation at run time {issue} for target hour {t}"))
        })?;
        vals.push(v);
    }
    Ok(PowerSeries::new(targets.to_vec(), vals)?)
}

/// Mean wind speed over the crop's in-hull cells at step `t`.
pub fn regional_mean_feature(crop: &RegionCrop, t: usize) -> Result<f64> {
    if crop.mask.count() == 0 {
        return Err(ModelError::input(format!("region {} has an empty mask", crop.region_id)));
    }
    if t >= crop.maps.steps() {
        return Err(ModelError::input(format!("step {t} outside the crop's {} steps", crop.maps.steps())));
    }
    Ok(crop.masked_mean(t))
}

/// The feature for every step of the crop.
pub fn regional_mean_series(crop: &RegionCrop) -> Result<Vec<f64>> {
    (0..crop.maps.steps()).map(|t| regional_mean_feature(crop, t)).collect()
}
