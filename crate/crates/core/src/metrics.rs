//! Error metrics and bottom-up aggregation.

use std::collections::BTreeMap;

use crate::error::{CoreError, Result};
use crate::series::PowerSeries;

/// Mean absolute error in MW over identically time-stamped series.
pub fn mae(truth: &PowerSeries, forecast: &PowerSeries) -> Result<f64> {
    if truth.timestamps() != forecast.timestamps() {
        return Err(CoreError::validation("mae: truth and forecast timestamps differ"));
    }
    if truth.is_empty() {
        return Err(CoreError::validation("mae: empty series"));
    }
    let sum: f64 = truth
        .values()
        .iter()
        .zip(forecast.values())
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok(sum / truth.len() as f64)
}

/// MAE as a percentage of mean generation.
pub fn nmae(mae_mw: f64, mean_generation_mw: f64) -> Result<f64> {
    if !(mean_generation_mw > 0.0) {
        return Err(CoreError::validation(format!("nmae: mean generation {mean_generation_mw} must be positive")));
    }
    Ok(100.0 * mae_mw / mean_generation_mw)
}

/// Pointwise sum of regional series sharing one time axis.
pub fn aggregate_national(regional: &BTreeMap<String, PowerSeries>) -> Result<PowerSeries> {
    let mut iter = regional.iter();
    let (_, first) = iter
        .next()
        .ok_or_else(|| CoreError::validation("aggregate_national: no regions"))?;
    let mut total = first.values().to_vec();
    for (id, p) in iter {
        if p.timestamps() != first.timestamps() {
            return Err(CoreError::validation(format!("aggregate_national: region {id} timestamps differ")));
        }
        for (t, v) in total.iter_mut().zip(p.values()) {
            *t += v;
        }
    }
    PowerSeries::new(first.timestamps().to_vec(), total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: &[f64]) -> PowerSeries {
        PowerSeries::from_start(0, v.to_vec()).unwrap()
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&series(&[1.0, 2.0]), &series(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(mae(&series(&[100.0, 200.0]), &series(&[110.0, 190.0])).unwrap(), 10.0);
        let shifted = PowerSeries::from_start(1, vec![1.0, 2.0]).unwrap();
        assert!(mae(&series(&[1.0, 2.0]), &shifted).is_err());
    }

    #[test]
    fn nmae_examples() {
        assert!((nmae(346.7, 4502.6).unwrap() - 7.7).abs() < 0.05);
        assert!((nmae(125.6, 1004.8).unwrap() - 12.5).abs() < 0.05);
        assert_eq!(nmae(0.0, 3.0).unwrap(), 0.0);
        assert!(nmae(1.0, 0.0).is_err());
    }

    #[test]
    fn national_sum() {
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), series(&[100.0, 100.0]));
        assert_eq!(aggregate_national(&m).unwrap(), series(&[100.0, 100.0]));
        m.insert("b".to_string(), series(&[200.0, 200.0]));
        assert_eq!(aggregate_national(&m).unwrap().values(), &[300.0, 300.0]);
        m.insert("c".to_string(), PowerSeries::from_start(5, vec![1.0, 1.0]).unwrap());
        assert!(aggregate_national(&m).is_err());
    }
}
