//! Hourly UTC time axis helpers.

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, TimeZone, Utc};

use crate::error::{CoreError, Result};

/// Whole hours since 1970-01-01T00:00Z.
pub type EpochHour = i64;

pub fn to_datetime(h: EpochHour) -> DateTime<Utc> {
    Utc.timestamp_opt(h * 3600, 0).single().expect("epoch hour in range")
}

pub fn from_datetime(dt: DateTime<Utc>) -> Result<EpochHour> {
    let secs = dt.timestamp();
    if secs.rem_euclid(3600) != 0 {
        return Err(CoreError::validation(format!("{dt} is not on the hour")));
    }
    Ok(secs.div_euclid(3600))
}

pub fn date_start(d: NaiveDate) -> EpochHour {
    let dt = d.and_hms_opt(0, 0, 0).expect("midnight exists");
    Utc.from_utc_datetime(&dt).timestamp().div_euclid(3600)
}

pub fn year_start(year: i32) -> EpochHour {
    date_start(NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year"))
}

pub fn year_of(h: EpochHour) -> i32 {
    to_datetime(h).year()
}

pub fn date_of(h: EpochHour) -> NaiveDate {
    to_datetime(h).date_naive()
}

/// `2020-01-01T00:00:00Z`.
pub fn format_iso(h: EpochHour) -> String {
    to_datetime(h).format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Accepts RFC 3339 and the shorter `YYYY-MM-DDTHH[:MM[:SS]]` forms (UTC).
pub fn parse_iso(s: &str) -> Result<EpochHour> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return from_datetime(dt.with_timezone(&Utc));
    }
    let bare = s.trim_end_matches('Z');
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%dT%H", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(ndt) = NaiveDateTime::parse_from_str(bare, fmt) {
            return from_datetime(Utc.from_utc_datetime(&ndt));
        }
        if fmt == "%Y-%m-%dT%H" {
            // chrono needs minutes to build a time; pad them
            if let Ok(ndt) = NaiveDateTime::parse_from_str(&format!("{bare}:00"), "%Y-%m-%dT%H:%M") {
                return from_datetime(Utc.from_utc_datetime(&ndt));
            }
        }
    }
    Err(CoreError::validation(format!("unparseable timestamp {s:?}")))
}

/// Hours in the calendar years `first..=last`.
pub fn hours_in_years(first: i32, last: i32) -> i64 {
    year_start(last + 1) - year_start(first)
}

/// Which NWP run feeds each target hour.
///
/// Runs start every `run_interval` hours at multiples of the interval since
/// the epoch (00, 06, 12, 18 UTC for the default). A target hour uses the
/// most recent run strictly before it, so lead times are `1..=run_interval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForecastRunIndex {
    pub run_interval: i64,
}

impl Default for ForecastRunIndex {
    fn default() -> Self {
        Self { run_interval: 6 }
    }
}

impl ForecastRunIndex {
    pub fn lead_time(&self, t: EpochHour) -> u32 {
        ((t - 1).rem_euclid(self.run_interval) + 1) as u32
    }

    pub fn run_time(&self, t: EpochHour) -> EpochHour {
        t - self.lead_time(t) as i64
    }

    /// Run start times with at least one target hour in `[start, end)`.
    pub fn runs_between(&self, start: EpochHour, end: EpochHour) -> Vec<EpochHour> {
        if end <= start {
            return Vec::new();
        }
        let first = self.run_time(start);
        let last = self.run_time(end - 1);
        (0..=(last - first) / self.run_interval)
            .map(|k| first + k * self.run_interval)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iso_round_trip_and_short_forms() {
        let h = parse_iso("2020-01-01T00:00:00Z").unwrap();
        assert_eq!(format_iso(h), "2020-01-01T00:00:00Z");
        assert_eq!(parse_iso("2020-01-01T01").unwrap(), h + 1);
        assert_eq!(parse_iso("2020-01-01T05:00").unwrap(), h + 5);
        assert!(parse_iso("2020-01-01T00:30:00Z").is_err());
        assert!(parse_iso("yesterday").is_err());
    }

    #[test]
    fn calendar_hour_counts() {
        assert_eq!(hours_in_years(2018, 2019), 17520);
        assert_eq!(hours_in_years(2020, 2020), 8784);
        assert_eq!(hours_in_years(2018, 2020), 26304);
    }

    #[test]
    fn every_hour_has_exactly_one_run_with_lead_in_1_to_6() {
        let idx = ForecastRunIndex::default();
        let t0 = year_start(2020);
        assert_eq!(idx.lead_time(t0), 6);
        assert_eq!(idx.lead_time(t0 + 1), 1);
        for t in t0..t0 + 48 {
            let lead = idx.lead_time(t);
            assert!((1..=6).contains(&lead));
            let run = idx.run_time(t);
            assert_eq!(run.rem_euclid(6), 0);
            let covering: Vec<_> = idx
                .runs_between(t0 - 12, t0 + 60)
                .into_iter()
                .filter(|r| t - r >= 1 && t - r <= 6)
                .collect();
            assert_eq!(covering, vec![run]);
        }
    }
}
