//! Per-model, per-region error tables and their text and CSV forms.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ventus_core::metrics::{aggregate_national, mae, nmae};
use ventus_core::{ForecastRunIndex, PowerSeries};

use crate::error::{BenchError, Result};

pub const NATIONAL: &str = "national";
pub const REPORT_CSV_HEADER: &str = "model,region,mae_mw,nmae_pct,mean_generation_mw,status";
pub const HORIZON_CSV_HEADER: &str = "model,region,horizon,hours,mae_mw";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mae_mw: f64,
    pub nmae_pct: f64,
    /// Mean ground truth over the test period, the NMAE denominator.
    pub mean_generation_mw: f64,
}

pub fn evaluate(truth: &PowerSeries, forecast: &PowerSeries) -> Result<Metrics> {
    let mae_mw = mae(truth, forecast)?;
    let mean_generation_mw = truth.mean();
    Ok(Metrics {
        mae_mw,
        nmae_pct: nmae(mae_mw, mean_generation_mw)?,
        mean_generation_mw,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub region: String,
    pub result: std::result::Result<Metrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRow {
    pub model: String,
    pub region: String,
    pub horizon: u32,
    pub hours: usize,
    pub mae_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluationReport {
    /// Models in report order; per model the regions, then the national row.
    pub rows: Vec<ReportRow>,
    pub by_horizon: Option<Vec<HorizonRow>>,
}

fn horizon_rows(model: &str, region: &str, truth: &PowerSeries, forecast: &PowerSeries) -> Vec<HorizonRow> {
    let runs = ForecastRunIndex::default();
    let mut acc: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
    for ((t, a), b) in truth.timestamps().iter().zip(truth.values()).zip(forecast.values()) {
        let e = acc.entry(runs.lead_time(*t)).or_default();
        e.0 += 1;
        e.1 += (a - b).abs();
    }
    acc.into_iter()
        .map(|(h, (n, sum))| HorizonRow {
            model: model.to_string(),
            region: region.to_string(),
            horizon: h,
            hours: n,
            mae_mw: sum / n as f64,
        })
        .collect()
}

/// Scores every forecast against the truth. The national row of a model
/// compares the summed regional forecasts with the summed truth; it fails
/// when any regional forecast is missing.
pub fn build_report(
    regions: &[String],
    truth: &BTreeMap<String, PowerSeries>,
    forecasts: &[(&str, BTreeMap<String, std::result::Result<PowerSeries, String>>)],
    per_horizon: bool,
) -> Result<EvaluationReport> {
    let national_truth = aggregate_national(truth)?;
    let mut rows = Vec::new();
    let mut by_horizon = Vec::new();
    for (model, cells) in forecasts {
        let mut ok = BTreeMap::new();
        let mut failed = Vec::new();
        for r in regions {
            let t = truth
                .get(r)
                .ok_or_else(|| BenchError::Runtime(format!("no ground truth for region {r}")))?;
            let result = match cells.get(r) {
                None => Err("not run".to_string()),
                Some(Err(e)) => Err(e.clone()),
                Some(Ok(f)) => evaluate(t, f).map_err(|e| e.to_string()),
            };
            match &result {
                Ok(_) => {
                    let f = cells[r].as_ref().expect("evaluated");
                    if per_horizon {
                        by_horizon.extend(horizon_rows(model, r, t, f));
                    }
                    ok.insert(r.clone(), f.clone());
                }
                Err(_) => failed.push(r.as_str()),
            }
            rows.push(ReportRow {
                model: model.to_string(),
                region: r.clone(),
                result,
            });
        }
        let result = if failed.is_empty() {
            aggregate_national(&ok)
                .map_err(BenchError::from)
                .and_then(|f| {
                    if per_horizon {
                        by_horizon.extend(horizon_rows(model, NATIONAL, &national_truth, &f));
                    }
                    evaluate(&national_truth, &f)
                })
                .map_err(|e| e.to_string())
        } else {
            Err(format!("missing regional forecasts: {}", failed.join(" ")))
        };
        rows.push(ReportRow {
            model: model.to_string(),
            region: NATIONAL.to_string(),
            result,
        });
    }
    Ok(EvaluationReport {
        rows,
        by_horizon: per_horizon.then_some(by_horizon),
    })
}

fn csv_field(s: &str) -> String {
    // statuses are free text; keep the file one record per line
    s.replace([',', '\n', '\r'], ";")
}

impl EvaluationReport {
    pub fn get(&self, model: &str, region: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model && r.region == region)
    }

    pub fn metrics(&self, model: &str, region: &str) -> Option<Metrics> {
        self.get(model, region).and_then(|r| r.result.as_ref().ok().copied())
    }

    pub fn failures(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.result.is_err()).collect()
    }

    pub fn models(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.model.as_str()) {
                out.push(&r.model);
            }
        }
        out
    }

    pub fn regions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.region.as_str()) {
                out.push(&r.region);
            }
        }
        out
    }

    /// Full-precision numbers: every value parses back to the same f64.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(REPORT_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            match &r.result {
                Ok(m) => {
                    let _ = writeln!(s, "{},{},{},{},{},ok", r.model, r.region, m.mae_mw, m.nmae_pct, m.mean_generation_mw);
                }
                Err(e) => {
                    let _ = writeln!(s, "{},{},,,,failed: {}", r.model, r.region, csv_field(e));
                }
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(REPORT_CSV_HEADER) {
            return Err(BenchError::config("report CSV: missing or unexpected header"));
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let bad = |what: &str| BenchError::config(format!("report CSV line {}: {what}", n + 2));
            let f: Vec<&str> = line.splitn(6, ',').collect();
            if f.len() != 6 {
                return Err(bad("expected 6 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number `{s}`")));
            let result = if f[5] == "ok" {
                Ok(Metrics {
                    mae_mw: num(f[2])?,
                    nmae_pct: num(f[3])?,
                    mean_generation_mw: num(f[4])?,
                })
            } else {
                Err(f[5].strip_prefix("failed: ").unwrap_or(f[5]).to_string())
            };
            rows.push(ReportRow {
                model: f[0].to_string(),
                region: f[1].to_string(),
                result,
            });
        }
        Ok(Self { rows, by_horizon: None })
    }

    pub fn horizon_csv(&self) -> Option<String> {
        let rows = self.by_horizon.as_ref()?;
        let mut s = String::from(HORIZON_CSV_HEADER);
        s.push('\n');
        for r in rows {
            let _ = writeln!(s, "{},{},{},{},{}", r.model, r.region, r.horizon, r.hours, r.mae_mw);
        }
        Some(s)
    }

    /// Aligned table with regions as rows and one `MAE (NMAE)` column per
    /// model, followed by any failure notes.
    pub fn to_text(&self) -> String {
        let models = self.models();
        let regions = self.regions();
        let mut grid: Vec<Vec<String>> = vec![std::iter::once("region".to_string())
            .chain(models.iter().map(|m| m.to_string()))
            .collect()];
        for reg in &regions {
            let mut line = vec![reg.to_string()];
            for m in &models {
                line.push(match self.get(m, reg).map(|r| &r.result) {
                    Some(Ok(x)) => format!("{:.2} MW ({:.2}%)", x.mae_mw, x.nmae_pct),
                    Some(Err(_)) => "FAILED".into(),
                    None => "-".into(),
                });
            }
            grid.push(line);
        }
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|c| grid.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for (i, line) in grid.iter().enumerate() {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                .collect();
            let _ = writeln!(s, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(s, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        let failures = self.failures();
        if !failures.is_empty() {
            let _ = writeln!(s, "\nfailures:");
            for r in failures {
                let _ = writeln!(s, "  {} / {}: {}", r.model, r.region, r.result.as_ref().unwrap_err());
            }
        }
        s
    }
}
