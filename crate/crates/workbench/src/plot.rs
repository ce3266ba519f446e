//! Weekly forecast-vs-truth plots as SVG, with a CSV of the plotted values.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use ventus_core::time::{date_of, date_start, format_iso, parse_iso};
use ventus_core::{EpochHour, PowerSeries};

use crate::error::{write, BenchError, Result};

pub const WEEK_HOURS: usize = 168;

const PANEL_W: f64 = 900.0;
const PANEL_H: f64 = 170.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 22.0;
const COLORS: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// `YYYY-MM-DD` (midnight UTC) or any timestamp form `parse_iso` accepts.
pub fn parse_week_start(s: &str) -> Result<EpochHour> {
    if let Ok(d) = NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d") {
        return Ok(date_start(d));
    }
    parse_iso(s).map_err(|e| BenchError::config(format!("week_start: {e}")))
}

/// First Monday 00:00 whose whole week lies within `timestamps`.
pub fn default_week_start(timestamps: &[EpochHour]) -> Result<EpochHour> {
    let (Some(&first), Some(&last)) = (timestamps.first(), timestamps.last()) else {
        return Err(BenchError::Runtime("no test data to plot".into()));
    };
    let mut d = date_of(first);
    if date_start(d) < first {
        d = d.succ_opt().expect("date in range");
    }
    while d.weekday() != Weekday::Mon {
        d = d.succ_opt().expect("date in range");
    }
    let start = date_start(d);
    if start + WEEK_HOURS as i64 - 1 > last {
        return Err(BenchError::Runtime("test period holds no complete Monday-to-Sunday week".into()));
    }
    Ok(start)
}

fn week_of(series: &PowerSeries, start: EpochHour, what: &str) -> Result<Vec<f64>> {
    (0..WEEK_HOURS as i64)
        .map(|k| {
            series
                .value_at(start + k)
                .ok_or_else(|| BenchError::config(format!("week starting {} is not fully inside the {what} series", format_iso(start))))
        })
        .collect()
}

/// The values a weekly plot shows.
#[derive(Debug, Clone, PartialEq)]
pub struct WeekData {
    pub start: EpochHour,
    pub truth: Vec<f64>,
    pub forecasts: Vec<(String, Vec<f64>)>,
}

impl WeekData {
    pub fn new(truth: &PowerSeries, forecasts: &[(String, PowerSeries)], start: EpochHour) -> Result<Self> {
        if forecasts.is_empty() {
            return Err(BenchError::config("nothing to plot"));
        }
        Ok(Self {
            start,
            truth: week_of(truth, start, "truth")?,
            forecasts: forecasts
                .iter()
                .map(|(m, f)| Ok((m.clone(), week_of(f, start, m)?)))
                .collect::<Result<_>>()?,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("timestamp,truth");
        for (m, _) in &self.forecasts {
            s.push(',');
            s.push_str(m);
        }
        s.push('\n');
        for k in 0..WEEK_HOURS {
            s.push_str(&format_iso(self.start + k as i64));
            s.push(',');
            s.push_str(&self.truth[k].to_string());
            for (_, v) in &self.forecasts {
                s.push(',');
                s.push_str(&v[k].to_string());
            }
            s.push('\n');
        }
        s
    }

    pub fn to_svg(&self, title: &str) -> String {
        let n = self.forecasts.len();
        let height = PANEL_H * n as f64;
        let ymax = self
            .forecasts
            .iter()
            .flat_map(|(_, v)| v.iter())
            .chain(&self.truth)
            .fold(0.0f64, |a, b| a.max(*b))
            .max(1.0)
            * 1.05;
        let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
        let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
        let x = |k: usize| MARGIN_L + plot_w * k as f64 / (WEEK_HOURS - 1) as f64;
        let line = |vals: &[f64], top: f64| {
            vals.iter()
                .enumerate()
                .map(|(k, v)| format!("{:.1},{:.1}", x(k), top + MARGIN_T + plot_h * (1.0 - v / ymax)))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut s = String::new();
        let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for (i, (model, vals)) in self.forecasts.iter().enumerate() {
            let top = PANEL_H * i as f64;
            let color = COLORS[i % COLORS.len()];
            let _ = writeln!(s, r#"<g id="panel-{}">"#, escape(model));
            let _ = writeln!(
                s,
                r##"<rect x="{MARGIN_L}" y="{:.1}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##,
                top + MARGIN_T
            );
            let _ = writeln!(s, r#"<text x="{MARGIN_L}" y="{:.1}" font-size="13">{}</text>"#, top + 18.0, escape(model));
            for day in 0..=7 {
                let _ = writeln!(
                    s,
                    r##"<line x1="{0:.1}" x2="{0:.1}" y1="{1:.1}" y2="{2:.1}" stroke="#eee"/>"##,
                    x((day * 24).min(WEEK_HOURS - 1)),
                    top + MARGIN_T,
                    top + MARGIN_T + plot_h
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{:.0}</text>"#,
                MARGIN_L - 4.0,
                top + MARGIN_T + 4.0,
                ymax
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">0 MW</text>"#,
                MARGIN_L - 4.0,
                top + MARGIN_T + plot_h
            );
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="black" stroke-width="1.2" stroke-dasharray="2,3" points="{}"/>"#,
                line(&self.truth, top)
            );
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.4" points="{}"/>"#,
                line(vals, top)
            );
            let _ = writeln!(s, "</g>");
        }
        let _ = writeln!(s, "</svg>");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Writes `svg_path` and a sidecar CSV next to it; returns the CSV path.
pub fn render_weekly_plot(
    truth: &PowerSeries,
    forecasts: &[(String, PowerSeries)],
    week_start: EpochHour,
    svg_path: &Path,
) -> Result<PathBuf> {
    let data = WeekData::new(truth, forecasts, week_start)?;
    let title = format!("week from {}; truth dotted", format_iso(week_start));
    write(svg_path, data.to_svg(&title))?;
    let csv = svg_path.with_extension("csv");
    write(&csv, data.to_csv())?;
    Ok(csv)
}
