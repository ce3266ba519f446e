//! Writes a benchmark run to disk. Everything except `run_meta.json` is a
//! pure function of the config, so single-worker reruns match byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use ventus_core::metrics::aggregate_national;
use ventus_core::time::{format_iso, parse_iso};
use ventus_core::PowerSeries;
use ventus_evo::{encode_log, SearchOutcome};

use crate::config::BenchConfig;
use crate::error::{write, BenchError, Result};
use crate::pipeline::{BenchOutcome, Cell, ConvBaseline};
use crate::plot::{default_week_start, parse_week_start, render_weekly_plot};
use crate::report::NATIONAL;

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_TXT: &str = "report.txt";
pub const HORIZON_CSV: &str = "report_by_horizon.csv";
pub const SEARCH_LOG: &str = "search_log.csv";
pub const BEST_ARCHS: &str = "best_architectures.txt";
pub const BASELINES_CSV: &str = "conv_baselines.csv";
pub const GRID_CSV: &str = "conv_grid.csv";
pub const META_JSON: &str = "run_meta.json";
pub const FORECAST_DIR: &str = "forecasts";
pub const TRUTH_CSV: &str = "truth.csv";
pub const CONFIG_TOML: &str = "config.toml";

/// Wide CSV: one column per region plus the national sum.
pub fn series_table(series: &BTreeMap<String, PowerSeries>) -> Result<String> {
    let national = aggregate_national(series)?;
    let mut s = String::from("timestamp");
    for id in series.keys() {
        s.push(',');
        s.push_str(id);
    }
    let _ = writeln!(s, ",{NATIONAL}");
    for (k, t) in national.timestamps().iter().enumerate() {
        s.push_str(&format_iso(*t));
        for p in series.values() {
            let _ = write!(s, ",{}", p.values()[k]);
        }
        let _ = writeln!(s, ",{}", national.values()[k]);
    }
    Ok(s)
}

/// Inverse of [`series_table`]; the national column is included.
pub fn read_series_table(text: &str) -> Result<BTreeMap<String, PowerSeries>> {
    let bad = |m: String| BenchError::config(format!("forecast table: {m}"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').collect();
    if header.first() != Some(&"timestamp") || header.len() < 2 {
        return Err(bad("header must start with `timestamp`".into()));
    }
    let mut ts = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 1];
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != header.len() {
            return Err(bad(format!("line {} has {} fields", n + 2, f.len())));
        }
        ts.push(parse_iso(f[0])?);
        for (c, v) in cols.iter_mut().zip(&f[1..]) {
            c.push(v.parse().map_err(|_| bad(format!("line {}: bad number `{v}`", n + 2)))?);
        }
    }
    header[1..]
        .iter()
        .zip(cols)
        .map(|(h, c)| Ok((h.to_string(), PowerSeries::new(ts.clone(), c)?)))
        .collect()
}

pub fn baselines_csv(conv: &BTreeMap<String, Cell<ConvBaseline>>) -> String {
    let mut s = String::from("region,conv_spec,validation_mae_mw\n");
    for (r, b) in conv {
        match b {
            Ok(b) => {
                let _ = writeln!(s, "{r},{},{}", b.grid.best.summary().replace(',', ";"), b.model.validation_mae_mw);
            }
            Err(_) => {
                let _ = writeln!(s, "{r},failed,");
            }
        }
    }
    s
}

pub fn grid_csv(conv: &BTreeMap<String, Cell<ConvBaseline>>) -> String {
    let mut s = String::from("region,layers,kernel,channels,activation,validation_mae_mw,selected\n");
    for (r, b) in conv {
        let Ok(b) = b else { continue };
        let chosen = b.grid.best.conv_spec().ok();
        for (c, score) in &b.grid.scores {
            let _ = writeln!(
                s,
                "{r},{},{},{},{},{score},{}",
                c.layers,
                c.kernel,
                c.channels,
                c.act.name(),
                Some(*c) == chosen
            );
        }
    }
    s
}

pub fn best_architectures(search: &SearchOutcome) -> String {
    let mut s = String::new();
    for (r, e) in &search.best.entries {
        let _ = writeln!(s, "[{r}]");
        let _ = writeln!(s, "eval_index = {}", e.eval_index);
        let _ = writeln!(s, "hash = {}", e.arch.hash());
        let _ = writeln!(s, "raw_loss_mw = {}", e.raw_loss);
        let _ = writeln!(s, "normalized_loss = {}", e.normalized_loss);
        let _ = writeln!(s, "summary = {}", e.arch.summary());
        let _ = writeln!(s, "{}", e.arch.encode());
    }
    s
}

/// Search artifacts: the log, the best architecture per region and their
/// checkpoints.
pub fn write_search(out: &Path, search: &SearchOutcome) -> Result<()> {
    write(&out.join(SEARCH_LOG), encode_log(&search.log))?;
    write(&out.join(BEST_ARCHS), best_architectures(search))?;
    for (r, e) in &search.best.entries {
        if let Some(m) = &e.model {
            write(&out.join("models").join("dragon").join(format!("{r}.json")), m.to_json()?)?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    config_hash: String,
    seed: u64,
    dataset_seed: u64,
    dataset_hash: &'a str,
    workers: usize,
    train_steps: usize,
    test_steps: usize,
    durations_s: BTreeMap<&'a str, f64>,
    failures: Vec<String>,
}

pub fn write_outcome(out: &Path, cfg: &BenchConfig, o: &BenchOutcome) -> Result<()> {
    write(&out.join(CONFIG_TOML), cfg.to_toml())?;
    write(&out.join(REPORT_CSV), o.report.to_csv())?;
    write(&out.join(REPORT_TXT), o.report.to_text())?;
    if let Some(h) = o.report.horizon_csv() {
        write(&out.join(HORIZON_CSV), h)?;
    }
    let fdir = out.join(FORECAST_DIR);
    write(&fdir.join(TRUTH_CSV), series_table(&o.truth)?)?;
    let mut plotted = Vec::new();
    for kind in &o.kinds {
        let f = o.forecasts(kind.name());
        if f.len() == o.region_ids.len() {
            write(&fdir.join(format!("{}.csv", kind.name())), series_table(&f)?)?;
            plotted.push((kind.name().to_string(), f));
        }
        for (r, run) in &o.runs[kind.name()] {
            if let Ok(Some(m)) = run.as_ref().map(|x| x.model.as_ref()) {
                if kind.name() != "dragon" {
                    write(&out.join("models").join(kind.name()).join(format!("{r}.json")), m.to_json()?)?;
                }
            }
        }
    }
    if !o.conv.is_empty() {
        write(&out.join(BASELINES_CSV), baselines_csv(&o.conv))?;
        write(&out.join(GRID_CSV), grid_csv(&o.conv))?;
    }
    if let Some(Ok(search)) = &o.search {
        write_search(out, search)?;
    }
    if !plotted.is_empty() {
        let start = match &cfg.report.week_start {
            Some(w) => parse_week_start(w)?,
            None => default_week_start(o.truth.values().next().map(|p| p.timestamps()).unwrap_or(&[]))?,
        };
        let national_truth = aggregate_national(&o.truth)?;
        let national: Vec<(String, PowerSeries)> = plotted
            .iter()
            .map(|(m, f)| Ok((m.clone(), aggregate_national(f)?)))
            .collect::<Result<_>>()?;
        render_weekly_plot(&national_truth, &national, start, &out.join("plots").join("week_national.svg"))?;
        for r in &o.region_ids {
            let per: Vec<(String, PowerSeries)> = plotted.iter().map(|(m, f)| (m.clone(), f[r].clone())).collect();
            render_weekly_plot(&o.truth[r], &per, start, &out.join("plots").join(format!("week_{r}.svg")))?;
        }
    }
    let meta = RunMeta {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        dataset_seed: cfg.benchmark.seed,
        dataset_hash: &o.dataset_hash,
        workers: cfg.workers,
        train_steps: o.train_steps,
        test_steps: o.test_steps,
        durations_s: o.durations.iter().map(|(k, v)| (k.as_str(), *v)).collect(),
        failures: o.failures().into_iter().map(|(m, r, e)| format!("{m}/{r}: {e}")).collect(),
    };
    write(&out.join(META_JSON), serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
    Ok(())
}
