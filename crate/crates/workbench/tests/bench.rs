use std::collections::BTreeMap;
use std::process::Command;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ventus_workbench::config::BenchConfig;
use ventus_workbench::output::{read_series_table, series_table, write_outcome, REPORT_CSV, SEARCH_LOG};
use ventus_workbench::pipeline::par_map;
use ventus_workbench::plot::{default_week_start, parse_week_start, WeekData, WEEK_HOURS};
use ventus_workbench::report::{build_report, EvaluationReport, NATIONAL, REPORT_CSV_HEADER};
use ventus_workbench::{render_weekly_plot, run_benchmark, BenchError};
use ventus_core::metrics::{aggregate_national, mae};
use ventus_core::synth::generate_benchmark;
use ventus_core::time::{parse_iso, year_start};
use ventus_core::{ForecastRunIndex, PowerSeries};
use ventus_evo::{audit_log, decode_log};

fn small_config() -> BenchConfig {
    let mut c = BenchConfig::default();
    c.benchmark.regions = 2;
    c.benchmark.farms_per_region = 3;
    c.benchmark.rows = 12;
    c.benchmark.cols = 12;
    c.benchmark.cluster_extent = 5;
    c.benchmark.first_year = 2019;
    c.benchmark.last_year = 2020;
    c.split.train_years = vec![2019];
    c.split.test_years = vec![2020];
    c.train.epochs = 2;
    c.train.sample_stride = 48;
    c.grid.layers = vec![2];
    c.grid.kernels = vec![3];
    c.grid.channels = vec![4, 8];
    c.grid.activations = vec!["relu".into()];
    c.grid.epochs = 1;
    c.grid.sample_stride = 96;
    c.attention.dim = 8;
    c.attention.heads = 2;
    c.attention.blocks = 1;
    c.tree.trees = 20;
    c.search.population = 2;
    c.search.budget = 4;
    c.search.max_macs = 60_000;
    c
}

fn series(start: i64, v: Vec<f64>) -> PowerSeries {
    PowerSeries::from_start(start, v).unwrap()
}

#[test]
fn default_config_lists_models_in_report_order() {
    let c = BenchConfig::default();
    c.validate().unwrap();
    let names: Vec<&str> = c.model_kinds().unwrap().iter().map(|k| k.name()).collect();
    assert_eq!(names, ["dragon", "conv_net", "patch_attention", "mean_tree", "persistence"]);
    assert_eq!((c.search.population, c.search.budget), (8, 60));
}

#[test]
fn config_toml_round_trip_and_rejections() {
    let c = small_config();
    let back = BenchConfig::from_toml(&c.to_toml()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
    let partial = BenchConfig::from_toml("seed = 5\nmodels = [\"persistence\"]\n[search]\nbudget = 30\n").unwrap();
    assert_eq!(partial.seed, 5);
    assert_eq!(partial.search.budget, 30);
    assert_eq!(partial.search.population, 8);

    let err = |t: &str| BenchConfig::from_toml(t).unwrap_err();
    assert!(matches!(err("models = []"), BenchError::Config(_)));
    assert!(matches!(err("models = [\"lstm\"]"), BenchError::Config(_)));
    assert!(matches!(err("models = [\"dragon\", \"dragon\"]"), BenchError::Config(_)));
    assert!(matches!(err("colour = 3"), BenchError::Config(_)));
    assert!(matches!(err("workers = 0"), BenchError::Config(_)));
    assert_eq!(err("models = []").exit_code(), 2);
    assert_eq!(BenchError::Runtime("x".into()).exit_code(), 3);
}

#[test]
fn par_map_keeps_input_order() {
    let items: Vec<u64> = (0..37).collect();
    let one = par_map(&items, 1, |x| x * x);
    let many = par_map(&items, 5, |x| x * x);
    assert_eq!(one, many);
    assert_eq!(many[36], 36 * 36);
}

/// Two regions, all five models, hand-picked values.
fn fixture() -> (Vec<String>, BTreeMap<String, PowerSeries>, Vec<(&'static str, BTreeMap<String, Result<PowerSeries, String>>)>) {
    let ids = vec!["R01".to_string(), "R02".to_string()];
    let truth: BTreeMap<_, _> = [("R01", vec![10.0, 20.0, 30.0, 40.0]), ("R02", vec![5.0, 5.0, 5.0, 5.0])]
        .into_iter()
        .map(|(k, v)| (k.to_string(), series(0, v)))
        .collect();
    let models = ["dragon", "conv_net", "patch_attention", "mean_tree", "persistence"];
    let forecasts = models
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let d = (i + 1) as f64;
            let cells = [
                ("R01", vec![10.0 + d, 20.0 - d, 30.0 + d, 40.0 - d]),
                ("R02", vec![5.0 + d, 5.0 + d, 5.0, 5.0]),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), Ok(series(0, v))))
            .collect();
            (*m, cells)
        })
        .collect();
    (ids, truth, forecasts)
}

#[test]
fn report_layout_matches_golden_file() {
    let (ids, truth, forecasts) = fixture();
    let rep = build_report(&ids, &truth, &forecasts, false).unwrap();
    let golden = include_str!("golden/report.csv");
    assert_eq!(rep.to_csv(), golden);
    assert!(golden.starts_with(REPORT_CSV_HEADER));
    assert_eq!(EvaluationReport::from_csv(golden).unwrap().rows, rep.rows);
}

#[test]
fn report_cells_match_hand_values() {
    let (ids, truth, forecasts) = fixture();
    let rep = build_report(&ids, &truth, &forecasts, false).unwrap();
    // dragon, d = 1: R01 errors all 1; R02 errors 1, 1, 0, 0
    let m = rep.metrics("dragon", "R01").unwrap();
    assert_eq!(m.mae_mw, 1.0);
    assert_eq!(m.mean_generation_mw, 25.0);
    assert!((m.nmae_pct - 4.0).abs() < 1e-12);
    assert_eq!(rep.metrics("dragon", "R02").unwrap().mae_mw, 0.5);
    // national: truth 15 25 35 45, forecast 17 25 36 44 -> errors 2 0 1 1
    let n = rep.metrics("dragon", NATIONAL).unwrap();
    assert_eq!(n.mae_mw, 1.0);
    assert_eq!(n.mean_generation_mw, 30.0);
    // the national MAE is not the sum of regional MAEs
    assert_ne!(n.mae_mw, 1.0 + 0.5);
}

#[test]
fn national_row_uses_summed_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let ids: Vec<String> = (1..=4).map(|k| format!("R{k:02}")).collect();
    let rand_series = |rng: &mut ChaCha8Rng| series(100, (0..200).map(|_| rng.random_range(0.0..300.0)).collect());
    let truth: BTreeMap<String, PowerSeries> = ids.iter().map(|i| (i.clone(), rand_series(&mut rng))).collect();
    let fc: BTreeMap<String, PowerSeries> = ids.iter().map(|i| (i.clone(), rand_series(&mut rng))).collect();
    let cells = fc.iter().map(|(k, v)| (k.clone(), Ok(v.clone()))).collect();
    let rep = build_report(&ids, &truth, &[("conv_net", cells)], false).unwrap();
    let expect = mae(&aggregate_national(&truth).unwrap(), &aggregate_national(&fc).unwrap()).unwrap();
    assert_eq!(rep.metrics("conv_net", NATIONAL).unwrap().mae_mw, expect);
}

#[test]
fn failed_region_annotates_region_and_national() {
    let (ids, truth, mut forecasts) = fixture();
    forecasts[1].1.insert("R02".into(), Err("training diverged".into()));
    let rep = build_report(&ids, &truth, &forecasts, false).unwrap();
    assert_eq!(rep.failures().len(), 2);
    assert!(rep.get("conv_net", "R02").unwrap().result.is_err());
    assert!(rep.get("conv_net", NATIONAL).unwrap().result.as_ref().unwrap_err().contains("R02"));
    assert!(rep.metrics("conv_net", "R01").is_some());
    let csv = rep.to_csv();
    assert!(csv.contains("conv_net,R02,,,,failed: training diverged\n"));
    assert_eq!(EvaluationReport::from_csv(&csv).unwrap().rows, rep.rows);
    assert!(rep.to_text().contains("failures:"));
}

#[test]
fn per_horizon_rows_pool_back_to_the_total() {
    let runs = ForecastRunIndex::default();
    let truth: BTreeMap<String, PowerSeries> = [("R01".to_string(), series(0, (0..48).map(|k| k as f64).collect()))].into();
    let fc = series(0, (0..48).map(|k| k as f64 + runs.lead_time(k) as f64).collect());
    let rep = build_report(&["R01".to_string()], &truth, &[("persistence", [("R01".to_string(), Ok(fc))].into())], true).unwrap();
    let rows = rep.by_horizon.as_ref().unwrap();
    let regional: Vec<_> = rows.iter().filter(|r| r.region == "R01").collect();
    assert_eq!(regional.len(), 6);
    for r in &regional {
        assert_eq!(r.mae_mw, r.horizon as f64);
        assert_eq!(r.hours, 8);
    }
    let pooled: f64 = regional.iter().map(|r| r.mae_mw * r.hours as f64).sum::<f64>() / 48.0;
    assert!((pooled - rep.metrics("persistence", "R01").unwrap().mae_mw).abs() < 1e-12);
    assert!(rep.horizon_csv().unwrap().lines().count() == 1 + 12);
}

proptest! {
    #[test]
    fn nmae_times_mean_equals_mae(
        t in prop::collection::vec(0.0f64..500.0, 2..60),
        noise in prop::collection::vec(-100.0f64..100.0, 60),
    ) {
        prop_assume!(t.iter().sum::<f64>() > 1.0);
        let truth: BTreeMap<String, PowerSeries> = [("R01".to_string(), series(0, t.clone()))].into();
        let f: Vec<f64> = t.iter().zip(&noise).map(|(a, n)| (a + n).max(0.0)).collect();
        let rep = build_report(&["R01".to_string()], &truth, &[("mean_tree", [("R01".to_string(), Ok(series(0, f)))].into())], false).unwrap();
        let csv = EvaluationReport::from_csv(&rep.to_csv()).unwrap();
        for row in &csv.rows {
            let m = row.result.as_ref().unwrap();
            let back = m.nmae_pct * m.mean_generation_mw / 100.0;
            prop_assert!((back - m.mae_mw).abs() <= 1e-9 * m.mae_mw.abs().max(f64::MIN_POSITIVE));
        }
    }
}

fn week_fixture() -> (PowerSeries, Vec<(String, PowerSeries)>, i64) {
    let start = year_start(2020);
    let truth = series(start, (0..24 * 30).map(|k| (k % 97) as f64).collect());
    let f = vec![
        ("conv_net".to_string(), series(start, (0..24 * 30).map(|k| (k % 89) as f64 + 0.25).collect())),
        ("persistence".to_string(), series(start, (0..24 * 30).map(|k| (k % 13) as f64).collect())),
    ];
    (truth, f, start)
}

/// Checks the file is an SVG document whose tags nest properly.
fn assert_well_formed_svg(text: &str) {
    assert!(text.starts_with("<?xml"), "missing XML declaration");
    let mut stack: Vec<String> = Vec::new();
    let mut rest = text;
    let mut root_seen = false;
    while let Some(i) = rest.find('<') {
        let j = rest[i..].find('>').expect("unterminated tag") + i;
        let tag = &rest[i + 1..j];
        rest = &rest[j + 1..];
        if tag.starts_with('?') || tag.starts_with('!') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            assert_eq!(stack.pop().as_deref(), Some(name.trim()), "mismatched closing tag");
        } else if !tag.ends_with('/') {
            let name = tag.split_whitespace().next().unwrap().to_string();
            if stack.is_empty() {
                assert_eq!(name, "svg");
                root_seen = true;
            }
            stack.push(name);
        }
    }
    assert!(root_seen && stack.is_empty(), "unclosed tags {stack:?}");
}

#[test]
fn weekly_plot_sidecar_and_svg() {
    let (truth, f, start) = week_fixture();
    let week = start + 24 * 6;
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("w.svg");
    let csv_path = render_weekly_plot(&truth, &f, week, &svg).unwrap();
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(!text.is_empty());
    assert_well_formed_svg(&text);
    assert_eq!(text.matches("<g id=\"panel-").count(), 2);
    assert_eq!(text.matches("stroke-dasharray").count(), 2, "truth drawn dotted in each panel");

    let csv = std::fs::read_to_string(csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("timestamp,truth,conv_net,persistence"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), WEEK_HOURS);
    for (k, row) in rows.iter().enumerate() {
        let f_: Vec<&str> = row.split(',').collect();
        let t = week + k as i64;
        assert_eq!(parse_iso(f_[0]).unwrap(), t);
        assert_eq!(f_[1].parse::<f64>().unwrap(), truth.value_at(t).unwrap());
        assert_eq!(f_[2].parse::<f64>().unwrap(), f[0].1.value_at(t).unwrap());
        assert_eq!(f_[3].parse::<f64>().unwrap(), f[1].1.value_at(t).unwrap());
    }
}

#[test]
fn week_outside_data_is_an_error() {
    let (truth, f, start) = week_fixture();
    assert!(WeekData::new(&truth, &f, start - 1).is_err());
    assert!(WeekData::new(&truth, &f, start + 24 * 30 - 167).is_err());
    assert!(WeekData::new(&truth, &f, start + 24 * 30 - 168).is_ok());
    assert!(WeekData::new(&truth, &[], start).is_err());
}

#[test]
fn week_start_parsing_and_default() {
    // 2020-01-01 was a Wednesday; the first Monday is the 6th
    let ts: Vec<i64> = (year_start(2020)..year_start(2020) + 24 * 20).collect();
    assert_eq!(default_week_start(&ts).unwrap(), parse_week_start("2020-01-06").unwrap());
    assert_eq!(parse_week_start("2020-01-06T00:00").unwrap(), year_start(2020) + 5 * 24);
    assert!(parse_week_start("next monday").is_err());
    assert!(default_week_start(&ts[..24 * 8]).is_err());
}

#[test]
fn series_table_round_trips_with_national_sum() {
    let (_, truth, _) = fixture();
    let text = series_table(&truth).unwrap();
    let back = read_series_table(&text).unwrap();
    assert_eq!(back["R01"], truth["R01"]);
    assert_eq!(back[NATIONAL], aggregate_national(&truth).unwrap());
}

#[test]
fn persistence_only_single_region_matches_hand_computation() {
    let mut cfg = small_config();
    cfg.benchmark.regions = 1;
    cfg.models = vec!["persistence".into()];
    let o = run_benchmark(&cfg).unwrap();
    assert_eq!(o.report.rows.len(), 2);

    let ds = generate_benchmark(&cfg.benchmark).unwrap();
    let p = &ds.power["R01"];
    let runs = ForecastRunIndex::default();
    let (mut sum, mut n, mut tot) = (0.0, 0usize, 0.0);
    for (k, &t) in p.timestamps().iter().enumerate() {
        if t < year_start(2020) {
            continue;
        }
        let lead = runs.lead_time(t) as usize;
        sum += (p.values()[k] - p.values()[k - lead]).abs();
        tot += p.values()[k];
        n += 1;
    }
    let m = o.report.metrics("persistence", "R01").unwrap();
    assert_eq!(n, 8784);
    assert!((m.mae_mw - sum / n as f64).abs() <= 1e-9 * m.mae_mw);
    assert!((m.mean_generation_mw - tot / n as f64).abs() <= 1e-9 * m.mean_generation_mw);
    assert_eq!(o.report.metrics("persistence", NATIONAL).unwrap().mae_mw, m.mae_mw);
}

#[test]
fn small_end_to_end_run_is_complete_and_repeatable() {
    let cfg = small_config();
    let a = run_benchmark(&cfg).unwrap();
    assert!(a.report.failures().is_empty(), "{}", a.report.to_text());
    let models: Vec<&str> = a.report.models();
    assert_eq!(models, ["dragon", "conv_net", "patch_attention", "mean_tree", "persistence"]);
    assert_eq!(a.report.rows.len(), 5 * 3);
    for m in &models {
        let regional: BTreeMap<String, PowerSeries> = a.forecasts(m);
        let national = aggregate_national(&regional).unwrap();
        let summed: Vec<f64> = (0..national.len())
            .map(|k| regional["R01"].values()[k] + regional["R02"].values()[k])
            .collect();
        assert_eq!(national.values(), summed.as_slice());
    }

    let d1 = tempfile::tempdir().unwrap();
    write_outcome(d1.path(), &cfg, &a).unwrap();
    for f in [REPORT_CSV, SEARCH_LOG, "report.txt", "forecasts/truth.csv", "forecasts/dragon.csv", "plots/week_national.svg", "plots/week_national.csv", "models/conv_net/R01.json", "models/dragon/R02.json", "run_meta.json", "config.toml"] {
        assert!(d1.path().join(f).exists(), "missing {f}");
    }
    let log = decode_log(&std::fs::read_to_string(d1.path().join(SEARCH_LOG)).unwrap()).unwrap();
    assert_eq!(log.len(), cfg.search.budget);
    assert!(audit_log(&log, cfg.search.population, cfg.search.budget, None).ok());

    let b = run_benchmark(&cfg).unwrap();
    let d2 = tempfile::tempdir().unwrap();
    write_outcome(d2.path(), &cfg, &b).unwrap();
    for f in [REPORT_CSV, SEARCH_LOG, "forecasts/dragon.csv", "best_architectures.txt", "conv_grid.csv"] {
        assert_eq!(
            std::fs::read(d1.path().join(f)).unwrap(),
            std::fs::read(d2.path().join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
}

fn ventus(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ventus")).args(args).output().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("c.toml");
    let mut cfg = small_config();
    cfg.models = vec!["persistence".into(), "mean_tree".into()];
    std::fs::write(&cfg_path, cfg.to_toml()).unwrap();
    let out = dir.path().join("out");
    let (c, o) = (cfg_path.to_str().unwrap(), out.to_str().unwrap());

    let r = ventus(&["--config", c, "--out", o, "evaluate"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains("mean_tree"));
    let r = ventus(&["--config", c, "--out", o, "report"]);
    assert_eq!(r.status.code(), Some(0));
    let r = ventus(&["--config", c, "--out", o, "plot", "--week", "2020-03-02", "--region", "R01"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("plots/week_R01.csv").exists());
    let r = ventus(&["--config", c, "--out", o, "plot", "--week", "2021-03-01"]);
    assert_eq!(r.status.code(), Some(2));
    let r = ventus(&["--config", c, "--out", o, "prepare"]);
    assert_eq!(r.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&r.stdout).contains("region R01"));

    std::fs::write(&cfg_path, "models = []\n").unwrap();
    assert_eq!(ventus(&["--config", c, "--out", o, "evaluate"]).status.code(), Some(2));
    std::fs::write(&cfg_path, "models = [\"persistence\"]\n[split]\ntrain_years = [2020]\ntest_years = [2019]\n").unwrap();
    assert_eq!(ventus(&["--config", c, "--out", o, "evaluate"]).status.code(), Some(2));
    assert_eq!(ventus(&["--config", "/nonexistent.toml", "evaluate"]).status.code(), Some(2));
}
