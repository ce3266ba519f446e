//! Trains and evaluates every requested model on every region.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use ventus_core::seed::derive;
use ventus_core::{ForecastRunIndex, PowerSeries};
use ventus_evo::{steady_state_search, SearchConfig, SearchOutcome, TrainingEvaluator};
use ventus_models::{
    build_conv_spec, fit_mean_tree, persistence_by_run, predict_power, train_map_regressor, GridSearch, ModelKind,
    ModelSpec, TrainConfig, TrainedModel,
};

use crate::config::BenchConfig;
use crate::data::{load_dataset, prepare, Prepared, PreparedRegion};
use crate::error::{BenchError, Result};
use crate::report::{build_report, EvaluationReport};

/// Maps `f` over `items` on up to `workers` threads, keeping input order.
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot poisoned") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot poisoned").expect("every item mapped"))
        .collect()
}

/// Runs `f`, turning errors and panics into a message.
fn guarded<T>(f: impl FnOnce() -> Result<T>) -> std::result::Result<T, String> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => Err(e.to_string()),
        Err(p) => Err(match p.downcast_ref::<&str>() {
            Some(s) => format!("panic: {s}"),
            None => match p.downcast_ref::<String>() {
                Some(s) => format!("panic: {s}"),
                None => "panic".into(),
            },
        }),
    }
}

pub type Cell<T> = std::result::Result<T, String>;

/// One model's outcome on one region.
#[derive(Debug, Clone)]
pub struct RegionRun {
    pub forecast: PowerSeries,
    /// None for persistence.
    pub model: Option<TrainedModel>,
}

/// The conv baseline of one region: grid scores and the final model whose
/// validation MAE normalizes search losses.
#[derive(Debug, Clone)]
pub struct ConvBaseline {
    pub grid: GridSearch,
    pub model: TrainedModel,
}

fn region_seed(cfg: &BenchConfig, what: &str, region: &str) -> u64 {
    derive(cfg.seed, &format!("{what}/{region}"))
}

fn train_cfg(cfg: &BenchConfig, what: &str, region: &str) -> TrainConfig {
    TrainConfig {
        seed: region_seed(cfg, what, region),
        ..cfg.train.clone()
    }
}

pub fn run_persistence(r: &PreparedRegion) -> Result<RegionRun> {
    let forecast = persistence_by_run(&r.observed, r.test_truth.timestamps(), ForecastRunIndex::default())?;
    Ok(RegionRun { forecast, model: None })
}

pub fn run_mean_tree(cfg: &BenchConfig, r: &PreparedRegion) -> Result<RegionRun> {
    let spec = ModelSpec::mean_tree(cfg.tree.params())?;
    let model = fit_mean_tree(&spec, r.train.data(), &train_cfg(cfg, "mean_tree", r.id()))?;
    finish(model, r)
}

pub fn run_conv_baseline(cfg: &BenchConfig, r: &PreparedRegion) -> Result<ConvBaseline> {
    let grid_cfg = TrainConfig {
        seed: region_seed(cfg, "conv_grid", r.id()),
        ..cfg.grid.train(&cfg.train)
    };
    let grid = build_conv_spec(r.crop_dims(), &cfg.grid.grid()?, r.train.data(), &grid_cfg)?;
    let model = train_map_regressor(&grid.best, r.train.data(), &train_cfg(cfg, "conv_net", r.id()))?;
    Ok(ConvBaseline { grid, model })
}

pub fn run_attention(cfg: &BenchConfig, r: &PreparedRegion) -> Result<RegionRun> {
    let spec = ModelSpec::attention(cfg.attention.spec(), r.crop_dims())?;
    let model = train_map_regressor(&spec, r.train.data(), &train_cfg(cfg, "patch_attention", r.id()))?;
    finish(model, r)
}

fn finish(model: TrainedModel, r: &PreparedRegion) -> Result<RegionRun> {
    let forecast = predict_power(&model, &r.test_crop)?;
    Ok(RegionRun {
        forecast,
        model: Some(model),
    })
}

pub fn conv_baselines(cfg: &BenchConfig, p: &Prepared) -> BTreeMap<String, Cell<ConvBaseline>> {
    let runs = par_map(&p.regions, cfg.workers, |r| guarded(|| run_conv_baseline(cfg, r)));
    p.regions.iter().map(|r| r.id().to_string()).zip(runs).collect()
}

/// Search configuration for the given per-region baseline losses.
pub fn search_config(cfg: &BenchConfig, p: &Prepared, baselines: BTreeMap<String, f64>) -> SearchConfig {
    let s = &cfg.search;
    SearchConfig {
        population: s.population,
        budget: s.budget,
        regions: p.regions.iter().map(|r| r.id().to_string()).collect(),
        baseline_losses: baselines,
        workers: cfg.workers,
        seed: derive(cfg.seed, "search"),
        space: s.space(p.max_crop()),
        train_mutation_prob: s.train_mutation_prob,
        starvation_factor: s.starvation_factor,
    }
}

pub fn run_search(cfg: &BenchConfig, p: &Prepared, baselines: &BTreeMap<String, f64>) -> Result<SearchOutcome> {
    let missing: Vec<&str> = p.regions.iter().map(|r| r.id()).filter(|id| !baselines.contains_key(*id)).collect();
    if !missing.is_empty() {
        return Err(BenchError::Runtime(format!("no conv baseline for region(s) {}", missing.join(", "))));
    }
    let evaluator = TrainingEvaluator {
        tasks: p.regions.iter().map(|r| (r.id().to_string(), r.train.clone())).collect(),
        train: cfg.train.clone(),
    };
    Ok(steady_state_search(&search_config(cfg, p, baselines.clone()), &evaluator)?)
}

/// Everything a benchmark run produced.
#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub kinds: Vec<ModelKind>,
    pub region_ids: Vec<String>,
    pub truth: BTreeMap<String, PowerSeries>,
    /// model name -> region -> run or failure message
    pub runs: BTreeMap<&'static str, BTreeMap<String, Cell<RegionRun>>>,
    pub conv: BTreeMap<String, Cell<ConvBaseline>>,
    pub search: Option<Cell<SearchOutcome>>,
    pub report: EvaluationReport,
    pub dataset_hash: String,
    pub train_steps: usize,
    pub test_steps: usize,
    /// Wall-clock seconds per stage; kept out of the deterministic outputs.
    pub durations: Vec<(String, f64)>,
}

impl BenchOutcome {
    pub fn forecasts(&self, model: &str) -> BTreeMap<String, PowerSeries> {
        self.runs
            .get(model)
            .map(|m| {
                m.iter()
                    .filter_map(|(r, c)| c.as_ref().ok().map(|run| (r.clone(), run.forecast.clone())))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn failures(&self) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for (m, regions) in &self.runs {
            for (r, c) in regions {
                if let Err(e) = c {
                    out.push((m.to_string(), r.clone(), e.clone()));
                }
            }
        }
        out
    }
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutcome> {
    cfg.validate()?;
    let kinds = cfg.model_kinds()?;
    let mut durations = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, durations: &mut Vec<(String, f64)>| {
        durations.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let ds = load_dataset(cfg)?;
    let p = prepare(cfg, &ds)?;
    drop(ds);
    lap("data", &mut durations);

    let ids: Vec<String> = p.regions.iter().map(|r| r.id().to_string()).collect();
    let mut runs: BTreeMap<&'static str, BTreeMap<String, Cell<RegionRun>>> = BTreeMap::new();
    let collect = |v: Vec<Cell<RegionRun>>| ids.iter().cloned().zip(v).collect::<BTreeMap<_, _>>();

    let need_conv = kinds.contains(&ModelKind::ConvNet) || kinds.contains(&ModelKind::Dragon);
    let conv = if need_conv { conv_baselines(cfg, &p) } else { BTreeMap::new() };
    if need_conv {
        lap("conv_net", &mut durations);
    }

    let mut search = None;
    for &kind in &kinds {
        let per_region = match kind {
            ModelKind::Persistence => collect(par_map(&p.regions, cfg.workers, |r| guarded(|| run_persistence(r)))),
            ModelKind::MeanTree => collect(par_map(&p.regions, cfg.workers, |r| guarded(|| run_mean_tree(cfg, r)))),
            ModelKind::PatchAttention => collect(par_map(&p.regions, cfg.workers, |r| guarded(|| run_attention(cfg, r)))),
            ModelKind::ConvNet => collect(par_map(&p.regions, cfg.workers, |r| {
                match &conv[r.id()] {
                    Ok(b) => guarded(|| finish(b.model.clone(), r)),
                    Err(e) => Err(e.clone()),
                }
            })),
            ModelKind::Dragon => {
                let baselines: BTreeMap<String, f64> = conv
                    .iter()
                    .filter_map(|(r, b)| b.as_ref().ok().map(|b| (r.clone(), b.model.validation_mae_mw)))
                    .collect();
                let outcome = guarded(|| run_search(cfg, &p, &baselines));
                let per_region = p
                    .regions
                    .iter()
                    .map(|r| {
                        let cell = match &outcome {
                            Err(e) => Err(format!("search failed: {e}")),
                            Ok(o) => match o.best.get(r.id()).and_then(|b| b.model.clone()) {
                                Some(m) => guarded(|| finish(m, r)),
                                None => Err("search found no trainable model for this region".into()),
                            },
                        };
                        (r.id().to_string(), cell)
                    })
                    .collect();
                search = Some(outcome);
                per_region
            }
        };
        runs.insert(kind.name(), per_region);
        if kind != ModelKind::ConvNet {
            lap(kind.name(), &mut durations);
        }
    }

    let truth: BTreeMap<String, PowerSeries> = p.regions.iter().map(|r| (r.id().to_string(), r.test_truth.clone())).collect();
    let forecasts: Vec<(&str, BTreeMap<String, Cell<PowerSeries>>)> = kinds
        .iter()
        .map(|k| {
            let cells = runs[k.name()]
                .iter()
                .map(|(r, c)| (r.clone(), c.as_ref().map(|run| run.forecast.clone()).map_err(Clone::clone)))
                .collect();
            (k.name(), cells)
        })
        .collect();
    let report = build_report(&ids, &truth, &forecasts, cfg.report.per_horizon)?;
    lap("report", &mut durations);

    Ok(BenchOutcome {
        kinds,
        region_ids: ids,
        truth,
        runs,
        conv,
        search,
        report,
        dataset_hash: p.dataset_hash,
        train_steps: p.train_steps,
        test_steps: p.test_steps,
        durations,
    })
}
