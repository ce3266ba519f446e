use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ventus_workbench::config::BenchConfig;
use ventus_workbench::data::{load_dataset, prepare};
use ventus_workbench::error::{BenchError, Result};
use ventus_workbench::output::{self, write_outcome, write_search, FORECAST_DIR, REPORT_CSV, TRUTH_CSV};
use ventus_workbench::pipeline::{self, conv_baselines, run_benchmark, run_search};
use ventus_workbench::plot::{default_week_start, parse_week_start, render_weekly_plot};
use ventus_workbench::report::{EvaluationReport, NATIONAL};
use ventus_core::synth::generate_benchmark;
use ventus_models::ModelKind;

#[derive(Parser)]
#[command(name = "ventus", version, about = "Regional wind-power forecasting benchmark")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config's worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset into <out>/dataset.
    Generate,
    /// Split the data and print each region's crop geometry.
    Prepare,
    /// Train one baseline model on every region (or one).
    Train {
        #[arg(long)]
        model: String,
        #[arg(long)]
        region: Option<String>,
    },
    /// Fit the conv baselines, then run the architecture search.
    Search,
    /// Run every configured model and write the full report.
    Evaluate,
    /// Print the table of a previous `evaluate` run.
    Report,
    /// Plot one week of a previous `evaluate` run.
    Plot {
        /// `YYYY-MM-DD`; defaults to the first full week of the test period.
        #[arg(long)]
        week: Option<String>,
        /// A region id, or `national`.
        #[arg(long, default_value = NATIONAL)]
        region: String,
    },
}

fn load_config(cli: &Cli) -> Result<BenchConfig> {
    let mut cfg = match &cli.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Generate => {
            let ds = generate_benchmark(&cfg.benchmark)?;
            let dir = out.join("dataset");
            ds.save(&dir)?;
            println!(
                "wrote {} ({} regions, {} hours, {}x{} grid)",
                dir.display(),
                ds.regions.len(),
                ds.maps.steps(),
                ds.maps.rows(),
                ds.maps.cols()
            );
            println!("content hash {}", ds.content_hash());
        }
        Command::Prepare => {
            let ds = load_dataset(&cfg)?;
            let p = prepare(&cfg, &ds)?;
            println!("train steps {}, test steps {}", p.train_steps, p.test_steps);
            let mut text = String::new();
            for r in &p.regions {
                text.push_str(&r.train.crop.report());
                text.push('\n');
            }
            print!("{text}");
            output_write(&out.join("crops.txt"), &text)?;
        }
        Command::Train { model, region } => train(&cfg, out, model, region.as_deref())?,
        Command::Search => {
            let ds = load_dataset(&cfg)?;
            let p = prepare(&cfg, &ds)?;
            drop(ds);
            let conv = conv_baselines(&cfg, &p);
            output_write(&out.join(output::BASELINES_CSV), &output::baselines_csv(&conv))?;
            output_write(&out.join(output::GRID_CSV), &output::grid_csv(&conv))?;
            let mut baselines = BTreeMap::new();
            for (r, b) in &conv {
                match b {
                    Ok(b) => {
                        baselines.insert(r.clone(), b.model.validation_mae_mw);
                    }
                    Err(e) => return Err(BenchError::Runtime(format!("conv baseline for {r} failed: {e}"))),
                }
            }
            let search = run_search(&cfg, &p, &baselines)?;
            write_search(out, &search)?;
            for (r, e) in &search.best.entries {
                println!(
                    "{r}: best eval {} raw {:.3} MW, normalized {:.4} ({})",
                    e.eval_index,
                    e.raw_loss,
                    e.normalized_loss,
                    e.arch.summary()
                );
            }
        }
        Command::Evaluate => {
            let o = run_benchmark(&cfg)?;
            write_outcome(out, &cfg, &o)?;
            print!("{}", o.report.to_text());
            let failed = o.report.failures().len();
            if failed > 0 {
                return Err(BenchError::Partial(failed));
            }
        }
        Command::Report => {
            let path = out.join(REPORT_CSV);
            let text = std::fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
            print!("{}", EvaluationReport::from_csv(&text)?.to_text());
        }
        Command::Plot { week, region } => plot(&cfg, out, week.as_deref(), region)?,
    }
    Ok(())
}

fn output_write(path: &Path, text: &str) -> Result<()> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d).map_err(|e| BenchError::io(d, e))?;
    }
    std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
}

fn train(cfg: &BenchConfig, out: &Path, model: &str, region: Option<&str>) -> Result<()> {
    let kind = ModelKind::parse(model).ok_or_else(|| BenchError::config(format!("unknown model `{model}`")))?;
    if kind == ModelKind::Dragon {
        return Err(BenchError::config("dragon models come from `search`"));
    }
    let ds = load_dataset(cfg)?;
    let p = prepare(cfg, &ds)?;
    drop(ds);
    let mut any = false;
    for r in p.regions.iter().filter(|r| region.is_none_or(|id| r.id() == id)) {
        any = true;
        let run = match kind {
            ModelKind::Persistence => pipeline::run_persistence(r)?,
            ModelKind::MeanTree => pipeline::run_mean_tree(cfg, r)?,
            ModelKind::PatchAttention => pipeline::run_attention(cfg, r)?,
            ModelKind::ConvNet => {
                let b = pipeline::run_conv_baseline(cfg, r)?;
                println!("{}: selected {}", r.id(), b.grid.best.summary());
                pipeline::RegionRun {
                    forecast: ventus_models::predict_power(&b.model, &r.test_crop)?,
                    model: Some(b.model),
                }
            }
            ModelKind::Dragon => unreachable!(),
        };
        let test = ventus_workbench::report::evaluate(&r.test_truth, &run.forecast)?;
        match &run.model {
            Some(m) => {
                let path = out.join("models").join(kind.name()).join(format!("{}.json", r.id()));
                output_write(&path, &m.to_json()?)?;
                println!(
                    "{}: validation MAE {:.3} MW, test MAE {:.3} MW ({:.2}%), saved {}",
                    r.id(),
                    m.validation_mae_mw,
                    test.mae_mw,
                    test.nmae_pct,
                    path.display()
                );
            }
            None => println!("{}: test MAE {:.3} MW ({:.2}%)", r.id(), test.mae_mw, test.nmae_pct),
        }
    }
    if !any {
        return Err(BenchError::config(format!("no region `{}`", region.unwrap_or_default())));
    }
    Ok(())
}

fn plot(cfg: &BenchConfig, out: &Path, week: Option<&str>, region: &str) -> Result<()> {
    let dir = out.join(FORECAST_DIR);
    let read = |name: &str| -> Result<BTreeMap<String, ventus_core::PowerSeries>> {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
        output::read_series_table(&text)
    };
    let truth = read(TRUTH_CSV)?;
    let truth = truth
        .get(region)
        .ok_or_else(|| BenchError::config(format!("no region `{region}` in the forecasts")))?
        .clone();
    let mut forecasts = Vec::new();
    for kind in cfg.model_kinds()? {
        if dir.join(format!("{}.csv", kind.name())).exists() {
            let f = read(&format!("{}.csv", kind.name()))?;
            if let Some(s) = f.get(region) {
                forecasts.push((kind.name().to_string(), s.clone()));
            }
        }
    }
    let start = match week.or(cfg.report.week_start.as_deref()) {
        Some(w) => parse_week_start(w)?,
        None => default_week_start(truth.timestamps())?,
    };
    let svg = out.join("plots").join(format!("week_{region}.svg"));
    let csv = render_weekly_plot(&truth, &forecasts, start, &svg)?;
    println!("wrote {} and {}", svg.display(), csv.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
