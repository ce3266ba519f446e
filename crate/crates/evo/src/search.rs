//! The coordinator: one thread owns the population, workers only train.

use std::collections::VecDeque;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ventus_arch::{crossover_architectures, mutate_architecture, mutate_training, CandidateArchitecture};
use ventus_core::seed::{derive, derive_indexed};
use ventus_models::TrainedModel;

use crate::config::SearchConfig;
use crate::error::{EvoError, Result};
use crate::log::{LogRow, Phase};
use crate::population::{normalize, select_parents, worst_index, BestPerRegion, Individual, RegionScheduler};

#[derive(Debug, Clone)]
pub struct EvalJob {
    pub eval_index: usize,
    pub phase: Phase,
    pub arch: CandidateArchitecture,
    pub region: String,
    /// Seed for everything stochastic inside the evaluation.
    pub seed: u64,
    pub parents: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Validation loss on the job's region; non-finite marks a failure.
    pub raw_loss: f64,
    pub model: Option<TrainedModel>,
}

impl Evaluation {
    pub fn failed() -> Self {
        Self {
            raw_loss: f64::INFINITY,
            model: None,
        }
    }
}

/// Trains (or scores) one candidate on one region.
pub trait Evaluator: Sync {
    fn evaluate(&self, job: &EvalJob) -> Evaluation;

    /// Startup check that the region can be evaluated at all.
    fn check_region(&self, _region: &str) -> std::result::Result<(), String> {
        Ok(())
    }
}

/// Loss oracle without training, for tests and landscape experiments.
pub struct FnEvaluator<F>(pub F);

impl<F: Fn(&EvalJob) -> f64 + Sync> Evaluator for FnEvaluator<F> {
    fn evaluate(&self, job: &EvalJob) -> Evaluation {
        Evaluation {
            raw_loss: (self.0)(job),
            model: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub population: Vec<Individual>,
    pub best: BestPerRegion,
    pub log: Vec<LogRow>,
}

struct Coordinator<'a> {
    cfg: &'a SearchConfig,
    rng: ChaCha8Rng,
    scheduler: RegionScheduler,
    population: Vec<Individual>,
    best: BestPerRegion,
    log: Vec<LogRow>,
    issued: usize,
    init_returned: usize,
}

impl Coordinator<'_> {
    fn job(&mut self, phase: Phase, arch: CandidateArchitecture, parents: Option<(usize, usize)>) -> EvalJob {
        let eval_index = self.issued;
        self.issued += 1;
        EvalJob {
            eval_index,
            phase,
            region: self.scheduler.next(&mut self.rng),
            seed: derive_indexed(self.cfg.seed, "eval", eval_index as u64),
            arch,
            parents,
        }
    }

    /// Next jobs to hand out, or none if the coordinator must wait.
    fn produce(&mut self) -> Result<Vec<EvalJob>> {
        let k = self.cfg.population;
        if self.issued < k {
            let arch = CandidateArchitecture::sample(&self.cfg.space, &mut self.rng)?;
            return Ok(vec![self.job(Phase::Init, arch, None)]);
        }
        if self.init_returned < k || self.issued >= self.cfg.budget {
            return Ok(Vec::new());
        }
        let (a, b) = select_parents(&self.population, &mut self.rng);
        let parents = (self.population[a].eval_index, self.population[b].eval_index);
        let space = self.cfg.space;
        let (c, d) = crossover_architectures(&self.population[a].arch, &self.population[b].arch, &space, &mut self.rng);
        let mut jobs = Vec::with_capacity(2);
        for child in [c, d] {
            let (mut m, _) = mutate_architecture(&child, &space, &mut self.rng);
            if self.rng.random::<f64>() < self.cfg.train_mutation_prob {
                m.train = mutate_training(&m.train, &mut self.rng);
            }
            jobs.push(self.job(Phase::Offspring, m, Some(parents)));
        }
        Ok(jobs)
    }

    fn apply(&mut self, job: EvalJob, ev: Evaluation) {
        let baseline = self.cfg.baseline_losses[&job.region];
        let normalized_loss = normalize(ev.raw_loss, baseline);
        let raw_loss = if normalized_loss.is_finite() { ev.raw_loss } else { f64::INFINITY };
        let ind = Individual {
            eval_index: job.eval_index,
            hash: job.arch.hash(),
            arch: job.arch,
            region: job.region,
            raw_loss,
            normalized_loss,
        };
        self.best.offer(&ind, ev.model);
        let mut replaced = None;
        match job.phase {
            Phase::Init => {
                self.init_returned += 1;
                self.population.push(ind.clone());
            }
            Phase::Offspring => {
                let w = worst_index(&self.population).expect("population is full");
                if ind.normalized_loss < self.population[w].normalized_loss {
                    let old = std::mem::replace(&mut self.population[w], ind.clone());
                    replaced = Some((old.eval_index, old.hash));
                }
            }
        }
        self.log.push(LogRow {
            eval_index: ind.eval_index,
            phase: job.phase,
            arch_hash: ind.hash,
            region: ind.region.clone(),
            raw_loss: ind.raw_loss,
            normalized_loss: ind.normalized_loss,
            parents: job.parents,
            replaced,
            population_size: self.population.len(),
            region_best_raw: self.best.raw_loss(&ind.region),
        });
    }
}

/// Steady-state search: K random individuals, then pairs of offspring
/// (crossover, then one mutation each) whenever a worker is free; each
/// offspring replaces the population's worst member if strictly better.
///
/// With one worker the run is fully determined by the config seed.
pub fn steady_state_search(cfg: &SearchConfig, evaluator: &dyn Evaluator) -> Result<SearchOutcome> {
    cfg.validate()?;
    for r in &cfg.regions {
        evaluator.check_region(r).map_err(|e| EvoError::Config(format!("region {r}: {e}")))?;
    }
    let mut co = Coordinator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(derive(cfg.seed, "coordinator")),
        scheduler: RegionScheduler::new(&cfg.regions, cfg.starvation_factor * cfg.population),
        population: Vec::with_capacity(cfg.population),
        best: BestPerRegion::default(),
        log: Vec::new(),
        issued: 0,
        init_returned: 0,
    };

    std::thread::scope(|s| -> Result<()> {
        let (job_tx, job_rx) = mpsc::channel::<EvalJob>();
        let job_rx = Arc::new(Mutex::new(job_rx));
        let (res_tx, res_rx) = mpsc::channel::<(EvalJob, Evaluation)>();
        for _ in 0..cfg.workers {
            let rx = Arc::clone(&job_rx);
            let tx = res_tx.clone();
            s.spawn(move || loop {
                let next = rx.lock().expect("job queue poisoned").recv();
                let Ok(job) = next else { break };
                let ev = catch_unwind(AssertUnwindSafe(|| evaluator.evaluate(&job))).unwrap_or_else(|_| Evaluation::failed());
                if tx.send((job, ev)).is_err() {
                    break;
                }
            });
        }
        drop(res_tx);

        let mut ready: VecDeque<EvalJob> = VecDeque::new();
        let mut in_flight = 0;
        loop {
            while in_flight < cfg.workers {
                if ready.is_empty() {
                    ready.extend(co.produce()?);
                }
                let Some(job) = ready.pop_front() else { break };
                job_tx.send(job).expect("workers alive");
                in_flight += 1;
            }
            if in_flight == 0 {
                break;
            }
            let (job, ev) = res_rx.recv().expect("workers alive");
            in_flight -= 1;
            co.apply(job, ev);
        }
        drop(job_tx);
        Ok(())
    })?;

    Ok(SearchOutcome {
        population: co.population,
        best: co.best,
        log: co.log,
    })
}
