use std::collections::BTreeMap;

use ventus_arch::SpaceConfig;

use crate::error::{EvoError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    /// Population size K.
    pub population: usize,
    /// Evaluation budget T.
    pub budget: usize,
    pub regions: Vec<String>,
    /// Per-region baseline validation loss used to normalize raw losses.
    pub baseline_losses: BTreeMap<String, f64>,
    pub workers: usize,
    pub seed: u64,
    pub space: SpaceConfig,
    /// Probability that an offspring also gets its training
    /// hyperparameters redrawn.
    pub train_mutation_prob: f64,
    /// A region not scheduled for `starvation_factor * K` evaluations is
    /// scheduled next.
    pub starvation_factor: usize,
}

impl SearchConfig {
    pub fn new(population: usize, budget: usize, baseline_losses: BTreeMap<String, f64>) -> Self {
        Self {
            population,
            budget,
            regions: baseline_losses.keys().cloned().collect(),
            baseline_losses,
            workers: 1,
            seed: 0,
            space: SpaceConfig::default(),
            train_mutation_prob: 0.2,
            starvation_factor: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EvoError::Config(m));
        if self.population < 2 {
            return bad(format!("population {} must be at least 2", self.population));
        }
        if self.budget < self.population {
            return bad(format!("budget {} is smaller than the population {}", self.budget, self.population));
        }
        if self.regions.is_empty() {
            return bad("no regions to search".into());
        }
        if self.workers == 0 {
            return bad("worker count must be positive".into());
        }
        for r in &self.regions {
            match self.baseline_losses.get(r) {
                Some(l) if *l > 0.0 && l.is_finite() => {}
                Some(l) => return bad(format!("baseline loss {l} for region {r} must be positive")),
                None => return bad(format!("no baseline loss for region {r}")),
            }
        }
        if !(0.0..=1.0).contains(&self.train_mutation_prob) {
            return bad("train_mutation_prob must lie in [0, 1]".into());
        }
        if self.starvation_factor == 0 {
            return bad("starvation_factor must be positive".into());
        }
        Ok(())
    }
}
