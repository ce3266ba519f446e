//! Individuals, parent selection, replacement and region scheduling.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use ventus_arch::CandidateArchitecture;
use ventus_models::TrainedModel;

pub const TOURNAMENT_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub eval_index: usize,
    pub hash: String,
    pub arch: CandidateArchitecture,
    pub region: String,
    pub raw_loss: f64,
    /// `raw_loss / baseline(region)`, or +inf when evaluation failed.
    pub normalized_loss: f64,
}

/// `raw / baseline`, with failures (non-finite or negative raw losses)
/// mapped to +inf.
pub fn normalize(raw: f64, baseline: f64) -> f64 {
    if raw.is_finite() && raw >= 0.0 {
        raw / baseline
    } else {
        f64::INFINITY
    }
}

/// Index of the individual with the highest normalized loss (first one on
/// ties).
pub fn worst_index(population: &[Individual]) -> Option<usize> {
    let mut worst: Option<usize> = None;
    for (i, ind) in population.iter().enumerate() {
        if worst.is_none_or(|w| ind.normalized_loss > population[w].normalized_loss) {
            worst = Some(i);
        }
    }
    worst
}

fn tournament<R: Rng + ?Sized>(population: &[Individual], pool: &[usize], rng: &mut R) -> usize {
    let k = TOURNAMENT_SIZE.min(pool.len());
    let mut winner = None::<usize>;
    for pick in sample(rng, pool.len(), k) {
        let cand = pool[pick];
        if winner.is_none_or(|w| population[cand].normalized_loss < population[w].normalized_loss) {
            winner = Some(cand);
        }
    }
    winner.expect("non-empty tournament")
}

/// Two distinct parents from two tournaments of size 3; the second
/// tournament excludes the first winner.
pub fn select_parents<R: Rng + ?Sized>(population: &[Individual], rng: &mut R) -> (usize, usize) {
    assert!(population.len() >= 2, "selection needs at least two individuals");
    let all: Vec<usize> = (0..population.len()).collect();
    let a = tournament(population, &all, rng);
    let rest: Vec<usize> = all.into_iter().filter(|&i| i != a).collect();
    let b = tournament(population, &rest, rng);
    (a, b)
}

/// Uniform region choice, except that a region not chosen during the last
/// `window` assignments is forced (the longest-waiting one first).
#[derive(Debug, Clone)]
pub struct RegionScheduler {
    regions: Vec<String>,
    last: Vec<usize>,
    window: usize,
    assigned: usize,
}

impl RegionScheduler {
    pub fn new(regions: &[String], window: usize) -> Self {
        Self {
            regions: regions.to_vec(),
            last: vec![0; regions.len()],
            window,
            assigned: 0,
        }
    }

    pub fn next<R: Rng + ?Sized>(&mut self, rng: &mut R) -> String {
        let starved = (0..self.regions.len())
            .filter(|&i| self.assigned - self.last[i] >= self.window)
            .min_by_key(|&i| (self.last[i], i));
        let i = starved.unwrap_or_else(|| rng.random_range(0..self.regions.len()));
        self.assigned += 1;
        self.last[i] = self.assigned;
        self.regions[i].clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestEntry {
    pub eval_index: usize,
    pub arch: CandidateArchitecture,
    pub raw_loss: f64,
    pub normalized_loss: f64,
    pub model: Option<TrainedModel>,
}

/// The best evaluated model of each region so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BestPerRegion {
    pub entries: BTreeMap<String, BestEntry>,
}

impl BestPerRegion {
    /// Stores the candidate if its raw loss is finite and strictly lower
    /// than the region's current best. Returns whether it was stored.
    pub fn offer(&mut self, ind: &Individual, model: Option<TrainedModel>) -> bool {
        if !ind.raw_loss.is_finite() || !ind.normalized_loss.is_finite() {
            return false;
        }
        if let Some(cur) = self.entries.get(&ind.region) {
            if ind.raw_loss >= cur.raw_loss {
                return false;
            }
        }
        self.entries.insert(
            ind.region.clone(),
            BestEntry {
                eval_index: ind.eval_index,
                arch: ind.arch.clone(),
                raw_loss: ind.raw_loss,
                normalized_loss: ind.normalized_loss,
                model,
            },
        );
        true
    }

    pub fn get(&self, region: &str) -> Option<&BestEntry> {
        self.entries.get(region)
    }

    pub fn raw_loss(&self, region: &str) -> f64 {
        self.get(region).map_or(f64::INFINITY, |e| e.raw_loss)
    }
}
