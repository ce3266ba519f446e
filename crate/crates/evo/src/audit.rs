//! Replays a search log and checks the search invariants from the log
//! alone, without any coordinator code.

use std::collections::BTreeMap;

use crate::log::{LogRow, Phase};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuditReport {
    pub evaluations: usize,
    pub replacements: usize,
    /// Eval indices of the replayed final population, sorted.
    pub final_population: Vec<usize>,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks: population size K after every replacement step; only the
/// current worst is ever replaced, and only by a strictly lower normalized
/// loss; a better offspring is never dropped; each region's best raw loss
/// never increases; at most `budget + 1` evaluations. With `baselines`,
/// also checks `normalized = raw / baseline`.
pub fn audit_log(rows: &[LogRow], population: usize, budget: usize, baselines: Option<&BTreeMap<String, f64>>) -> AuditReport {
    let mut rep = AuditReport {
        evaluations: rows.len(),
        ..Default::default()
    };
    let mut v = Vec::new();
    if rows.len() > budget + 1 {
        v.push(format!("{} evaluations exceed budget {budget} + 1", rows.len()));
    }
    // eval index -> normalized loss of the live population
    let mut pop: BTreeMap<usize, f64> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    let mut inits = 0;
    for (n, r) in rows.iter().enumerate() {
        let at = format!("row {} (eval {})", n + 1, r.eval_index);
        if !seen.insert(r.eval_index) {
            v.push(format!("{at}: duplicate eval index"));
        }
        if let Some(base) = baselines.and_then(|b| b.get(&r.region)) {
            let expect = if r.raw_loss.is_finite() { r.raw_loss / base } else { f64::INFINITY };
            let same = expect == r.normalized_loss || (expect - r.normalized_loss).abs() <= 1e-12 * expect.abs();
            if !same {
                v.push(format!("{at}: normalized {} != raw / baseline {expect}", r.normalized_loss));
            }
        }
        match r.phase {
            Phase::Init => {
                inits += 1;
                if inits > population {
                    v.push(format!("{at}: more than {population} initial individuals"));
                }
                if r.replaced.is_some() {
                    v.push(format!("{at}: initial individual replaced someone"));
                }
                pop.insert(r.eval_index, r.normalized_loss);
            }
            Phase::Offspring => {
                if inits < population {
                    v.push(format!("{at}: offspring before the population was complete"));
                }
                let worst = pop.values().cloned().fold(f64::NEG_INFINITY, f64::max);
                match &r.replaced {
                    Some((idx, _)) => {
                        match pop.get(idx) {
                            None => v.push(format!("{at}: replaced eval {idx} is not in the population")),
                            Some(l) if *l != worst => {
                                v.push(format!("{at}: replaced eval {idx} (loss {l}) is not the worst ({worst})"))
                            }
                            Some(_) => {}
                        }
                        if !(r.normalized_loss < worst) {
                            v.push(format!("{at}: replacement with loss {} not below worst {worst}", r.normalized_loss));
                        }
                        pop.remove(idx);
                        pop.insert(r.eval_index, r.normalized_loss);
                        rep.replacements += 1;
                    }
                    None => {
                        if r.normalized_loss < worst {
                            v.push(format!("{at}: loss {} beats worst {worst} but replaced nobody", r.normalized_loss));
                        }
                    }
                }
                if pop.len() != population {
                    v.push(format!("{at}: population size {} != {population}", pop.len()));
                }
            }
        }
        if r.population_size != pop.len() {
            v.push(format!("{at}: logged population size {} != replayed {}", r.population_size, pop.len()));
        }
        let prev = best.get(r.region.as_str()).copied().unwrap_or(f64::INFINITY);
        let now = if r.raw_loss.is_finite() { prev.min(r.raw_loss) } else { prev };
        if r.region_best_raw != now {
            v.push(format!("{at}: logged region best {} != replayed {now}", r.region_best_raw));
        }
        if r.region_best_raw > prev {
            v.push(format!("{at}: region {} best rose from {prev} to {}", r.region, r.region_best_raw));
        }
        best.insert(&r.region, now);
    }
    rep.final_population = pop.into_keys().collect();
    rep.violations = v;
    rep
}
