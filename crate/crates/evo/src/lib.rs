//! Steady-state evolutionary search over the architecture space, run over
//! several regions at once with losses normalized by a per-region
//! baseline.
//!
//! A single coordinator owns the population; workers only evaluate. Every
//! evaluation is logged so the run can be audited afterwards with
//! [`audit::audit_log`].

pub mod audit;
pub mod config;
pub mod error;
pub mod log;
pub mod population;
pub mod search;
pub mod training;

pub use audit::{audit_log, AuditReport};
pub use config::SearchConfig;
pub use error::{EvoError, Result};
pub use log::{decode_log, encode_log, LogRow, Phase};
pub use population::{normalize, select_parents, worst_index, BestEntry, BestPerRegion, Individual, RegionScheduler};
pub use search::{steady_state_search, EvalJob, Evaluation, Evaluator, FnEvaluator, SearchOutcome};
pub use training::{RegionTask, TrainingEvaluator};
