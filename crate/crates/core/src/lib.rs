//! Shared data model for the wind-power map-regression workbench.
//!
//! * [`series`], [`region`], [`dataset`]: validated domain values.
//! * [`format`]: the `WDGS` map-stack binary format and the power CSV.
//! * [`synth`]: synthetic wind fields, power curves and benchmark datasets.
//! * [`prep`]: hull-based region crops, capacity scaling, year splits.
//! * [`metrics`]: MAE / NMAE and bottom-up national aggregation.

pub mod dataset;
pub mod error;
pub mod format;
pub mod metrics;
pub mod prep;
pub mod region;
pub mod seed;
pub mod series;
pub mod synth;
pub mod time;

pub use dataset::Dataset;
pub use error::{CoreError, Result};
pub use region::{CapacityEntry, Farm, GridMask, RegionSpec};
pub use series::{MapSeries, PowerSeries};
pub use time::{EpochHour, ForecastRunIndex};
