//! Search space of DAG-encoded map regressors.
//!
//! An architecture is a directed acyclic graph of 2-D map operations,
//! a flatten into a position sequence, a second graph of sequence
//! operations and a small dense output head. This crate samples, varies,
//! validates, encodes and materializes such architectures.

pub mod arch;
pub mod error;
pub mod graph;
pub mod net;
pub mod op;
pub mod shapes;
pub mod variation;

pub use arch::{CandidateArchitecture, OutputHead, SpaceConfig, TrainParams};
pub use error::ArchError;
pub use graph::{DagGraph, LayerNode};
pub use net::{materialize, DragonNet};
pub use op::{Combiner, Op, OpKind, Stage};
pub use shapes::{infer_shapes, ShapeTable};
pub use variation::{crossover_architectures, mutate_architecture, mutate_training, MutationKind};
