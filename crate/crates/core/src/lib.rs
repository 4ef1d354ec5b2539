//! MiniMap: statically analyze map-reduce jobs written in a small typed DSL,
//! detect selection / projection / compression opportunities, build the
//! matching on-disk indexes and run jobs on a single-node
//! map-shuffle-reduce engine.
//!
//! The pipeline is
//!
//! ```text
//! source --parse/typecheck--> TypedJob --analyze--> descriptors + IndexGenSpecs
//!                                           |
//!             catalog --------------------plan--> ExecutionDescriptor --run_job--> output
//! ```

pub mod analysis;
pub mod detect;
pub mod engine;
pub mod error;
pub mod lang;
pub mod optimizer;
pub mod storage;
pub mod value;
pub mod workload;

pub use detect::{analyze, AnalyzeOptions, Analysis, ConditionDnf, IndexGenSpec, OptKind, OptimizationDescriptor};
pub use engine::{run_index_gen, run_job, ExecutionStats, RunOutput};
pub use error::{Error, Result, WorkloadError};
pub use lang::{parse_job, typecheck, JobSpec, ScalarType, Schema, TypedJob};
pub use optimizer::{plan, ExecutionDescriptor, KeyRangeSet};
pub use storage::catalog::{Catalog, CatalogEntry, InputId};
pub use value::{Record, Value};
