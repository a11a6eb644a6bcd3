//! Dominant set clustering with Frank-Wolfe optimizers.

pub mod data;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod multistart;
pub mod solvers;

pub use error::{Error, ErrorClass, Result};
pub use matrix::{SimilarityMatrix, SimplexPoint, Support};
pub use solvers::{
    run, run_with, InitKind, SolveOutput, SolverConfig, SolverKind, SolverState, SolverVariant,
    StepKind, StepRecord, StopReason,
};
pub use driver::{extract_support, peel, post_assign, ClusteringResult, PeelConfig};
pub use metrics::{ari, assignment_rate, v_measure, Unassigned};
pub use data::{FeatureMatrix, SyntheticKind, SyntheticSpec};
pub use multistart::{multistart_cluster, MultistartResult, SamplePlan, Sampler};
