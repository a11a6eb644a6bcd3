//! Optimizers for `max x^T A x` over the standard simplex.
//!
//! Three Frank-Wolfe variants (standard, pairwise, away-steps) with O(n)
//! iterations, and replicator dynamics as the O(n^2) baseline.

mod state;

pub use state::{SolverState, StepKind, StepRecord, TIE_RTOL};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{SimilarityMatrix, SimplexPoint};

/// Machine epsilon of `f64`, the default stopping threshold.
pub const DEFAULT_EPSILON: f64 = f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SolverKind {
    Fw,
    Pfw,
    Afw,
    Rd,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Fw => "fw",
            SolverKind::Pfw => "pfw",
            SolverKind::Afw => "afw",
            SolverKind::Rd => "rd",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    Barycenter,
    Vertex,
    Custom(SimplexPoint),
}

/// A solver together with its starting rule, as named on the command line:
/// `fw`, `pfw-b`, `pfw-v`, `afw-b`, `afw-v`, `rd`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SolverVariant {
    pub kind: SolverKind,
    pub vertex_start: bool,
}

impl SolverVariant {
    pub const FW: Self = Self::new(SolverKind::Fw, true);
    pub const PFW_B: Self = Self::new(SolverKind::Pfw, false);
    pub const PFW_V: Self = Self::new(SolverKind::Pfw, true);
    pub const AFW_B: Self = Self::new(SolverKind::Afw, false);
    pub const AFW_V: Self = Self::new(SolverKind::Afw, true);
    pub const RD: Self = Self::new(SolverKind::Rd, false);

    pub const ALL: [Self; 6] = [
        Self::FW,
        Self::PFW_B,
        Self::PFW_V,
        Self::AFW_B,
        Self::AFW_V,
        Self::RD,
    ];

    const fn new(kind: SolverKind, vertex_start: bool) -> Self {
        Self { kind, vertex_start }
    }

    pub fn init(self) -> InitKind {
        if self.vertex_start {
            InitKind::Vertex
        } else {
            InitKind::Barycenter
        }
    }

    pub fn config(self, max_iters: usize) -> SolverConfig {
        SolverConfig {
            epsilon: DEFAULT_EPSILON,
            max_iters,
            kind: self.kind,
            init: self.init(),
        }
    }
}

impl fmt::Display for SolverVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.vertex_start) {
            (SolverKind::Fw, true) => f.write_str("fw"),
            (SolverKind::Rd, false) => f.write_str("rd"),
            (k, v) => write!(f, "{}-{}", k.as_str(), if v { "v" } else { "b" }),
        }
    }
}

impl FromStr for SolverVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fw" => Self::FW,
            "pfw-b" => Self::PFW_B,
            "pfw-v" => Self::PFW_V,
            "afw-b" => Self::AFW_B,
            "afw-v" => Self::AFW_V,
            "rd" => Self::RD,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown solver '{other}' (expected fw, pfw-b, pfw-v, afw-b, afw-v, rd)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Threshold on the halved gap `r_s - f` and on `||x_{t+1} - x_t||`.
    pub epsilon: f64,
    /// Iteration budget `T`. Zero returns the starting point.
    pub max_iters: usize,
    pub kind: SolverKind,
    pub init: InitKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_iters: 1000,
            kind: SolverKind::Fw,
            init: InitKind::Vertex,
        }
    }
}

impl SolverConfig {
    pub fn new(kind: SolverKind, init: InitKind, max_iters: usize) -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_iters,
            kind,
            init,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Starting point for a problem of this matrix.
    pub fn starting_point(&self, a: &SimilarityMatrix) -> Result<SimplexPoint> {
        match &self.init {
            InitKind::Barycenter => Ok(init_barycenter(a.n())),
            InitKind::Vertex => Ok(init_vertex(a)),
            InitKind::Custom(p) => {
                if p.dim() != a.n() {
                    return Err(Error::DimensionMismatch {
                        expected: a.n(),
                        got: p.dim(),
                    });
                }
                Ok(p.clone())
            }
        }
    }
}

/// Uniform starting point.
pub fn init_barycenter(n: usize) -> SimplexPoint {
    SimplexPoint::barycenter(n)
}

/// Vertex at the row of `A` with the largest sum (lowest index on ties).
pub fn init_vertex(a: &SimilarityMatrix) -> SimplexPoint {
    let sums = a.row_sums();
    SimplexPoint::vertex(a.n(), state::argmax(&sums))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    GapReached,
    IterateConverged,
    MaxIters,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::GapReached => "gap_reached",
            StopReason::IterateConverged => "iterate_converged",
            StopReason::MaxIters => "max_iters",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub x: SimplexPoint,
    pub f: f64,
    pub f0: f64,
    pub support0: usize,
    pub trace: Vec<StepRecord>,
    pub stop_reason: StopReason,
}

impl SolveOutput {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Performs one iteration of `kind`. `Ok(None)` signals a stationary point
/// that admits no step.
pub fn step(
    state: &mut SolverState,
    a: &SimilarityMatrix,
    kind: SolverKind,
) -> Result<Option<StepRecord>> {
    match kind {
        SolverKind::Fw => state.fw_step(a).map(Some),
        SolverKind::Pfw => state.pfw_step(a),
        SolverKind::Afw => state.afw_step(a).map(Some),
        SolverKind::Rd => state.rd_step(a).map(Some),
    }
}

/// Runs a solver to completion and returns the full trace.
pub fn run(a: &SimilarityMatrix, config: &SolverConfig) -> Result<SolveOutput> {
    run_with(a, config, |_, _| {})
}

/// Like [`run`], calling `observe` with the state after every step.
pub fn run_with<F>(a: &SimilarityMatrix, config: &SolverConfig, mut observe: F) -> Result<SolveOutput>
where
    F: FnMut(&SolverState, &StepRecord),
{
    config.validate()?;
    let x0 = config.starting_point(a)?;
    let support0 = x0.support().len();
    let mut state = SolverState::new(a, x0)?;
    if config.kind == SolverKind::Rd && !(state.f() > 0.0) {
        return Err(Error::BadInit);
    }
    let f0 = state.f();
    let mut trace = Vec::with_capacity(config.max_iters.min(1 << 16));
    let mut stop_reason = StopReason::MaxIters;
    for _ in 0..config.max_iters {
        let (gap_half, _) = state.gap_half();
        if gap_half <= config.epsilon {
            stop_reason = StopReason::GapReached;
            break;
        }
        let Some(record) = step(&mut state, a, config.kind)? else {
            stop_reason = StopReason::GapReached;
            break;
        };
        observe(&state, &record);
        let converged = record.step_norm <= config.epsilon;
        trace.push(record);
        if converged {
            stop_reason = StopReason::IterateConverged;
            break;
        }
    }
    let f = state.f();
    Ok(SolveOutput {
        x: state.into_point(),
        f,
        f0,
        support0,
        trace,
        stop_reason,
    })
}
