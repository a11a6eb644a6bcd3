//! Peel-off dominant set clustering.
//!
//! Each round solves the StQP on the objects that are still unclustered,
//! takes the solution's support above the cutoff as the next cluster, and
//! removes those objects before the next round.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{SimilarityMatrix, SimplexPoint};
use crate::solvers::{self, SolverConfig, StepRecord, StopReason};

/// Default support cutoff.
pub const DEFAULT_CUTOFF: f64 = 2e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PeelConfig {
    pub max_clusters: usize,
    pub cutoff: f64,
    pub solver: SolverConfig,
    /// Added to the off-diagonal entries of each round's submatrix.
    pub shift: f64,
    pub post_assign: bool,
}

impl PeelConfig {
    pub fn new(max_clusters: usize, solver: SolverConfig) -> Self {
        Self {
            max_clusters,
            cutoff: DEFAULT_CUTOFF,
            solver,
            shift: 0.0,
            post_assign: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_clusters == 0 {
            return Err(Error::InvalidConfig("max_clusters must be at least 1".into()));
        }
        if !(self.cutoff > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "cutoff must be positive, got {}",
                self.cutoff
            )));
        }
        if !(self.shift >= 0.0 && self.shift.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "shift must be finite and nonnegative, got {}",
                self.shift
            )));
        }
        self.solver.validate()
    }
}

/// Solution of one peel round, on the objects that survived earlier rounds.
#[derive(Debug, Clone)]
pub struct CharacteristicVector {
    /// Original object ids, aligned with `point`'s coordinates.
    pub objects: Vec<usize>,
    pub point: SimplexPoint,
    pub f: f64,
}

/// Per-round solver summary.
#[derive(Debug, Clone, Serialize)]
pub struct RoundInfo {
    pub round: usize,
    pub objects: usize,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub f: f64,
    pub cluster_size: usize,
    /// Wall-clock solver time.
    #[serde(skip)]
    pub seconds: f64,
    #[serde(skip)]
    pub trace: Vec<StepRecord>,
}

#[derive(Debug, Clone)]
pub struct ClusteringResult {
    /// `labels[i] == c > 0` iff object `i` is in `clusters[c - 1]`; 0 means unassigned.
    pub labels: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
    pub characteristic_vectors: Vec<CharacteristicVector>,
    pub assigned_count: usize,
    pub rounds: Vec<RoundInfo>,
}

impl ClusteringResult {
    pub fn empty(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            clusters: Vec::new(),
            characteristic_vectors: Vec::new(),
            assigned_count: 0,
            rounds: Vec::new(),
        }
    }

    pub fn k_found(&self) -> usize {
        self.clusters.len()
    }

    pub fn assignment_rate(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        self.assigned_count as f64 / self.labels.len() as f64
    }

    /// Appends a cluster of original object ids and labels it.
    pub(crate) fn push_cluster(&mut self, members: Vec<usize>) {
        let label = self.clusters.len() + 1;
        for &i in &members {
            debug_assert_eq!(self.labels[i], 0, "object {i} already clustered");
            self.labels[i] = label;
        }
        self.assigned_count += members.len();
        self.clusters.push(members);
    }
}

/// Indices whose coordinate exceeds `cutoff`, ascending.
pub fn extract_support(x: &SimplexPoint, cutoff: f64) -> Vec<usize> {
    x.coords()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > cutoff)
        .map(|(i, _)| i)
        .collect()
}

/// Runs the peel-off loop for at most `config.max_clusters` rounds.
pub fn peel(a: &SimilarityMatrix, config: &PeelConfig) -> Result<ClusteringResult> {
    config.validate()?;
    let n = a.n();
    let mut result = ClusteringResult::empty(n);
    let mut surviving: Vec<usize> = (0..n).collect();

    while result.k_found() < config.max_clusters && !surviving.is_empty() {
        if surviving.len() == 1 {
            // A single object has f = 0 and forms its own cluster.
            result.push_cluster(vec![surviving[0]]);
            surviving.clear();
            break;
        }
        let sub = a.submatrix(&surviving).shifted(config.shift)?;
        if sub.is_zero() {
            // No similarity left to form a dominant set from.
            break;
        }
        let started = Instant::now();
        let out = solvers::run(&sub, &config.solver)?;
        let seconds = started.elapsed().as_secs_f64();
        let local = extract_support(&out.x, config.cutoff);
        if local.is_empty() {
            break;
        }
        let members: Vec<usize> = local.iter().map(|&k| surviving[k]).collect();
        result.rounds.push(RoundInfo {
            round: result.k_found() + 1,
            objects: surviving.len(),
            iterations: out.iterations(),
            stop_reason: out.stop_reason,
            f: out.f,
            cluster_size: members.len(),
            seconds,
            trace: out.trace,
        });
        result.characteristic_vectors.push(CharacteristicVector {
            objects: surviving.clone(),
            point: out.x,
            f: out.f,
        });
        let mut in_cluster = vec![false; surviving.len()];
        local.iter().for_each(|&k| in_cluster[k] = true);
        surviving = surviving
            .iter()
            .zip(&in_cluster)
            .filter(|(_, &c)| !c)
            .map(|(&i, _)| i)
            .collect();
        result.push_cluster(members);
    }

    if config.post_assign {
        post_assign(&mut result, a)?;
    }
    Ok(result)
}

/// Assigns every unlabeled object to the cluster with the highest mean
/// similarity to it (lowest label on ties).
pub fn post_assign(result: &mut ClusteringResult, a: &SimilarityMatrix) -> Result<()> {
    if result.clusters.iter().all(|c| c.is_empty()) {
        return Err(Error::NoClusters);
    }
    if result.labels.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: result.labels.len(),
        });
    }
    let unassigned: Vec<usize> = (0..a.n()).filter(|&j| result.labels[j] == 0).collect();
    let mut moves = Vec::with_capacity(unassigned.len());
    for &j in &unassigned {
        let row = a.row(j);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (c, members) in result.clusters.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let mean = members.iter().map(|&p| row[p]).sum::<f64>() / members.len() as f64;
            if mean > best.0 {
                best = (mean, c);
            }
        }
        moves.push((j, best.1));
    }
    // Means are taken over the original clusters, so assignments are order-independent.
    for (j, c) in moves {
        result.labels[j] = c + 1;
        result.clusters[c].push(j);
        result.assigned_count += 1;
    }
    Ok(())
}
