//! Multi-start clustering: sample seed objects, run one solver per starting
//! point in parallel, keep the non-overlapping solutions as clusters, peel
//! them off, and repeat.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::driver::{extract_support, ClusteringResult};
use crate::error::{Error, Result};
use crate::matrix::{SimilarityMatrix, SimplexPoint};
use crate::solvers::{self, InitKind, SolverConfig, SolverKind};

pub const DEFAULT_OVERLAP: f64 = 0.10;
/// Eigenvalues of a transformed ensemble above this negative value are clamped to zero.
pub const EIGEN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sampler {
    Uni,
    Dpp,
}

impl std::str::FromStr for Sampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uni" => Ok(Sampler::Uni),
            "dpp" => Ok(Sampler::Dpp),
            _ => Err(Error::InvalidConfig(format!("unknown sampler {s:?}, expected uni or dpp"))),
        }
    }
}

/// How a candidate's overlap with earlier accepted solutions is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum OverlapMeasure {
    /// `|S ∩ accepted| / |S|` against the union of accepted supports.
    #[default]
    Candidate,
    /// Largest Jaccard index against any single accepted support.
    Jaccard,
}

/// Which starting points are built from each seed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum StartSet {
    /// Vertex for FW, biased for RD, both for PFW and AFW.
    #[default]
    Auto,
    Vertex,
    Biased,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePlan {
    pub ell: usize,
    pub sampler: Sampler,
    pub overlap_threshold: f64,
    pub overlap: OverlapMeasure,
    pub starts: StartSet,
    pub seed: u64,
}

impl SamplePlan {
    pub fn new(ell: usize, sampler: Sampler, seed: u64) -> Self {
        Self {
            ell,
            sampler,
            overlap_threshold: DEFAULT_OVERLAP,
            overlap: OverlapMeasure::Candidate,
            starts: StartSet::Auto,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell == 0 {
            return Err(Error::InvalidConfig("ell must be at least 1".into()));
        }
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "overlap threshold must be in (0, 1), got {}",
                self.overlap_threshold
            )));
        }
        Ok(())
    }
}

/// Object indices ordered by decreasing row sum, ties by index.
fn by_row_sum(a: &SimilarityMatrix) -> Vec<usize> {
    let sums = a.row_sums();
    let mut order: Vec<usize> = (0..a.n()).collect();
    order.sort_by(|&i, &j| sums[j].total_cmp(&sums[i]).then(i.cmp(&j)));
    order
}

/// Splits `0..len` into `parts` contiguous blocks of sizes differing by at most one.
fn blocks(len: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    (0..parts).map(|b| b * len / parts..(b + 1) * len / parts).collect()
}

/// One uniformly drawn object from each of `ell` row-sum-ranked blocks.
pub fn uniform_block_sample<R: Rng + ?Sized>(
    a: &SimilarityMatrix,
    ell: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n = a.n();
    if ell == 0 || ell > n {
        return Err(Error::TooManySeeds { requested: ell, available: n });
    }
    let order = by_row_sum(a);
    Ok(blocks(n, ell)
        .into_iter()
        .map(|r| order[rng.random_range(r)])
        .collect())
}

/// L-ensemble with a cached eigendecomposition.
#[derive(Debug, Clone)]
pub struct DppEnsemble {
    likelihood: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl DppEnsemble {
    /// Decomposes a symmetric positive semidefinite likelihood matrix.
    pub fn new(likelihood: DMatrix<f64>) -> Result<Self> {
        check_symmetric(&likelihood)?;
        let eig = SymmetricEigen::new(likelihood.clone());
        let mut eigenvalues = Vec::with_capacity(eig.eigenvalues.len());
        for &l in eig.eigenvalues.iter() {
            if l < -EIGEN_TOL {
                return Err(Error::RangeError(format!(
                    "likelihood is not positive semidefinite: eigenvalue {l}"
                )));
            }
            eigenvalues.push(l.max(0.0));
        }
        Ok(Self {
            likelihood,
            eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn likelihood(&self) -> &DMatrix<f64> {
        &self.likelihood
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Expected subset size, `sum λ / (1 + λ)`.
    pub fn expected_size(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l / (1.0 + l)).sum()
    }
}

fn check_symmetric(l: &DMatrix<f64>) -> Result<()> {
    if l.nrows() != l.ncols() {
        return Err(Error::NotSquare { rows: l.nrows(), row: 0, cols: l.ncols() });
    }
    let m = l.nrows();
    for i in 0..m {
        for j in (i + 1)..m {
            let (a, b) = (l[(i, j)], l[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite { i, j });
            }
            if (a - b).abs() > crate::matrix::SYMMETRY_TOL {
                return Err(Error::AsymmetricMatrix { i, j, a, b });
            }
        }
    }
    Ok(())
}

/// Replaces the diagonal with the row's absolute off-diagonal sum plus a
/// small margin, which makes the matrix positive semidefinite.
pub fn make_diagonally_dominant(l: &DMatrix<f64>) -> Result<DppEnsemble> {
    check_symmetric(l)?;
    let m = l.nrows();
    let max_abs = l.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let margin = 1e-9 * if max_abs > 0.0 { max_abs } else { 1.0 };
    let mut out = l.clone();
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| l[(i, j)].abs()).sum();
        out[(i, i)] = off + margin;
    }
    DppEnsemble::new(out)
}

/// Exact sample from the L-ensemble, by the spectral algorithm.
pub fn dpp_sample<R: Rng + ?Sized>(ens: &DppEnsemble, rng: &mut R) -> Vec<usize> {
    let m = ens.len();
    let chosen: Vec<usize> = (0..m)
        .filter(|&k| {
            let l = ens.eigenvalues[k];
            rng.random::<f64>() < l / (1.0 + l)
        })
        .collect();
    // Columns of `v` span the selected eigenspace.
    let mut v: Vec<Vec<f64>> = chosen
        .iter()
        .map(|&k| ens.eigenvectors.column(k).iter().copied().collect())
        .collect();
    let mut out = Vec::with_capacity(v.len());
    while !v.is_empty() {
        let k = v.len() as f64;
        let probs: Vec<f64> = (0..m).map(|i| v.iter().map(|c| c[i] * c[i]).sum::<f64>() / k).collect();
        let total: f64 = probs.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut item = m - 1;
        for (i, &p) in probs.iter().enumerate() {
            if u < p {
                item = i;
                break;
            }
            u -= p;
        }
        out.push(item);

        // Eliminate the component along e_item, then re-orthonormalize.
        let pivot = (0..v.len())
            .max_by(|&a, &b| v[a][item].abs().total_cmp(&v[b][item].abs()))
            .expect("nonempty");
        let pv = v.swap_remove(pivot);
        for c in v.iter_mut() {
            let factor = c[item] / pv[item];
            for (x, p) in c.iter_mut().zip(&pv) {
                *x -= factor * p;
            }
            c[item] = 0.0;
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(v.len());
        for mut c in v.drain(..) {
            for b in &basis {
                let proj = crate::matrix::dot(&c, b);
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
            let norm = crate::matrix::dot(&c, &c).sqrt();
            if norm > 1e-12 {
                c.iter_mut().for_each(|x| *x /= norm);
                basis.push(c);
            }
        }
        v = basis;
    }
    out.sort_unstable();
    out
}

/// Stage-one pool size per block, `ceil(n^{2/3} / 10)`.
pub fn pool_per_block(n: usize) -> usize {
    // cbrt keeps n = 1000 exact where powf(2/3) would round to 99.999...
    let n23 = (n as f64).cbrt().powi(2);
    ((n23 / 10.0) - 1e-9).ceil().max(1.0) as usize
}

/// The stage-one pool: ten row-sum-ranked blocks, `pool_per_block(n)` uniform draws from each.
pub fn two_step_pool<R: Rng + ?Sized>(a: &SimilarityMatrix, rng: &mut R) -> Vec<usize> {
    let n = a.n();
    let order = by_row_sum(a);
    let q = pool_per_block(n);
    let mut pool = Vec::new();
    for r in blocks(n, 10.min(n)) {
        let len = r.len();
        for k in index::sample(rng, len, q.min(len)) {
            pool.push(order[r.start + k]);
        }
    }
    pool
}

/// Two-step DPP seeding: a uniform block pool, then a DPP over the pool's
/// diagonally dominant similarity submatrix, trimmed or padded to `ell` seeds.
pub fn two_step_dpp_sample<R: Rng + ?Sized>(
    a: &SimilarityMatrix,
    ell: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let pool = two_step_pool(a, rng);
    if ell == 0 || pool.len() < ell {
        return Err(Error::PoolTooSmall { pool: pool.len(), requested: ell });
    }
    let m = pool.len();
    let l = DMatrix::from_fn(m, m, |i, j| a.get(pool[i], pool[j]));
    let ens = make_diagonally_dominant(&l)?;
    let mut picked = dpp_sample(&ens, rng);
    if picked.len() > ell {
        let lik = ens.likelihood();
        picked.sort_by(|&i, &j| lik[(j, j)].total_cmp(&lik[(i, i)]).then(i.cmp(&j)));
        picked.truncate(ell);
    }
    let mut seeds: Vec<usize> = picked.into_iter().map(|k| pool[k]).collect();
    if seeds.len() < ell {
        for i in uniform_block_sample(a, ell, rng)? {
            if seeds.len() < ell && !seeds.contains(&i) {
                seeds.push(i);
            }
        }
        let mut rest: Vec<usize> = pool.iter().copied().filter(|i| !seeds.contains(i)).collect();
        while seeds.len() < ell {
            let k = rng.random_range(0..rest.len());
            seeds.push(rest.swap_remove(k));
        }
    }
    Ok(seeds)
}

/// Vertex `e_i` and the biased point with mass 1/2 on `i`.
pub fn seed_starting_points(i: usize, n: usize) -> Result<(SimplexPoint, SimplexPoint)> {
    if n < 2 {
        return Err(Error::TooSmall { min: 2, got: n });
    }
    if i >= n {
        return Err(Error::DimensionMismatch { expected: n, got: i + 1 });
    }
    let rest = 0.5 / (n - 1) as f64;
    let mut biased = vec![rest; n];
    biased[i] = 0.5;
    Ok((SimplexPoint::vertex(n, i), SimplexPoint::new(biased)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct PassInfo {
    pub pass: usize,
    pub objects: usize,
    /// Seeds, as original object ids.
    pub seeds: Vec<usize>,
    pub runs: usize,
    pub accepted: usize,
    pub discarded: usize,
}

#[derive(Debug, Clone)]
pub struct MultistartResult {
    pub result: ClusteringResult,
    pub passes: usize,
    pub log: Vec<PassInfo>,
}

fn sample_seeds(a: &SimilarityMatrix, plan: &SamplePlan, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let ell = plan.ell.min(a.n());
    match plan.sampler {
        Sampler::Uni => uniform_block_sample(a, ell, rng),
        Sampler::Dpp => two_step_dpp_sample(a, ell, rng),
    }
}

fn overlap(candidate: &[usize], accepted: &[Vec<usize>], in_union: &[bool], measure: OverlapMeasure) -> f64 {
    match measure {
        OverlapMeasure::Candidate => {
            candidate.iter().filter(|&&i| in_union[i]).count() as f64 / candidate.len() as f64
        }
        OverlapMeasure::Jaccard => accepted
            .iter()
            .map(|t| {
                let inter = candidate.iter().filter(|i| t.contains(i)).count();
                inter as f64 / (candidate.len() + t.len() - inter) as f64
            })
            .fold(0.0, f64::max),
    }
}

/// Runs multi-start passes until `max_clusters` clusters are found or no
/// objects remain.
pub fn multistart_cluster(
    a: &SimilarityMatrix,
    plan: &SamplePlan,
    solver: &SolverConfig,
    max_clusters: usize,
    cutoff: f64,
) -> Result<MultistartResult> {
    plan.validate()?;
    solver.validate()?;
    if max_clusters == 0 {
        return Err(Error::InvalidConfig("max_clusters must be at least 1".into()));
    }
    if !(cutoff > 0.0) {
        return Err(Error::InvalidConfig(format!("cutoff must be positive, got {cutoff}")));
    }
    let starts = match (plan.starts, solver.kind) {
        (StartSet::Auto, SolverKind::Fw) | (StartSet::Vertex, _) => (true, false),
        (StartSet::Auto, SolverKind::Rd) | (StartSet::Biased, _) => (false, true),
        (StartSet::Auto, _) | (StartSet::Both, _) => (true, true),
    };

    let n = a.n();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut result = ClusteringResult::empty(n);
    let mut surviving: Vec<usize> = (0..n).collect();
    let mut log = Vec::new();

    while result.k_found() < max_clusters && !surviving.is_empty() {
        let pass = log.len() + 1;
        if surviving.len() == 1 {
            result.push_cluster(vec![surviving[0]]);
            log.push(PassInfo { pass, objects: 1, seeds: surviving.clone(), runs: 0, accepted: 1, discarded: 0 });
            break;
        }
        let sub = a.submatrix(&surviving);
        if sub.is_zero() {
            break;
        }
        let m = sub.n();
        let seeds = sample_seeds(&sub, plan, &mut rng)?;

        let mut points = Vec::new();
        for &s in &seeds {
            let (vertex, biased) = seed_starting_points(s, m)?;
            if starts.0 {
                points.push(vertex);
            }
            if starts.1 {
                points.push(biased);
            }
        }
        let outputs: Vec<Result<solvers::SolveOutput>> = points
            .into_par_iter()
            .map(|p| {
                let cfg = SolverConfig { init: InitKind::Custom(p), ..solver.clone() };
                solvers::run(&sub, &cfg)
            })
            .collect();
        let mut outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
        let runs = outputs.len();
        // Stable sort keeps seed order among equal objective values.
        outputs.sort_by(|p, q| q.f.total_cmp(&p.f));

        let mut accepted: Vec<Vec<usize>> = Vec::new();
        let mut in_union = vec![false; m];
        let mut discarded = 0;
        for out in &outputs {
            if result.k_found() + accepted.len() >= max_clusters {
                break;
            }
            let support = extract_support(&out.x, cutoff);
            if support.is_empty()
                || overlap(&support, &accepted, &in_union, plan.overlap) > plan.overlap_threshold
            {
                discarded += 1;
                continue;
            }
            // Objects already taken by an earlier solution stay with it.
            let fresh: Vec<usize> = support.iter().copied().filter(|&i| !in_union[i]).collect();
            fresh.iter().for_each(|&i| in_union[i] = true);
            accepted.push(fresh);
        }
        if accepted.is_empty() {
            break;
        }
        log.push(PassInfo {
            pass,
            objects: m,
            seeds: seeds.iter().map(|&s| surviving[s]).collect(),
            runs,
            accepted: accepted.len(),
            discarded,
        });
        for c in &accepted {
            result.push_cluster(c.iter().map(|&k| surviving[k]).collect());
        }
        surviving = surviving
            .iter()
            .enumerate()
            .filter(|&(k, _)| !in_union[k])
            .map(|(_, &i)| i)
            .collect();
    }

    Ok(MultistartResult { passes: log.len(), result, log })
}
