//! Similarity pipelines and synthetic datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::{SimilarityMatrix, SYMMETRY_TOL};

/// Dense n×d feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { i, j });
            }
            data.extend(row);
        }
        Ok(Self { n, d, data })
    }

    pub fn from_row_major(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: data.len() });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { i: k / d.max(1), j: k % d.max(1) });
        }
        Ok(Self { n, d, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n).map(move |i| self.row(i))
    }
}

/// Symmetric, zero-diagonal, nonnegative distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (row_idx, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, row: row_idx, cols: row.len() });
            }
            data.extend(row);
        }
        Self::from_row_major(n, data)
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        for i in 0..n {
            for j in 0..n {
                let v = data[i * n + j];
                if !v.is_finite() {
                    return Err(Error::NonFinite { i, j });
                }
                if v < 0.0 {
                    return Err(Error::NegativeEntry { i, j, value: v });
                }
                if i == j && v != 0.0 {
                    return Err(Error::NonzeroDiagonal { i, value: v });
                }
                let w = data[j * n + i];
                if (v - w).abs() > SYMMETRY_TOL {
                    return Err(Error::AsymmetricMatrix { i, j, a: v, b: w });
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// `a_ij = cos(f_i, f_j) + shift` off the diagonal.
pub fn cosine_similarity(f: &FeatureMatrix, shift: f64) -> Result<SimilarityMatrix> {
    if !(shift.is_finite() && shift >= 0.0) {
        return Err(Error::RangeError(format!("shift must be finite and >= 0, got {shift}")));
    }
    let norms: Vec<f64> = f.rows().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if let Some(row) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroNormRow { row });
    }
    let unit: Vec<Vec<f64>> = f
        .rows()
        .zip(&norms)
        .map(|(r, &nrm)| r.iter().map(|v| v / nrm).collect())
        .collect();
    let cos = |i: usize, j: usize| crate::matrix::dot(&unit[i], &unit[j]).clamp(-1.0, 1.0);
    for i in 0..f.n() {
        for j in (i + 1)..f.n() {
            let value = cos(i, j) + shift;
            if value < 0.0 {
                return Err(Error::NegativeEntry { i, j, value });
            }
        }
    }
    let a = SimilarityMatrix::from_upper_fn(f.n(), |i, j| cos(i, j) + shift);
    Ok(a)
}

/// Pixel features `(v, v s sin h, v s cos h)`.
pub fn hsv_features(pixels: &[(f64, f64, f64)]) -> Result<FeatureMatrix> {
    let mut data = Vec::with_capacity(pixels.len() * 3);
    for (i, &(h, s, v)) in pixels.iter().enumerate() {
        if !h.is_finite() || !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&v) {
            return Err(Error::RangeError(format!(
                "pixel {i}: (h={h}, s={s}, v={v}) needs finite h and s, v in [0, 1]"
            )));
        }
        data.extend([v, v * s * h.sin(), v * s * h.cos()]);
    }
    FeatureMatrix::from_row_major(pixels.len(), 3, data)
}

pub fn pairwise_euclidean(f: &FeatureMatrix) -> DistanceMatrix {
    let n = f.n();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = f
                .row(i)
                .iter()
                .zip(f.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}

/// Minimax (bottleneck path) distances: the largest edge on the minimum
/// spanning tree path between each pair.
pub fn minimax_distances(d: &DistanceMatrix) -> DistanceMatrix {
    let n = d.n();
    let mut out = vec![0.0; n * n];
    if n == 0 {
        return DistanceMatrix { n, data: out };
    }

    // Prim on the dense graph.
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    best[0] = 0.0;
    for _ in 0..n {
        let mut u = usize::MAX;
        for v in 0..n {
            if !in_tree[v] && (u == usize::MAX || best[v] < best[u]) {
                u = v;
            }
        }
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            let p = parent[u];
            adj[u].push((p, best[u]));
            adj[p].push((u, best[u]));
        }
        let row = d.row(u);
        for v in 0..n {
            if !in_tree[v] && row[v] < best[v] {
                best[v] = row[v];
                parent[v] = u;
            }
        }
    }

    let mut stack = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for src in 0..n {
        seen.iter_mut().for_each(|s| *s = false);
        seen[src] = true;
        stack.push((src, 0.0f64));
        while let Some((u, m)) = stack.pop() {
            out[src * n + u] = m;
            for &(v, w) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push((v, m.max(w)));
                }
            }
        }
    }
    // Both traversal directions see the same edge set; copy to make symmetry exact.
    for i in 0..n {
        for j in (i + 1)..n {
            out[j * n + i] = out[i * n + j];
        }
    }
    DistanceMatrix { n, data: out }
}

/// `a_ij = max(D) - d_ij` off the diagonal, zero on it.
pub fn max_transform(d: &DistanceMatrix) -> SimilarityMatrix {
    let m = d.max();
    SimilarityMatrix::from_upper_fn(d.n(), |i, j| (m - d.get(i, j)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    BlockNoise,
    GaussMix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n: usize,
    pub k: usize,
    /// Noise ratio p in [0, 1].
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn block(n: usize, k: usize, noise: f64, seed: u64) -> Self {
        Self { kind: SyntheticKind::BlockNoise, n, k, noise, seed }
    }

    pub fn gauss(n: usize, noise: f64, seed: u64) -> Self {
        Self { kind: SyntheticKind::GaussMix, n, k: GAUSS_MEANS.len(), noise, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::RangeError(format!("noise must be in [0, 1], got {}", self.noise)));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::InvalidConfig(format!("need 1 <= k <= n, got k={} n={}", self.k, self.n)));
        }
        if self.kind == SyntheticKind::GaussMix && self.k > GAUSS_MEANS.len() {
            return Err(Error::InvalidConfig(format!(
                "gaussian mixture supports at most {} clusters, got {}",
                GAUSS_MEANS.len(),
                self.k
            )));
        }
        Ok(())
    }
}

/// Block-noise similarity matrix with uniformly assigned cluster labels `1..=k`.
pub fn block_noise_matrix(spec: &SyntheticSpec) -> Result<(SimilarityMatrix, Vec<usize>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let truth: Vec<usize> = (0..spec.n).map(|_| rng.random_range(1..=spec.k)).collect();
    let p = spec.noise;
    let a = SimilarityMatrix::from_upper_fn(spec.n, |i, j| {
        if truth[i] != truth[j] {
            return 0.0;
        }
        let mu: f64 = rng.random();
        let dropped = rng.random::<f64>() < p;
        if dropped { 0.0 } else { mu }
    });
    Ok((a, truth))
}

pub const GAUSS_MEANS: [(f64, f64); 4] = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (10.0, 10.0)];
/// Support of the uniform background, per axis.
pub const GAUSS_BOX: (f64, f64) = (-5.0, 15.0);

#[derive(Debug, Clone)]
pub struct GaussData {
    pub features: FeatureMatrix,
    /// Clusters are labeled `1..=k`; background points get `k + 1`.
    pub truth: Vec<usize>,
    pub background: Vec<bool>,
}

impl GaussData {
    /// Truth with background points marked unassigned (0).
    pub fn truth_without_background(&self) -> Vec<usize> {
        self.truth
            .iter()
            .zip(&self.background)
            .map(|(&t, &b)| if b { 0 } else { t })
            .collect()
    }
}

/// Gaussian mixture plus a uniform background of `round(p n)` points.
///
/// Cluster `c` (1-based) holds a `c / (1 + ... + k)` share of the non-background points.
pub fn gauss_dataset(spec: &SyntheticSpec) -> Result<GaussData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n1 = (spec.noise * spec.n as f64).round() as usize;
    let n2 = spec.n - n1;
    let total_share: usize = (1..=spec.k).sum();
    let mut sizes: Vec<usize> = (1..=spec.k)
        .map(|c| (n2 as f64 * c as f64 / total_share as f64).round() as usize)
        .collect();
    let assigned: usize = sizes[..spec.k - 1].iter().sum();
    sizes[spec.k - 1] = n2.saturating_sub(assigned);

    let mut data = Vec::with_capacity(spec.n * 2);
    let mut truth = Vec::with_capacity(spec.n);
    let mut background = Vec::with_capacity(spec.n);
    for (c, &size) in sizes.iter().enumerate() {
        let (mx, my) = GAUSS_MEANS[c];
        for _ in 0..size {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            data.extend([mx + dx, my + dy]);
            truth.push(c + 1);
            background.push(false);
        }
    }
    let (lo, hi) = GAUSS_BOX;
    for _ in 0..n1 {
        data.extend([rng.random_range(lo..hi), rng.random_range(lo..hi)]);
        truth.push(spec.k + 1);
        background.push(true);
    }
    Ok(GaussData {
        features: FeatureMatrix::from_row_major(spec.n, 2, data)?,
        truth,
        background,
    })
}
