//! Similarity matrices and points on the standard simplex.
//!
//! [`SimilarityMatrix`] is dense, row-major, symmetric, nonnegative, and has
//! an exactly zero diagonal. Because it is symmetric, row `i` doubles as
//! column `i`, which is what the incremental solver updates read.
//!
//! [`SimplexPoint`] carries an explicit support set that step logic updates
//! directly (add on entering component, remove on drop) instead of deriving
//! it by scanning for positive coordinates.

use crate::error::{Error, Result};

/// Tolerance on `|sum(x) - 1|` for a valid simplex point.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;
/// Largest tolerated `|a_ij - a_ji|` on construction.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Diagonal entries at most this large are snapped to zero.
pub const DIAGONAL_TOL: f64 = 1e-12;

/// Dense symmetric nonnegative matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    /// Validates a square array of rows.
    ///
    /// Pairs that differ by at most [`SYMMETRY_TOL`] are replaced by their mean
    /// so that the stored matrix is exactly symmetric.
    pub fn new(raw: Vec<Vec<f64>>) -> Result<Self> {
        let n = raw.len();
        let mut data = Vec::with_capacity(n * n);
        for (row_idx, row) in raw.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotSquare {
                    rows: n,
                    row: row_idx,
                    cols: row.len(),
                });
            }
            data.extend(row);
        }
        Self::from_row_major(n, data)
    }

    /// Validates a flat row-major buffer of length `n * n`.
    pub fn from_row_major(n: usize, mut data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty);
        }
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
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
            }
        }
        for i in 0..n {
            let d = data[i * n + i];
            if d > DIAGONAL_TOL {
                return Err(Error::NonzeroDiagonal { i, value: d });
            }
            data[i * n + i] = 0.0;
            for j in (i + 1)..n {
                let (a, b) = (data[i * n + j], data[j * n + i]);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::AsymmetricMatrix { i, j, a, b });
                }
                if a != b {
                    let m = 0.5 * (a + b);
                    data[i * n + j] = m;
                    data[j * n + i] = m;
                }
            }
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix from a symmetric generator `f(i, j)` evaluated for `i < j`.
    ///
    /// Used by the pipelines, which produce valid entries by construction.
    pub(crate) fn from_upper_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                debug_assert!(v.is_finite() && v >= 0.0);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Row `i`, which equals column `i` by symmetry.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    /// Dense `A x`, O(n^2). This is the reference the solvers' cached `r` is checked against.
    pub fn matvec(&self, x: &SimplexPoint) -> Result<Vec<f64>> {
        self.check_dim(x.dim())?;
        Ok(self.matvec_slice(x.coords()))
    }

    pub fn quadratic_form(&self, x: &SimplexPoint) -> Result<f64> {
        self.check_dim(x.dim())?;
        Ok(self.quadratic_form_slice(x.coords()))
    }

    pub fn matvec_slice(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        self.rows().map(|row| dot(row, x)).collect()
    }

    pub fn quadratic_form_slice(&self, x: &[f64]) -> f64 {
        dot(x, &self.matvec_slice(x))
    }

    /// Smallest and largest off-diagonal entries.
    pub fn offdiag_extremes(&self) -> Result<(f64, f64)> {
        if self.n < 2 {
            return Err(Error::TooSmall {
                min: 2,
                got: self.n,
            });
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            for (j, &v) in self.row(i).iter().enumerate() {
                if i != j {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        Ok((lo, hi))
    }

    /// Principal submatrix on `idx`, in the given order.
    pub fn submatrix(&self, idx: &[usize]) -> SimilarityMatrix {
        let m = idx.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in idx {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        SimilarityMatrix { n: m, data }
    }

    /// Adds `c` to every off-diagonal entry.
    pub fn shifted(&self, c: f64) -> Result<SimilarityMatrix> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "shift must be finite and nonnegative, got {c}"
            )));
        }
        let mut out = self.clone();
        if c != 0.0 {
            let n = self.n;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        out.data[i * n + j] += c;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Multiplies every entry by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<SimilarityMatrix> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scale must be finite and positive, got {c}"
            )));
        }
        Ok(SimilarityMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        })
    }

    /// True when every off-diagonal entry is zero.
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got,
            });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index set with O(1) insert, remove, and membership.
#[derive(Debug, Clone)]
pub struct Support {
    members: Vec<usize>,
    pos: Vec<usize>,
}

const ABSENT: usize = usize::MAX;

impl Support {
    pub fn empty(n: usize) -> Self {
        Self {
            members: Vec::new(),
            pos: vec![ABSENT; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            members: (0..n).collect(),
            pos: (0..n).collect(),
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.pos[i] != ABSENT
    }

    /// Returns true if `i` was newly added.
    pub fn insert(&mut self, i: usize) -> bool {
        if self.contains(i) {
            return false;
        }
        self.pos[i] = self.members.len();
        self.members.push(i);
        true
    }

    /// Returns true if `i` was present.
    pub fn remove(&mut self, i: usize) -> bool {
        let p = self.pos[i];
        if p == ABSENT {
            return false;
        }
        let last = *self.members.last().expect("nonempty");
        self.members.swap_remove(p);
        if last != i {
            self.pos[last] = p;
        }
        self.pos[i] = ABSENT;
        true
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in unspecified order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.members.clone();
        v.sort_unstable();
        v
    }
}

impl PartialEq for Support {
    fn eq(&self, other: &Self) -> bool {
        self.pos.len() == other.pos.len() && self.sorted() == other.sorted()
    }
}

/// A point of the standard simplex together with its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    coords: Vec<f64>,
    support: Support,
}

impl SimplexPoint {
    /// Validates coordinates: finite, nonnegative, unit sum within [`SIMPLEX_SUM_TOL`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty);
        }
        let mut support = Support::empty(coords.len());
        for (i, &c) in coords.iter().enumerate() {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidSimplexPoint(format!(
                    "coordinate {i} is {c}"
                )));
            }
            if c > 0.0 {
                support.insert(i);
            }
        }
        let s: f64 = coords.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::InvalidSimplexPoint(format!(
                "coordinates sum to {s}"
            )));
        }
        Ok(Self { coords, support })
    }

    /// Uniform point `(1/n, ..., 1/n)`.
    pub fn barycenter(n: usize) -> Self {
        assert!(n >= 1, "barycenter of an empty simplex");
        Self {
            coords: vec![1.0 / n as f64; n],
            support: Support::full(n),
        }
    }

    /// Basis vector `e_i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        assert!(i < n, "vertex index {i} out of range for n = {n}");
        let mut coords = vec![0.0; n];
        coords[i] = 1.0;
        let mut support = Support::empty(n);
        support.insert(i);
        Self { coords, support }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.coords[i]
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn sum(&self) -> f64 {
        self.coords.iter().sum()
    }

    /// Checks every invariant, including exact agreement of the support with
    /// the positive coordinates.
    pub fn validate(&self) -> Result<()> {
        for (i, &c) in self.coords.iter().enumerate() {
            if !(c >= 0.0) {
                return Err(Error::InvalidSimplexPoint(format!(
                    "coordinate {i} is {c}"
                )));
            }
            if (c > 0.0) != self.support.contains(i) {
                return Err(Error::InvalidSimplexPoint(format!(
                    "support bookkeeping disagrees at {i} (x_i = {c})"
                )));
            }
        }
        let s = self.sum();
        if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::InvalidSimplexPoint(format!(
                "coordinates sum to {s}"
            )));
        }
        Ok(())
    }

    pub(crate) fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut [f64], &mut Support) {
        (&mut self.coords, &mut self.support)
    }

}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m3() -> SimilarityMatrix {
        SimilarityMatrix::new(vec![
            vec![0.0, 2.0, 1.0],
            vec![2.0, 0.0, 3.0],
            vec![1.0, 3.0, 0.0],
        ])
        .unwrap()
    }

    fn pt(c: &[f64]) -> SimplexPoint {
        SimplexPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn construction_contract() {
        assert!(SimilarityMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(matches!(
            SimilarityMatrix::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]]),
            Err(Error::AsymmetricMatrix { .. })
        ));
        assert!(matches!(
            SimilarityMatrix::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
            Err(Error::NonzeroDiagonal { .. })
        ));
        assert!(matches!(
            SimilarityMatrix::new(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]),
            Err(Error::NegativeEntry { .. })
        ));
        assert!(matches!(
            SimilarityMatrix::new(vec![vec![0.0, 1.0], vec![1.0]]),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn tiny_diagonal_snaps_to_zero() {
        let a = SimilarityMatrix::new(vec![vec![5e-13, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(a.get(0, 0), 0.0);
    }

    #[test]
    fn matvec_examples() {
        let a = SimilarityMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(a.matvec(&pt(&[0.5, 0.5])).unwrap(), vec![0.5, 0.5]);
        assert_eq!(a.matvec(&pt(&[1.0, 0.0])).unwrap(), vec![0.0, 1.0]);
        let r = m3().matvec(&pt(&[0.2, 0.3, 0.5])).unwrap();
        for (got, want) in r.iter().zip([1.1, 1.9, 1.1]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(matches!(
            a.matvec(&pt(&[0.2, 0.3, 0.5])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quadratic_form_examples() {
        let a = SimilarityMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(a.quadratic_form(&pt(&[0.5, 0.5])).unwrap(), 0.5);
        assert_eq!(m3().quadratic_form(&SimplexPoint::vertex(3, 1)).unwrap(), 0.0);
        // 2 (2 * 0.06 + 1 * 0.1 + 3 * 0.15)
        assert!((m3().quadratic_form(&pt(&[0.2, 0.3, 0.5])).unwrap() - 1.34).abs() < 1e-14);
    }

    #[test]
    fn offdiag_examples() {
        let a = SimilarityMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(a.offdiag_extremes().unwrap(), (1.0, 1.0));
        assert_eq!(m3().offdiag_extremes().unwrap(), (1.0, 3.0));
        assert_eq!(SimilarityMatrix::zeros(2).offdiag_extremes().unwrap(), (0.0, 0.0));
        assert!(matches!(
            SimilarityMatrix::zeros(1).offdiag_extremes(),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn support_set_ops() {
        let mut s = Support::empty(5);
        assert!(s.insert(3));
        assert!(s.insert(1));
        assert!(!s.insert(3));
        assert!(s.remove(3));
        assert!(!s.remove(3));
        assert_eq!(s.sorted(), vec![1]);
        s.insert(4);
        s.insert(0);
        s.remove(1);
        assert_eq!(s.sorted(), vec![0, 4]);
        assert!(s.contains(4) && !s.contains(1));
    }

    #[test]
    fn simplex_point_rejects_bad_input() {
        assert!(SimplexPoint::new(vec![0.5, 0.6]).is_err());
        assert!(SimplexPoint::new(vec![-0.1, 1.1]).is_err());
        assert!(SimplexPoint::new(vec![]).is_err());
        let p = pt(&[0.0, 0.25, 0.75]);
        assert_eq!(p.support().sorted(), vec![1, 2]);
        p.validate().unwrap();
    }

    fn random_case(n: usize, seed: u64) -> (SimilarityMatrix, Vec<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = SimilarityMatrix::from_upper_fn(n, |_, _| rng.random::<f64>());
        let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let s: f64 = x.iter().sum();
        x.iter_mut().for_each(|v| *v /= s);
        (a, x)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn quadratic_form_is_dot_of_matvec(n in 1usize..=256, seed in any::<u64>()) {
            let (a, x) = random_case(n, seed);
            let q = a.quadratic_form_slice(&x);
            let d = dot(&x, &a.matvec_slice(&x));
            prop_assert!((q - d).abs() <= 1e-12 * q.abs().max(1e-300));
        }

        #[test]
        fn extremes_invariant_under_permutation(n in 2usize..=24, seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let (a, _) = random_case(n, seed);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xabc));
            let p = a.submatrix(&perm);
            prop_assert_eq!(a.offdiag_extremes().unwrap(), p.offdiag_extremes().unwrap());
        }
    }
}
