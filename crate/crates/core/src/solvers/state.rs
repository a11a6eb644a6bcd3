//! Solver state with cached `r = A x` and `f = x^T A x`, and the per-iteration
//! steps of the four optimizers.
//!
//! The Frank-Wolfe family updates `r` and `f` in O(n) from one or two rows of
//! `A`. Replicator dynamics recomputes both densely.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{SimilarityMatrix, SimplexPoint, SIMPLEX_SUM_TOL};

/// Classification of a single iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StepKind {
    FwGood,
    AwayGood,
    PairwiseGood,
    Drop,
    Swap,
    RdStep,
}

impl StepKind {
    pub fn is_good(self) -> bool {
        matches!(
            self,
            StepKind::FwGood | StepKind::AwayGood | StepKind::PairwiseGood
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StepKind::FwGood => "fw_good",
            StepKind::AwayGood => "away_good",
            StepKind::PairwiseGood => "pairwise_good",
            StepKind::Drop => "drop",
            StepKind::Swap => "swap",
            StepKind::RdStep => "rd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fw_good" => StepKind::FwGood,
            "away_good" => StepKind::AwayGood,
            "pairwise_good" => StepKind::PairwiseGood,
            "drop" => StepKind::Drop,
            "swap" => StepKind::Swap,
            "rd" => StepKind::RdStep,
            _ => return None,
        })
    }
}

/// What happened in one iteration.
///
/// `gap` is the full Frank-Wolfe gap `2 (r_s - f)`; `gap_half` is `r_s - f`,
/// the quantity compared against the stopping threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub kind: StepKind,
    pub gamma: f64,
    pub gamma_max: f64,
    pub gap: f64,
    pub gap_half: f64,
    pub f_before: f64,
    pub f_after: f64,
    pub s_index: Option<usize>,
    pub v_index: Option<usize>,
    /// `r_s` at the start of the step.
    pub r_s: f64,
    /// `r_v` at the start of the step, for steps that select an away vertex.
    pub r_v: Option<f64>,
    /// `a_sv`, for pairwise steps.
    pub a_sv: Option<f64>,
    pub support_before: usize,
    pub support_after: usize,
    /// Euclidean norm of `x_{t+1} - x_t`.
    pub step_norm: f64,
}

impl StepRecord {
    pub fn delta_f(&self) -> f64 {
        self.f_after - self.f_before
    }
}

/// Iterate `x_t` with cached `r_t = A x_t` and `f_t = x_t^T A x_t`.
#[derive(Debug, Clone)]
pub struct SolverState {
    x: SimplexPoint,
    r: Vec<f64>,
    f: f64,
    t: usize,
}

impl SolverState {
    /// Computes `r` and `f` densely from `x`.
    pub fn new(a: &SimilarityMatrix, x: SimplexPoint) -> Result<Self> {
        let r = a.matvec(&x)?;
        let f = crate::matrix::dot(&r, x.coords());
        Ok(Self { x, r, f, t: 0 })
    }

    /// Assembles a state from parts without checking `r` or `f`.
    pub fn from_parts(x: SimplexPoint, r: Vec<f64>, f: f64, t: usize) -> Self {
        assert_eq!(x.dim(), r.len(), "x and r must have equal length");
        Self { x, r, f, t }
    }

    pub fn x(&self) -> &SimplexPoint {
        &self.x
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn into_point(self) -> SimplexPoint {
        self.x
    }

    /// `argmax_l r_l` (lowest index on ties) and `r_s - f`.
    pub fn gap_half(&self) -> (f64, usize) {
        let s = argmax(&self.r);
        (self.r[s] - self.f, s)
    }

    /// Full Frank-Wolfe gap `2 (r_s - f)` and the maximizing vertex `s`.
    pub fn fw_gap(&self) -> (f64, usize) {
        let (half, s) = self.gap_half();
        (2.0 * half, s)
    }

    /// Support index minimizing `r` (lowest index on ties).
    pub fn select_away(&self) -> Result<usize> {
        let min = self
            .x
            .support()
            .iter()
            .map(|j| self.r[j])
            .fold(f64::INFINITY, f64::min);
        if min == f64::INFINITY {
            return Err(Error::EmptySupport);
        }
        let limit = min + TIE_RTOL * min.abs();
        self.x
            .support()
            .iter()
            .filter(|&j| self.r[j] <= limit)
            .min()
            .ok_or(Error::EmptySupport)
    }

    /// Standard Frank-Wolfe step toward the best vertex with exact line search.
    pub fn fw_step(&mut self, a: &SimilarityMatrix) -> Result<StepRecord> {
        let (gap_half, s) = self.gap_half();
        if !(gap_half > 0.0) {
            return Err(Error::NotAscent { gap_half });
        }
        Ok(self.fw_update(a, s, gap_half, None))
    }

    fn fw_update(
        &mut self,
        a: &SimilarityMatrix,
        s: usize,
        gap_half: f64,
        away: Option<(usize, f64)>,
    ) -> StepRecord {
        let f = self.f;
        let r_s = self.r[s];
        // d^T A d = f - 2 r_s < 0 on the FW direction.
        let curvature = f - 2.0 * r_s;
        assert!(curvature < 0.0, "FW direction must be concave: d^T A d = {curvature}");
        let gamma = gap_half / (2.0 * r_s - f);
        debug_assert!(gamma > 0.0 && gamma < 1.0);
        let keep = 1.0 - gamma;
        let support_before = self.x.support().len();

        let col = a.row(s);
        let (x, support) = self.x.parts_mut();
        let mut norm2 = 0.0;
        for k in 0..x.len() {
            let old = x[k];
            let new = if k == s { keep * old + gamma } else { keep * old };
            if old > 0.0 && new == 0.0 {
                // underflow of a vanishing coordinate
                support.remove(k);
            }
            x[k] = new;
            let d = new - old;
            norm2 += d * d;
            self.r[k] = keep * self.r[k] + gamma * col[k];
        }
        support.insert(s);
        // (1 - g)^2 f + 2 g (1 - g) r_s, written as an increment over f
        let f_after = f + gamma * (2.0 * gap_half - gamma * (2.0 * r_s - f));
        self.f = f_after;
        let record = StepRecord {
            t: self.t,
            kind: StepKind::FwGood,
            gamma,
            gamma_max: 1.0,
            gap: 2.0 * gap_half,
            gap_half,
            f_before: f,
            f_after,
            s_index: Some(s),
            v_index: away.map(|(j, _)| j),
            r_s,
            r_v: away.map(|(_, r_v)| r_v),
            a_sv: None,
            support_before,
            support_after: self.x.support().len(),
            step_norm: norm2.sqrt(),
        };
        self.finish_step();
        record
    }

    /// Pairwise step moving mass from the worst support vertex to the best vertex.
    ///
    /// Returns `Ok(None)` when both vertices coincide, which only happens at a
    /// stationary point.
    pub fn pfw_step(&mut self, a: &SimilarityMatrix) -> Result<Option<StepRecord>> {
        let (gap_half, s) = self.gap_half();
        if !(gap_half > 0.0) {
            return Err(Error::NotAscent { gap_half });
        }
        let v = self.select_away()?;
        if s == v {
            return Ok(None);
        }
        let f = self.f;
        let (r_s, r_v) = (self.r[s], self.r[v]);
        let a_sv = a.get(s, v);
        let gamma_max = self.x.get(v);
        let support_before = self.x.support().len();

        assert!(a_sv >= 0.0, "pairwise direction must be concave: a_sv = {a_sv}");
        // d^T A d = -2 a_sv; with a_sv == 0 the step function is linear
        // with positive slope and the maximizer is the cap.
        let mut gamma = if a_sv > 0.0 {
            ((r_s - r_v) / (2.0 * a_sv)).min(gamma_max)
        } else {
            gamma_max
        };
        let (x, support) = self.x.parts_mut();
        let mut truncated = gamma >= gamma_max * (1.0 - TIE_RTOL);
        let new_v = x[v] - gamma;
        if truncated || new_v <= 0.0 {
            truncated = true;
            gamma = gamma_max;
            x[v] = 0.0;
            support.remove(v);
        } else {
            x[v] = new_v;
        }
        x[s] += gamma;
        support.insert(s);

        let (row_s, row_v) = (a.row(s), a.row(v));
        for k in 0..self.r.len() {
            self.r[k] += gamma * (row_s[k] - row_v[k]);
        }
        let f_after = f + gamma * (2.0 * (r_s - r_v) - 2.0 * gamma * a_sv);
        self.f = f_after;
        let support_after = self.x.support().len();
        let kind = if !truncated {
            StepKind::PairwiseGood
        } else if support_after < support_before {
            StepKind::Drop
        } else {
            StepKind::Swap
        };
        let record = StepRecord {
            t: self.t,
            kind,
            gamma,
            gamma_max,
            gap: 2.0 * gap_half,
            gap_half,
            f_before: f,
            f_after,
            s_index: Some(s),
            v_index: Some(v),
            r_s,
            r_v: Some(r_v),
            a_sv: Some(a_sv),
            support_before,
            support_after,
            step_norm: gamma * std::f64::consts::SQRT_2,
        };
        self.finish_step();
        Ok(Some(record))
    }

    /// Away-steps Frank-Wolfe: the FW step, or a step away from the worst
    /// support vertex when that promises more ascent.
    pub fn afw_step(&mut self, a: &SimilarityMatrix) -> Result<StepRecord> {
        let (gap_half, s) = self.gap_half();
        if !(gap_half > 0.0) {
            return Err(Error::NotAscent { gap_half });
        }
        let v = self.select_away()?;
        let f = self.f;
        let r_v = self.r[v];
        if gap_half >= f - r_v {
            return Ok(self.fw_update(a, s, gap_half, Some((v, r_v))));
        }
        let x_v = self.x.get(v);
        // x = e_v gives f = r_v = 0, which always takes the FW branch.
        assert!(x_v < 1.0, "away branch reached at a vertex");
        let r_s = self.r[s];
        let gamma_max = x_v / (1.0 - x_v);
        let mut gamma = gamma_max;
        if 2.0 * r_v - f > 0.0 {
            gamma = gamma.min((f - r_v) / (2.0 * r_v - f));
        }
        let support_before = self.x.support().len();
        // Round-off can push a near-cap good step onto the boundary.
        let truncated =
            gamma >= gamma_max * (1.0 - TIE_RTOL) || (1.0 + gamma) * x_v - gamma <= 0.0;
        if truncated {
            gamma = gamma_max;
        }
        let grow = 1.0 + gamma;

        let col = a.row(v);
        let (x, support) = self.x.parts_mut();
        let mut norm2 = 0.0;
        for k in 0..x.len() {
            let old = x[k];
            let new = if k == v {
                if truncated {
                    0.0
                } else {
                    grow * old - gamma
                }
            } else {
                grow * old
            };
            x[k] = new;
            let d = new - old;
            norm2 += d * d;
            self.r[k] = grow * self.r[k] - gamma * col[k];
        }
        if truncated {
            support.remove(v);
        }
        // (1 + g)^2 f - 2 g (1 + g) r_v, written as an increment over f
        let f_after = f + gamma * (2.0 * (f - r_v) - gamma * (2.0 * r_v - f));
        self.f = f_after;
        let record = StepRecord {
            t: self.t,
            kind: if truncated {
                StepKind::Drop
            } else {
                StepKind::AwayGood
            },
            gamma,
            gamma_max,
            gap: 2.0 * gap_half,
            gap_half,
            f_before: f,
            f_after,
            s_index: Some(s),
            v_index: Some(v),
            r_s,
            r_v: Some(r_v),
            a_sv: None,
            support_before,
            support_after: self.x.support().len(),
            step_norm: norm2.max(0.0).sqrt(),
        };
        self.finish_step();
        Ok(record)
    }

    /// One replicator-dynamics update `x_i <- x_i r_i / f`, O(n^2).
    pub fn rd_step(&mut self, a: &SimilarityMatrix) -> Result<StepRecord> {
        let f = self.f;
        if !(f > 0.0) {
            return Err(Error::ZeroDenominator);
        }
        let (gap_half, s) = self.gap_half();
        let r_s = self.r[s];
        let support_before = self.x.support().len();
        let (x, support) = self.x.parts_mut();
        let mut norm2 = 0.0;
        for k in 0..x.len() {
            let old = x[k];
            if old == 0.0 {
                continue;
            }
            let new = old * self.r[k] / f;
            if new == 0.0 {
                support.remove(k);
            }
            x[k] = new;
            norm2 += (new - old) * (new - old);
        }
        self.renormalize();
        self.r = a.matvec_slice(self.x.coords());
        self.f = crate::matrix::dot(&self.r, self.x.coords());
        let record = StepRecord {
            t: self.t,
            kind: StepKind::RdStep,
            gamma: 1.0,
            gamma_max: 1.0,
            gap: 2.0 * gap_half,
            gap_half,
            f_before: f,
            f_after: self.f,
            s_index: Some(s),
            v_index: None,
            r_s,
            r_v: None,
            a_sv: None,
            support_before,
            support_after: self.x.support().len(),
            step_norm: norm2.sqrt(),
        };
        self.t += 1;
        Ok(record)
    }

    fn finish_step(&mut self) {
        self.renormalize();
        self.t += 1;
    }

    /// Rescales `x` (and `r`, `f` consistently) when the coordinate sum has
    /// drifted beyond the simplex tolerance.
    fn renormalize(&mut self) {
        let s: f64 = self.x.sum();
        if (s - 1.0).abs() > SIMPLEX_SUM_TOL {
            let inv = 1.0 / s;
            self.x.coords_mut().iter_mut().for_each(|v| *v *= inv);
            self.r.iter_mut().for_each(|v| *v *= inv);
            self.f *= inv * inv;
        }
    }
}

/// Relative tolerance under which two values count as tied for argmax/argmin.
///
/// Without it, ties that hold in exact arithmetic (e.g. symmetric objects)
/// would be broken by round-off instead of by index.
pub const TIE_RTOL: f64 = 1e-12;

/// Index of the largest value, lowest index on ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let limit = max - TIE_RTOL * max.abs();
    v.iter().position(|&x| x >= limit).unwrap_or(0)
}
