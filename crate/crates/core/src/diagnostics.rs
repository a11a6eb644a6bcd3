//! Runtime checks of the solvers against the convergence analysis: cached
//! state consistency, exact per-step progress, and the gap bounds.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{dot, SimilarityMatrix};
use crate::solvers::{SolverKind, SolverState, StepKind, StepRecord};

/// Tolerance for `|r - A x|_inf` and for `|f - x^T A x| / max(1, f)`.
pub const STATE_TOL: f64 = 1e-8;
/// Relative tolerance of the progress identities.
pub const IDENTITY_RTOL: f64 = 1e-9;
/// Absolute floor, scaled by `max(1, f)`, for progress that is below the
/// resolution of `f` itself.
pub const IDENTITY_ATOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateReport {
    pub r_deviation: f64,
    pub f_deviation: f64,
    pub support_ok: bool,
}

impl StateReport {
    pub fn consistent(&self, f: f64) -> bool {
        self.support_ok
            && self.r_deviation <= STATE_TOL
            && self.f_deviation <= STATE_TOL * f.abs().max(1.0)
    }
}

/// Recomputes `A x` and `x^T A x` densely and compares them with the cache.
pub fn check_state(state: &SolverState, a: &SimilarityMatrix) -> Result<StateReport> {
    let x = state.x();
    let r = a.matvec(x)?;
    let f = dot(&r, x.coords());
    let r_deviation = r
        .iter()
        .zip(state.r())
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    Ok(StateReport {
        r_deviation,
        f_deviation: (f - state.f()).abs(),
        support_ok: x.validate().is_ok(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProgressReport {
    /// Good steps whose identity was checked.
    pub checked: usize,
    /// Drop, swap and replicator steps.
    pub skipped: usize,
    /// Largest relative error over steps whose progress is large enough to
    /// resolve it; see `floor_limited`.
    pub max_rel_error: f64,
    /// Good steps whose progress is so small that the absolute floor, not
    /// the relative tolerance, decided the check.
    pub floor_limited: usize,
    /// Largest `g^2 / bound` over checked steps; at most 1 up to round-off.
    pub max_gap_ratio: f64,
}

/// Closed-form progress of a good step.
pub fn predicted_progress(rec: &StepRecord) -> Option<f64> {
    let f = rec.f_before;
    match rec.kind {
        StepKind::FwGood => Some(rec.gap_half * rec.gap_half / (2.0 * rec.r_s - f)),
        StepKind::PairwiseGood => {
            let d = rec.r_s - rec.r_v?;
            Some(d * d / (2.0 * rec.a_sv?))
        }
        StepKind::AwayGood => {
            let r_v = rec.r_v?;
            Some((f - r_v) * (f - r_v) / (2.0 * r_v - f))
        }
        _ => None,
    }
}

/// Upper bound on `g^2` implied by the step's progress.
fn gap_bound(rec: &StepRecord, m_max: f64) -> Option<f64> {
    let df = rec.delta_f();
    match rec.kind {
        StepKind::FwGood => Some(4.0 * (2.0 * rec.r_s - rec.f_before) * df),
        StepKind::PairwiseGood => Some(8.0 * m_max * df),
        StepKind::AwayGood => Some(4.0 * (2.0 * rec.r_v? - rec.f_before) * df),
        _ => None,
    }
}

/// Verifies each good step's exact progress identity and gap inequality,
/// and that `f` never decreases.
///
/// `m_max` is the largest off-diagonal entry of the matrix the trace came from.
pub fn check_progress(trace: &[StepRecord], m_max: f64) -> Result<ProgressReport> {
    let mut report = ProgressReport::default();
    for rec in trace {
        let floor = IDENTITY_ATOL * rec.f_after.abs().max(1.0);
        let df = rec.delta_f();
        if df < -floor {
            return Err(Error::IdentityViolated {
                t: rec.t,
                detail: format!("objective decreased from {} to {}", rec.f_before, rec.f_after),
            });
        }
        let Some(pred) = predicted_progress(rec) else {
            report.skipped += 1;
            continue;
        };
        let err = (df - pred).abs();
        if err > IDENTITY_RTOL * pred.abs() + floor {
            return Err(Error::IdentityViolated {
                t: rec.t,
                detail: format!(
                    "{} step: progress {df:e}, closed form {pred:e}",
                    rec.kind.as_str()
                ),
            });
        }
        // Steps near the resolution of f say nothing about relative error.
        let resolved = IDENTITY_RTOL * pred.abs() >= floor;
        if !resolved {
            report.floor_limited += 1;
        }
        if resolved {
            report.max_rel_error = report.max_rel_error.max(err / pred);
        }
        if let Some(bound) = gap_bound(rec, m_max) {
            let g2 = rec.gap * rec.gap;
            if g2 > bound * (1.0 + IDENTITY_RTOL) + 4.0 * floor * m_max.max(1.0) {
                return Err(Error::IdentityViolated {
                    t: rec.t,
                    detail: format!(
                        "{} step: squared gap {g2:e} exceeds {bound:e}",
                        rec.kind.as_str()
                    ),
                });
            }
            if resolved && bound > 0.0 {
                report.max_gap_ratio = report.max_gap_ratio.max(g2 / bound);
            }
        }
        report.checked += 1;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: SolverKind,
    pub t: usize,
    pub min_gap: f64,
    pub bound_value: f64,
    pub satisfied: bool,
    pub beta: f64,
    /// Bound with the realized number of good steps in place of the worst case.
    pub lemma_bound: f64,
    pub good_steps: usize,
    pub drop_steps: usize,
    pub swap_steps: usize,
    pub support0: usize,
    pub gain: f64,
}

/// Smallest recorded full gap.
pub fn min_gap(trace: &[StepRecord]) -> Result<f64> {
    trace
        .iter()
        .map(|r| r.gap)
        .reduce(f64::min)
        .ok_or(Error::EmptyTrace)
}

/// Running minimum of the recorded gaps: entry `t - 1` is the smallest gap
/// over the first `t` iterations.
pub fn min_gap_curve(trace: &[StepRecord]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    trace
        .iter()
        .map(|r| {
            best = best.min(r.gap);
            best
        })
        .collect()
}

/// `ln n!` as a sum of logs, finite for any `n` we can store.
fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Evaluates the gap bound that matches `kind` on a trace.
///
/// `m_max` and `m_min` are the largest and smallest off-diagonal entries,
/// `n` the problem dimension and `support0` the size of the starting support.
pub fn theorem_bound(
    trace: &[StepRecord],
    kind: SolverKind,
    m_max: f64,
    m_min: f64,
    n: usize,
    support0: usize,
) -> Result<BoundReport> {
    let first = trace.first().ok_or(Error::EmptyTrace)?;
    let last = trace.last().ok_or(Error::EmptyTrace)?;
    let t = trace.len();
    let gain = (last.f_after - first.f_before).max(0.0);
    let count = |k: StepKind| trace.iter().filter(|r| r.kind == k).count();
    let good_steps = trace.iter().filter(|r| r.kind.is_good()).count();
    let drop_steps = count(StepKind::Drop);
    let swap_steps = count(StepKind::Swap);
    let min_gap = min_gap(trace)?;

    let beta = match kind {
        SolverKind::Pfw => 2.0 * m_max,
        _ => 2.0 * m_max - m_min,
    };
    let tf = t as f64;
    let bound_value = match kind {
        SolverKind::Fw => 2.0 * (beta * gain / tf).sqrt(),
        SolverKind::Pfw => {
            // 2 sqrt(6 n! M gain / t), evaluated in log space.
            let ln_inner = 6f64.ln() + ln_factorial(n) + (m_max * gain / tf).ln();
            2.0 * (0.5 * ln_inner).exp()
        }
        SolverKind::Afw => {
            let denom = tf + 1.0 - support0 as f64;
            if denom > 0.0 {
                2.0 * (2.0 * beta * gain / denom).sqrt()
            } else {
                f64::INFINITY
            }
        }
        SolverKind::Rd => f64::INFINITY,
    };
    let lemma_bound = if good_steps > 0 {
        2.0 * (beta * gain / good_steps as f64).sqrt()
    } else {
        f64::INFINITY
    };
    // No gap can exceed 2 max(r) <= 2 M, so larger bounds hold trivially.
    let trivially = bound_value >= 2.0 * m_max;
    let satisfied = trivially || min_gap <= bound_value * (1.0 + 1e-12);
    Ok(BoundReport {
        kind,
        t,
        min_gap,
        bound_value,
        satisfied,
        beta,
        lemma_bound,
        good_steps,
        drop_steps,
        swap_steps,
        support0,
        gain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Slope at most -0.4, consistent with `O(1/sqrt(t))` decay.
    pub consistent: bool,
}

/// Number of log-spaced samples used by [`decay_fit_curve`].
pub const DECAY_SAMPLES: usize = 40;

/// Least-squares slope of `ln g` against `ln t` over `(t, g)` samples.
/// Samples with `t == 0` or `g <= 0` are ignored.
pub fn decay_fit(samples: &[(usize, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(t, g)| t > 0 && g > 0.0 && g.is_finite())
        .map(|&(t, g)| ((t as f64).ln(), g.ln()))
        .collect();
    if pts.len() < 20 {
        return Err(Error::TooFewPoints { min: 20, got: pts.len() });
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::TooFewPoints { min: 20, got: 1 });
    }
    let slope = sxy / sxx;
    Ok(DecayFit {
        slope,
        intercept: my - slope * mx,
        points: pts.len(),
        consistent: slope <= -0.4,
    })
}

/// Fits a running-minimum gap curve (entry `t - 1` for iteration `t`) at
/// roughly log-spaced iterations.
pub fn decay_fit_curve(curve: &[f64]) -> Result<DecayFit> {
    let len = curve.len();
    let mut ts: Vec<usize> = (0..DECAY_SAMPLES)
        .map(|k| {
            let e = k as f64 / (DECAY_SAMPLES - 1) as f64;
            ((len as f64).powf(e).round() as usize).clamp(1, len.max(1))
        })
        .collect();
    ts.dedup();
    let samples: Vec<(usize, f64)> = ts
        .into_iter()
        .filter(|&t| t <= len)
        .map(|t| (t, curve[t - 1]))
        .collect();
    decay_fit(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::SimplexPoint;
    use crate::solvers::{run, run_with, SolverVariant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> SimilarityMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v: f64 = rng.random();
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        SimilarityMatrix::new(rows).unwrap()
    }

    #[test]
    fn fresh_state_is_consistent() {
        let a = random_matrix(10, 1);
        let s = SolverState::new(&a, SimplexPoint::barycenter(10)).unwrap();
        let rep = check_state(&s, &a).unwrap();
        assert_eq!(rep.r_deviation, 0.0);
        assert_eq!(rep.f_deviation, 0.0);
        assert!(rep.consistent(s.f()));
    }

    #[test]
    fn corrupted_cache_is_flagged() {
        let a = random_matrix(6, 2);
        let s = SolverState::new(&a, SimplexPoint::barycenter(6)).unwrap();
        let mut r = s.r().to_vec();
        r[3] += 1e-6;
        let bad = SolverState::from_parts(s.x().clone(), r, s.f(), 0);
        let rep = check_state(&bad, &a).unwrap();
        assert!((rep.r_deviation - 1e-6).abs() < 1e-12);
        assert!(!rep.consistent(bad.f()));
    }

    #[test]
    fn long_fw_run_stays_consistent() {
        let a = random_matrix(128, 3);
        let mut worst = 0.0f64;
        run_with(&a, &SolverVariant::FW.config(1000), |s, _| {
            let rep = check_state(s, &a).unwrap();
            assert!(rep.consistent(s.f()));
            worst = worst.max(rep.r_deviation);
        })
        .unwrap();
        assert!(worst <= 1e-8);
    }

    #[test]
    fn two_by_two_identity() {
        let a = SimilarityMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let out = run(&a, &SolverVariant::FW.config(10)).unwrap();
        let rec = &out.trace[0];
        assert_eq!(rec.kind, StepKind::FwGood);
        assert_eq!(rec.gamma, 0.5);
        assert_eq!(rec.delta_f(), 0.5);
        assert_eq!(predicted_progress(rec), Some(0.5));
        let rep = check_progress(&out.trace, 1.0).unwrap();
        assert_eq!(rep.checked, 1);
    }

    #[test]
    fn identities_hold_on_random_runs() {
        for seed in 0..6 {
            let a = random_matrix(40, 10 + seed);
            let (_, m_max) = a.offdiag_extremes().unwrap();
            for v in SolverVariant::ALL {
                let out = run(&a, &v.config(300)).unwrap();
                let rep = check_progress(&out.trace, m_max).unwrap();
                if v.kind == SolverKind::Rd {
                    assert_eq!(rep.checked, 0);
                } else {
                    assert!(rep.checked > 0, "{v}");
                }
            }
        }
    }

    #[test]
    fn drop_steps_are_skipped_and_tampering_detected() {
        let a = random_matrix(30, 4);
        let (_, m_max) = a.offdiag_extremes().unwrap();
        let out = run(&a, &SolverVariant::AFW_B.config(300)).unwrap();
        let drops = out.trace.iter().filter(|r| r.kind == StepKind::Drop).count();
        assert!(drops > 0);
        let rep = check_progress(&out.trace, m_max).unwrap();
        assert_eq!(rep.skipped, drops);

        let mut bad = out.trace.clone();
        let k = bad.iter().position(|r| r.kind.is_good()).unwrap();
        bad[k].f_after += 1e-3;
        assert!(matches!(
            check_progress(&bad, m_max),
            Err(Error::IdentityViolated { t, .. }) if t == bad[k].t
        ));
    }

    #[test]
    fn taxonomy_and_drop_count() {
        for seed in 0..8 {
            let a = random_matrix(24, 30 + seed);
            let fw = run(&a, &SolverVariant::FW.config(400)).unwrap();
            assert!(fw.trace.iter().all(|r| r.kind == StepKind::FwGood));
            for v in [SolverVariant::AFW_B, SolverVariant::AFW_V] {
                let out = run(&a, &v.config(400)).unwrap();
                assert!(out.trace.iter().all(|r| r.kind != StepKind::Swap));
                let rep = theorem_bound(&out.trace, SolverKind::Afw, 1.0, 0.0, 24, out.support0).unwrap();
                assert_eq!(rep.good_steps + rep.drop_steps + rep.swap_steps, rep.t);
                assert!(2 * rep.drop_steps <= out.support0 - 1 + rep.t);
                assert!(2 * rep.good_steps + 1 >= rep.t + 1 - out.support0.min(rep.t + 1));
            }
        }
    }

    #[test]
    fn fw_and_afw_bounds_on_random_instances() {
        for seed in 0..5 {
            let a = random_matrix(16, 50 + seed);
            let (m_min, m_max) = a.offdiag_extremes().unwrap();
            let out = run(&a, &SolverVariant::FW.config(500)).unwrap();
            let rep = theorem_bound(&out.trace, SolverKind::Fw, m_max, m_min, 16, out.support0).unwrap();
            assert!(rep.satisfied, "{rep:?}");
            assert!(rep.min_gap <= rep.lemma_bound);
            let out = run(&a, &SolverVariant::AFW_B.config(500)).unwrap();
            let rep = theorem_bound(&out.trace, SolverKind::Afw, m_max, m_min, 16, out.support0).unwrap();
            assert!(rep.satisfied, "{rep:?}");
        }
    }

    #[test]
    fn pfw_bound_small_n() {
        let a = random_matrix(4, 77);
        let (m_min, m_max) = a.offdiag_extremes().unwrap();
        let out = run(&a, &SolverVariant::PFW_B.config(200)).unwrap();
        let rep = theorem_bound(&out.trace, SolverKind::Pfw, m_max, m_min, 4, out.support0).unwrap();
        let t = out.trace.len() as f64;
        let expect = 2.0 * (6.0 * 24.0 * m_max * rep.gain / t).sqrt();
        assert!((rep.bound_value - expect).abs() <= 1e-12 * expect);
        assert_eq!(rep.beta, 2.0 * m_max);
        assert!(rep.satisfied);
    }

    #[test]
    fn ln_factorial_matches_product() {
        let exact: f64 = (1..=10).map(|k| k as f64).product();
        assert!((ln_factorial(10) - exact.ln()).abs() < 1e-12);
        assert_eq!(ln_factorial(0), 0.0);
        assert!(ln_factorial(1000).is_finite());
    }

    #[test]
    fn min_gap_examples() {
        assert_eq!(min_gap(&[]), Err(Error::EmptyTrace));
        let a = random_matrix(20, 5);
        let out = run(&a, &SolverVariant::PFW_V.config(2000)).unwrap();
        let g = min_gap(&out.trace).unwrap();
        assert!(g <= out.trace[0].gap);
        let curve = min_gap_curve(&out.trace);
        assert_eq!(*curve.last().unwrap(), g);
        assert!(curve.windows(2).all(|w| w[1] <= w[0]));
        if out.stop_reason == crate::solvers::StopReason::GapReached {
            // The final iterate's gap is below 2 eps but not recorded; the last recorded one is the step into it.
            assert!(out.trace.len() < 2000);
        }
    }

    #[test]
    fn decay_fit_examples() {
        let samples: Vec<(usize, f64)> = (1..=50).map(|t| (t * 7, 3.0 / ((t * 7) as f64).sqrt())).collect();
        let fit = decay_fit(&samples).unwrap();
        assert!((fit.slope + 0.5).abs() < 0.01);
        assert!(fit.consistent);
        let flat: Vec<(usize, f64)> = (1..=30).map(|t| (t, 0.2)).collect();
        let fit = decay_fit(&flat).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(!fit.consistent);
        assert_eq!(decay_fit(&samples[..10]), Err(Error::TooFewPoints { min: 20, got: 10 }));

        let curve: Vec<f64> = (1..=2000).map(|t| 1.0 / (t as f64).sqrt()).collect();
        assert!((decay_fit_curve(&curve).unwrap().slope + 0.5).abs() < 1e-9);
    }
}
