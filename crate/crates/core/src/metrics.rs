//! Clustering quality: assignment rate, adjusted Rand index and V-measure.
//!
//! Label 0 means "unassigned". By default ARI and V-measure are computed over
//! the objects with a positive predicted label only.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// How unassigned (label 0) predictions enter ARI and V-measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Unassigned {
    /// Drop objects with predicted label 0.
    #[default]
    Exclude,
    /// Treat label 0 as one more cluster.
    AsCluster,
}

/// Fraction of objects with a positive label.
pub fn assignment_rate(pred: &[usize]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().filter(|&&l| l > 0).count() as f64 / pred.len() as f64
}

pub fn ari(pred: &[usize], truth: &[usize]) -> Result<f64> {
    ari_with(pred, truth, Unassigned::Exclude)
}

pub fn v_measure(pred: &[usize], truth: &[usize]) -> Result<f64> {
    v_measure_with(pred, truth, Unassigned::Exclude)
}

pub fn ari_with(pred: &[usize], truth: &[usize], mode: Unassigned) -> Result<f64> {
    let t = Contingency::build(pred, truth, mode)?;
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let index: f64 = t.cells.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = t.rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = t.cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(t.n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        // Both partitions are all-singletons or all-one-cluster.
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

pub fn v_measure_with(pred: &[usize], truth: &[usize], mode: Unassigned) -> Result<f64> {
    let (h, c) = homogeneity_completeness(pred, truth, mode)?;
    if h + c == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * h * c / (h + c))
}

/// Homogeneity and completeness, with 0/0 taken as 1.
pub fn homogeneity_completeness(
    pred: &[usize],
    truth: &[usize],
    mode: Unassigned,
) -> Result<(f64, f64)> {
    let t = Contingency::build(pred, truth, mode)?;
    let n = t.n as f64;
    let entropy = |m: &HashMap<usize, u64>| -> f64 {
        m.values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let h_pred = entropy(&t.rows);
    let h_truth = entropy(&t.cols);
    let mut h_truth_given_pred = 0.0;
    let mut h_pred_given_truth = 0.0;
    for (&(k, c), &nkc) in &t.cells {
        let nkc = nkc as f64;
        h_truth_given_pred -= nkc / n * (nkc / t.rows[&k] as f64).ln();
        h_pred_given_truth -= nkc / n * (nkc / t.cols[&c] as f64).ln();
    }
    let homogeneity = if h_truth == 0.0 { 1.0 } else { 1.0 - h_truth_given_pred / h_truth };
    let completeness = if h_pred == 0.0 { 1.0 } else { 1.0 - h_pred_given_truth / h_pred };
    Ok((homogeneity.clamp(0.0, 1.0), completeness.clamp(0.0, 1.0)))
}

struct Contingency {
    n: u64,
    /// (pred, truth) -> count
    cells: HashMap<(usize, usize), u64>,
    rows: HashMap<usize, u64>,
    cols: HashMap<usize, u64>,
}

impl Contingency {
    fn build(pred: &[usize], truth: &[usize], mode: Unassigned) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::LengthMismatch {
                pred: pred.len(),
                truth: truth.len(),
            });
        }
        let mut t = Contingency {
            n: 0,
            cells: HashMap::new(),
            rows: HashMap::new(),
            cols: HashMap::new(),
        };
        for (&p, &c) in pred.iter().zip(truth) {
            if p == 0 && mode == Unassigned::Exclude {
                continue;
            }
            t.n += 1;
            *t.cells.entry((p, c)).or_default() += 1;
            *t.rows.entry(p).or_default() += 1;
            *t.cols.entry(c).or_default() += 1;
        }
        if t.n == 0 {
            return Err(Error::EmptyOverlap);
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// ARI from the four pair counts, enumerating every pair of objects.
    fn pair_oracle(pred: &[usize], truth: &[usize]) -> f64 {
        let (mut n11, mut n10, mut n01, mut n00) = (0f64, 0f64, 0f64, 0f64);
        for i in 0..pred.len() {
            for j in (i + 1)..pred.len() {
                match (pred[i] == pred[j], truth[i] == truth[j]) {
                    (true, true) => n11 += 1.0,
                    (true, false) => n10 += 1.0,
                    (false, true) => n01 += 1.0,
                    (false, false) => n00 += 1.0,
                }
            }
        }
        let denom = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
        if denom == 0.0 {
            return 1.0;
        }
        2.0 * (n00 * n11 - n01 * n10) / denom
    }

    /// V-measure from explicit class/cluster probability tables.
    fn entropy_oracle(pred: &[usize], truth: &[usize]) -> f64 {
        let n = pred.len() as f64;
        let kmax = *pred.iter().max().unwrap() + 1;
        let cmax = *truth.iter().max().unwrap() + 1;
        let mut table = vec![vec![0f64; cmax]; kmax];
        for (&k, &c) in pred.iter().zip(truth) {
            table[k][c] += 1.0;
        }
        let pk: Vec<f64> = table.iter().map(|r| r.iter().sum::<f64>()).collect();
        let pc: Vec<f64> = (0..cmax).map(|c| table.iter().map(|r| r[c]).sum()).collect();
        let h = |v: &[f64]| -> f64 {
            v.iter().filter(|&&x| x > 0.0).map(|&x| -(x / n) * (x / n).ln()).sum()
        };
        let (hk, hc) = (h(&pk), h(&pc));
        let mut hc_k = 0.0;
        let mut hk_c = 0.0;
        for k in 0..kmax {
            for c in 0..cmax {
                let v = table[k][c];
                if v > 0.0 {
                    hc_k -= v / n * (v / pk[k]).ln();
                    hk_c -= v / n * (v / pc[c]).ln();
                }
            }
        }
        let hom = if hc == 0.0 { 1.0 } else { 1.0 - hc_k / hc };
        let com = if hk == 0.0 { 1.0 } else { 1.0 - hk_c / hk };
        if hom + com == 0.0 {
            0.0
        } else {
            2.0 * hom * com / (hom + com)
        }
    }

    /// All set partitions of n objects as restricted growth strings, labels from 1.
    fn partitions(n: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = vec![1usize; n];
        fn rec(i: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for l in 1..=max + 1 {
                cur[i] = l;
                rec(i + 1, max.max(l), cur, out);
            }
        }
        if n > 0 {
            rec(1, 1, &mut cur, &mut out);
        }
        out
    }

    #[test]
    fn rate_examples() {
        assert_eq!(assignment_rate(&[1, 1, 2, 2]), 1.0);
        assert_eq!(assignment_rate(&[0, 0, 0, 0]), 0.0);
        assert_eq!(assignment_rate(&[0, 1, 2, 0]), 0.5);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[1, 1, 2, 2], &[3, 3, 7, 7]).unwrap(), 1.0);
        let one = [1; 8];
        let two = [1, 1, 1, 1, 2, 2, 2, 2];
        assert!(ari(&one, &two).unwrap().abs() < 1e-15);
        assert!(pair_oracle(&one, &two).abs() < 1e-15);
        let v = ari(&[1, 1, 2, 2], &[1, 1, 1, 2]).unwrap();
        assert!((v - pair_oracle(&[1, 1, 2, 2], &[1, 1, 1, 2])).abs() < 1e-12);
        // n11=1, n10=1, n01=2, n00=2.
        assert!((v - 2.0 * (2.0 - 2.0) / (4.0 * 3.0 + 3.0 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn v_measure_examples() {
        assert_eq!(v_measure(&[1, 2, 2, 3], &[5, 6, 6, 4]).unwrap(), 1.0);
        let one = [1; 8];
        let two = [1, 1, 1, 1, 2, 2, 2, 2];
        let (h, c) = homogeneity_completeness(&one, &two, Unassigned::Exclude).unwrap();
        assert_eq!(h, 0.0);
        assert_eq!(c, 1.0);
        assert_eq!(v_measure(&one, &two).unwrap(), entropy_oracle(&one, &two));
        let pred = [1, 2, 2, 3, 1];
        let v = v_measure(&pred, &[1; 5]).unwrap();
        let (h, _) = homogeneity_completeness(&pred, &[1; 5], Unassigned::Exclude).unwrap();
        assert_eq!(h, 1.0);
        assert!((v - entropy_oracle(&pred, &[1; 5])).abs() < 1e-12);
    }

    #[test]
    fn errors_and_unassigned_modes() {
        assert_eq!(
            ari(&[1, 2], &[1]).unwrap_err(),
            Error::LengthMismatch { pred: 2, truth: 1 }
        );
        assert_eq!(ari(&[0, 0], &[1, 2]).unwrap_err(), Error::EmptyOverlap);
        assert_eq!(v_measure(&[0, 0], &[1, 2]).unwrap_err(), Error::EmptyOverlap);
        let pred = [1, 1, 0, 2, 2, 0];
        let truth = [1, 1, 1, 2, 2, 2];
        assert_eq!(ari(&pred, &truth).unwrap(), 1.0);
        let with0 = ari_with(&pred, &truth, Unassigned::AsCluster).unwrap();
        assert!((with0 - pair_oracle(&pred, &truth)).abs() < 1e-12);
        assert!(with0 < 1.0);
    }

    #[test]
    fn ari_exhaustive_small() {
        for n in 1..=5 {
            let ps = partitions(n);
            for p in &ps {
                for q in &ps {
                    let got = ari(p, q).unwrap();
                    assert!((got - pair_oracle(p, q)).abs() < 1e-12, "{p:?} {q:?}");
                }
            }
        }
    }

    #[test]
    fn ari_exhaustive_eight() {
        let ps = partitions(8);
        assert_eq!(ps.len(), 4140);
        let truths = [
            vec![1, 1, 1, 1, 1, 1, 1, 1],
            vec![1, 2, 3, 4, 5, 6, 7, 8],
            vec![1, 1, 1, 1, 2, 2, 2, 2],
            vec![1, 1, 2, 2, 3, 3, 4, 4],
            vec![1, 2, 2, 3, 3, 3, 1, 4],
        ];
        for q in &truths {
            for p in &ps {
                let got = ari(p, q).unwrap();
                assert!((got - pair_oracle(p, q)).abs() < 1e-12, "{p:?} {q:?}");
            }
        }
    }

    fn labels(n: usize, k: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1..=k, n)
    }

    proptest! {
        #[test]
        fn v_measure_matches_oracle(p in labels(30, 5), q in labels(30, 4)) {
            let got = v_measure(&p, &q).unwrap();
            prop_assert!((got - entropy_oracle(&p, &q)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&got));
        }

        #[test]
        fn ari_matches_pair_oracle(p in labels(40, 6), q in labels(40, 3)) {
            prop_assert!((ari(&p, &q).unwrap() - pair_oracle(&p, &q)).abs() < 1e-12);
        }

        #[test]
        fn relabeling_invariance(p in labels(25, 4), q in labels(25, 4), shift in 1usize..9) {
            let perm = |l: usize| (l * 7 + shift) % 31 + 1;
            let p2: Vec<usize> = p.iter().map(|&l| perm(l)).collect();
            let q2: Vec<usize> = q.iter().map(|&l| perm(l) + 3).collect();
            prop_assert!((ari(&p, &q).unwrap() - ari(&p2, &q2).unwrap()).abs() < 1e-12);
            prop_assert!((v_measure(&p, &q).unwrap() - v_measure(&p2, &q2).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn self_agreement(p in labels(20, 5)) {
            prop_assert!((ari(&p, &p).unwrap() - 1.0).abs() < 1e-12);
            prop_assert!((v_measure(&p, &p).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
