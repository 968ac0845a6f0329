//! Detection quality: confusion counts, precision, recall and F-beta.

use std::collections::BTreeSet;

use crate::adversary::WorkerId;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// Scores the excluded set against the truly malicious set.
pub fn confusion(
    excluded: &BTreeSet<WorkerId>,
    truth_malicious: &BTreeSet<WorkerId>,
    all_workers: &BTreeSet<WorkerId>,
) -> Result<ConfusionCounts> {
    if !excluded.is_subset(all_workers) {
        return Err(Error::InvalidArgument(
            "excluded set contains unknown workers".into(),
        ));
    }
    if !truth_malicious.is_subset(all_workers) {
        return Err(Error::InvalidArgument(
            "malicious set contains unknown workers".into(),
        ));
    }
    let tp = excluded.intersection(truth_malicious).count();
    let fp = excluded.len() - tp;
    let fn_ = truth_malicious.len() - tp;
    Ok(ConfusionCounts {
        tp,
        fp,
        fn_,
        tn: all_workers.len() - tp - fp - fn_,
    })
}

/// `tp / (tp + fp)`, or 0 when nothing was flagged.
pub fn precision(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fp)
}

/// `tp / (tp + fn)`, or 0 when nothing is malicious.
pub fn recall(c: &ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fn_)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Weighted harmonic mean of precision and recall; `beta > 1` favors recall.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionRecord {
    pub round: usize,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
}

impl DetectionRecord {
    pub fn new(round: usize, counts: ConfusionCounts, beta: f64) -> Self {
        let p = precision(&counts);
        let r = recall(&counts);
        Self {
            round,
            counts,
            precision: p,
            recall: r,
            f_beta: f_beta(p, r, beta),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(r: std::ops::Range<usize>) -> BTreeSet<usize> {
        r.collect()
    }

    fn worked_example() -> ConfusionCounts {
        // 22 workers, 0..12 malicious; 8 excluded of which 5 are malicious.
        let excluded: BTreeSet<usize> = [0, 1, 2, 3, 4, 12, 13, 14].into();
        confusion(&excluded, &ids(0..12), &ids(0..22)).unwrap()
    }

    #[test]
    fn eight_flagged_five_true() {
        let c = worked_example();
        assert_eq!(c, ConfusionCounts { tp: 5, fp: 3, fn_: 7, tn: 7 });
        assert_eq!(precision(&c), 5.0 / 8.0);
        assert_eq!(recall(&c), 5.0 / 12.0);
    }

    #[test]
    fn edge_confusions() {
        let all = ids(0..10);
        let truth = ids(0..4);
        let perfect = confusion(&truth, &truth, &all).unwrap();
        assert_eq!((perfect.fp, perfect.fn_), (0, 0));
        assert_eq!((precision(&perfect), recall(&perfect)), (1.0, 1.0));

        let none = confusion(&BTreeSet::new(), &truth, &all).unwrap();
        assert_eq!((none.tp, none.fp, none.fn_), (0, 0, 4));
        assert_eq!(precision(&none), 0.0);

        assert!(confusion(&ids(9..11), &truth, &all).is_err());
        assert!(confusion(&truth, &ids(8..12), &all).is_err());
    }

    #[test]
    fn f_beta_values() {
        // Independent evaluation: 5 * (0.625 * 5/12) / (4 * 0.625 + 5/12)
        let expected: f64 = 5.0 * (0.625 * (5.0 / 12.0)) / (4.0 * 0.625 + 5.0 / 12.0);
        assert!((expected - 0.446429).abs() < 1e-6);
        assert!((f_beta(0.625, 5.0 / 12.0, 2.0) - expected).abs() < 1e-12);
        assert!((f_beta(0.5, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(f_beta(0.0, 0.0, 2.0), 0.0);
    }

    proptest! {
        #[test]
        fn equal_inputs_are_fixed_points(x in 0.0f64..=1.0, beta in 0.0f64..5.0) {
            prop_assert!((f_beta(x, x, beta) - x).abs() < 1e-12);
        }

        #[test]
        fn bounded_by_inputs(p in 0.01f64..=1.0, r in 0.01f64..=1.0, beta in 0.0f64..5.0) {
            let f = f_beta(p, r, beta);
            prop_assert!(f >= p.min(r) - 1e-12 && f <= p.max(r) + 1e-12);
        }

        // F2's sensitivity to recall exceeds its sensitivity to precision
        // exactly when r < 2p; at p = r it is four times larger.
        #[test]
        fn f2_leans_on_recall(p in 0.05f64..0.95, r in 0.05f64..0.95) {
            prop_assume!((r - 2.0 * p).abs() > 1e-3);
            let h = 1e-6;
            let dr = (f_beta(p, r + h, 2.0) - f_beta(p, r - h, 2.0)) / (2.0 * h);
            let dp = (f_beta(p + h, r, 2.0) - f_beta(p - h, r, 2.0)) / (2.0 * h);
            prop_assert_eq!(dr.abs() > dp.abs(), r < 2.0 * p);

            let x = p;
            let dr = (f_beta(x, x + h, 2.0) - f_beta(x, x - h, 2.0)) / (2.0 * h);
            let dp = (f_beta(x + h, x, 2.0) - f_beta(x - h, x, 2.0)) / (2.0 * h);
            prop_assert!((dr / dp - 4.0).abs() < 1e-4);
        }

        #[test]
        fn counts_partition_workers(n in 1usize..30, ex in proptest::collection::btree_set(0usize..30, 0..30), tr in proptest::collection::btree_set(0usize..30, 0..30)) {
            let all = ids(0..n);
            let ex: BTreeSet<usize> = ex.into_iter().filter(|w| *w < n).collect();
            let tr: BTreeSet<usize> = tr.into_iter().filter(|w| *w < n).collect();
            prop_assert_eq!(confusion(&ex, &tr, &all).unwrap().total(), n);
        }
    }
}
