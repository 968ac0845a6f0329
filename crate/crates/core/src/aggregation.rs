//! Chief-side aggregation: weighted FedAvg and the Byzantine-robust
//! Krum, geometric median and Bulyan rules.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::model::{squared_distance, ParamVector};

/// Distance below which a Weiszfeld iterate is treated as sitting on an input.
const COINCIDENCE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AggregationRule {
    FedAvg,
    /// `m` is the assumed number of Byzantine workers.
    Krum { m: usize },
    GeoMed { tol: f64, max_iter: usize },
    Bulyan { m: usize },
}

impl AggregationRule {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FedAvg => "fedavg",
            Self::Krum { .. } => "krum",
            Self::GeoMed { .. } => "geomed",
            Self::Bulyan { .. } => "bulyan",
        }
    }

    pub fn is_robust(&self) -> bool {
        !matches!(self, Self::FedAvg)
    }

    /// Combines updates into one step. Only FedAvg uses the weights.
    pub fn aggregate(&self, deltas: &[ParamVector], alphas: &[f64]) -> Result<ParamVector> {
        match *self {
            Self::FedAvg => fedavg(deltas, alphas),
            Self::Krum { m } => krum(deltas, m).map(|k| k.chosen),
            Self::GeoMed { tol, max_iter } => geomed(deltas, tol, max_iter),
            Self::Bulyan { m } => bulyan(deltas, m),
        }
    }
}

fn check_dims(vectors: &[ParamVector]) -> Result<usize> {
    let d = vectors.first().map_or(0, |v| v.len());
    for v in vectors {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: v.len(),
            });
        }
    }
    Ok(d)
}

/// `sum_i alphas[i] * deltas[i]`, with the weights summing to one.
pub fn fedavg(deltas: &[ParamVector], alphas: &[f64]) -> Result<ParamVector> {
    if deltas.is_empty() {
        return Err(Error::Precondition("fedavg needs at least one update".into()));
    }
    if deltas.len() != alphas.len() {
        return Err(Error::DimensionMismatch {
            expected: deltas.len(),
            actual: alphas.len(),
        });
    }
    let d = check_dims(deltas)?;
    let total: f64 = alphas.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::WeightSum(total));
    }
    let mut out = ParamVector::zeros(d);
    for (delta, &alpha) in deltas.iter().zip(alphas) {
        out.add_scaled(alpha, delta);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KrumSelection {
    pub chosen: ParamVector,
    pub chosen_index: usize,
    pub scores: Vec<f64>,
}

/// Sum of squared distances from each vector to its `neighbours` nearest
/// others. Distances are summed in ascending order so the score does not
/// depend on input order.
fn krum_scores(vectors: &[&ParamVector], neighbours: usize) -> Vec<f64> {
    let n = vectors.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(vectors[i], vectors[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[i * n + j]).collect();
            row.sort_by(f64::total_cmp);
            row.iter().take(neighbours).sum()
        })
        .collect()
}

/// Lowest score wins; ties go to the lower index.
fn lowest_score(scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] < scores[best] {
            best = i;
        }
    }
    best
}

/// Like [`lowest_score`], but equal scores fall back to lexicographic order
/// of the vectors, so equal-score points resolve the same way under any
/// permutation of the input.
fn lowest_score_then_lexicographic(vectors: &[&ParamVector], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..vectors.len() {
        let ord = scores[i]
            .total_cmp(&scores[best])
            .then_with(|| lexicographic(vectors[i], vectors[best]));
        if ord == Ordering::Less {
            best = i;
        }
    }
    best
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Picks the vector whose `n - m - 2` nearest neighbours are closest.
pub fn krum(vectors: &[ParamVector], m: usize) -> Result<KrumSelection> {
    let n = vectors.len();
    if n < 2 * m + 3 {
        return Err(Error::Precondition(format!(
            "krum needs n >= 2m + 3, got n = {n}, m = {m}"
        )));
    }
    check_dims(vectors)?;
    let refs: Vec<&ParamVector> = vectors.iter().collect();
    let scores = krum_scores(&refs, n - m - 2);
    let chosen_index = lowest_score(&scores);
    Ok(KrumSelection {
        chosen: vectors[chosen_index].clone(),
        chosen_index,
        scores,
    })
}

/// Weiszfeld iteration for the geometric median, started at the mean.
pub fn geomed(vectors: &[ParamVector], tol: f64, max_iter: usize) -> Result<ParamVector> {
    if vectors.is_empty() {
        return Err(Error::Precondition("geomed needs at least one vector".into()));
    }
    let d = check_dims(vectors)?;
    let n = vectors.len() as f64;
    let mut x = ParamVector::zeros(d);
    for v in vectors {
        x.add_scaled(1.0 / n, v);
    }
    let mut next = vec![0.0; d];
    for _ in 0..max_iter {
        let mut weight_sum = 0.0;
        next.iter_mut().for_each(|v| *v = 0.0);
        for v in vectors {
            let dist = squared_distance(&x, v).sqrt();
            if dist < COINCIDENCE_EPS {
                return Ok(v.clone());
            }
            let w = 1.0 / dist;
            weight_sum += w;
            for (acc, &vi) in next.iter_mut().zip(v.iter()) {
                *acc += w * vi;
            }
        }
        next.iter_mut().for_each(|v| *v /= weight_sum);
        let step = squared_distance(&x, &next).sqrt();
        x.copy_from_slice(&next);
        if step < tol {
            break;
        }
    }
    Ok(x)
}

/// Objective minimized by [`geomed`]: the sum of Euclidean distances.
pub fn geomed_objective(point: &[f64], vectors: &[ParamVector]) -> f64 {
    vectors.iter().map(|v| squared_distance(point, v).sqrt()).sum()
}

/// Iterated Krum selection of `n - 2m` vectors, then a per-coordinate mean of
/// the `n - 4m` selected values closest to the coordinate's lower median.
pub fn bulyan(vectors: &[ParamVector], m: usize) -> Result<ParamVector> {
    let n = vectors.len();
    if n < 4 * m + 3 {
        return Err(Error::Precondition(format!(
            "bulyan needs n >= 4m + 3, got n = {n}, m = {m}"
        )));
    }
    let d = check_dims(vectors)?;

    let mut remaining: Vec<&ParamVector> = vectors.iter().collect();
    let mut selection: Vec<&ParamVector> = Vec::with_capacity(n - 2 * m);
    while selection.len() < n - 2 * m {
        // Late rounds shrink below Krum's own bound; keep at least one neighbour.
        let neighbours = remaining.len().saturating_sub(m + 2).max(1);
        let idx = if remaining.len() == 1 {
            0
        } else {
            lowest_score_then_lexicographic(&remaining, &krum_scores(&remaining, neighbours))
        };
        selection.push(remaining.remove(idx));
    }

    let keep = n - 4 * m;
    let mut column = vec![0.0; selection.len()];
    let out = (0..d)
        .map(|c| {
            for (slot, v) in column.iter_mut().zip(&selection) {
                *slot = v[c];
            }
            column.sort_by(f64::total_cmp);
            let median = column[(column.len() - 1) / 2];
            let mut by_closeness = column.clone();
            by_closeness.sort_by(|a, b| {
                (a - median)
                    .abs()
                    .total_cmp(&(b - median).abs())
                    .then_with(|| a.total_cmp(b))
            });
            let mut chosen = by_closeness[..keep].to_vec();
            chosen.sort_by(f64::total_cmp);
            chosen.iter().sum::<f64>() / keep as f64
        })
        .collect();
    Ok(ParamVector::new(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec())
    }

    #[test]
    fn fedavg_hand_cases() {
        let v = pv(&[1.5, -2.0]);
        assert_eq!(fedavg(std::slice::from_ref(&v), &[1.0]).unwrap(), v);
        let neg = pv(&[-1.5, 2.0]);
        assert_eq!(fedavg(&[v, neg], &[0.5, 0.5]).unwrap(), pv(&[0.0, 0.0]));
        assert_eq!(
            fedavg(&[pv(&[1.0, 0.0]), pv(&[0.0, 1.0])], &[0.25, 0.75]).unwrap(),
            pv(&[0.25, 0.75])
        );
    }

    #[test]
    fn fedavg_errors() {
        assert!(matches!(
            fedavg(&[pv(&[1.0]), pv(&[2.0])], &[0.5, 0.6]),
            Err(Error::WeightSum(_))
        ));
        assert!(matches!(
            fedavg(&[pv(&[1.0]), pv(&[2.0, 3.0])], &[0.5, 0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(fedavg(&[pv(&[1.0])], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn krum_three_points() {
        let k = krum(&[pv(&[0.0]), pv(&[0.0]), pv(&[10.0])], 0).unwrap();
        assert_eq!(k.scores, vec![0.0, 0.0, 100.0]);
        assert_eq!(k.chosen_index, 0);
        // A tie between distinct points also goes to the lower index.
        let k = krum(&[pv(&[20.0]), pv(&[5.0]), pv(&[4.0])], 0).unwrap();
        assert_eq!((k.chosen_index, k.chosen[0]), (1, 5.0));
    }

    #[test]
    fn krum_identical_inputs() {
        let v = pv(&[1.0, 2.0]);
        let k = krum(&vec![v.clone(); 5], 1).unwrap();
        assert_eq!(k.chosen_index, 0);
        assert_eq!(k.chosen, v);
        assert!(k.scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn krum_precondition() {
        assert!(matches!(krum(&vec![pv(&[0.0]); 4], 1), Err(Error::Precondition(_))));
        assert!(krum(&vec![pv(&[0.0]); 5], 1).is_ok());
    }

    #[test]
    fn krum_translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let vs: Vec<ParamVector> = (0..7)
                .map(|_| pv(&[rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]))
                .collect();
            // Power-of-two shifts keep the differences exact.
            let c = [8.0, -4.0];
            let shifted: Vec<ParamVector> = vs.iter().map(|v| pv(&[v[0] + c[0], v[1] + c[1]])).collect();
            let a = krum(&vs, 2).unwrap();
            let b = krum(&shifted, 2).unwrap();
            assert_eq!(a.chosen_index, b.chosen_index);
            assert_eq!(b.chosen, pv(&[a.chosen[0] + c[0], a.chosen[1] + c[1]]));
        }
    }

    #[test]
    fn geomed_single_and_one_dimensional() {
        let v = pv(&[3.0, -1.0]);
        assert_eq!(geomed(std::slice::from_ref(&v), 1e-8, 1000).unwrap(), v);
        let g = geomed(&[pv(&[0.0]), pv(&[1.0]), pv(&[100.0])], 1e-8, 1000).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-8, "{}", g[0]);
    }

    #[test]
    fn geomed_equilateral_triangle_is_centroid() {
        let h = 3f64.sqrt() / 2.0;
        let pts = [pv(&[0.0, 0.0]), pv(&[1.0, 0.0]), pv(&[0.5, h])];
        let g = geomed(&pts, 1e-8, 1000).unwrap();
        assert!((g[0] - 0.5).abs() < 1e-6);
        assert!((g[1] - h / 3.0).abs() < 1e-6);
    }

    #[test]
    fn geomed_returns_coincident_input() {
        // The mean of these lands exactly on the middle point.
        let pts = [pv(&[-1.0, 0.0]), pv(&[0.0, 0.0]), pv(&[1.0, 0.0])];
        assert_eq!(geomed(&pts, 1e-8, 1000).unwrap(), pv(&[0.0, 0.0]));
    }

    #[test]
    fn geomed_beats_inputs_and_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..30 {
            let vs: Vec<ParamVector> = (0..6)
                .map(|_| pv(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]))
                .collect();
            let g = geomed(&vs, 1e-10, 5000).unwrap();
            let obj = geomed_objective(&g, &vs);
            let mean: Vec<f64> = (0..3).map(|c| vs.iter().map(|v| v[c]).sum::<f64>() / 6.0).collect();
            assert!(obj <= geomed_objective(&mean, &vs) + 1e-8);
            for v in &vs {
                assert!(obj <= geomed_objective(v, &vs) + 1e-8);
            }
        }
    }

    #[test]
    fn bulyan_m_zero_is_mean() {
        let vs = [pv(&[1.0, 4.0]), pv(&[2.0, -4.0]), pv(&[6.0, 3.0])];
        let b = bulyan(&vs, 0).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-12);
        assert!((b[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bulyan_identical_inputs() {
        let v = pv(&[0.3, -7.0, 2.0]);
        assert_eq!(bulyan(&vec![v.clone(); 7], 1).unwrap(), v);
    }

    #[test]
    fn bulyan_drops_outlier() {
        let mut vs = vec![pv(&[0.0]); 6];
        vs.push(pv(&[1000.0]));
        assert_eq!(bulyan(&vs, 1).unwrap(), pv(&[0.0]));
        vs.rotate_right(1);
        assert_eq!(bulyan(&vs, 1).unwrap(), pv(&[0.0]));
    }

    #[test]
    fn bulyan_precondition() {
        assert!(matches!(bulyan(&vec![pv(&[0.0]); 6], 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn rule_dispatch() {
        let vs = vec![pv(&[0.0]), pv(&[1.0]), pv(&[2.0])];
        let alphas = [1.0 / 3.0; 3];
        assert!((AggregationRule::FedAvg.aggregate(&vs, &alphas).unwrap()[0] - 1.0).abs() < 1e-12);
        let four = vec![pv(&[0.0]), pv(&[1.0]), pv(&[2.0]), pv(&[10.0])];
        assert_eq!(AggregationRule::Krum { m: 0 }.aggregate(&four, &[0.25; 4]).unwrap(), pv(&[1.0]));
        assert!(AggregationRule::GeoMed { tol: 1e-10, max_iter: 100 }.is_robust());
    }

    fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, u64)> {
        (3usize..=9, 1usize..=4).prop_flat_map(|(n, d)| {
            (
                proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, d), n),
                any::<u64>(),
            )
        })
    }

    proptest! {
        #[test]
        fn fedavg_is_linear(vs in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 1..6), a in -4.0f64..4.0) {
            let n = vs.len();
            let alphas = vec![1.0 / n as f64; n];
            let deltas: Vec<ParamVector> = vs.iter().map(|v| pv(v)).collect();
            let scaled: Vec<ParamVector> = vs.iter().map(|v| pv(&v.iter().map(|x| a * x).collect::<Vec<_>>())).collect();
            let base = fedavg(&deltas, &alphas).unwrap();
            let lhs = fedavg(&scaled, &alphas).unwrap();
            for (l, b) in lhs.iter().zip(base.iter()) {
                prop_assert!((l - a * b).abs() < 1e-9);
            }
        }

        #[test]
        fn robust_rules_are_permutation_invariant((vs, seed) in instance()) {
            let deltas: Vec<ParamVector> = vs.iter().map(|v| pv(v)).collect();
            let mut permuted = deltas.clone();
            permuted.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n = deltas.len();

            let m = (n - 3) / 2;
            let a = krum(&deltas, m).unwrap();
            let b = krum(&permuted, m).unwrap();
            // Distinct points can tie exactly (a mutual nearest pair with one
            // neighbour); the index tie-break then follows input order.
            let best = a.scores.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(b.scores[b.chosen_index], best);
            if a.scores.iter().filter(|&&s| s == best).count() == 1 {
                prop_assert_eq!(&a.chosen, &b.chosen);
            }
            prop_assert!(deltas.contains(&a.chosen));

            let g1 = geomed(&deltas, 1e-10, 2000).unwrap();
            let g2 = geomed(&permuted, 1e-10, 2000).unwrap();
            for (x, y) in g1.iter().zip(g2.iter()) {
                prop_assert!((x - y).abs() < 1e-6);
            }

            let m = (n - 3) / 4;
            let b1 = bulyan(&deltas, m).unwrap();
            let b2 = bulyan(&permuted, m).unwrap();
            for (x, y) in b1.iter().zip(b2.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }

            let alphas = vec![1.0 / n as f64; n];
            let f1 = fedavg(&deltas, &alphas).unwrap();
            let f2 = fedavg(&permuted, &alphas).unwrap();
            for (x, y) in f1.iter().zip(f2.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
