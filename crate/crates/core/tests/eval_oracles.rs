//! Reports, PR curves, and the precision-targeted tuner checked against
//! independent counting oracles on randomized inputs.

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semc_ad::evaluation::{precision_recall, pr_curve, tune_threshold, PrPoint};
use semc_ad::Error;

/// Direct confusion-count pass with the score ≥ threshold rule.
fn point_at(scores: &[f64], labels: &[u8], threshold: f64) -> PrPoint {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let positives = labels.iter().filter(|&&y| y == 1).count() as u64;
    for (&s, &y) in scores.iter().zip(labels) {
        if s >= threshold {
            if y == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    PrPoint {
        threshold,
        precision: tp as f64 / (tp + fp) as f64,
        recall: tp as f64 / positives as f64,
    }
}

/// Scores quantized to a small grid so tie groups actually occur.
fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<u8>) {
    let grid = rng.gen_range(4..=12);
    let mut scores = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let s = rng.gen_range(0..grid) as f64 / grid as f64;
        // better scores are more often anomalous so curves are non-trivial
        labels.push(u8::from(rng.gen_bool(0.15 + 0.6 * s)));
        scores.push(s);
    }
    if !labels.contains(&1) {
        labels[0] = 1;
    }
    (scores, labels)
}

#[test]
fn report_counts_match_a_second_counting_pass() {
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    for _ in 0..20 {
        let n = rng.gen_range(2..=500);
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
        let preds: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let r = precision_recall(&preds, &labels).unwrap();

        let count = |p: bool, y: u8| {
            preds
                .iter()
                .zip(&labels)
                .filter(|&(&pp, &yy)| pp == p && yy == y)
                .count() as u64
        };
        let (tp, fp, tn, fn_) = (count(true, 1), count(true, 0), count(false, 0), count(false, 1));
        assert_eq!(r.true_positives, tp);
        assert_eq!(r.false_positives, fp);
        assert_eq!(r.true_negatives, tn);
        assert_eq!(r.false_negatives, fn_);
        assert_eq!(r.anomaly.support, tp + fn_);
        assert_eq!(r.normal.support, tn + fp);
        let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
        assert_eq!(r.anomaly.precision, ratio(tp, tp + fp));
        assert_eq!(r.anomaly.recall, ratio(tp, tp + fn_));
        assert_eq!(r.normal.precision, ratio(tn, tn + fn_));
        assert_eq!(r.normal.recall, ratio(tn, tn + fp));
    }
}

#[test]
fn curves_match_brute_force_on_20_random_score_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(602);
    for round in 0..20 {
        let n = rng.gen_range(10..=400);
        let (scores, labels) = random_scores(&mut rng, n);
        let curve = pr_curve(&scores, &labels).unwrap();

        let mut thresholds: Vec<f64> = scores.clone();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        assert_eq!(curve.points.len(), thresholds.len(), "round {round}");
        for (point, &threshold) in curve.points.iter().zip(&thresholds) {
            let expected = point_at(&scores, &labels, threshold);
            assert_eq!(point.threshold.to_bits(), expected.threshold.to_bits());
            assert_eq!(point.precision.to_bits(), expected.precision.to_bits());
            assert_eq!(point.recall.to_bits(), expected.recall.to_bits());
        }
        for w in curve.points.windows(2) {
            assert!(w[0].threshold > w[1].threshold);
            assert!(w[0].recall <= w[1].recall, "recall must grow as the threshold drops");
        }
        assert_eq!(curve.points.last().unwrap().recall, 1.0);
    }
}

#[test]
fn tuner_agrees_with_an_exhaustive_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(603);
    let mut achieved = 0;
    for _ in 0..40 {
        let n = rng.gen_range(20..=300);
        let (scores, labels) = random_scores(&mut rng, n);
        let target = [0.4, 0.5, 0.6, 0.75][rng.gen_range(0..4)];

        let mut thresholds: Vec<f64> = scores.clone();
        thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
        thresholds.dedup();
        let mut best: Option<PrPoint> = None;
        for &t in &thresholds {
            let p = point_at(&scores, &labels, t);
            if p.precision < target {
                continue;
            }
            let take = match &best {
                None => true,
                Some(b) => p.recall > b.recall || (p.recall == b.recall && t < b.threshold),
            };
            if take {
                best = Some(p);
            }
        }

        match (tune_threshold(&scores, &labels, target), best) {
            (Ok((threshold, report)), Some(expected)) => {
                achieved += 1;
                assert_eq!(threshold.to_bits(), expected.threshold.to_bits());
                assert_eq!(report.anomaly.precision, Some(expected.precision));
                assert_eq!(report.anomaly.recall, Some(expected.recall));
            }
            (Err(Error::TargetUnachievable { max, .. }), None) => {
                let best_precision = thresholds
                    .iter()
                    .map(|&t| point_at(&scores, &labels, t).precision)
                    .fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(max.to_bits(), best_precision.to_bits());
            }
            (got, want) => panic!("tuner {got:?} disagrees with sweep {want:?}"),
        }
    }
    assert!(achieved >= 10, "too few achievable rounds to be meaningful");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curve_is_invariant_under_row_permutation(
        pairs in prop::collection::vec((0u8..8, 0u8..2), 2..60),
        perm_seed in 0u64..1000,
    ) {
        let mut pairs = pairs;
        if !pairs.iter().any(|&(_, y)| y == 1) {
            pairs[0].1 = 1;
        }
        let scores: Vec<f64> = pairs.iter().map(|&(s, _)| s as f64 / 8.0).collect();
        let labels: Vec<u8> = pairs.iter().map(|&(_, y)| y).collect();
        let curve = pr_curve(&scores, &labels).unwrap();

        let mut shuffled = pairs.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let scores2: Vec<f64> = shuffled.iter().map(|&(s, _)| s as f64 / 8.0).collect();
        let labels2: Vec<u8> = shuffled.iter().map(|&(_, y)| y).collect();
        prop_assert_eq!(curve, pr_curve(&scores2, &labels2).unwrap());
    }

    #[test]
    fn tuned_report_always_meets_its_target(
        pairs in prop::collection::vec((0u8..6, 0u8..2), 5..80),
        target_pct in 30u32..95,
    ) {
        let mut pairs = pairs;
        if !pairs.iter().any(|&(_, y)| y == 1) {
            pairs[0].1 = 1;
        }
        let scores: Vec<f64> = pairs.iter().map(|&(s, _)| s as f64 / 6.0).collect();
        let labels: Vec<u8> = pairs.iter().map(|&(_, y)| y).collect();
        let target = target_pct as f64 / 100.0;
        if let Ok((threshold, report)) = tune_threshold(&scores, &labels, target) {
            let p = report.anomaly.precision.unwrap();
            prop_assert!(p >= target, "precision {} under target {} at {}", p, target, threshold);
        }
    }
}
