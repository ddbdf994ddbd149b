use dcepcc_core::data::{make_blobs, Dataset};
use dcepcc_core::evaluation::{
    average_precision, openset_score, roc_auc, run_openset_protocol, HeadKind, ProtocolConfig, ScoreScaler,
};
use dcepcc_core::training::TrainConfig;
use proptest::prelude::*;

/// Pairwise count: P(score_pos > score_neg) + ½ P(tie).
fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (&p, _) in scores.iter().zip(labels).filter(|(_, &l)| l) {
        for (&n, _) in scores.iter().zip(labels).filter(|(_, &l)| !l) {
            pairs += 1.0;
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

fn labeled_scores() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..60).prop_flat_map(|n| {
        (prop::collection::vec(-20i32..20, n), prop::collection::vec(any::<bool>(), n)).prop_map(|(s, mut l)| {
            l[0] = true;
            l[1] = false;
            (s.into_iter().map(|v| v as f64 * 0.25).collect(), l)
        })
    })
}

proptest! {
    #[test]
    fn auc_matches_pair_counting((s, l) in labeled_scores()) {
        prop_assert!((roc_auc(&s, &l).unwrap() - brute_auc(&s, &l)).abs() <= 1e-12);
    }

    #[test]
    fn auc_ignores_monotone_transforms((s, l) in labeled_scores()) {
        let t: Vec<f64> = s.iter().map(|v| (0.3 * v).exp() * 5.0 - 2.0).collect();
        prop_assert_eq!(roc_auc(&s, &l).unwrap(), roc_auc(&t, &l).unwrap());
    }

    #[test]
    fn negated_scores_complement_auc(n in 2usize..50, seed in any::<u64>()) {
        // distinct scores
        let s: Vec<f64> = (0..n).map(|i| ((i as u64).wrapping_mul(seed | 1) % 1_000_003) as f64 + i as f64 * 1e-3).collect();
        let mut l: Vec<bool> = (0..n).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        l[0] = true;
        l[1] = false;
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((roc_auc(&s, &l).unwrap() + roc_auc(&neg, &l).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ap_is_one_iff_positives_lead((s, l) in labeled_scores()) {
        let ap = average_precision(&s, &l).unwrap();
        let min_pos = s.iter().zip(&l).filter(|(_, &p)| p).map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
        let max_neg = s.iter().zip(&l).filter(|(_, &p)| !p).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(ap == 1.0, min_pos > max_neg);
    }

    #[test]
    fn scaling_keeps_each_class_ranking(rows in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 2..20)) {
        let scaler = ScoreScaler::fit(&rows).unwrap();
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| scaler.scale(r).unwrap()).collect();
        for c in 0..3 {
            for (a, b) in rows.iter().zip(&scaled) {
                for (a2, b2) in rows.iter().zip(&scaled) {
                    prop_assert_eq!(a[c] < a2[c], b[c] < b2[c]);
                }
            }
        }
    }
}

#[test]
fn hand_computed_average_precision() {
    // ranks of positives 1, 3 → (1/1 + 2/3) / 2
    let ap = average_precision(&[0.9, 0.8, 0.7, 0.1], &[true, false, true, false]).unwrap();
    assert!((ap - 5.0 / 6.0).abs() < 1e-15);
    assert_eq!(openset_score(&[0.2, -0.4]), -0.2);
}

fn quick_protocol(seed: u64) -> (ProtocolConfig, TrainConfig) {
    let p =
        ProtocolConfig { known: 3, repeats: 2, hidden: vec![16], feature_dim: 4, seed, ..ProtocolConfig::default() };
    (p, TrainConfig { epochs: 20, seed, ..TrainConfig::default() })
}

#[test]
fn protocol_is_deterministic_and_shares_splits() {
    let ds = make_blobs(5, 40, 2, 1.0, 3).unwrap();
    let (p, cfg) = quick_protocol(7);
    let a = run_openset_protocol(&ds, HeadKind::Conic { shared_vertex: false }, &p, &cfg).unwrap();
    let b = run_openset_protocol(&ds, HeadKind::Conic { shared_vertex: false }, &p, &cfg).unwrap();
    let s = run_openset_protocol(&ds, HeadKind::Softmax, &p, &cfg).unwrap();
    assert_eq!(a, b);
    for (x, y) in a.runs.iter().zip(&s.runs) {
        assert_eq!(x.split_hash, y.split_hash);
        assert_eq!(x.split, y.split);
    }
}

#[test]
fn indistinguishable_unknowns_give_chance_auroc() {
    // eight labels over one Gaussian cloud: unknowns look like knowns
    let base = make_blobs(2, 400, 2, 1.0, 5).unwrap();
    let features: Vec<f64> = base.iter().filter(|(_, y)| *y == 0).flat_map(|(x, _)| x.to_vec()).collect();
    let labels: Vec<usize> = (0..400).map(|i| i % 8).collect();
    let ds = Dataset::new(features, 2, labels, 8).unwrap();
    let p = ProtocolConfig { known: 4, repeats: 3, hidden: vec![16], feature_dim: 4, ..ProtocolConfig::default() };
    let cfg = TrainConfig { epochs: 15, ..TrainConfig::default() };
    let r = run_openset_protocol(&ds, HeadKind::Conic { shared_vertex: false }, &p, &cfg).unwrap();
    assert!((r.mean_auroc - 0.5).abs() <= 0.1, "{}", r.mean_auroc);
}

#[test]
fn well_separated_unknowns_are_rejected() {
    let ds = make_blobs(8, 60, 4, 0.3, 2).unwrap();
    let p = ProtocolConfig { known: 5, repeats: 2, hidden: vec![32], feature_dim: 8, ..ProtocolConfig::default() };
    let cfg = TrainConfig { epochs: 40, ..TrainConfig::default() };
    let r = run_openset_protocol(&ds, HeadKind::Conic { shared_vertex: false }, &p, &cfg).unwrap();
    assert!(r.mean_auroc >= 0.9, "{}", r.mean_auroc);
    assert!(r.mean_closed_accuracy >= 0.99);
}
