use dcepcc_core::model::{ClassifierHead, ConicHead, Dense, FeatureNet};
use proptest::prelude::*;

fn head(classes: usize, dim: usize, raw: &[f64]) -> ConicHead {
    let n = classes * dim;
    let w = raw[..n].to_vec();
    let gamma = raw[n..2 * n].iter().map(|v| -v.abs() - 0.1).collect();
    let b = raw[2 * n..2 * n + classes].to_vec();
    let centers = raw[2 * n + classes..3 * n + classes].to_vec();
    ConicHead::from_parts(classes, dim, w, gamma, b, centers, false).unwrap()
}

fn head_strategy() -> impl Strategy<Value = (ConicHead, Vec<f64>)> {
    (2usize..5, 1usize..6).prop_flat_map(|(c, d)| {
        (prop::collection::vec(-2.0..2.0f64, 3 * c * d + c), prop::collection::vec(-4.0..4.0f64, d))
            .prop_map(move |(raw, f)| (head(c, d, &raw), f))
    })
}

proptest! {
    #[test]
    fn score_is_negated_region_value((h, f) in head_strategy()) {
        for c in 0..h.num_classes() {
            let g = h.score(c, &f);
            let r = h.region(c).eval(&f).unwrap();
            prop_assert!((g + r).abs() <= 1e-12 * (1.0 + g.abs()));
        }
    }

    #[test]
    fn shifting_features_and_centers_leaves_scores((h, f) in head_strategy(), shift in -5.0..5.0f64) {
        let mut moved = h.clone();
        for c in 0..h.num_classes() {
            moved.center_mut(c).iter_mut().for_each(|s| *s += shift);
        }
        let g: Vec<f64> = f.iter().map(|v| v + shift).collect();
        for c in 0..h.num_classes() {
            prop_assert!((h.score(c, &f) - moved.score(c, &g)).abs() < 1e-9);
        }
    }

    #[test]
    fn common_offset_keeps_the_argmax((h, f) in head_strategy(), k in -10.0..10.0f64) {
        let mut moved = h.clone();
        for c in 0..h.num_classes() {
            *moved.offset_mut(c) += k;
        }
        let before = h.scores(&f).unwrap();
        let after = moved.scores(&f).unwrap();
        // skip near-ties, where rounding of the shift could reorder
        let mut sorted = before.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(sorted[0] - sorted[1] > 1e-9);
        prop_assert_eq!(h.predict(&f).unwrap(), moved.predict(&f).unwrap());
        for (a, b) in before.iter().zip(&after) {
            prop_assert!((b - a - k).abs() < 1e-9);
        }
    }

    #[test]
    fn nonnegative_rectifier_net_is_monotone(
        w1 in prop::collection::vec(0.0..1.0f64, 12),
        w2 in prop::collection::vec(0.0..1.0f64, 8),
        x in prop::collection::vec(0.0..3.0f64, 3),
        axis in 0usize..3,
        step in 0.0..2.0f64,
    ) {
        let net = FeatureNet::from_layers(vec![
            Dense::new(3, 4, w1, vec![0.0; 4]).unwrap(),
            Dense::new(4, 2, w2, vec![0.0; 2]).unwrap(),
        ]).unwrap();
        let mut y = x.clone();
        y[axis] += step;
        let (fx, fy) = (net.features(&x).unwrap(), net.features(&y).unwrap());
        for (a, b) in fx.iter().zip(&fy) {
            prop_assert!(b >= a);
        }
    }
}
