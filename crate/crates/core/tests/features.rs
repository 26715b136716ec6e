mod common;

use common::*;
use gnn_markov::operators::simple_rw;
use gnn_markov::oversmoothing::{
    feature_view_inverse, feature_view_transform, node_std_metric, propagate_features, rt_penalty, FeatureMatrix,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn random_features(n: usize, f: usize, seed: u64) -> FeatureMatrix {
    let mut r = rng(seed);
    FeatureMatrix::new(DMatrix::from_fn(n, f, |_, _| r.random_range(-2.0..2.0)), 0).unwrap()
}

#[test]
fn propagation_matches_naive_products() {
    for (name, g) in looped_fixtures() {
        let n = g.node_count();
        let h0 = random_features(n, 3, 5);
        let traj = propagate_features(&simple_rw(&g).unwrap(), &h0, 15).unwrap();
        let mut h = to_dense(h0.values());
        let p = random_walk(&g);
        for layer in traj.layers().iter().skip(1) {
            h = matmul(&p, &h);
            assert!(l1(&to_dense(layer.values()).concat(), &h.concat()) < 1e-12, "{name}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn feature_view_round_trips(n in 3usize..15, f in 1usize..6, seed in 0u64..1000) {
        let (_, g) = connected_er(n, 0.4, seed, true);
        let h = random_features(n, f, seed);
        let back = feature_view_inverse(&g, &feature_view_transform(&g, &h).unwrap()).unwrap();
        prop_assert!((back.values() - h.values()).amax() < 1e-12);
    }

    #[test]
    fn rt_penalty_is_bounded(n in 3usize..10, seed in 0u64..1000, depth in 1usize..8, t in 0.0f64..1.0) {
        let (_, g) = connected_er(n, 0.5, seed, true);
        let traj = propagate_features(&simple_rw(&g).unwrap(), &random_features(n, 2, seed), depth).unwrap();
        let rt = rt_penalty(&traj, t).unwrap();
        // With two features the mean sigmoid gap lies in [0, 2].
        prop_assert!(rt >= 0.0 && rt <= t.max(2.0 - t).powi(2) + 1e-12);
    }

    #[test]
    fn node_std_is_translation_invariant(n in 2usize..12, seed in 0u64..1000, shift in -5.0f64..5.0) {
        let h = random_features(n, 3, seed);
        let shifted = FeatureMatrix::new(h.values().add_scalar(shift), 0).unwrap();
        prop_assert!((node_std_metric(&h).unwrap() - node_std_metric(&shifted).unwrap()).abs() < 1e-9);
    }
}
