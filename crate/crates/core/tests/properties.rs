//! Property tests for the invariants that hold across the whole input space.

use bdstate_core::features::{summarize_bd10, LldSeries};
use bdstate_core::fusion::{blend_pair, blend_three, sample_dirichlet};
use bdstate_core::kelm::scores_to_probs;
use bdstate_core::preprocess::l2_rows;
use bdstate_core::types::{ClassSet, FeatureMatrix, ProbMatrix};
use bdstate_core::eval::uar_of_labels;
use ndarray::Array2;
use proptest::prelude::*;

fn contour() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, 2..60)
}

fn series_of(values: &[f64]) -> LldSeries {
    let frames = Array2::from_shape_fn((values.len(), 1), |(i, _)| values[i]);
    LldSeries::new(frames, vec!["v".into()], "p".into(), None).unwrap()
}

fn functional(values: &[f64], name: &str) -> f64 {
    let fv = summarize_bd10(&series_of(values)).unwrap();
    fv.values[fv.names.iter().position(|n| n == &format!("v_{name}")).unwrap()]
}

proptest! {
    #[test]
    fn reversing_frames_negates_slope_and_mirrors_relpos(values in contour()) {
        let mut reversed = values.clone();
        reversed.reverse();

        let slope = functional(&values, "slope");
        let slope_rev = functional(&reversed, "slope");
        prop_assert!((slope + slope_rev).abs() < 1e-9 * (1.0 + slope.abs()));

        // Relative positions mirror only when the extrema are unique.
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let unique_min = values.iter().filter(|&&v| v == min).count() == 1;
        let unique_max = values.iter().filter(|&&v| v == max).count() == 1;
        if unique_min && unique_max {
            let f = values.len() as f64;
            let tol = 1e-12 * f;
            prop_assert!((functional(&values, "min_relpos") - (1.0 - functional(&reversed, "min_relpos"))).abs() < tol);
            prop_assert!((functional(&values, "max_relpos") - (1.0 - functional(&reversed, "max_relpos"))).abs() < tol);
        }
    }

    #[test]
    fn bd10_mean_invariant_under_reversal(values in contour()) {
        let mut reversed = values.clone();
        reversed.reverse();
        let m = functional(&values, "mean");
        let mr = functional(&reversed, "mean");
        prop_assert!((m - mr).abs() < 1e-9 * (1.0 + m.abs()));
        prop_assert!((functional(&values, "range") - functional(&reversed, "range")).abs() < 1e-12);
    }

    #[test]
    fn l2_rows_idempotent(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 4), 1..8)) {
        let n = rows.len();
        let values = Array2::from_shape_fn((n, 4), |(i, j)| rows[i][j]);
        let m = FeatureMatrix::from_values(values).unwrap();
        let once = l2_rows(&m);
        let twice = l2_rows(&once);
        for (a, b) in once.values().iter().zip(twice.values().iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_are_simplex_and_argmax_stable(
        scores in prop::collection::vec(prop::collection::vec(-30.0f64..30.0, 3), 1..10),
    ) {
        let n = scores.len();
        let raw = Array2::from_shape_fn((n, 3), |(i, j)| scores[i][j]);
        let p = scores_to_probs(&raw).unwrap();
        for (i, row) in p.values().rows().into_iter().enumerate() {
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            let raw_best = raw.row(i).iter().cloned().enumerate()
                .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap()).unwrap().0;
            let p_best = row.iter().cloned().enumerate()
                .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap()).unwrap().0;
            prop_assert_eq!(raw_best, p_best);
        }
    }

    #[test]
    fn blends_preserve_the_simplex(
        seed in 0u64..500,
        alpha in 0.0f64..=1.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..6usize);
        let mut random_probs = || {
            let scores = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>() * 8.0 - 4.0);
            scores_to_probs(&scores).unwrap()
        };
        let p1 = random_probs();
        let p2 = random_probs();
        let p3 = random_probs();
        let two = blend_pair(&p1, &p2, alpha).unwrap();
        let w = sample_dirichlet(1, seed)[0];
        let three = blend_three(&p1, &p2, &p3, &w).unwrap();
        for p in [two, three] {
            for row in p.values().rows() {
                let sum: f64 = row.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(row.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn blend_of_identical_matrices_is_identity(
        seed in 0u64..200,
        alpha in 0.0f64..=1.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let scores = Array2::from_shape_fn((4, 3), |_| rng.random::<f64>() * 6.0 - 3.0);
        let p = scores_to_probs(&scores).unwrap();
        let blend = blend_pair(&p, &p, alpha).unwrap();
        for (a, b) in blend.values().iter().zip(p.values().iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn uar_invariant_under_class_permutation(
        labels in prop::collection::vec(0usize..3, 9..40),
        preds in prop::collection::vec(0usize..3, 9..40),
        perm_choice in 0usize..6,
    ) {
        let n = labels.len().min(preds.len());
        let truth = &labels[..n];
        let pred = &preds[..n];
        // Every class must appear among the true labels for UAR to exist.
        prop_assume!((0..3).all(|c| truth.contains(&c)));
        let classes = ClassSet::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let base = uar_of_labels(truth, pred, &classes).unwrap();
        let perms = [[0usize, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let p = perms[perm_choice];
        let truth_p: Vec<usize> = truth.iter().map(|&l| p[l]).collect();
        let pred_p: Vec<usize> = pred.iter().map(|&l| p[l]).collect();
        let permuted = uar_of_labels(&truth_p, &pred_p, &classes).unwrap();
        prop_assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn prob_matrix_rejects_tampered_rows(row in prop::collection::vec(0.0f64..1.0, 3)) {
        let sum: f64 = row.iter().sum();
        prop_assume!(sum > 1e-6);
        let normalized: Vec<f64> = row.iter().map(|v| v / sum).collect();
        let good = Array2::from_shape_fn((1, 3), |(_, j)| normalized[j]);
        prop_assert!(ProbMatrix::new(good).is_ok());
        let bad = Array2::from_shape_fn((1, 3), |(_, j)| normalized[j] + 0.01);
        prop_assert!(ProbMatrix::new(bad).is_err());
    }
}
