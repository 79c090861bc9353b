//! Feature selection by Gini importance of an extremely randomized tree
//! ensemble.
//!
//! Each split draws a random subset of ceil(sqrt(k)) candidate features and
//! one uniform-random threshold per candidate, then keeps the candidate with
//! the largest Gini impurity decrease. A feature's importance is its total
//! node-weighted impurity decrease across the ensemble, normalized to sum 1;
//! the selected set is every feature with importance strictly above zero.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

/// Ensemble parameters. `max_depth: None` grows trees until purity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            n_trees: 250,
            max_depth: None,
            min_leaf: 1,
            seed: 42,
        }
    }
}

/// Result of tree-based selection: the retained column indices (strictly
/// increasing) and the full normalized importance vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub kept_indices: Vec<usize>,
    pub importances: Vec<f64>,
}

pub fn tree_feature_select(
    train: &FeatureMatrix,
    labels: &[usize],
    params: &TreeParams,
) -> Result<FeatureSelection> {
    let n = train.nrows();
    let k = train.ncols();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParam("ensemble needs at least one tree".into()));
    }
    if params.min_leaf == 0 {
        return Err(Error::InvalidParam("min_leaf must be at least 1".into()));
    }
    let n_classes = match labels.iter().max() {
        Some(&m) => m + 1,
        None => return Err(Error::EmptyInput("no training rows".into())),
    };
    let distinct = {
        let mut seen = vec![false; n_classes];
        for &l in labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::InvalidParam(
            "tree selection needs at least 2 classes present".into(),
        ));
    }

    let mtry = (k as f64).sqrt().ceil() as usize;
    let mut importances = vec![0.0f64; k];
    for tree in 0..params.n_trees {
        // Independent seed-derived stream per tree, so ensembles could be
        // fitted in any order without changing the result.
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(tree as u64);
        let all: Vec<usize> = (0..n).collect();
        grow_node(
            train,
            labels,
            n_classes,
            &all,
            0,
            params,
            mtry,
            &mut rng,
            &mut importances,
        );
    }

    let total: f64 = importances.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInput(
            "no split produced any impurity decrease".into(),
        ));
    }
    for v in importances.iter_mut() {
        *v /= total;
    }
    let kept_indices: Vec<usize> = (0..k).filter(|&j| importances[j] > 0.0).collect();
    Ok(FeatureSelection {
        kept_indices,
        importances,
    })
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

fn class_counts(labels: &[usize], rows: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; n_classes];
    for &r in rows {
        counts[labels[r]] += 1;
    }
    counts
}

#[allow(clippy::too_many_arguments)]
fn grow_node(
    train: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    rows: &[usize],
    depth: usize,
    params: &TreeParams,
    mtry: usize,
    rng: &mut ChaCha8Rng,
    importances: &mut [f64],
) {
    let counts = class_counts(labels, rows, n_classes);
    let node_gini = gini(&counts, rows.len());
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    let too_small = rows.len() < 2 * params.min_leaf || rows.len() < 2;
    let too_deep = params.max_depth.map_or(false, |d| depth >= d);
    if pure || too_small || too_deep {
        return;
    }

    let k = train.ncols();
    let candidates = sample(rng, k, mtry.min(k));
    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
    for feature in candidates {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in rows {
            let v = train.values()[[r, feature]];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(hi > lo) {
            continue; // constant at this node: no admissible threshold
        }
        let threshold = rng.random_range(lo..hi);
        let mut left = vec![0usize; n_classes];
        let mut n_left = 0usize;
        for &r in rows {
            if train.values()[[r, feature]] < threshold {
                left[labels[r]] += 1;
                n_left += 1;
            }
        }
        let n_right = rows.len() - n_left;
        if n_left < params.min_leaf || n_right < params.min_leaf {
            continue;
        }
        let right: Vec<usize> = counts.iter().zip(&left).map(|(&c, &l)| c - l).collect();
        let frac_left = n_left as f64 / rows.len() as f64;
        let children = frac_left * gini(&left, n_left) + (1.0 - frac_left) * gini(&right, n_right);
        let gain = node_gini - children;
        if best.map_or(true, |(g, _, _)| gain > g) {
            best = Some((gain, feature, threshold));
        }
    }

    let Some((gain, feature, threshold)) = best else {
        return;
    };
    importances[feature] += rows.len() as f64 * gain;

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| train.values()[[r, feature]] < threshold);
    grow_node(
        train, labels, n_classes, &left_rows, depth + 1, params, mtry, rng, importances,
    );
    grow_node(
        train, labels, n_classes, &right_rows, depth + 1, params, mtry, rng, importances,
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn dataset(seed: u64) -> (FeatureMatrix, Vec<usize>) {
        // Feature 0 equals the label; features 1..10 are noise.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let values = Array2::from_shape_fn((n, 10), |(i, j)| {
            if j == 0 {
                labels[i] as f64
            } else {
                rng.random::<f64>() * 4.0 - 2.0
            }
        });
        (FeatureMatrix::from_values(values).unwrap(), labels)
    }

    #[test]
    fn perfect_predictor_dominates_across_seeds() {
        for seed in 0..10u64 {
            let (m, labels) = dataset(seed);
            let params = TreeParams {
                n_trees: 100,
                seed,
                ..TreeParams::default()
            };
            let sel = tree_feature_select(&m, &labels, &params).unwrap();
            let top = sel
                .importances
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            assert_eq!(top, 0, "seed {seed}: importances {:?}", sel.importances);
        }
    }

    #[test]
    fn constant_feature_gets_exactly_zero() {
        let (m, labels) = dataset(1);
        let mut values = m.values().clone();
        values.column_mut(5).fill(3.0);
        let m = FeatureMatrix::from_values(values).unwrap();
        let sel = tree_feature_select(&m, &labels, &TreeParams::default()).unwrap();
        assert_eq!(sel.importances[5], 0.0);
        assert!(!sel.kept_indices.contains(&5));
    }

    #[test]
    fn importances_normalized_and_indices_increasing() {
        let (m, labels) = dataset(2);
        let sel = tree_feature_select(&m, &labels, &TreeParams::default()).unwrap();
        let sum: f64 = sel.importances.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(sel.importances.iter().all(|&v| v >= 0.0));
        assert!(sel.kept_indices.windows(2).all(|w| w[0] < w[1]));
        assert!(!sel.kept_indices.is_empty());
    }

    #[test]
    fn fixed_seed_reproduces_identical_result() {
        let (m, labels) = dataset(3);
        let params = TreeParams { n_trees: 50, ..TreeParams::default() };
        let a = tree_feature_select(&m, &labels, &params).unwrap();
        let b = tree_feature_select(&m, &labels, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_class_is_rejected() {
        let (m, _) = dataset(4);
        let labels = vec![1usize; m.nrows()];
        assert!(tree_feature_select(&m, &labels, &TreeParams::default()).is_err());
    }
}
