//! Metrics and evaluation protocol: UAR, confusion matrices, YMRS label
//! derivation, stratified fold plans, and task-level probability
//! aggregation.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::types::ClassSet;

/// Mood classes derived from the 0-60 mania rating scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoodClass {
    Remission,
    Hypomania,
    Mania,
}

impl MoodClass {
    /// Index into [`ClassSet::moods`].
    pub fn index(&self) -> usize {
        match self {
            MoodClass::Remission => 0,
            MoodClass::Hypomania => 1,
            MoodClass::Mania => 2,
        }
    }
}

/// Maps a YMRS score to its mood class: remission for scores up to 7,
/// mania from 20 upward, hypomania strictly in between.
pub fn ymrs_to_class(y: u32) -> Result<MoodClass> {
    if y > 60 {
        return Err(Error::InvalidParam(format!(
            "YMRS score {y} outside the 0-60 scale"
        )));
    }
    Ok(if y <= 7 {
        MoodClass::Remission
    } else if y < 20 {
        MoodClass::Hypomania
    } else {
        MoodClass::Mania
    })
}

/// Row-per-true-class, column-per-predicted-class count matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub class_labels: Vec<String>,
    /// counts[i][j] = number of samples with true class i predicted as j.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }
}

/// Counts true/predicted label pairs over the declared class set.
pub fn confusion(
    true_labels: &[usize],
    pred_labels: &[usize],
    classes: &ClassSet,
) -> Result<ConfusionMatrix> {
    if true_labels.len() != pred_labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true labels vs {} predictions",
            true_labels.len(),
            pred_labels.len()
        )));
    }
    if true_labels.is_empty() {
        return Err(Error::EmptyInput("no labels to score".into()));
    }
    classes.validate_labels(true_labels)?;
    classes.validate_labels(pred_labels)?;
    let t = classes.len();
    let mut counts = vec![vec![0usize; t]; t];
    for (&y, &p) in true_labels.iter().zip(pred_labels) {
        counts[y][p] += 1;
    }
    Ok(ConfusionMatrix {
        class_labels: classes.names().to_vec(),
        counts,
    })
}

/// Unweighted average recall: the mean of per-class recalls. A class with no
/// true samples makes the recall undefined and is an error.
pub fn uar(cm: &ConfusionMatrix) -> Result<f64> {
    Ok(per_class_recall(cm)?.iter().sum::<f64>() / cm.n_classes() as f64)
}

/// Per-class recall vector in class order.
pub fn per_class_recall(cm: &ConfusionMatrix) -> Result<Vec<f64>> {
    let mut recalls = Vec::with_capacity(cm.n_classes());
    for (i, row) in cm.counts.iter().enumerate() {
        let total: usize = row.iter().sum();
        if total == 0 {
            return Err(Error::EmptyClass {
                class: cm.class_labels[i].clone(),
            });
        }
        recalls.push(row[i] as f64 / total as f64);
    }
    Ok(recalls)
}

/// Convenience: confusion + UAR in one step.
pub fn uar_of_labels(
    true_labels: &[usize],
    pred_labels: &[usize],
    classes: &ClassSet,
) -> Result<f64> {
    uar(&confusion(true_labels, pred_labels, classes)?)
}

/// Disjoint index sets covering a dataset, as produced by [`make_folds`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    folds: Vec<Vec<usize>>,
    seed: u64,
    stratified: bool,
}

impl FoldPlan {
    /// Builds a plan from explicit fold memberships, validating that they
    /// partition `0..N` exactly.
    pub fn from_folds(folds: Vec<Vec<usize>>, seed: u64, stratified: bool) -> Result<Self> {
        let n: usize = folds.iter().map(|f| f.len()).sum();
        let mut seen = vec![false; n];
        for fold in &folds {
            for &idx in fold {
                if idx >= n || seen[idx] {
                    return Err(Error::InvalidParam(
                        "folds must partition the sample indices exactly".into(),
                    ));
                }
                seen[idx] = true;
            }
        }
        Ok(Self {
            folds,
            seed,
            stratified,
        })
    }

    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stratified(&self) -> bool {
        self.stratified
    }

    pub fn n_samples(&self) -> usize {
        self.folds.iter().map(|f| f.len()).sum()
    }

    /// Indices outside fold `i`, in ascending order: the training partition.
    pub fn train_indices(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    /// Stable digest of the exact fold memberships, for report provenance.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("k={};seed={};stratified={}", self.k(), self.seed, self.stratified));
        for fold in &self.folds {
            hasher.update(";");
            for idx in fold {
                hasher.update(format!("{idx},"));
            }
        }
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Seeded shuffle followed by round-robin assignment; with stratification the
/// shuffle and round-robin run within each class while the fold cursor
/// continues across classes, keeping both per-class and total fold sizes
/// within one of each other.
pub fn make_folds(labels: &[usize], k: usize, seed: u64, stratified: bool) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidParam(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];

    if stratified {
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &l) in labels.iter().enumerate() {
            per_class[l].push(i);
        }
        for (class, members) in per_class.iter().enumerate() {
            if !members.is_empty() && members.len() < k {
                return Err(Error::InvalidParam(format!(
                    "class {class} has {} samples, fewer than {k} folds",
                    members.len()
                )));
            }
        }
        let mut cursor = 0usize;
        for members in per_class.iter_mut() {
            members.shuffle(&mut rng);
            for &idx in members.iter() {
                folds[cursor % k].push(idx);
                cursor += 1;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for (pos, idx) in order.into_iter().enumerate() {
            folds[pos % k].push(idx);
        }
    }
    for fold in folds.iter_mut() {
        fold.sort_unstable();
    }
    Ok(FoldPlan {
        folds,
        seed,
        stratified,
    })
}

/// Evaluation summary serialized as the report JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub uar: f64,
    pub per_class_recall: Vec<f64>,
    pub confusion: ConfusionMatrix,
    pub params: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub fold_plan_digest: Option<String>,
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        let recalls = per_class_recall(&cm)?;
        let uar = recalls.iter().sum::<f64>() / recalls.len() as f64;
        Ok(Self {
            uar,
            per_class_recall: recalls,
            confusion: cm,
            params: BTreeMap::new(),
            seed: None,
            fold_plan_digest: None,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// What to do with a clip whose tasks are all missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissingTaskPolicy {
    /// Class assigned directly when no task rows exist; the middle class by
    /// default.
    pub missing_class: usize,
}

impl Default for MissingTaskPolicy {
    fn default() -> Self {
        Self {
            missing_class: MoodClass::Hypomania.index(),
        }
    }
}

/// Clip-level outcome of task aggregation.
#[derive(Debug, Clone, PartialEq)]
pub enum ClipAggregate {
    /// Mean of the available per-task probability rows.
    Probs(Vec<f64>),
    /// No tasks were available; the policy class is assigned directly.
    Label(usize),
}

/// Averages the per-task probability rows of one clip; with zero available
/// tasks the policy's class label is assigned instead.
pub fn aggregate_task_probs(
    per_task: &BTreeMap<u8, Vec<f64>>,
    policy: MissingTaskPolicy,
) -> Result<ClipAggregate> {
    if per_task.is_empty() {
        return Ok(ClipAggregate::Label(policy.missing_class));
    }
    let width = per_task.values().next().expect("nonempty").len();
    if per_task.values().any(|row| row.len() != width) {
        return Err(Error::DimensionMismatch(
            "task probability rows disagree on class count".into(),
        ));
    }
    let mut mean = vec![0.0; width];
    for row in per_task.values() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let k = per_task.len() as f64;
    for m in mean.iter_mut() {
        *m /= k;
    }
    Ok(ClipAggregate::Probs(mean))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ymrs_boundaries() {
        assert_eq!(ymrs_to_class(0).unwrap(), MoodClass::Remission);
        assert_eq!(ymrs_to_class(7).unwrap(), MoodClass::Remission);
        assert_eq!(ymrs_to_class(8).unwrap(), MoodClass::Hypomania);
        assert_eq!(ymrs_to_class(19).unwrap(), MoodClass::Hypomania);
        assert_eq!(ymrs_to_class(20).unwrap(), MoodClass::Mania);
        assert_eq!(ymrs_to_class(60).unwrap(), MoodClass::Mania);
        assert!(ymrs_to_class(61).is_err());
    }

    fn classes(n: usize) -> ClassSet {
        ClassSet::new((0..n).map(|i| format!("c{i}")).collect()).unwrap()
    }

    #[test]
    fn confusion_perfect_prediction_is_diagonal() {
        let cs = classes(3);
        let y = vec![0, 1, 2, 0, 1, 2];
        let cm = confusion(&y, &y, &cs).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(cm.counts[i][j], usize::from(i == j) * 2);
            }
        }
        assert_eq!(uar(&cm).unwrap(), 1.0);
    }

    #[test]
    fn confusion_hand_count() {
        let cs = classes(2);
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], &cs).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 1]]);
    }

    #[test]
    fn confusion_rejects_empty_and_unknown() {
        let cs = classes(2);
        assert!(confusion(&[], &[], &cs).is_err());
        assert!(confusion(&[0, 2], &[0, 0], &cs).is_err());
    }

    #[test]
    fn uar_hand_value() {
        let cm = ConfusionMatrix {
            class_labels: vec!["a".into(), "b".into(), "c".into()],
            counts: vec![vec![2, 1, 0], vec![0, 3, 1], vec![1, 0, 4]],
        };
        let expected = (2.0 / 3.0 + 3.0 / 4.0 + 4.0 / 5.0) / 3.0;
        assert!((uar(&cm).unwrap() - expected).abs() < 1e-12);
        assert!((uar(&cm).unwrap() - 0.7389).abs() < 1e-4);
    }

    #[test]
    fn uar_constant_prediction_on_balanced_classes_is_chance() {
        let cs = classes(3);
        let truth = vec![0, 0, 1, 1, 2, 2];
        let pred = vec![0; 6];
        let u = uar_of_labels(&truth, &pred, &cs).unwrap();
        assert!((u - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn uar_empty_true_class_is_error() {
        let cs = classes(3);
        let cm = confusion(&[0, 0, 1], &[0, 1, 1], &cs).unwrap();
        assert!(matches!(uar(&cm), Err(Error::EmptyClass { .. })));
    }

    #[test]
    fn uar_invariant_under_relabeling() {
        let cs = classes(3);
        let truth = vec![0, 1, 2, 0, 1, 2, 0, 0];
        let pred = vec![0, 1, 1, 2, 1, 2, 0, 1];
        let base = uar_of_labels(&truth, &pred, &cs).unwrap();
        let perm = [2usize, 0, 1];
        let truth_p: Vec<usize> = truth.iter().map(|&l| perm[l]).collect();
        let pred_p: Vec<usize> = pred.iter().map(|&l| perm[l]).collect();
        let permuted = uar_of_labels(&truth_p, &pred_p, &cs).unwrap();
        assert!((base - permuted).abs() < 1e-12);
    }

    #[test]
    fn folds_reproduce_corpus_plan() {
        // 164 samples in 4 folds: every fold 41, every train partition 123.
        let labels: Vec<usize> = (0..164).map(|i| i % 3).collect();
        let plan = make_folds(&labels, 4, 42, true).unwrap();
        for i in 0..4 {
            assert_eq!(plan.folds()[i].len(), 41);
            assert_eq!(plan.train_indices(i).len(), 123);
        }
        let mut all: Vec<usize> = plan.folds().iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..164).collect::<Vec<_>>());
    }

    #[test]
    fn folds_leave_one_out_structure() {
        let labels = vec![0, 1, 0, 1, 0, 1];
        let plan = make_folds(&labels, 6, 0, false).unwrap();
        assert!(plan.folds().iter().all(|f| f.len() == 1));
    }

    #[test]
    fn folds_fixed_seed_identical() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        assert_eq!(
            make_folds(&labels, 5, 7, true).unwrap(),
            make_folds(&labels, 5, 7, true).unwrap()
        );
        assert_ne!(
            make_folds(&labels, 5, 7, true).unwrap(),
            make_folds(&labels, 5, 8, true).unwrap()
        );
    }

    #[test]
    fn folds_stratified_balance() {
        // Unequal class sizes; per-class and total fold counts stay within 1.
        let mut labels = vec![0usize; 25];
        labels.extend(vec![1usize; 38]);
        labels.extend(vec![2usize; 41]);
        let plan = make_folds(&labels, 4, 3, true).unwrap();
        let sizes: Vec<usize> = plan.folds().iter().map(|f| f.len()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for class in 0..3 {
            let counts: Vec<usize> = plan
                .folds()
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
                .collect();
            assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        }
    }

    #[test]
    fn folds_reject_small_class_under_stratification() {
        let labels = vec![0, 0, 0, 0, 1, 1];
        assert!(make_folds(&labels, 4, 0, true).is_err());
        assert!(make_folds(&labels, 4, 0, false).is_ok());
    }

    #[test]
    fn fold_digest_depends_on_membership() {
        let labels: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let a = make_folds(&labels, 4, 1, true).unwrap();
        let b = make_folds(&labels, 4, 2, true).unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), a.digest());
    }

    #[test]
    fn aggregate_single_task_is_unchanged() {
        let mut per_task = BTreeMap::new();
        per_task.insert(3u8, vec![0.2, 0.5, 0.3]);
        let out = aggregate_task_probs(&per_task, MissingTaskPolicy::default()).unwrap();
        assert_eq!(out, ClipAggregate::Probs(vec![0.2, 0.5, 0.3]));
    }

    #[test]
    fn aggregate_means_rows() {
        let mut per_task = BTreeMap::new();
        per_task.insert(1u8, vec![1.0, 0.0, 0.0]);
        per_task.insert(2u8, vec![0.0, 0.0, 1.0]);
        let out = aggregate_task_probs(&per_task, MissingTaskPolicy::default()).unwrap();
        assert_eq!(out, ClipAggregate::Probs(vec![0.5, 0.0, 0.5]));
    }

    #[test]
    fn aggregate_empty_assigns_missing_class() {
        let out = aggregate_task_probs(&BTreeMap::new(), MissingTaskPolicy::default()).unwrap();
        assert_eq!(out, ClipAggregate::Label(MoodClass::Hypomania.index()));
    }

    #[test]
    fn aggregate_preserves_simplex() {
        let mut per_task = BTreeMap::new();
        per_task.insert(1u8, vec![0.7, 0.2, 0.1]);
        per_task.insert(5u8, vec![0.1, 0.8, 0.1]);
        per_task.insert(7u8, vec![0.3, 0.3, 0.4]);
        match aggregate_task_probs(&per_task, MissingTaskPolicy::default()).unwrap() {
            ClipAggregate::Probs(row) => {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(row.iter().all(|&v| v >= 0.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
