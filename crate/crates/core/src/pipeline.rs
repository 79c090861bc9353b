//! The train-side pipeline: preprocessing chain, classifier configuration,
//! pooled cross-validation, and exhaustive hyperparameter search.
//!
//! Evaluation follows the pooled protocol: every fold's held-out predictions
//! are collected and a single report is computed over the whole dataset, not
//! averaged per fold. All transforms are refitted per fold on that fold's
//! training partition only.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, FoldPlan};
use crate::kelm::{self, FusedElm, KelmModel, Weighting};
use crate::preprocess::{self, FeatureSelection, PcaModel, TreeParams, ZStats};
use crate::types::{ClassSet, FeatureMatrix, ProbMatrix};

/// Kernel width: either a fixed value or the median-pairwise-distance
/// heuristic computed on the (preprocessed) training partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaSpec {
    Value(f64),
    MedianHeuristic,
}

impl GammaSpec {
    pub fn resolve(&self, train: &FeatureMatrix) -> f64 {
        match self {
            GammaSpec::Value(v) => *v,
            GammaSpec::MedianHeuristic => kelm::median_heuristic_gamma(train.values()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            GammaSpec::Value(v) => format!("{v}"),
            GammaSpec::MedianHeuristic => "median".into(),
        }
    }
}

/// Classifier choice for one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSpec {
    Kelm {
        c: f64,
        gamma: GammaSpec,
        weighting: Weighting,
    },
    FusedKelm {
        c_unweighted: f64,
        c_weighted: f64,
        gamma: GammaSpec,
        alpha_grid: Vec<f64>,
    },
}

/// Preprocessing chain in fixed order: optional PCA, optional tree
/// selection, then Z standardization and row L2 normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessSpec {
    pub pca_variance: Option<f64>,
    pub tree_select: Option<TreeParams>,
    pub z_normalize: bool,
    pub l2_normalize: bool,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        Self {
            pca_variance: None,
            tree_select: None,
            z_normalize: true,
            l2_normalize: true,
        }
    }
}

/// Transforms fitted on one training partition.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPreprocess {
    pub pca: Option<PcaModel>,
    pub selection: Option<FeatureSelection>,
    pub z: Option<ZStats>,
    pub l2: bool,
}

impl FittedPreprocess {
    /// Fits the chain on the training partition only.
    pub fn fit(spec: &PreprocessSpec, train: &FeatureMatrix, labels: &[usize]) -> Result<Self> {
        let mut current = train.clone();
        let pca = match spec.pca_variance {
            Some(fraction) => {
                let model = preprocess::fit_pca(&current, fraction)?;
                current = preprocess::apply_pca(&current, &model)?;
                Some(model)
            }
            None => None,
        };
        let selection = match &spec.tree_select {
            Some(params) => {
                let sel = preprocess::tree_feature_select(&current, labels, params)?;
                current = current.select_columns(&sel.kept_indices)?;
                Some(sel)
            }
            None => None,
        };
        let z = if spec.z_normalize {
            Some(preprocess::fit_z(&current)?)
        } else {
            None
        };
        Ok(Self {
            pca,
            selection,
            z,
            l2: spec.l2_normalize,
        })
    }

    /// Applies the fitted chain to any matrix with matching raw width.
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut current = m.clone();
        if let Some(pca) = &self.pca {
            current = preprocess::apply_pca(&current, pca)?;
        }
        if let Some(sel) = &self.selection {
            current = current.select_columns(&sel.kept_indices)?;
        }
        if let Some(z) = &self.z {
            current = preprocess::apply_z(&current, z)?;
        }
        if self.l2 {
            current = preprocess::l2_rows(&current);
        }
        Ok(current)
    }

    /// Output width of the chain given its fitted parts.
    pub fn output_dim(&self, raw_dim: usize) -> usize {
        let after_pca = self.pca.as_ref().map_or(raw_dim, |p| p.output_dim());
        self.selection
            .as_ref()
            .map_or(after_pca, |s| s.kept_indices.len())
    }
}

/// A fitted classifier of either kind, with uniform prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedClassifier {
    Kelm(KelmModel),
    Fused(FusedElm),
}

impl FittedClassifier {
    pub fn predict_probs(&self, x: &FeatureMatrix) -> Result<ProbMatrix> {
        match self {
            FittedClassifier::Kelm(m) => kelm::predict_probs(m, x),
            FittedClassifier::Fused(m) => m.predict_probs(x),
        }
    }

    pub fn class_labels(&self) -> &ClassSet {
        match self {
            FittedClassifier::Kelm(m) => m.class_labels(),
            FittedClassifier::Fused(m) => m.class_labels(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            FittedClassifier::Kelm(m) => m.input_dim(),
            FittedClassifier::Fused(m) => m.input_dim(),
        }
    }
}

/// Full per-modality pipeline: preprocessing plus classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSpec {
    pub preprocess: PreprocessSpec,
    pub classifier: ClassifierSpec,
}

/// A fitted pipeline ready for held-out prediction or persistence.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    pub preprocess: FittedPreprocess,
    pub classifier: FittedClassifier,
}

impl FittedPipeline {
    pub fn predict_probs(&self, raw: &FeatureMatrix) -> Result<ProbMatrix> {
        let x = self.preprocess.apply(raw)?;
        self.classifier.predict_probs(&x)
    }
}

/// Fits the pipeline on a training partition; the development partition is
/// used only to select the fused blend coefficient.
pub fn fit_pipeline(
    spec: &PipelineSpec,
    train: &FeatureMatrix,
    train_labels: &[usize],
    dev: &FeatureMatrix,
    dev_labels: &[usize],
    classes: &ClassSet,
) -> Result<FittedPipeline> {
    let fitted_pre = FittedPreprocess::fit(&spec.preprocess, train, train_labels)?;
    let train_x = fitted_pre.apply(train)?;
    let dev_x = fitted_pre.apply(dev)?;
    let classifier = match &spec.classifier {
        ClassifierSpec::Kelm { c, gamma, weighting } => {
            let gamma = gamma.resolve(&train_x);
            FittedClassifier::Kelm(kelm::train_kelm(
                &train_x,
                train_labels,
                classes,
                *c,
                gamma,
                *weighting,
            )?)
        }
        ClassifierSpec::FusedKelm {
            c_unweighted,
            c_weighted,
            gamma,
            alpha_grid,
        } => {
            let gamma = gamma.resolve(&train_x);
            FittedClassifier::Fused(kelm::train_fused_elm(
                &train_x,
                train_labels,
                classes,
                &dev_x,
                dev_labels,
                *c_unweighted,
                *c_weighted,
                gamma,
                alpha_grid,
            )?)
        }
    };
    Ok(FittedPipeline {
        preprocess: fitted_pre,
        classifier,
    })
}

/// Anything that can be fitted on a training partition and produce held-out
/// probabilities. The development labels are available for models that tune
/// a blend coefficient on the held-out fold, per the evaluation protocol.
pub trait FoldLearner {
    fn fit_predict(
        &self,
        train: &FeatureMatrix,
        train_labels: &[usize],
        dev: &FeatureMatrix,
        dev_labels: &[usize],
        classes: &ClassSet,
    ) -> Result<ProbMatrix>;

    /// Parameter echo for reports.
    fn describe(&self) -> BTreeMap<String, String> {
        BTreeMap::new()
    }
}

impl FoldLearner for PipelineSpec {
    fn fit_predict(
        &self,
        train: &FeatureMatrix,
        train_labels: &[usize],
        dev: &FeatureMatrix,
        dev_labels: &[usize],
        classes: &ClassSet,
    ) -> Result<ProbMatrix> {
        let fitted = fit_pipeline(self, train, train_labels, dev, dev_labels, classes)?;
        fitted.predict_probs(dev)
    }

    fn describe(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        match &self.classifier {
            ClassifierSpec::Kelm { c, gamma, weighting } => {
                out.insert("classifier".into(), "kelm".into());
                out.insert("c".into(), format!("{c}"));
                out.insert("gamma".into(), gamma.describe());
                out.insert("weighting".into(), weighting.as_str().into());
            }
            ClassifierSpec::FusedKelm {
                c_unweighted,
                c_weighted,
                gamma,
                ..
            } => {
                out.insert("classifier".into(), "fused-kelm".into());
                out.insert("c_unweighted".into(), format!("{c_unweighted}"));
                out.insert("c_weighted".into(), format!("{c_weighted}"));
                out.insert("gamma".into(), gamma.describe());
            }
        }
        if let Some(f) = self.preprocess.pca_variance {
            out.insert("pca_variance".into(), format!("{f}"));
        }
        if let Some(t) = &self.preprocess.tree_select {
            out.insert("tree_select".into(), format!("{} trees", t.n_trees));
        }
        out.insert("z".into(), format!("{}", self.preprocess.z_normalize));
        out.insert("l2".into(), format!("{}", self.preprocess.l2_normalize));
        out
    }
}

/// Pooled evaluation outcome: the report plus the held-out probabilities,
/// aligned with the original dataset row order.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    /// Row indices of `probs`/`predicted` in the original dataset.
    pub eval_indices: Vec<usize>,
    pub probs: ProbMatrix,
    pub predicted: Vec<usize>,
}

/// Runs the pooled cross-validation protocol: per fold, fit on the training
/// partition and predict the held-out fold; then score all pooled held-out
/// predictions at once.
pub fn cross_validate<L: FoldLearner>(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: &ClassSet,
    folds: &FoldPlan,
    learner: &L,
) -> Result<EvalOutcome> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if folds.n_samples() != n {
        return Err(Error::DimensionMismatch(format!(
            "fold plan covers {} samples, dataset has {n}",
            folds.n_samples()
        )));
    }
    classes.validate_labels(labels)?;

    let t = classes.len();
    let mut pooled = ndarray::Array2::<f64>::zeros((n, t));
    for i in 0..folds.k() {
        let train_idx = folds.train_indices(i);
        let dev_idx = &folds.folds()[i];
        let train = x.select_rows(&train_idx)?;
        let dev = x.select_rows(dev_idx)?;
        let train_labels: Vec<usize> = train_idx.iter().map(|&j| labels[j]).collect();
        let dev_labels: Vec<usize> = dev_idx.iter().map(|&j| labels[j]).collect();
        let probs = learner.fit_predict(&train, &train_labels, &dev, &dev_labels, classes)?;
        if probs.nrows() != dev_idx.len() || probs.nclasses() != t {
            return Err(Error::DimensionMismatch(
                "learner returned probabilities of unexpected shape".into(),
            ));
        }
        for (row, &j) in dev_idx.iter().enumerate() {
            pooled.row_mut(j).assign(&probs.row(row));
        }
    }

    let probs = ProbMatrix::new(pooled)?;
    let predicted = probs.argmax_labels();
    let cm = eval::confusion(labels, &predicted, classes)?;
    let mut report = EvalReport::from_confusion(cm)?;
    report.params = learner.describe();
    report.seed = Some(folds.seed());
    report.fold_plan_digest = Some(folds.digest());
    Ok(EvalOutcome {
        report,
        eval_indices: (0..n).collect(),
        probs,
        predicted,
    })
}

/// Fits on a fixed train partition and scores a fixed dev partition.
pub fn evaluate_holdout<L: FoldLearner>(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: &ClassSet,
    train_idx: &[usize],
    dev_idx: &[usize],
    learner: &L,
) -> Result<EvalOutcome> {
    let train = x.select_rows(train_idx)?;
    let dev = x.select_rows(dev_idx)?;
    let train_labels: Vec<usize> = train_idx.iter().map(|&j| labels[j]).collect();
    let dev_labels: Vec<usize> = dev_idx.iter().map(|&j| labels[j]).collect();
    let probs = learner.fit_predict(&train, &train_labels, &dev, &dev_labels, classes)?;
    let predicted = probs.argmax_labels();
    let cm = eval::confusion(&dev_labels, &predicted, classes)?;
    let mut report = EvalReport::from_confusion(cm)?;
    report.params = learner.describe();
    Ok(EvalOutcome {
        report,
        eval_indices: dev_idx.to_vec(),
        probs,
        predicted,
    })
}

/// Train/dev split or fold plan over which candidates are scored.
#[derive(Debug, Clone)]
pub enum EvalSplit {
    Folds(FoldPlan),
    HoldOut {
        train: Vec<usize>,
        dev: Vec<usize>,
    },
}

impl EvalSplit {
    fn evaluate<L: FoldLearner>(
        &self,
        x: &FeatureMatrix,
        labels: &[usize],
        classes: &ClassSet,
        learner: &L,
    ) -> Result<EvalOutcome> {
        match self {
            EvalSplit::Folds(plan) => cross_validate(x, labels, classes, plan, learner),
            EvalSplit::HoldOut { train, dev } => {
                evaluate_holdout(x, labels, classes, train, dev, learner)
            }
        }
    }
}

/// Hyperparameter grids for the fused-kernel search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGrids {
    pub c_unweighted: Vec<f64>,
    pub c_weighted: Vec<f64>,
    pub gammas: Vec<GammaSpec>,
    pub alpha_grid: Vec<f64>,
}

/// Regularization grid covering the reported range 10^0 through 10^5.
pub fn default_c_grid() -> Vec<f64> {
    vec![1.0, 10.0, 100.0, 1_000.0, 10_000.0, 100_000.0]
}

/// Powers of two from 2^-10 through 2^2, plus the median heuristic.
pub fn default_gamma_grid() -> Vec<GammaSpec> {
    let mut grid: Vec<GammaSpec> = (-10..=2)
        .map(|e| GammaSpec::Value((2.0f64).powi(e)))
        .collect();
    grid.push(GammaSpec::MedianHeuristic);
    grid
}

/// 0.00 through 1.00 in steps of 0.05.
pub fn default_alpha_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.05).collect()
}

impl Default for SearchGrids {
    fn default() -> Self {
        Self {
            c_unweighted: default_c_grid(),
            c_weighted: default_c_grid(),
            gammas: default_gamma_grid(),
            alpha_grid: default_alpha_grid(),
        }
    }
}

/// Winning grid point and its evaluation.
#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best_c_unweighted: f64,
    pub best_c_weighted: f64,
    pub best_gamma: GammaSpec,
    pub outcome: EvalOutcome,
}

/// Exhaustive search over the fused-classifier grids, scored by pooled UAR.
/// Ties resolve to the earliest grid point in (C_unweighted, C_weighted,
/// gamma) iteration order, so grids sorted ascending break ties toward the
/// smallest values.
pub fn grid_search(
    x: &FeatureMatrix,
    labels: &[usize],
    classes: &ClassSet,
    split: &EvalSplit,
    grids: &SearchGrids,
    pre: &PreprocessSpec,
) -> Result<GridSearchResult> {
    if grids.c_unweighted.is_empty() || grids.c_weighted.is_empty() || grids.gammas.is_empty() {
        return Err(Error::InvalidParam("empty hyperparameter grid".into()));
    }
    let mut best: Option<GridSearchResult> = None;
    for &cu in &grids.c_unweighted {
        for &cw in &grids.c_weighted {
            for &gamma in &grids.gammas {
                let spec = PipelineSpec {
                    preprocess: pre.clone(),
                    classifier: ClassifierSpec::FusedKelm {
                        c_unweighted: cu,
                        c_weighted: cw,
                        gamma,
                        alpha_grid: grids.alpha_grid.clone(),
                    },
                };
                let outcome = split.evaluate(x, labels, classes, &spec)?;
                if best
                    .as_ref()
                    .map_or(true, |b| outcome.report.uar > b.outcome.report.uar)
                {
                    best = Some(GridSearchResult {
                        best_c_unweighted: cu,
                        best_c_weighted: cw,
                        best_gamma: gamma,
                        outcome,
                    });
                }
            }
        }
    }
    Ok(best.expect("grids are nonempty"))
}
