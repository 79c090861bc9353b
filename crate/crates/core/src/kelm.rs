//! RBF-kernel extreme learning machine classification.
//!
//! Training solves the regularized least-squares system
//! `(I/C + K) beta = T` on the training kernel, or its class-weighted
//! variant `(I/C + W K) beta = W T` where `W` is diagonal with entries
//! equal to the inverse of each sample's class count. The weighted system
//! is symmetrized through `W^(1/2)` so both cases go through the same
//! positive-definite factorization instead of an explicit inverse.
//!
//! A fused classifier blends the class probabilities of an unweighted and a
//! class-weighted model, picking the blend coefficient that maximizes
//! development-set UAR.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval;
use crate::fusion;
use crate::linalg;
use crate::types::{ClassSet, FeatureMatrix, ProbMatrix};

/// Kernel evaluation between two sample sets; entries lie in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: Array2<f64>,
    pub gamma: f64,
}

/// +1/-1 one-hot coded training targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMatrix {
    pub values: Array2<f64>,
    pub class_labels: ClassSet,
}

impl TargetMatrix {
    /// Codes labels as +1 for the true class and -1 elsewhere.
    pub fn from_labels(labels: &[usize], classes: &ClassSet) -> Result<Self> {
        classes.validate_labels(labels)?;
        let t = classes.len();
        let mut values = Array2::from_elem((labels.len(), t), -1.0);
        for (i, &l) in labels.iter().enumerate() {
            values[[i, l]] = 1.0;
        }
        Ok(Self {
            values,
            class_labels: classes.clone(),
        })
    }
}

/// Whether training compensates class imbalance with inverse-count weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weighting {
    Unweighted,
    ClassWeighted,
}

impl Weighting {
    pub fn as_str(&self) -> &'static str {
        match self {
            Weighting::Unweighted => "unweighted",
            Weighting::ClassWeighted => "class-weighted",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unweighted" => Ok(Weighting::Unweighted),
            "class-weighted" => Ok(Weighting::ClassWeighted),
            other => Err(Error::InvalidParam(format!("unknown weighting {other:?}"))),
        }
    }
}

/// A trained kernel ELM: the retained training features, the solved output
/// weights, and the hyperparameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct KelmModel {
    train_matrix: Array2<f64>,
    beta: Array2<f64>,
    gamma: f64,
    c: f64,
    weighting: Weighting,
    class_labels: ClassSet,
}

impl KelmModel {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn class_labels(&self) -> &ClassSet {
        &self.class_labels
    }

    pub fn train_matrix(&self) -> &Array2<f64> {
        &self.train_matrix
    }

    pub fn beta(&self) -> &Array2<f64> {
        &self.beta
    }

    pub fn n_train(&self) -> usize {
        self.train_matrix.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.train_matrix.ncols()
    }

    /// Rebuilds a model from persisted parts, revalidating shapes.
    pub fn from_parts(
        train_matrix: Array2<f64>,
        beta: Array2<f64>,
        gamma: f64,
        c: f64,
        weighting: Weighting,
        class_labels: ClassSet,
    ) -> Result<Self> {
        if beta.nrows() != train_matrix.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "beta has {} rows, train matrix has {}",
                beta.nrows(),
                train_matrix.nrows()
            )));
        }
        if beta.ncols() != class_labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "beta has {} columns for {} classes",
                beta.ncols(),
                class_labels.len()
            )));
        }
        if !(c > 0.0) || !(gamma > 0.0) {
            return Err(Error::InvalidParam(
                "C and gamma must be strictly positive".into(),
            ));
        }
        Ok(Self {
            train_matrix,
            beta,
            gamma,
            c,
            weighting,
            class_labels,
        })
    }
}

/// Computes the RBF kernel `exp(-gamma * ||x_i - y_j||^2)` between row sets.
pub fn rbf_kernel(x: &Array2<f64>, y: &Array2<f64>, gamma: f64) -> Result<KernelMatrix> {
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "kernel inputs have {} and {} columns",
            x.ncols(),
            y.ncols()
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParam(format!(
            "kernel gamma must be positive, got {gamma}"
        )));
    }
    let mut values = Array2::<f64>::zeros((x.nrows(), y.nrows()));
    for (i, xi) in x.rows().into_iter().enumerate() {
        for (j, yj) in y.rows().into_iter().enumerate() {
            let sq: f64 = xi
                .iter()
                .zip(yj.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            values[[i, j]] = (-gamma * sq).exp();
        }
    }
    Ok(KernelMatrix { values, gamma })
}

/// Median of pairwise squared distances, inverted: a parameter-free gamma
/// scale estimate. Falls back to 1 when all points coincide.
pub fn median_heuristic_gamma(x: &Array2<f64>) -> f64 {
    let n = x.nrows();
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let sq: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            dists.push(sq);
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = dists[dists.len() / 2];
    if median > 0.0 {
        1.0 / median
    } else {
        1.0
    }
}

/// Trains a kernel ELM by solving the regularized system for the output
/// weights with a symmetric positive-definite factorization.
pub fn train_kelm(
    train: &FeatureMatrix,
    labels: &[usize],
    classes: &ClassSet,
    c: f64,
    gamma: f64,
    weighting: Weighting,
) -> Result<KelmModel> {
    let n = train.nrows();
    if n == 0 {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParam(format!(
            "regularization C must be positive, got {c}"
        )));
    }
    let targets = TargetMatrix::from_labels(labels, classes)?;
    let kernel = rbf_kernel(train.values(), train.values(), gamma)?;

    let weights = match weighting {
        Weighting::Unweighted => None,
        Weighting::ClassWeighted => {
            let mut counts = vec![0usize; classes.len()];
            for &l in labels {
                counts[l] += 1;
            }
            Some(
                labels
                    .iter()
                    .map(|&l| 1.0 / counts[l] as f64)
                    .collect::<Vec<f64>>(),
            )
        }
    };
    let beta = solve_beta(&kernel.values, &targets.values, c, weights.as_deref())?;

    Ok(KelmModel {
        train_matrix: train.values().clone(),
        beta,
        gamma,
        c,
        weighting,
        class_labels: classes.clone(),
    })
}

/// Solves `(I/C + K) beta = T`, or with per-sample weights `w` the system
/// `(I/C + W K) beta = W T`. The weighted case substitutes `beta = D g` with
/// `D = W^(1/2)`, giving the symmetric system `(I/C + D K D) g = D T`.
fn solve_beta(
    kernel: &Array2<f64>,
    targets: &Array2<f64>,
    c: f64,
    weights: Option<&[f64]>,
) -> Result<Array2<f64>> {
    let n = kernel.nrows();
    let ridge = 1.0 / c;
    match weights {
        None => {
            let mut a = kernel.clone();
            for i in 0..n {
                a[[i, i]] += ridge;
            }
            linalg::solve_spd(&a, targets)
        }
        Some(w) => {
            let d: Array1<f64> = w.iter().map(|&v| v.sqrt()).collect();
            let mut a = kernel.clone();
            for i in 0..n {
                for j in 0..n {
                    a[[i, j]] *= d[i] * d[j];
                }
                a[[i, i]] += ridge;
            }
            let mut rhs = targets.clone();
            for i in 0..n {
                for v in rhs.row_mut(i).iter_mut() {
                    *v *= d[i];
                }
            }
            let mut g = linalg::solve_spd(&a, &rhs)?;
            for i in 0..n {
                for v in g.row_mut(i).iter_mut() {
                    *v *= d[i];
                }
            }
            Ok(g)
        }
    }
}

/// Raw class scores for query rows: `rbf(X, train) * beta`.
pub fn predict_scores(model: &KelmModel, x: &FeatureMatrix) -> Result<Array2<f64>> {
    if x.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "model expects {} features, got {}",
            model.input_dim(),
            x.ncols()
        )));
    }
    let kernel = rbf_kernel(x.values(), &model.train_matrix, model.gamma)?;
    Ok(kernel.values.dot(&model.beta))
}

/// Row-wise softmax calibration; preserves each row's argmax.
pub fn scores_to_probs(scores: &Array2<f64>) -> Result<ProbMatrix> {
    let mut out = scores.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::InvalidParam("non-finite score".into()));
        }
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    ProbMatrix::new(out)
}

/// Predicted probabilities for query rows.
pub fn predict_probs(model: &KelmModel, x: &FeatureMatrix) -> Result<ProbMatrix> {
    scores_to_probs(&predict_scores(model, x)?)
}

/// Decision-level blend of an unweighted and a class-weighted model trained
/// on the same data: `P = alpha * P_unweighted + (1 - alpha) * P_weighted`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedElm {
    unweighted: KelmModel,
    weighted: KelmModel,
    alpha: f64,
}

impl FusedElm {
    pub fn new(unweighted: KelmModel, weighted: KelmModel, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParam(format!("alpha {alpha} outside [0, 1]")));
        }
        if unweighted.train_matrix != weighted.train_matrix
            || unweighted.gamma != weighted.gamma
            || unweighted.class_labels != weighted.class_labels
        {
            return Err(Error::InvalidParam(
                "fused sub-models must share training matrix, gamma, and classes".into(),
            ));
        }
        Ok(Self {
            unweighted,
            weighted,
            alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn unweighted(&self) -> &KelmModel {
        &self.unweighted
    }

    pub fn weighted(&self) -> &KelmModel {
        &self.weighted
    }

    pub fn class_labels(&self) -> &ClassSet {
        self.unweighted.class_labels()
    }

    pub fn input_dim(&self) -> usize {
        self.unweighted.input_dim()
    }

    pub fn predict_probs(&self, x: &FeatureMatrix) -> Result<ProbMatrix> {
        let p_u = predict_probs(&self.unweighted, x)?;
        let p_w = predict_probs(&self.weighted, x)?;
        fusion::blend_pair(&p_u, &p_w, self.alpha)
    }

    pub fn predict_labels(&self, x: &FeatureMatrix) -> Result<Vec<usize>> {
        Ok(self.predict_probs(x)?.argmax_labels())
    }
}

/// Trains both sub-models and selects the blend coefficient that maximizes
/// development-set UAR; ties break to the smallest alpha.
#[allow(clippy::too_many_arguments)]
pub fn train_fused_elm(
    train: &FeatureMatrix,
    labels: &[usize],
    classes: &ClassSet,
    dev: &FeatureMatrix,
    dev_labels: &[usize],
    c_unweighted: f64,
    c_weighted: f64,
    gamma: f64,
    alpha_grid: &[f64],
) -> Result<FusedElm> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidParam("alpha grid is empty".into()));
    }
    if alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidParam("alpha grid values outside [0, 1]".into()));
    }
    let unweighted = train_kelm(train, labels, classes, c_unweighted, gamma, Weighting::Unweighted)?;
    let weighted = train_kelm(train, labels, classes, c_weighted, gamma, Weighting::ClassWeighted)?;

    let p_u = predict_probs(&unweighted, dev)?;
    let p_w = predict_probs(&weighted, dev)?;
    let mut best: Option<(f64, f64)> = None; // (uar, alpha)
    for &alpha in alpha_grid {
        let blend = fusion::blend_pair(&p_u, &p_w, alpha)?;
        let uar = eval::uar_of_labels(dev_labels, &blend.argmax_labels(), classes)?;
        let better = match best {
            None => true,
            Some((u, a)) => uar > u || (uar == u && alpha < a),
        };
        if better {
            best = Some((uar, alpha));
        }
    }
    let (_, alpha) = best.expect("alpha grid is nonempty");
    FusedElm::new(unweighted, weighted, alpha)
}
