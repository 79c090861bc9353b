//! Principal component analysis on the centered training covariance.
//!
//! The eigendecomposition runs on whichever of the covariance (k x k) or the
//! Gram matrix (N x N) is smaller; nonzero eigenvalues agree and the
//! covariance eigenvectors are recovered from the Gram ones, so wide feature
//! tables (k >> N) stay cheap.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg;
use crate::types::FeatureMatrix;

/// Relative eigenvalue threshold below which a direction counts as rank-
/// deficient and is never retained.
const RANK_TOL: f64 = 1e-10;

/// Fitted projection onto the leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// k x m matrix with orthonormal component columns.
    pub component_matrix: Array2<f64>,
    pub column_means: Vec<f64>,
    /// Fraction of total variance explained per retained component,
    /// non-increasing.
    pub explained_variance_fractions: Vec<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.component_matrix.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.component_matrix.ncols()
    }
}

/// Fits PCA on the training rows, retaining the smallest number of leading
/// components whose cumulative explained variance reaches `variance_fraction`.
///
/// Sign convention: the component entry of largest magnitude is positive.
pub fn fit_pca(train: &FeatureMatrix, variance_fraction: f64) -> Result<PcaModel> {
    if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "variance fraction {variance_fraction} outside (0, 1]"
        )));
    }
    let n = train.nrows();
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    let k = train.ncols();

    let mut centered = train.values().clone();
    let mut means = vec![0.0; k];
    for j in 0..k {
        let mean = centered.column(j).sum() / n as f64;
        means[j] = mean;
        centered.column_mut(j).mapv_inplace(|v| v - mean);
    }

    // Population covariance scaling; only variance ratios matter downstream.
    let scale = 1.0 / n as f64;
    let (eigenvalues, components) = if k <= n {
        let cov = centered.t().dot(&centered) * scale;
        let (vals, vecs) = linalg::eigh(&cov);
        (vals, vecs)
    } else {
        let gram = centered.dot(&centered.t()) * scale;
        let (vals, u) = linalg::eigh(&gram);
        // Covariance eigenvector for Gram eigenpair (lambda, u) is
        // X^T u / ||X^T u|| with ||X^T u||^2 = n * lambda.
        let mut vecs = Array2::<f64>::zeros((k, n));
        for (i, &lambda) in vals.iter().enumerate() {
            if lambda <= 0.0 {
                continue;
            }
            let col = centered.t().dot(&u.column(i)) / (n as f64 * lambda).sqrt();
            vecs.column_mut(i).assign(&col);
        }
        (vals, vecs)
    };

    let max_eig = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if max_eig <= 0.0 {
        return Err(Error::DegenerateInput(
            "all training rows are identical; PCA has rank 0".into(),
        ));
    }
    let nonzero: Vec<(usize, f64)> = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > RANK_TOL * max_eig)
        .map(|(i, &v)| (i, v))
        .collect();
    let total: f64 = nonzero.iter().map(|(_, v)| v).sum();

    let mut kept = 0usize;
    let mut cumulative = 0.0;
    for (_, v) in &nonzero {
        kept += 1;
        cumulative += v;
        if cumulative / total >= variance_fraction - 1e-12 {
            break;
        }
    }

    let mut component_matrix = Array2::<f64>::zeros((k, kept));
    let mut fractions = Vec::with_capacity(kept);
    for (dst, &(src, v)) in nonzero.iter().take(kept).enumerate() {
        let mut col: Array1<f64> = components.column(src).to_owned();
        // Deterministic sign: flip so the largest-magnitude entry is positive.
        let lead = col
            .iter()
            .cloned()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        if col[lead] < 0.0 {
            col.mapv_inplace(|x| -x);
        }
        component_matrix.column_mut(dst).assign(&col);
        fractions.push(v / total);
    }

    Ok(PcaModel {
        component_matrix,
        column_means: means,
        explained_variance_fractions: fractions,
    })
}

/// Projects rows onto the retained components: `(m - means) * components`.
pub fn apply_pca(m: &FeatureMatrix, p: &PcaModel) -> Result<FeatureMatrix> {
    if m.ncols() != p.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "PCA was fitted on {} columns, matrix has {}",
            p.input_dim(),
            m.ncols()
        )));
    }
    let mut centered = m.values().clone();
    for (j, &mean) in p.column_means.iter().enumerate() {
        centered.column_mut(j).mapv_inplace(|v| v - mean);
    }
    let projected = centered.dot(&p.component_matrix);
    let names = (0..p.output_dim()).map(|i| format!("pc{i}")).collect();
    FeatureMatrix::new(projected, names, m.sample_ids().to_vec())
}
