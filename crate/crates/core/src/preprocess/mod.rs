//! Column standardization, row normalization, PCA, and tree-impurity
//! feature selection. Every transform is fitted on training data only and
//! then applied unchanged to held-out data.

mod pca;
mod tree_select;

pub use pca::{apply_pca, fit_pca, PcaModel};
pub use tree_select::{tree_feature_select, FeatureSelection, TreeParams};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::FeatureMatrix;

/// Per-column mean and population standard deviation of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub fitted_on: usize,
}

/// Fits per-column population statistics on the training rows only.
pub fn fit_z(train: &FeatureMatrix) -> Result<ZStats> {
    let n = train.nrows();
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "z-statistics need at least 2 rows, got {n}"
        )));
    }
    let k = train.ncols();
    let mut means = vec![0.0; k];
    let mut stds = vec![0.0; k];
    for j in 0..k {
        let col = train.values().column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        means[j] = mean;
        stds[j] = var.sqrt();
    }
    Ok(ZStats {
        means,
        stds,
        fitted_on: n,
    })
}

/// Standardizes each cell as `(x - mean) / std`; columns with zero std
/// map to zero.
pub fn apply_z(m: &FeatureMatrix, s: &ZStats) -> Result<FeatureMatrix> {
    if s.means.len() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "z-statistics cover {} columns, matrix has {}",
            s.means.len(),
            m.ncols()
        )));
    }
    let mut values = m.values().clone();
    for j in 0..m.ncols() {
        let mean = s.means[j];
        let std = s.stds[j];
        for v in values.column_mut(j).iter_mut() {
            *v = if std == 0.0 { 0.0 } else { (*v - mean) / std };
        }
    }
    m.with_values(values)
}

/// Divides each row by its Euclidean norm; all-zero rows are left unchanged.
pub fn l2_rows(m: &FeatureMatrix) -> FeatureMatrix {
    let mut values: Array2<f64> = m.values().clone();
    for mut row in values.rows_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    m.with_values(values)
        .expect("normalization preserves shape and finiteness")
}
