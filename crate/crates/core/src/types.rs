//! Shared data types: class sets, feature matrices, probability matrices.

use std::fmt;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of class names. Labels elsewhere are indices into this set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSet {
    names: Vec<String>,
}

impl ClassSet {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::EmptyInput("class set".into()));
        }
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::InvalidParam(format!("duplicate class name {a:?}")));
            }
        }
        Ok(Self { names })
    }

    /// The default mood classes, in severity order.
    pub fn moods() -> Self {
        Self {
            names: vec!["remission".into(), "hypomania".into(), "mania".into()],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Checks that every label is a valid index into this set.
    pub fn validate_labels(&self, labels: &[usize]) -> Result<()> {
        for &l in labels {
            if l >= self.names.len() {
                return Err(Error::UnknownLabel {
                    label: l,
                    classes: self.names.len(),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for ClassSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.names.join(","))
    }
}

/// Modality tag for multimodal outputs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    Acoustic,
    Linguistic,
    Visual,
    Other(String),
}

impl Modality {
    pub fn parse(s: &str) -> Self {
        match s {
            "acoustic" => Modality::Acoustic,
            "linguistic" => Modality::Linguistic,
            "visual" => Modality::Visual,
            other => Modality::Other(other.to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Modality::Acoustic => "acoustic",
            Modality::Linguistic => "linguistic",
            Modality::Visual => "visual",
            Modality::Other(s) => s,
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Row-major feature table: rows are samples, columns are named features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    column_names: Vec<String>,
    sample_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        values: Array2<f64>,
        column_names: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        if column_names.len() != values.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} column names for {} columns",
                column_names.len(),
                values.ncols()
            )));
        }
        if sample_ids.len() != values.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} sample ids for {} rows",
                sample_ids.len(),
                values.nrows()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam(
                "feature matrix contains non-finite values".into(),
            ));
        }
        Ok(Self {
            values,
            column_names,
            sample_ids,
        })
    }

    /// Builds a matrix with generated ids `s0..sN` and names `f0..fK`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let ids = (0..values.nrows()).map(|i| format!("s{i}")).collect();
        let names = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        Self::new(values, names, ids)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Returns a copy with each column name prefixed by `tag` and a dot.
    pub fn with_name_prefix(&self, tag: &str) -> Self {
        Self {
            values: self.values.clone(),
            column_names: self
                .column_names
                .iter()
                .map(|n| format!("{tag}.{n}"))
                .collect(),
            sample_ids: self.sample_ids.clone(),
        }
    }

    /// Selects a subset of rows, preserving order of `indices`.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "row index {i} out of bounds for {} rows",
                    self.nrows()
                )));
            }
        }
        let values = self.values.select(ndarray::Axis(0), indices);
        let ids = indices.iter().map(|&i| self.sample_ids[i].clone()).collect();
        Ok(Self {
            values,
            column_names: self.column_names.clone(),
            sample_ids: ids,
        })
    }

    /// Selects a subset of columns, preserving order of `indices`.
    pub fn select_columns(&self, indices: &[usize]) -> Result<Self> {
        for &j in indices {
            if j >= self.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "column index {j} out of bounds for {} columns",
                    self.ncols()
                )));
            }
        }
        let values = self.values.select(ndarray::Axis(1), indices);
        let names = indices
            .iter()
            .map(|&j| self.column_names[j].clone())
            .collect();
        Ok(Self {
            values,
            column_names: names,
            sample_ids: self.sample_ids.clone(),
        })
    }

    /// Replaces the values in place, keeping names and ids. Shapes must match.
    pub fn with_values(&self, values: Array2<f64>) -> Result<Self> {
        Self::new(values, self.column_names.clone(), self.sample_ids.clone())
    }
}

/// Tolerance for the row-sum invariant of probability matrices.
pub const PROB_ROW_SUM_TOL: f64 = 1e-9;

/// N x t matrix of per-class probabilities; every row sums to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    values: Array2<f64>,
}

impl ProbMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::EmptyInput("probability matrix with no classes".into()));
        }
        for (i, row) in values.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for &v in row.iter() {
                if !(v >= 0.0) {
                    return Err(Error::InvalidParam(format!(
                        "negative probability {v} in row {i}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > PROB_ROW_SUM_TOL {
                return Err(Error::InvalidParam(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn nclasses(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    /// Per-row argmax; ties resolve to the first (lowest) class index.
    pub fn argmax_labels(&self) -> Vec<usize> {
        self.values
            .rows()
            .into_iter()
            .map(|row| argmax(row.iter().copied()))
            .collect()
    }
}

/// Index of the first maximum of a nonempty sequence.
pub(crate) fn argmax<I: IntoIterator<Item = f64>>(values: I) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn class_set_rejects_duplicates() {
        assert!(ClassSet::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn class_set_moods_order() {
        let cs = ClassSet::moods();
        assert_eq!(cs.names(), ["remission", "hypomania", "mania"]);
        assert_eq!(cs.index_of("mania"), Some(2));
    }

    #[test]
    fn feature_matrix_rejects_non_finite() {
        let m = array![[1.0, f64::NAN]];
        assert!(FeatureMatrix::from_values(m).is_err());
    }

    #[test]
    fn prob_matrix_validates_rows() {
        assert!(ProbMatrix::new(array![[0.5, 0.5], [0.3, 0.7]]).is_ok());
        assert!(ProbMatrix::new(array![[0.5, 0.6]]).is_err());
        assert!(ProbMatrix::new(array![[-0.1, 1.1]]).is_err());
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax([1.0, 3.0, 3.0].into_iter()), 1);
    }

    #[test]
    fn modality_round_trip() {
        for s in ["acoustic", "linguistic", "visual", "thermal"] {
            assert_eq!(Modality::parse(s).as_str(), s);
        }
    }
}
