//! CSV exchange formats: feature tables, probability matrices, and
//! prediction files.
//!
//! Feature table: `sample_id,label,<feature>...` with one row per sample.
//! Probability table: `sample_id,p_<class>...`. Prediction table:
//! `sample_id,predicted_class,p_<class>...`. All floats are written in
//! shortest round-trip decimal form, so rewriting a parsed table is
//! byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bdstate_core::types::{ClassSet, FeatureMatrix, ProbMatrix};
use ndarray::Array2;

/// A feature table bound to its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatures {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
}

pub fn write_feature_csv(
    path: &Path,
    features: &FeatureMatrix,
    labels: &[usize],
    classes: &ClassSet,
) -> Result<()> {
    if labels.len() != features.nrows() {
        bail!("{} labels for {} rows", labels.len(), features.nrows());
    }
    let mut out = String::new();
    out.push_str("sample_id,label");
    for name in features.column_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, id) in features.sample_ids().iter().enumerate() {
        write!(out, "{id},{}", classes.name(labels[i])).unwrap();
        for v in features.row(i).iter() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_feature_csv(path: &Path, classes: &ClassSet) -> Result<LabeledFeatures> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading feature table {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h,
        None => bail!("feature table {} is empty", path.display()),
    };
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 || columns[0] != "sample_id" || columns[1] != "label" {
        bail!(
            "feature table {} must start with sample_id,label and at least one feature",
            path.display()
        );
    }
    let names: Vec<String> = columns[2..].iter().map(|s| s.to_string()).collect();
    let k = names.len();

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != k + 2 {
            bail!(
                "feature table {}:{line_no}: expected {} cells, found {}",
                path.display(),
                k + 2,
                cells.len()
            );
        }
        ids.push(cells[0].to_string());
        labels.push(
            classes
                .index_of(cells[1])
                .with_context(|| format!("{}:{line_no}: unknown class {:?}", path.display(), cells[1]))?,
        );
        for cell in &cells[2..] {
            let v: f64 = cell.parse().with_context(|| {
                format!("{}:{line_no}: bad value {cell:?}", path.display())
            })?;
            data.push(v);
        }
    }
    if ids.is_empty() {
        bail!("feature table {} has no rows", path.display());
    }
    let values = Array2::from_shape_vec((ids.len(), k), data).expect("shape from parse");
    Ok(LabeledFeatures {
        features: FeatureMatrix::new(values, names, ids)?,
        labels,
    })
}

pub fn write_prob_csv(path: &Path, ids: &[String], probs: &ProbMatrix, classes: &ClassSet) -> Result<()> {
    if ids.len() != probs.nrows() {
        bail!("{} ids for {} probability rows", ids.len(), probs.nrows());
    }
    let mut out = String::new();
    out.push_str("sample_id");
    for name in classes.names() {
        write!(out, ",p_{name}").unwrap();
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        out.push_str(id);
        for v in probs.row(i).iter() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_prob_csv(path: &Path, classes: &ClassSet) -> Result<(Vec<String>, ProbMatrix)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading probability table {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h,
        None => bail!("probability table {} is empty", path.display()),
    };
    let columns: Vec<&str> = header.split(',').collect();
    let expected: Vec<String> = classes.names().iter().map(|n| format!("p_{n}")).collect();
    if columns.len() != classes.len() + 1
        || columns[0] != "sample_id"
        || columns[1..] != expected[..]
    {
        bail!(
            "probability table {} header does not match classes {}",
            path.display(),
            classes,
        );
    }
    let t = classes.len();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != t + 1 {
            bail!("{}:{line_no}: expected {} cells", path.display(), t + 1);
        }
        ids.push(cells[0].to_string());
        for cell in &cells[1..] {
            data.push(cell.parse::<f64>().with_context(|| {
                format!("{}:{line_no}: bad probability {cell:?}", path.display())
            })?);
        }
    }
    if ids.is_empty() {
        bail!("probability table {} has no rows", path.display());
    }
    let values = Array2::from_shape_vec((ids.len(), t), data).expect("shape from parse");
    Ok((ids, ProbMatrix::new(values)?))
}

pub fn write_prediction_csv(
    path: &Path,
    ids: &[String],
    predicted: &[usize],
    probs: &ProbMatrix,
    classes: &ClassSet,
) -> Result<()> {
    if ids.len() != predicted.len() || ids.len() != probs.nrows() {
        bail!("prediction table inputs disagree on row count");
    }
    let mut out = String::new();
    out.push_str("sample_id,predicted_class");
    for name in classes.names() {
        write!(out, ",p_{name}").unwrap();
    }
    out.push('\n');
    for (i, id) in ids.iter().enumerate() {
        write!(out, "{id},{}", classes.name(predicted[i])).unwrap();
        for v in probs.row(i).iter() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Reads a prediction table back as (ids, predicted labels).
pub fn read_prediction_csv(path: &Path, classes: &ClassSet) -> Result<(Vec<String>, Vec<usize>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading prediction table {}", path.display()))?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, h)) => h,
        None => bail!("prediction table {} is empty", path.display()),
    };
    if !header.starts_with("sample_id,predicted_class") {
        bail!("prediction table {} has an unexpected header", path.display());
    }
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 2 {
            bail!("{}:{}: malformed row", path.display(), idx + 1);
        }
        ids.push(cells[0].to_string());
        labels.push(classes.index_of(cells[1]).with_context(|| {
            format!("{}:{}: unknown class {:?}", path.display(), idx + 1, cells[1])
        })?);
    }
    Ok((ids, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn feature_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let classes = ClassSet::moods();
        let m = FeatureMatrix::new(
            array![[1.5, -2.25e-7], [0.1, 3.0]],
            vec!["a_mean".into(), "a_std".into()],
            vec!["c1".into(), "c2".into()],
        )
        .unwrap();
        write_feature_csv(&path, &m, &[0, 2], &classes).unwrap();
        let loaded = read_feature_csv(&path, &classes).unwrap();
        assert_eq!(loaded.features, m);
        assert_eq!(loaded.labels, vec![0, 2]);
        // Rewriting parses back byte-identically.
        let first = std::fs::read(&path).unwrap();
        write_feature_csv(&path, &loaded.features, &loaded.labels, &classes).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn prob_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let classes = ClassSet::moods();
        let p = ProbMatrix::new(array![[0.25, 0.5, 0.25], [1.0, 0.0, 0.0]]).unwrap();
        let ids = vec!["c1".to_string(), "c2".to_string()];
        write_prob_csv(&path, &ids, &p, &classes).unwrap();
        let (ids2, p2) = read_prob_csv(&path, &classes).unwrap();
        assert_eq!(ids, ids2);
        assert_eq!(p, p2);
    }

    #[test]
    fn prob_csv_rejects_wrong_class_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        std::fs::write(&path, "sample_id,p_a,p_b\nc1,0.5,0.5\n").unwrap();
        assert!(read_prob_csv(&path, &ClassSet::moods()).is_err());
    }

    #[test]
    fn prediction_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.csv");
        let classes = ClassSet::moods();
        let p = ProbMatrix::new(array![[0.2, 0.3, 0.5]]).unwrap();
        write_prediction_csv(&path, &["c9".into()], &[2], &p, &classes).unwrap();
        let (ids, labels) = read_prediction_csv(&path, &classes).unwrap();
        assert_eq!(ids, ["c9"]);
        assert_eq!(labels, [2]);
    }
}
