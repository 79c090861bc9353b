//! Dataset manifest: one row per clip with its split, label, and feature
//! file paths.
//!
//! CSV layout: `sample_id,split,label,<modality>...[,timestamps]`. The
//! modality columns carry paths to frame-level LLD tables, `timestamps` a
//! path to the clip's task boundary file; all paths are relative to the
//! manifest's directory. The label column accepts either a class name or an
//! integer mania-scale score (mapped through the 7/20 thresholds when the
//! class set is the default mood triple).

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bdstate_core::eval::ymrs_to_class;
use bdstate_core::types::ClassSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => bail!("invalid split {other:?} (expected train, dev, or test)"),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct ManifestRow {
    pub sample_id: String,
    pub split: Split,
    pub label: usize,
    /// Paths per modality, in manifest header order.
    pub lld_paths: Vec<PathBuf>,
    pub timestamps: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
    pub modalities: Vec<String>,
    pub classes: ClassSet,
}

impl Manifest {
    pub fn rows_in_split(&self, split: Split) -> Vec<&ManifestRow> {
        self.rows.iter().filter(|r| r.split == split).collect()
    }

    pub fn rows_in_splits(&self, splits: &[Split]) -> Vec<&ManifestRow> {
        self.rows.iter().filter(|r| splits.contains(&r.split)).collect()
    }

    pub fn modality_index(&self, tag: &str) -> Result<usize> {
        self.modalities
            .iter()
            .position(|m| m == tag)
            .with_context(|| format!("modality {tag:?} not in manifest ({:?})", self.modalities))
    }

    /// Label lookup by sample id.
    pub fn label_of(&self, sample_id: &str) -> Result<usize> {
        self.rows
            .iter()
            .find(|r| r.sample_id == sample_id)
            .map(|r| r.label)
            .with_context(|| format!("sample {sample_id:?} not in manifest"))
    }
}

/// Parses a label cell: a class name, or an integer score mapped through the
/// mania-scale thresholds when the class set is the default mood triple.
fn parse_label(cell: &str, classes: &ClassSet) -> Result<usize> {
    if let Some(idx) = classes.index_of(cell) {
        return Ok(idx);
    }
    if let Ok(score) = cell.parse::<u32>() {
        if classes == &ClassSet::moods() {
            return Ok(ymrs_to_class(score)?.index());
        }
        bail!("numeric label {score} needs the default mood class set, have {classes}");
    }
    bail!("label {cell:?} is neither a class name nor a score")
}

/// Loads and validates a manifest. Every referenced path must resolve.
pub fn load_manifest(path: &Path, classes: &ClassSet) -> Result<Manifest> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut lines = text.lines().enumerate();

    let header = match lines.next() {
        Some((_, h)) => h,
        None => bail!("manifest {} is empty", path.display()),
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 4 || columns[0] != "sample_id" || columns[1] != "split" || columns[2] != "label"
    {
        bail!(
            "manifest {} must start with sample_id,split,label and at least one modality column",
            path.display()
        );
    }
    let has_timestamps = *columns.last().unwrap() == "timestamps";
    let modality_end = if has_timestamps { columns.len() - 1 } else { columns.len() };
    let modalities: Vec<String> = columns[3..modality_end].iter().map(|s| s.to_string()).collect();
    if modalities.is_empty() {
        bail!("manifest {} declares no modality columns", path.display());
    }

    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            bail!(
                "manifest {}:{line_no}: expected {} columns, found {}",
                path.display(),
                columns.len(),
                cells.len()
            );
        }
        let sample_id = cells[0].to_string();
        if !seen.insert(sample_id.clone()) {
            bail!("manifest {}:{line_no}: duplicate sample id {sample_id:?}", path.display());
        }
        let split = Split::parse(cells[1])
            .with_context(|| format!("manifest {}:{line_no}", path.display()))?;
        let label = parse_label(cells[2], classes)
            .with_context(|| format!("manifest {}:{line_no}", path.display()))?;

        let mut lld_paths = Vec::with_capacity(modalities.len());
        for (m, cell) in cells[3..modality_end].iter().enumerate() {
            let p = base.join(cell);
            if !p.is_file() {
                bail!(
                    "manifest {}:{line_no}: {} file {} does not exist",
                    path.display(),
                    modalities[m],
                    p.display()
                );
            }
            lld_paths.push(p);
        }
        let timestamps = if has_timestamps {
            let cell = cells[columns.len() - 1];
            if cell.is_empty() {
                None
            } else {
                let p = base.join(cell);
                if !p.is_file() {
                    bail!(
                        "manifest {}:{line_no}: timestamps file {} does not exist",
                        path.display(),
                        p.display()
                    );
                }
                Some(p)
            }
        } else {
            None
        };
        rows.push(ManifestRow {
            sample_id,
            split,
            label,
            lld_paths,
            timestamps,
        });
    }
    if rows.is_empty() {
        bail!("manifest {} has no data rows", path.display());
    }
    Ok(Manifest {
        rows,
        modalities,
        classes: classes.clone(),
    })
}
