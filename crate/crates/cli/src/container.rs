//! Model persistence.
//!
//! A container is one file: a single-line UTF-8 JSON header describing the
//! pipeline, dimensional chain, and array shapes, followed by the declared
//! arrays as raw IEEE-754 little-endian float64 payloads in header order.
//! Self-describing and readable from any language without a serializer.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use bdstate_core::kelm::{FusedElm, KelmModel, Weighting};
use bdstate_core::pipeline::{FittedClassifier, FittedPipeline, FittedPreprocess};
use bdstate_core::preprocess::{FeatureSelection, PcaModel, ZStats};
use bdstate_core::types::ClassSet;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub const FORMAT_NAME: &str = "bdstate-model";
pub const FORMAT_VERSION: u32 = 1;

/// A persisted bundle: one fitted pipeline per modality plus the provenance
/// snapshot of the configuration that produced it.
#[derive(Debug, Clone)]
pub struct ModelContainer {
    pub classes: ClassSet,
    pub config: BTreeMap<String, String>,
    pub entries: BTreeMap<String, ModalityEntry>,
}

/// One modality's fitted pipeline and the raw feature names it expects.
#[derive(Debug, Clone)]
pub struct ModalityEntry {
    pub column_names: Vec<String>,
    pub pipeline: FittedPipeline,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    classes: Vec<String>,
    config: BTreeMap<String, String>,
    modalities: BTreeMap<String, ModalityMeta>,
    arrays: Vec<ArrayMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModalityMeta {
    column_names: Vec<String>,
    dims: DimChain,
    preprocess: PreprocessMeta,
    model: ModelMeta,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
struct DimChain {
    raw: usize,
    post_pca: usize,
    post_select: usize,
    model_input: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct PreprocessMeta {
    pca: Option<PcaMeta>,
    selection: Option<SelectionMeta>,
    z: Option<ZMeta>,
    l2: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct PcaMeta {
    output_dim: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct SelectionMeta {
    kept_indices: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ZMeta {
    fitted_on: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum ModelMeta {
    Kelm {
        c: f64,
        gamma: f64,
        weighting: String,
        n_train: usize,
        input_dim: usize,
    },
    Fused {
        alpha: f64,
        c_unweighted: f64,
        c_weighted: f64,
        gamma: f64,
        n_train: usize,
        input_dim: usize,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct ArrayMeta {
    name: String,
    rows: usize,
    cols: usize,
}

/// Array payloads to append after the header, in declared order.
struct ArraySink {
    metas: Vec<ArrayMeta>,
    payloads: Vec<Vec<f64>>,
}

impl ArraySink {
    fn new() -> Self {
        Self {
            metas: Vec::new(),
            payloads: Vec::new(),
        }
    }

    fn push(&mut self, name: String, rows: usize, cols: usize, data: Vec<f64>) {
        assert_eq!(data.len(), rows * cols, "array {name} shape mismatch");
        self.metas.push(ArrayMeta { name, rows, cols });
        self.payloads.push(data);
    }

    fn push_matrix(&mut self, name: String, m: &Array2<f64>) {
        self.push(
            name,
            m.nrows(),
            m.ncols(),
            m.iter().copied().collect(),
        );
    }
}

fn dims_of(entry: &ModalityEntry) -> DimChain {
    let raw = entry.column_names.len();
    let pre = &entry.pipeline.preprocess;
    let post_pca = pre.pca.as_ref().map_or(raw, |p| p.output_dim());
    let post_select = pre
        .selection
        .as_ref()
        .map_or(post_pca, |s| s.kept_indices.len());
    DimChain {
        raw,
        post_pca,
        post_select,
        model_input: entry.pipeline.classifier.input_dim(),
    }
}

pub fn save(container: &ModelContainer, path: &Path) -> Result<()> {
    let mut sink = ArraySink::new();
    let mut modalities = BTreeMap::new();

    for (tag, entry) in &container.entries {
        let pre = &entry.pipeline.preprocess;
        let dims = dims_of(entry);
        if dims.model_input != dims.post_select {
            bail!(
                "modality {tag}: model expects {} inputs but the preprocessing chain emits {}",
                dims.model_input,
                dims.post_select
            );
        }

        let pca_meta = pre.pca.as_ref().map(|p| {
            sink.push_matrix(format!("{tag}/pca.components"), &p.component_matrix);
            sink.push(
                format!("{tag}/pca.means"),
                1,
                p.column_means.len(),
                p.column_means.clone(),
            );
            sink.push(
                format!("{tag}/pca.fractions"),
                1,
                p.explained_variance_fractions.len(),
                p.explained_variance_fractions.clone(),
            );
            PcaMeta {
                output_dim: p.output_dim(),
            }
        });
        let selection_meta = pre.selection.as_ref().map(|s| {
            sink.push(
                format!("{tag}/selection.importances"),
                1,
                s.importances.len(),
                s.importances.clone(),
            );
            SelectionMeta {
                kept_indices: s.kept_indices.clone(),
            }
        });
        let z_meta = pre.z.as_ref().map(|z| {
            sink.push(format!("{tag}/z.means"), 1, z.means.len(), z.means.clone());
            sink.push(format!("{tag}/z.stds"), 1, z.stds.len(), z.stds.clone());
            ZMeta {
                fitted_on: z.fitted_on,
            }
        });

        let model_meta = match &entry.pipeline.classifier {
            FittedClassifier::Kelm(m) => {
                sink.push_matrix(format!("{tag}/train"), m.train_matrix());
                sink.push_matrix(format!("{tag}/beta"), m.beta());
                ModelMeta::Kelm {
                    c: m.c(),
                    gamma: m.gamma(),
                    weighting: m.weighting().as_str().into(),
                    n_train: m.n_train(),
                    input_dim: m.input_dim(),
                }
            }
            FittedClassifier::Fused(f) => {
                sink.push_matrix(format!("{tag}/train"), f.unweighted().train_matrix());
                sink.push_matrix(format!("{tag}/beta_unweighted"), f.unweighted().beta());
                sink.push_matrix(format!("{tag}/beta_weighted"), f.weighted().beta());
                ModelMeta::Fused {
                    alpha: f.alpha(),
                    c_unweighted: f.unweighted().c(),
                    c_weighted: f.weighted().c(),
                    gamma: f.unweighted().gamma(),
                    n_train: f.unweighted().n_train(),
                    input_dim: f.input_dim(),
                }
            }
        };

        modalities.insert(
            tag.clone(),
            ModalityMeta {
                column_names: entry.column_names.clone(),
                dims,
                preprocess: PreprocessMeta {
                    pca: pca_meta,
                    selection: selection_meta,
                    z: z_meta,
                    l2: pre.l2,
                },
                model: model_meta,
            },
        );
    }

    let header = Header {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        classes: container.classes.names().to_vec(),
        config: container.config.clone(),
        modalities,
        arrays: sink.metas,
    };

    let mut file = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut header_line = serde_json::to_string(&header)?;
    header_line.push('\n');
    file.write_all(header_line.as_bytes())?;
    for payload in &sink.payloads {
        let mut bytes = Vec::with_capacity(payload.len() * 8);
        for v in payload {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        file.write_all(&bytes)?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelContainer> {
    let mut file =
        std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .with_context(|| format!("{}: missing header line", path.display()))?;
    let header: Header = serde_json::from_slice(&bytes[..newline])
        .with_context(|| format!("{}: malformed header", path.display()))?;
    if header.format != FORMAT_NAME {
        bail!("{}: not a model container", path.display());
    }
    if header.version != FORMAT_VERSION {
        bail!(
            "{}: unsupported container version {} (expected {})",
            path.display(),
            header.version,
            FORMAT_VERSION
        );
    }

    let mut offset = newline + 1;
    let mut arrays: BTreeMap<String, Array2<f64>> = BTreeMap::new();
    for meta in &header.arrays {
        let len = meta.rows * meta.cols * 8;
        if offset + len > bytes.len() {
            bail!("{}: truncated payload for array {}", path.display(), meta.name);
        }
        let mut data = Vec::with_capacity(meta.rows * meta.cols);
        for chunk in bytes[offset..offset + len].chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        offset += len;
        arrays.insert(
            meta.name.clone(),
            Array2::from_shape_vec((meta.rows, meta.cols), data).expect("declared shape"),
        );
    }
    if offset != bytes.len() {
        bail!("{}: {} trailing bytes after payloads", path.display(), bytes.len() - offset);
    }

    let classes = ClassSet::new(header.classes.clone())?;
    let mut entries = BTreeMap::new();
    for (tag, meta) in &header.modalities {
        let take = |suffix: &str| -> Result<&Array2<f64>> {
            arrays
                .get(&format!("{tag}/{suffix}"))
                .with_context(|| format!("{}: missing array {tag}/{suffix}", path.display()))
        };

        let pca = match &meta.preprocess.pca {
            Some(p) => {
                let model = PcaModel {
                    component_matrix: take("pca.components")?.clone(),
                    column_means: take("pca.means")?.iter().copied().collect(),
                    explained_variance_fractions: take("pca.fractions")?.iter().copied().collect(),
                };
                if model.output_dim() != p.output_dim {
                    bail!("{}: {tag} PCA dimension mismatch", path.display());
                }
                Some(model)
            }
            None => None,
        };
        let selection = match &meta.preprocess.selection {
            Some(s) => Some(FeatureSelection {
                kept_indices: s.kept_indices.clone(),
                importances: take("selection.importances")?.iter().copied().collect(),
            }),
            None => None,
        };
        let z = match &meta.preprocess.z {
            Some(zm) => Some(ZStats {
                means: take("z.means")?.iter().copied().collect(),
                stds: take("z.stds")?.iter().copied().collect(),
                fitted_on: zm.fitted_on,
            }),
            None => None,
        };
        let preprocess = FittedPreprocess {
            pca,
            selection,
            z,
            l2: meta.preprocess.l2,
        };

        let classifier = match &meta.model {
            ModelMeta::Kelm {
                c,
                gamma,
                weighting,
                ..
            } => FittedClassifier::Kelm(KelmModel::from_parts(
                take("train")?.clone(),
                take("beta")?.clone(),
                *gamma,
                *c,
                Weighting::parse(weighting)?,
                classes.clone(),
            )?),
            ModelMeta::Fused {
                alpha,
                c_unweighted,
                c_weighted,
                gamma,
                ..
            } => {
                let train = take("train")?.clone();
                let unweighted = KelmModel::from_parts(
                    train.clone(),
                    take("beta_unweighted")?.clone(),
                    *gamma,
                    *c_unweighted,
                    Weighting::Unweighted,
                    classes.clone(),
                )?;
                let weighted = KelmModel::from_parts(
                    train,
                    take("beta_weighted")?.clone(),
                    *gamma,
                    *c_weighted,
                    Weighting::ClassWeighted,
                    classes.clone(),
                )?;
                FittedClassifier::Fused(FusedElm::new(unweighted, weighted, *alpha)?)
            }
        };

        let entry = ModalityEntry {
            column_names: meta.column_names.clone(),
            pipeline: FittedPipeline {
                preprocess,
                classifier,
            },
        };
        // The dimensional chain must be internally consistent.
        let derived = dims_of(&entry);
        if derived != meta.dims || derived.model_input != derived.post_select {
            bail!(
                "{}: {tag} dimensional chain is inconsistent (declared {:?}, derived {:?})",
                path.display(),
                meta.dims,
                derived
            );
        }
        entries.insert(tag.clone(), entry);
    }

    Ok(ModelContainer {
        classes,
        config: header.config,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bdstate_core::kelm::train_kelm;
    use bdstate_core::pipeline::{fit_pipeline, ClassifierSpec, GammaSpec, PipelineSpec, PreprocessSpec};
    use bdstate_core::types::FeatureMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(seed: u64, n: usize) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let values = Array2::from_shape_fn((n, 6), |(i, _)| {
            labels[i] as f64 * 2.0 + rng.random::<f64>()
        });
        (FeatureMatrix::from_values(values).unwrap(), labels)
    }

    #[test]
    fn round_trip_preserves_predictions_exactly() {
        let classes = ClassSet::moods();
        let (train, labels) = dataset(1, 30);
        let (dev, dev_labels) = dataset(2, 12);
        let spec = PipelineSpec {
            preprocess: PreprocessSpec {
                pca_variance: Some(0.99),
                tree_select: None,
                z_normalize: true,
                l2_normalize: true,
            },
            classifier: ClassifierSpec::FusedKelm {
                c_unweighted: 10.0,
                c_weighted: 100.0,
                gamma: GammaSpec::MedianHeuristic,
                alpha_grid: vec![0.0, 0.5, 1.0],
            },
        };
        let fitted = fit_pipeline(&spec, &train, &labels, &dev, &dev_labels, &classes).unwrap();
        let before = fitted.predict_probs(&dev).unwrap();

        let mut entries = BTreeMap::new();
        entries.insert(
            "acoustic".to_string(),
            ModalityEntry {
                column_names: train.column_names().to_vec(),
                pipeline: fitted,
            },
        );
        let container = ModelContainer {
            classes: classes.clone(),
            config: BTreeMap::from([("config.seed".to_string(), "1".to_string())]),
            entries,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bdm");
        save(&container, &path).unwrap();

        let loaded = load(&path).unwrap();
        let after = loaded.entries["acoustic"].pipeline.predict_probs(&dev).unwrap();
        for (a, b) in before.values().iter().zip(after.values().iter()) {
            assert_eq!(a, b, "probabilities drifted across persistence");
        }
        assert_eq!(loaded.config["config.seed"], "1");
    }

    #[test]
    fn save_is_deterministic() {
        let classes = ClassSet::moods();
        let (train, labels) = dataset(3, 18);
        let model =
            train_kelm(&train, &labels, &classes, 10.0, 0.5, Weighting::ClassWeighted).unwrap();
        let mut entries = BTreeMap::new();
        entries.insert(
            "visual".to_string(),
            ModalityEntry {
                column_names: train.column_names().to_vec(),
                pipeline: FittedPipeline {
                    preprocess: FittedPreprocess {
                        pca: None,
                        selection: None,
                        z: None,
                        l2: false,
                    },
                    classifier: FittedClassifier::Kelm(model),
                },
            },
        );
        let container = ModelContainer {
            classes,
            config: BTreeMap::new(),
            entries,
        };
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.bdm");
        let b = dir.path().join("b.bdm");
        save(&container, &a).unwrap();
        save(&container, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bdm");
        std::fs::write(
            &path,
            format!(
                "{{\"format\":\"{FORMAT_NAME}\",\"version\":99,\"classes\":[\"a\",\"b\"],\"config\":{{}},\"modalities\":{{}},\"arrays\":[]}}\n"
            ),
        )
        .unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let classes = ClassSet::moods();
        let (train, labels) = dataset(5, 12);
        let model = train_kelm(&train, &labels, &classes, 1.0, 1.0, Weighting::Unweighted).unwrap();
        let mut entries = BTreeMap::new();
        entries.insert(
            "acoustic".to_string(),
            ModalityEntry {
                column_names: train.column_names().to_vec(),
                pipeline: FittedPipeline {
                    preprocess: FittedPreprocess {
                        pca: None,
                        selection: None,
                        z: None,
                        l2: true,
                    },
                    classifier: FittedClassifier::Kelm(model),
                },
            },
        );
        let container = ModelContainer {
            classes,
            config: BTreeMap::new(),
            entries,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.bdm");
        save(&container, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(load(&path).is_err());
    }
}
