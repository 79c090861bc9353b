//! Subcommand implementations. Each returns an error to be printed as a
//! single-line diagnostic with a nonzero exit.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bdstate_core::eval::{
    self, aggregate_task_probs, ClipAggregate, MissingTaskPolicy,
};
use bdstate_core::features::{
    group_tasks_by_emotion, load_lld_csv, load_task_timestamps_csv, segment_tasks, summarize_bd10,
    EmotionGroup, FeatureVector, LldSeries,
};
use bdstate_core::fusion::{self, ModalityOutput};
use bdstate_core::pipeline::{
    cross_validate, evaluate_holdout, fit_pipeline, grid_search, ClassifierSpec, EvalSplit,
    FittedClassifier, PipelineSpec, SearchGrids,
};
use bdstate_core::types::{ClassSet, FeatureMatrix, Modality, ProbMatrix};
use ndarray::Array2;

use crate::config::Config;
use crate::container::{self, ModalityEntry, ModelContainer};
use crate::manifest::{load_manifest, Manifest, ManifestRow, Split};
use crate::synth::{self, SynthSpec};
use crate::table;

/// Granularity of feature extraction units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SummarizeLevel {
    Clip,
    Task,
    Emotion,
}

impl SummarizeLevel {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "clip" => Ok(Self::Clip),
            "task" => Ok(Self::Task),
            "emotion" => Ok(Self::Emotion),
            other => bail!("unknown level {other:?} (expected clip, task, or emotion)"),
        }
    }
}

pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<()> {
    let manifest = synth::generate(spec, out_dir)?;
    println!("wrote {}", manifest.display());
    Ok(())
}

fn summarize_units(
    row: &ManifestRow,
    series: LldSeries,
    level: SummarizeLevel,
) -> Result<Vec<(String, FeatureVector)>> {
    match level {
        SummarizeLevel::Clip => Ok(vec![(row.sample_id.clone(), summarize_bd10(&series)?)]),
        SummarizeLevel::Task | SummarizeLevel::Emotion => {
            let ts_path = row.timestamps.as_ref().with_context(|| {
                format!("sample {}: task-level summarization needs timestamps", row.sample_id)
            })?;
            let all = load_task_timestamps_csv(ts_path)?;
            let ts = all
                .iter()
                .find(|t| t.clip_id() == row.sample_id)
                .with_context(|| {
                    format!(
                        "timestamps {} have no entries for clip {}",
                        ts_path.display(),
                        row.sample_id
                    )
                })?;
            let tasks = segment_tasks(&series, ts)?;
            let mut out = Vec::new();
            if level == SummarizeLevel::Task {
                for task in &tasks {
                    let id = format!("{}#t{}", row.sample_id, task.task_id().expect("segmented"));
                    out.push((id, summarize_bd10(task)?));
                }
            } else {
                for (group, series) in group_tasks_by_emotion(&tasks)? {
                    let id = format!("{}#{}", row.sample_id, group);
                    out.push((id, summarize_bd10(&series)?));
                }
            }
            Ok(out)
        }
    }
}

pub fn cmd_summarize(
    manifest_path: &Path,
    config: &Config,
    level: SummarizeLevel,
    out_dir: &Path,
) -> Result<()> {
    config.functionals()?;
    let classes = config.classes()?;
    let manifest = load_manifest(manifest_path, &classes)?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    for (m_idx, tag) in manifest.modalities.iter().enumerate() {
        for split in [Split::Train, Split::Dev, Split::Test] {
            let rows = manifest.rows_in_split(split);
            if rows.is_empty() {
                continue;
            }
            let mut ids: Vec<String> = Vec::new();
            let mut labels: Vec<usize> = Vec::new();
            let mut names: Option<Vec<String>> = None;
            let mut data: Vec<f64> = Vec::new();
            for row in rows {
                let series = load_lld_csv(&row.lld_paths[m_idx])?;
                for (unit_id, fv) in summarize_units(row, series, level)? {
                    match &names {
                        None => names = Some(fv.names.clone()),
                        Some(existing) => {
                            if existing != &fv.names {
                                bail!(
                                    "sample {}: {tag} feature names disagree with earlier rows",
                                    row.sample_id
                                );
                            }
                        }
                    }
                    ids.push(unit_id);
                    labels.push(row.label);
                    data.extend(fv.values);
                }
            }
            let names = names.with_context(|| format!("no {tag} rows in split {split}"))?;
            let k = names.len();
            let values = Array2::from_shape_vec((ids.len(), k), data)
                .expect("row-major data matches unit count");
            let features = FeatureMatrix::new(values, names, ids)?;
            let path = out_dir.join(format!("{tag}_{split}.csv"));
            table::write_feature_csv(&path, &features, &labels, &classes)?;
            println!("wrote {} ({} rows x {} features)", path.display(), features.nrows(), k);
        }
    }
    Ok(())
}

fn features_path(dir: &Path, modality: &str, split: Split) -> PathBuf {
    dir.join(format!("{modality}_{split}.csv"))
}

/// Stacks two labeled tables (train on top of dev), checking name agreement.
fn stack(
    train: &table::LabeledFeatures,
    dev: &table::LabeledFeatures,
) -> Result<(FeatureMatrix, Vec<usize>, Vec<usize>, Vec<usize>)> {
    if train.features.column_names() != dev.features.column_names() {
        bail!("train and dev tables disagree on feature names");
    }
    let n_train = train.features.nrows();
    let n_dev = dev.features.nrows();
    let k = train.features.ncols();
    let mut values = Array2::<f64>::zeros((n_train + n_dev, k));
    values
        .slice_mut(ndarray::s![..n_train, ..])
        .assign(train.features.values());
    values
        .slice_mut(ndarray::s![n_train.., ..])
        .assign(dev.features.values());
    let mut ids = train.features.sample_ids().to_vec();
    ids.extend(dev.features.sample_ids().iter().cloned());
    let mut labels = train.labels.clone();
    labels.extend(dev.labels.iter().copied());
    let x = FeatureMatrix::new(values, train.features.column_names().to_vec(), ids)?;
    Ok((
        x,
        labels,
        (0..n_train).collect(),
        (n_train..n_train + n_dev).collect(),
    ))
}

pub fn cmd_train(
    features_dir: &Path,
    modality: &str,
    config: &Config,
    out: &Path,
    report_path: Option<&Path>,
) -> Result<()> {
    let classes = config.classes()?;
    let train = table::read_feature_csv(&features_path(features_dir, modality, Split::Train), &classes)?;
    let dev_path = features_path(features_dir, modality, Split::Dev);
    let dev = if dev_path.is_file() {
        Some(table::read_feature_csv(&dev_path, &classes)?)
    } else {
        None
    };

    let pre = config.preprocess_spec()?;
    let needs_search = config.needs_search()?;
    let wants_fused = config.classifier_kind() == "fused";
    if (needs_search || wants_fused) && dev.is_none() {
        bail!(
            "training with {} needs a dev split table at {}",
            if wants_fused { "a fused classifier" } else { "hyperparameter grids" },
            dev_path.display()
        );
    }

    let mut params: BTreeMap<String, String> = config.echo();
    params.insert("modality".into(), modality.into());

    let (fitted, dev_report) = match &dev {
        Some(dev) => {
            let (x, labels, train_idx, dev_idx) = stack(&train, dev)?;
            let spec = if needs_search {
                if !wants_fused {
                    bail!("hyperparameter grids need classifier = fused; pin a single C and gamma otherwise");
                }
                let grids = SearchGrids {
                    c_unweighted: config.c_unweighted_grid()?,
                    c_weighted: config.c_weighted_grid()?,
                    gammas: config.gamma_grid()?,
                    alpha_grid: config.alpha_grid()?,
                };
                let split = EvalSplit::HoldOut {
                    train: train_idx.clone(),
                    dev: dev_idx.clone(),
                };
                let result = grid_search(&x, &labels, &classes, &split, &grids, &pre)?;
                params.insert("selected.c_unweighted".into(), format!("{}", result.best_c_unweighted));
                params.insert("selected.c_weighted".into(), format!("{}", result.best_c_weighted));
                params.insert("selected.gamma".into(), result.best_gamma.describe());
                PipelineSpec {
                    preprocess: pre.clone(),
                    classifier: ClassifierSpec::FusedKelm {
                        c_unweighted: result.best_c_unweighted,
                        c_weighted: result.best_c_weighted,
                        gamma: result.best_gamma,
                        alpha_grid: grids.alpha_grid,
                    },
                }
            } else {
                PipelineSpec {
                    preprocess: pre.clone(),
                    classifier: config.classifier_spec()?,
                }
            };
            let fitted = fit_pipeline(
                &spec,
                &train.features,
                &train.labels,
                &dev.features,
                &dev.labels,
                &classes,
            )?;
            let outcome = evaluate_holdout(&x, &labels, &classes, &train_idx, &dev_idx, &spec)?;
            (fitted, Some(outcome.report))
        }
        None => {
            let spec = PipelineSpec {
                preprocess: pre.clone(),
                classifier: config.classifier_spec()?,
            };
            // No dev table: fit on train alone; the dev argument is unused
            // by non-fused classifiers.
            let fitted = fit_pipeline(
                &spec,
                &train.features,
                &train.labels,
                &train.features,
                &train.labels,
                &classes,
            )?;
            (fitted, None)
        }
    };

    if let FittedClassifier::Fused(f) = &fitted.classifier {
        params.insert("selected.alpha".into(), format!("{}", f.alpha()));
    }

    let mut entries = BTreeMap::new();
    entries.insert(
        modality.to_string(),
        ModalityEntry {
            column_names: train.features.column_names().to_vec(),
            pipeline: fitted,
        },
    );
    let model = ModelContainer {
        classes: classes.clone(),
        config: params.clone(),
        entries,
    };
    container::save(&model, out)?;
    println!("wrote {}", out.display());

    if let Some(path) = report_path {
        let mut report = dev_report
            .context("a report needs a dev split table to evaluate against")?;
        report.params = params;
        report.seed = Some(config.seed()?);
        std::fs::write(path, report.to_json())
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Suffix of a task-level row id (`clip#t3`, `clip#negative`) mapped to a
/// stable aggregation key.
fn task_key(suffix: &str) -> Result<u8> {
    if let Some(rest) = suffix.strip_prefix('t') {
        let id: u8 = rest
            .parse()
            .with_context(|| format!("bad task suffix {suffix:?}"))?;
        return Ok(id);
    }
    for (group, key) in [
        (EmotionGroup::Negative, 1u8),
        (EmotionGroup::Neutral, 2),
        (EmotionGroup::Positive, 3),
    ] {
        if suffix == group.as_str() {
            return Ok(key);
        }
    }
    bail!("unrecognized unit suffix {suffix:?}")
}

pub fn cmd_predict(
    model_path: &Path,
    features_path: &Path,
    out: &Path,
    modality: Option<&str>,
    aggregate: Option<(&Path, Split)>,
    config: &Config,
) -> Result<()> {
    let model = container::load(model_path)?;
    let entry = match modality {
        Some(tag) => model
            .entries
            .get(tag)
            .with_context(|| format!("container has no modality {tag:?}"))?,
        None => {
            if model.entries.len() != 1 {
                bail!(
                    "container holds {} modalities; pick one with --modality",
                    model.entries.len()
                );
            }
            model.entries.values().next().expect("one entry")
        }
    };
    let classes = &model.classes;
    let data = table::read_feature_csv(features_path, classes)?;
    if data.features.column_names() != entry.column_names {
        bail!(
            "feature table columns do not match the model's expected inputs ({} vs {} columns)",
            data.features.ncols(),
            entry.column_names.len()
        );
    }
    let probs = entry.pipeline.predict_probs(&data.features)?;

    let (ids, predicted, probs) = match aggregate {
        None => {
            let predicted = probs.argmax_labels();
            (data.features.sample_ids().to_vec(), predicted, probs)
        }
        Some((manifest_path, split)) => {
            let manifest = load_manifest(manifest_path, classes)?;
            let policy = MissingTaskPolicy {
                missing_class: config.missing_class_index(classes)?,
            };
            // Collect per-clip task rows.
            let mut per_clip: BTreeMap<String, BTreeMap<u8, Vec<f64>>> = BTreeMap::new();
            for (i, id) in data.features.sample_ids().iter().enumerate() {
                let (clip, suffix) = id
                    .split_once('#')
                    .with_context(|| format!("row id {id:?} has no task suffix to aggregate"))?;
                let key = task_key(suffix)?;
                let row = probs.row(i).to_vec();
                if per_clip
                    .entry(clip.to_string())
                    .or_default()
                    .insert(key, row)
                    .is_some()
                {
                    bail!("duplicate unit {id:?} in feature table");
                }
            }
            let clip_rows = manifest.rows_in_split(split);
            if clip_rows.is_empty() {
                bail!("manifest has no rows in split {split}");
            }
            let t = classes.len();
            let mut ids = Vec::new();
            let mut values = Array2::<f64>::zeros((clip_rows.len(), t));
            let mut predicted = Vec::new();
            for (i, row) in clip_rows.iter().enumerate() {
                let tasks = per_clip.remove(&row.sample_id).unwrap_or_default();
                match aggregate_task_probs(&tasks, policy)? {
                    ClipAggregate::Probs(mean) => {
                        for (j, v) in mean.iter().enumerate() {
                            values[[i, j]] = *v;
                        }
                        predicted.push(bdstate_core::types::ProbMatrix::new(
                            Array2::from_shape_vec((1, t), mean.clone()).expect("one row"),
                        )?
                        .argmax_labels()[0]);
                    }
                    ClipAggregate::Label(label) => {
                        values[[i, label]] = 1.0;
                        predicted.push(label);
                    }
                }
                ids.push(row.sample_id.clone());
            }
            if let Some(extra) = per_clip.keys().next() {
                bail!("feature table clip {extra:?} is not in manifest split {split}");
            }
            (ids, predicted, ProbMatrix::new(values)?)
        }
    };

    table::write_prediction_csv(out, &ids, &predicted, &probs, classes)?;
    println!("wrote {} ({} rows)", out.display(), ids.len());
    Ok(())
}

pub fn cmd_cv(
    features_dir: &Path,
    modality: &str,
    config: &Config,
    splits: &[Split],
    out: &Path,
    probs_out: Option<&Path>,
) -> Result<()> {
    let classes = config.classes()?;
    let mut tables = Vec::new();
    for split in splits {
        let path = features_path(features_dir, modality, *split);
        if path.is_file() {
            tables.push(table::read_feature_csv(&path, &classes)?);
        }
    }
    if tables.is_empty() {
        bail!(
            "no feature tables for modality {modality:?} under {} (splits {:?})",
            features_dir.display(),
            splits
        );
    }
    let mut combined = tables.remove(0);
    for t in tables {
        let stacked = stack(&combined, &t)?;
        combined = table::LabeledFeatures {
            features: stacked.0,
            labels: stacked.1,
        };
    }

    let folds = eval::make_folds(
        &combined.labels,
        config.folds()?,
        config.seed()?,
        config.stratified()?,
    )?;
    let pre = config.preprocess_spec()?;

    let mut params = config.echo();
    params.insert("modality".into(), modality.into());
    let outcome = if config.needs_search()? {
        if config.classifier_kind() != "fused" {
            bail!("hyperparameter grids need classifier = fused; pin a single C and gamma otherwise");
        }
        let grids = SearchGrids {
            c_unweighted: config.c_unweighted_grid()?,
            c_weighted: config.c_weighted_grid()?,
            gammas: config.gamma_grid()?,
            alpha_grid: config.alpha_grid()?,
        };
        let result = grid_search(
            &combined.features,
            &combined.labels,
            &classes,
            &EvalSplit::Folds(folds),
            &grids,
            &pre,
        )?;
        params.insert("selected.c_unweighted".into(), format!("{}", result.best_c_unweighted));
        params.insert("selected.c_weighted".into(), format!("{}", result.best_c_weighted));
        params.insert("selected.gamma".into(), result.best_gamma.describe());
        result.outcome
    } else {
        let spec = PipelineSpec {
            preprocess: pre,
            classifier: config.classifier_spec()?,
        };
        cross_validate(&combined.features, &combined.labels, &classes, &folds, &spec)?
    };

    let mut report = outcome.report.clone();
    for (k, v) in report.params.iter() {
        params.insert(format!("learner.{k}"), v.clone());
    }
    report.params = params;
    std::fs::write(out, report.to_json()).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} (pooled UAR {:.4})", out.display(), report.uar);

    if let Some(path) = probs_out {
        let ids: Vec<String> = outcome
            .eval_indices
            .iter()
            .map(|&i| combined.features.sample_ids()[i].clone())
            .collect();
        table::write_prob_csv(path, &ids, &outcome.probs, &classes)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Reads tagged probability tables and checks that they cover the same
/// samples in the same order.
fn read_aligned_probs(
    inputs: &[(String, PathBuf)],
    classes: &ClassSet,
) -> Result<(Vec<String>, Vec<(String, ProbMatrix)>)> {
    let mut ids: Option<Vec<String>> = None;
    let mut out = Vec::new();
    for (tag, path) in inputs {
        let (file_ids, probs) = table::read_prob_csv(path, classes)?;
        match &ids {
            None => ids = Some(file_ids),
            Some(existing) => {
                if existing != &file_ids {
                    bail!(
                        "probability tables disagree on sample ids or order ({} vs earlier)",
                        path.display()
                    );
                }
            }
        }
        out.push((tag.clone(), probs));
    }
    Ok((ids.expect("at least one input"), out))
}

fn labels_for_ids(manifest: &Manifest, ids: &[String]) -> Result<Vec<usize>> {
    ids.iter().map(|id| manifest.label_of(id)).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_fuse(
    method: &str,
    prob_inputs: &[(String, PathBuf)],
    feature_inputs: &[(String, PathBuf)],
    manifest_path: Option<&Path>,
    fallback: Option<&str>,
    config: &Config,
    out: &Path,
    report_path: Option<&Path>,
) -> Result<()> {
    let classes = config.classes()?;

    if method == "early" {
        if feature_inputs.len() < 2 {
            bail!("early fusion needs at least two --features tag=path inputs");
        }
        let mut tables = Vec::new();
        let mut labels: Option<Vec<usize>> = None;
        for (tag, path) in feature_inputs {
            let t = table::read_feature_csv(path, &classes)?;
            match &labels {
                None => labels = Some(t.labels.clone()),
                Some(existing) => {
                    if existing != &t.labels {
                        bail!("feature tables disagree on labels ({})", path.display());
                    }
                }
            }
            tables.push(t.features.with_name_prefix(tag));
        }
        let fused = fusion::early_fuse(&tables)?;
        table::write_feature_csv(out, &fused, &labels.expect("inputs exist"), &classes)?;
        println!(
            "wrote {} ({} rows x {} features)",
            out.display(),
            fused.nrows(),
            fused.ncols()
        );
        return Ok(());
    }

    let manifest_path =
        manifest_path.context("decision-level fusion needs --manifest for the true labels")?;
    let manifest = load_manifest(manifest_path, &classes)?;
    let (ids, tagged) = read_aligned_probs(prob_inputs, &classes)?;
    let truth = labels_for_ids(&manifest, &ids)?;

    let mut params = config.echo();
    params.insert("method".into(), method.into());

    // Unimodal UARs from the inputs themselves.
    let mut unimodal_uars = Vec::new();
    for (tag, probs) in &tagged {
        let uar = eval::uar_of_labels(&truth, &probs.argmax_labels(), &classes)?;
        params.insert(format!("uar.{tag}"), format!("{uar}"));
        unimodal_uars.push(uar);
    }

    let (predicted, fused_probs) = match method {
        "majority" => {
            if tagged.len() != 3 {
                bail!("majority voting needs exactly 3 probability tables, got {}", tagged.len());
            }
            let fallback = match fallback {
                Some(tag) => Modality::parse(tag),
                None => config.fallback(),
            };
            let outputs: Vec<ModalityOutput> = tagged
                .iter()
                .map(|(tag, probs)| {
                    ModalityOutput::new(Modality::parse(tag), probs.clone(), None)
                })
                .collect();
            let voted = fusion::majority_vote(&outputs, &fallback)?;
            params.insert("fallback".into(), fallback.as_str().into());
            // Majority voting decides labels, not calibrated probabilities;
            // the output rows are one-hot.
            let t = classes.len();
            let mut values = Array2::<f64>::zeros((voted.len(), t));
            for (i, &l) in voted.iter().enumerate() {
                values[[i, l]] = 1.0;
            }
            (voted, ProbMatrix::new(values)?)
        }
        "wsum2" => {
            if tagged.len() != 2 {
                bail!("two-model weighted sum needs exactly 2 probability tables");
            }
            let (alpha, blend) = fusion::weighted_sum2(
                &tagged[0].1,
                &tagged[1].1,
                &config.alpha_grid()?,
                &truth,
                &classes,
            )?;
            params.insert("selected.alpha".into(), format!("{alpha}"));
            (blend.argmax_labels(), blend)
        }
        "wsum3" => {
            if tagged.len() != 3 {
                bail!("three-model weighted sum needs exactly 3 probability tables");
            }
            let (weights, blend) = fusion::weighted_sum3_search(
                &tagged[0].1,
                &tagged[1].1,
                &tagged[2].1,
                &truth,
                &classes,
                config.dirichlet_draws()?,
                config.seed()?,
            )?;
            params.insert(
                "selected.weights".into(),
                format!("{},{},{}", weights.alphas[0], weights.alphas[1], weights.alphas[2]),
            );
            (blend.argmax_labels(), blend)
        }
        other => bail!("unknown fusion method {other:?}"),
    };

    table::write_prediction_csv(out, &ids, &predicted, &fused_probs, &classes)?;
    let cm = eval::confusion(&truth, &predicted, &classes)?;
    let mut report = eval::EvalReport::from_confusion(cm)?;
    let mm1 = fusion::mm1(report.uar, &unimodal_uars)?;
    params.insert("mm1".into(), format!("{mm1}"));
    report.params = params;
    report.seed = Some(config.seed()?);
    println!(
        "wrote {} (fused UAR {:.4}, MM1 {:.4})",
        out.display(),
        report.uar,
        mm1
    );
    if let Some(path) = report_path {
        std::fs::write(path, report.to_json())
            .with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn cmd_report(
    pred_path: &Path,
    manifest_path: &Path,
    config: &Config,
    out: &Path,
) -> Result<()> {
    let classes = config.classes()?;
    let manifest = load_manifest(manifest_path, &classes)?;
    let (ids, predicted) = table::read_prediction_csv(pred_path, &classes)?;
    let truth = labels_for_ids(&manifest, &ids)?;
    let cm = eval::confusion(&truth, &predicted, &classes)?;
    let mut report = eval::EvalReport::from_confusion(cm)?;
    let mut params = config.echo();
    params.insert("predictions".into(), pred_path.display().to_string());
    report.params = params;
    std::fs::write(out, report.to_json()).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {} (UAR {:.4})", out.display(), report.uar);
    Ok(())
}
