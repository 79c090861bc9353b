//! Synthetic dataset generation: a desk-scale stand-in for the private
//! clinical corpus.
//!
//! Every clip gets one frame-level LLD file per modality plus a task
//! timestamp file. Per class and modality a center vector is drawn once;
//! each clip draws its per-descriptor means around its class center and each
//! frame adds noise on top, so the mean functional carries the class signal
//! while the remaining functionals behave like noise.
//!
//! With `complementary` set, modality `m` keeps full separation only for
//! class `m % n_classes` and scales the other centers down, giving each
//! modality its own strong class and making fusion informative.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bdstate_core::types::ClassSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// How the manifest label column is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelStyle {
    /// Class names.
    Class,
    /// Representative mania-scale scores (requires the default mood triple).
    Ymrs,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub class_names: Vec<String>,
    pub per_class: usize,
    /// (tag, descriptor count) per modality.
    pub modalities: Vec<(String, usize)>,
    /// Distance scale of class centers, in units of `noise_sigma`.
    pub separation: f64,
    pub noise_sigma: f64,
    /// Center scale for non-focus classes under `complementary`.
    pub weak_scale: f64,
    pub complementary: bool,
    /// Number of tasks per clip, 1 through 7.
    pub tasks: usize,
    pub frames_per_task: (usize, usize),
    /// Probability that a task is skipped; at least one task always remains.
    pub missing_rate: f64,
    pub label_style: LabelStyle,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            class_names: vec!["remission".into(), "hypomania".into(), "mania".into()],
            per_class: 40,
            modalities: vec![
                ("acoustic".into(), 8),
                ("linguistic".into(), 8),
                ("visual".into(), 8),
            ],
            separation: 4.0,
            noise_sigma: 1.0,
            weak_scale: 0.5,
            complementary: false,
            tasks: 3,
            frames_per_task: (20, 40),
            missing_rate: 0.0,
            label_style: LabelStyle::Class,
            seed: 7,
        }
    }
}

/// Representative scores inside each mood band, for `LabelStyle::Ymrs`.
const YMRS_REPRESENTATIVES: [u32; 3] = [3, 12, 25];

pub fn generate(spec: &SynthSpec, out_dir: &Path) -> Result<PathBuf> {
    if spec.class_names.len() < 2 {
        bail!("synthesis needs at least 2 classes");
    }
    if spec.per_class == 0 {
        bail!("synthesis needs at least 1 sample per class");
    }
    if spec.modalities.is_empty() || spec.modalities.iter().any(|(_, d)| *d == 0) {
        bail!("every modality needs at least 1 descriptor");
    }
    if !(1..=7).contains(&spec.tasks) {
        bail!("task count {} outside 1..=7", spec.tasks);
    }
    if spec.frames_per_task.0 == 0 || spec.frames_per_task.0 > spec.frames_per_task.1 {
        bail!("invalid frames_per_task range");
    }
    if !(0.0..=1.0).contains(&spec.missing_rate) {
        bail!("missing rate {} outside [0, 1]", spec.missing_rate);
    }
    if spec.label_style == LabelStyle::Ymrs && ClassSet::new(spec.class_names.clone())? != ClassSet::moods()
    {
        bail!("ymrs labels need the default mood classes");
    }

    let lld_dir = out_dir.join("lld");
    let ts_dir = out_dir.join("ts");
    std::fs::create_dir_all(&lld_dir)
        .with_context(|| format!("creating {}", lld_dir.display()))?;
    std::fs::create_dir_all(&ts_dir).with_context(|| format!("creating {}", ts_dir.display()))?;

    let n_classes = spec.class_names.len();

    // Class centers from a dedicated stream so clip generation can be
    // reordered without changing them.
    let mut center_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    center_rng.set_stream(u64::MAX);
    let mut centers: Vec<Vec<Vec<f64>>> = Vec::with_capacity(spec.modalities.len());
    for (m_idx, (_, dims)) in spec.modalities.iter().enumerate() {
        let mut per_class = Vec::with_capacity(n_classes);
        for class in 0..n_classes {
            let scale = if spec.complementary && class != m_idx % n_classes {
                spec.weak_scale
            } else {
                1.0
            };
            let center: Vec<f64> = (0..*dims)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut center_rng);
                    spec.separation * spec.noise_sigma * scale * z
                })
                .collect();
            per_class.push(center);
        }
        centers.push(per_class);
    }

    let mut manifest = String::new();
    manifest.push_str("sample_id,split,label");
    for (tag, _) in &spec.modalities {
        manifest.push(',');
        manifest.push_str(tag);
    }
    manifest.push_str(",timestamps\n");

    let mut clip_index = 0u64;
    for class in 0..n_classes {
        for i in 0..spec.per_class {
            let clip_id = format!("clip_{clip_index:04}");
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(clip_index);

            // Shared task structure across modalities: kept task ids and
            // per-task frame counts.
            let mut kept_tasks: Vec<(u8, usize)> = Vec::new();
            for task in 1..=spec.tasks as u8 {
                let frames =
                    rng.random_range(spec.frames_per_task.0..=spec.frames_per_task.1);
                let keep = rng.random::<f64>() >= spec.missing_rate;
                if keep {
                    kept_tasks.push((task, frames));
                }
            }
            if kept_tasks.is_empty() {
                // A clip with no material cannot be ingested; keep task 1.
                let frames =
                    rng.random_range(spec.frames_per_task.0..=spec.frames_per_task.1);
                kept_tasks.push((1, frames));
            }

            let mut ts_body = String::from("clip_id,task_id,start_frame,end_frame\n");
            let mut offset = 0usize;
            for (task, frames) in &kept_tasks {
                writeln!(ts_body, "{clip_id},{task},{offset},{}", offset + frames).unwrap();
                offset += frames;
            }
            let ts_name = format!("{clip_id}.csv");
            std::fs::write(ts_dir.join(&ts_name), ts_body)?;

            let mut lld_names = Vec::with_capacity(spec.modalities.len());
            for (m_idx, (tag, dims)) in spec.modalities.iter().enumerate() {
                let center = &centers[m_idx][class];
                let clip_means: Vec<f64> = center
                    .iter()
                    .map(|&c| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        c + spec.noise_sigma * z
                    })
                    .collect();
                let mut body = String::new();
                for j in 0..*dims {
                    if j > 0 {
                        body.push(',');
                    }
                    write!(body, "d{j}").unwrap();
                }
                body.push('\n');
                let total_frames: usize = kept_tasks.iter().map(|(_, f)| f).sum();
                for _ in 0..total_frames {
                    for (j, mean) in clip_means.iter().enumerate() {
                        if j > 0 {
                            body.push(',');
                        }
                        let z: f64 = StandardNormal.sample(&mut rng);
                        write!(body, "{}", mean + spec.noise_sigma * z).unwrap();
                    }
                    body.push('\n');
                }
                let lld_name = format!("{clip_id}_{tag}.csv");
                std::fs::write(lld_dir.join(&lld_name), body)?;
                lld_names.push(lld_name);
            }

            // Per-class stratified split cycle: 3 train, 1 dev, 1 test.
            let split = match i % 5 {
                0 | 1 | 2 => "train",
                3 => "dev",
                _ => "test",
            };
            let label = match spec.label_style {
                LabelStyle::Class => spec.class_names[class].clone(),
                LabelStyle::Ymrs => YMRS_REPRESENTATIVES[class].to_string(),
            };
            write!(manifest, "{clip_id},{split},{label}").unwrap();
            for name in &lld_names {
                write!(manifest, ",lld/{name}").unwrap();
            }
            writeln!(manifest, ",ts/{ts_name}").unwrap();
            clip_index += 1;
        }
    }

    let manifest_path = out_dir.join("manifest.csv");
    std::fs::write(&manifest_path, manifest)
        .with_context(|| format!("writing {}", manifest_path.display()))?;
    Ok(manifest_path)
}
