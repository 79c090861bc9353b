use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bdstate_cli::commands::{self, SummarizeLevel};
use bdstate_cli::config::Config;
use bdstate_cli::manifest::Split;
use bdstate_cli::synth::{LabelStyle, SynthSpec};

#[derive(Parser)]
#[command(
    name = "bdstate",
    version,
    about = "Multimodal mood-state classification: functional features, kernel ELMs, fusion, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config file (flat key = value lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set seed=7. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for --set seed=N.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<Config> {
        let mut config = Config::load(self.config.as_deref())?;
        config.apply_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            config.set("seed", &seed.to_string())?;
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (manifest + frame-level LLD files).
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of classes (3 uses the mood names, otherwise c0..cN).
        #[arg(long, default_value_t = 3)]
        classes: usize,
        /// Clips per class.
        #[arg(long, default_value_t = 40)]
        per_class: usize,
        /// Comma-separated modality:dims pairs.
        #[arg(long, default_value = "acoustic:8,linguistic:8,visual:8")]
        modalities: String,
        /// Class-center separation in units of the noise sigma.
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
        /// Frame and clip noise standard deviation.
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        /// Give each modality one strong class and scale the others down.
        #[arg(long)]
        complementary: bool,
        /// Center scale of non-focus classes under --complementary.
        #[arg(long, default_value_t = 0.5)]
        weak_scale: f64,
        /// Tasks per clip (1..=7).
        #[arg(long, default_value_t = 3)]
        tasks: usize,
        /// Minimum frames per task.
        #[arg(long, default_value_t = 20)]
        frames_min: usize,
        /// Maximum frames per task.
        #[arg(long, default_value_t = 40)]
        frames_max: usize,
        /// Probability of dropping a task (at least one always remains).
        #[arg(long, default_value_t = 0.0)]
        missing_rate: f64,
        /// Label column style: class names or representative YMRS scores.
        #[arg(long, default_value = "class")]
        label_style: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Summarize frame-level LLD tables into per-split feature tables.
    Summarize {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory for <modality>_<split>.csv tables.
        #[arg(long)]
        out: PathBuf,
        /// Unit of summarization: clip, task, or emotion.
        #[arg(long, default_value = "clip")]
        level: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train a per-modality model on the train split, selecting on dev.
    Train {
        /// Directory of feature tables from `summarize`.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        modality: String,
        /// Output model container path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the dev-set evaluation report JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Predict with a persisted model on a feature table.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Feature table (CSV) to score.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Modality entry to use when the container holds several.
        #[arg(long)]
        modality: Option<String>,
        /// Average task-level rows into one row per clip.
        #[arg(long)]
        aggregate_tasks: bool,
        /// Manifest providing the full clip list (with --aggregate-tasks).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Manifest split the feature table came from.
        #[arg(long, default_value = "dev")]
        split: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Pooled k-fold cross-validation (with grid search when grids are set).
    Cv {
        /// Directory of feature tables from `summarize`.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        modality: String,
        /// Report JSON output path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the pooled held-out probabilities CSV here.
        #[arg(long)]
        probs: Option<PathBuf>,
        /// Splits whose rows enter the cross-validation pool.
        #[arg(long, default_value = "train,dev")]
        splits: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Fuse per-modality outputs (majority, wsum2, wsum3, or early).
    Fuse {
        #[arg(long)]
        method: String,
        /// Probability tables as tag=path. Repeatable.
        #[arg(long = "probs", value_name = "TAG=PATH")]
        probs: Vec<String>,
        /// Feature tables as tag=path (early fusion). Repeatable.
        #[arg(long = "features", value_name = "TAG=PATH")]
        features: Vec<String>,
        /// Manifest providing true labels (decision-level methods).
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Fallback modality when all three voters disagree.
        #[arg(long)]
        fallback: Option<String>,
        /// Fused prediction CSV (or fused feature CSV for early).
        #[arg(long)]
        out: PathBuf,
        /// Also write the fusion evaluation report JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score a prediction CSV against manifest labels.
    Report {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn parse_tagged(values: &[String], what: &str) -> Result<Vec<(String, PathBuf)>> {
    values
        .iter()
        .map(|v| {
            let (tag, path) = v
                .split_once('=')
                .with_context(|| format!("{what} {v:?} is not of the form tag=path"))?;
            Ok((tag.to_string(), PathBuf::from(path)))
        })
        .collect()
}

fn parse_modalities(spec: &str) -> Result<Vec<(String, usize)>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (tag, dims) = item
                .split_once(':')
                .with_context(|| format!("modality {item:?} is not of the form tag:dims"))?;
            let dims: usize = dims
                .parse()
                .with_context(|| format!("bad descriptor count in {item:?}"))?;
            Ok((tag.to_string(), dims))
        })
        .collect()
}

fn parse_splits(spec: &str) -> Result<Vec<Split>> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(Split::parse)
        .collect()
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth {
            out,
            classes,
            per_class,
            modalities,
            separation,
            noise,
            complementary,
            weak_scale,
            tasks,
            frames_min,
            frames_max,
            missing_rate,
            label_style,
            seed,
        } => {
            let class_names = if classes == 3 {
                vec!["remission".into(), "hypomania".into(), "mania".into()]
            } else {
                (0..classes).map(|c| format!("c{c}")).collect()
            };
            let label_style = match label_style.as_str() {
                "class" => LabelStyle::Class,
                "ymrs" => LabelStyle::Ymrs,
                other => bail!("unknown label style {other:?}"),
            };
            let spec = SynthSpec {
                class_names,
                per_class,
                modalities: parse_modalities(&modalities)?,
                separation,
                noise_sigma: noise,
                weak_scale,
                complementary,
                tasks,
                frames_per_task: (frames_min, frames_max),
                missing_rate,
                label_style,
                seed,
            };
            commands::cmd_synth(&spec, &out)
        }
        Command::Summarize {
            manifest,
            out,
            level,
            config,
        } => commands::cmd_summarize(
            &manifest,
            &config.resolve()?,
            SummarizeLevel::parse(&level)?,
            &out,
        ),
        Command::Train {
            features,
            modality,
            out,
            report,
            config,
        } => commands::cmd_train(
            &features,
            &modality,
            &config.resolve()?,
            &out,
            report.as_deref(),
        ),
        Command::Predict {
            model,
            features,
            out,
            modality,
            aggregate_tasks,
            manifest,
            split,
            config,
        } => {
            let aggregate = if aggregate_tasks {
                let manifest = manifest
                    .as_deref()
                    .context("--aggregate-tasks needs --manifest for the clip list")?;
                Some((manifest, Split::parse(&split)?))
            } else {
                None
            };
            commands::cmd_predict(
                &model,
                &features,
                &out,
                modality.as_deref(),
                aggregate,
                &config.resolve()?,
            )
        }
        Command::Cv {
            features,
            modality,
            out,
            probs,
            splits,
            config,
        } => commands::cmd_cv(
            &features,
            &modality,
            &config.resolve()?,
            &parse_splits(&splits)?,
            &out,
            probs.as_deref(),
        ),
        Command::Fuse {
            method,
            probs,
            features,
            manifest,
            fallback,
            out,
            report,
            config,
        } => commands::cmd_fuse(
            &method,
            &parse_tagged(&probs, "--probs")?,
            &parse_tagged(&features, "--features")?,
            manifest.as_deref(),
            fallback.as_deref(),
            &config.resolve()?,
            &out,
            report.as_deref(),
        ),
        Command::Report {
            pred,
            manifest,
            out,
            config,
        } => commands::cmd_report(&pred, &manifest, &config.resolve()?, &out),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
