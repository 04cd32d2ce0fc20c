use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use cad_core::datagen::{generate_corpus, SynthConfig};
use cad_core::exec::Execution;
use cad_core::features::{
    fit_stats, read_feature_file, standardize, write_feature_file, FeatureStream, Split, StandardizationStats,
};
use cad_core::io::{
    default_recipe, load_checkpoint, load_sessions, make_instructor_split, predict, resolve, save_checkpoint,
    write_prediction, Checkpoint, SessionRecord, SplitManifest, DEFAULT_RATIOS,
};
use cad_core::labels::{intervals_to_frame_labels, read_annotations, LabelScheme};
use cad_core::metrics::{
    aggregate_svg, aggregate_time, evaluate, pr_svg, read_trace_csv, trace_svg, write_confusion_csv, write_json,
    write_pr_csv, write_trace_csv,
};
use cad_core::models::{Arch, ModelConfig, Posteriors};
use cad_core::training::{train_model, write_training_log, SessionData, TrainConfig};

#[derive(Parser)]
#[command(name = "cad", version, about = "Frame-level classroom activity detection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Seed overriding the one in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Disable data parallelism.
    #[arg(long, global = true)]
    sequential: bool,
}

impl Common {
    fn out(&self) -> Result<&Path> {
        self.out.as_deref().context("--out is required")
    }

    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (WAV + annotation CSV per session, manifest.json).
    Synth,
    /// Split a session list into train/dev/test1/test2 by instructor.
    Split {
        /// JSON array of session records.
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long, default_value_t = 3)]
        withheld: usize,
    },
    /// Extract standardized features for every session of a manifest.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated stream names.
        #[arg(long, value_delimiter = ',', default_values_t = default_recipe())]
        recipe: Vec<String>,
    },
    /// Train a classifier on extracted features.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory written by `features`.
        #[arg(long)]
        features: PathBuf,
        /// Used when no --config is given.
        #[arg(long, default_value_t = 4)]
        scheme: usize,
        /// Record wall-clock seconds in the training log.
        #[arg(long)]
        timing: bool,
    },
    /// Run a checkpoint over one WAV file.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = default_recipe())]
        recipe: Vec<String>,
    },
    /// Score a split, either from a checkpoint and features or from posteriors files.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "test1")]
        split: String,
        #[arg(long, conflicts_with = "predictions", requires = "features")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Directory of `<session>.posteriors.feat` files.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        scheme: usize,
    },
    /// Time-on-activity per session from trace CSVs, with RMSE against annotations.
    Aggregate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "test1")]
        split: String,
        /// Directory of `<session>.trace.csv` files.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = 9)]
        scheme: usize,
    },
}

/// Contents of `features.json` next to the extracted `.feat` files.
#[derive(Serialize, Deserialize)]
struct FeatureIndex {
    recipe: Vec<String>,
    stats: StandardizationStats,
    stats_digest: String,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Synth => synth(c),
        Command::Split { sessions, withheld } => split(c, sessions, *withheld),
        Command::Features { manifest, recipe } => features(c, manifest, recipe),
        Command::Train {
            manifest,
            features,
            scheme,
            timing,
        } => train(c, manifest, features, *scheme, *timing),
        Command::Predict {
            checkpoint,
            wav,
            recipe,
        } => predict_cmd(c, checkpoint, wav, recipe),
        Command::Eval {
            manifest,
            split,
            checkpoint,
            features,
            predictions,
            scheme,
        } => eval(
            c,
            manifest,
            split,
            checkpoint.as_deref(),
            features.as_deref(),
            predictions.as_deref(),
            *scheme,
        ),
        Command::Aggregate {
            manifest,
            split,
            predictions,
            scheme,
        } => aggregate(c, manifest, split, predictions, *scheme),
    }
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_manifest(path: &Path) -> Result<SplitManifest> {
    SplitManifest::load(path).with_context(|| format!("reading manifest {}", path.display()))
}

fn records<'m>(manifest: &'m SplitManifest, split: &str) -> Result<&'m [SessionRecord]> {
    Ok(manifest.get(split.parse::<Split>()?))
}

fn synth(c: &Common) -> Result<()> {
    let mut cfg = match &c.config {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let out = c.out()?;
    let m = generate_corpus(&cfg, out, c.exec())?;
    println!(
        "wrote {} sessions to {} (train {}, dev {}, test1 {}, test2 {})",
        m.all().count(),
        out.display(),
        m.train.len(),
        m.dev.len(),
        m.test1.len(),
        m.test2.len()
    );
    Ok(())
}

fn split(c: &Common, sessions: &Path, withheld: usize) -> Result<()> {
    let text = std::fs::read_to_string(sessions).with_context(|| format!("reading {}", sessions.display()))?;
    let list: Vec<SessionRecord> = serde_json::from_str(&text)?;
    let m = make_instructor_split(&list, withheld, DEFAULT_RATIOS, c.seed.unwrap_or(0))?;
    m.save(c.out()?)?;
    println!("withheld instructors {:?}", m.withheld_instructors);
    Ok(())
}

fn features(c: &Common, manifest_path: &Path, recipe: &[String]) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let out = c.out()?;
    std::fs::create_dir_all(out)?;
    let all: Vec<SessionRecord> = manifest.all().map(|(_, r)| r.clone()).collect();
    let raw = load_sessions(&all, &base, recipe, c.exec())?;
    let train_ids: Vec<&str> = manifest.train.iter().map(|r| r.session.as_str()).collect();
    let train: Vec<&FeatureStream> = raw
        .iter()
        .filter(|s| train_ids.contains(&s.id.as_str()))
        .map(|s| &s.features)
        .collect();
    let stats = fit_stats(&train, Split::Train)?;
    for s in &raw {
        write_feature_file(out.join(format!("{}.feat", s.id)), &standardize(&s.features, &stats)?)?;
    }
    write_json(
        out.join("features.json"),
        &FeatureIndex {
            recipe: recipe.to_vec(),
            stats_digest: stats.digest(),
            stats,
        },
    )?;
    println!("wrote {} feature files to {}", raw.len(), out.display());
    Ok(())
}

fn read_index(dir: &Path) -> Result<FeatureIndex> {
    let p = dir.join("features.json");
    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn labelled(records: &[SessionRecord], base: &Path, feats: &Path, scheme: LabelScheme) -> Result<Vec<SessionData>> {
    records
        .iter()
        .map(|r| {
            let f = read_feature_file(feats.join(format!("{}.feat", r.session)))?;
            let annos = read_annotations(resolve(base, &r.annotations))?;
            let labels = intervals_to_frame_labels(&annos, f.frames(), f.spec.hop_ms, scheme, false)?;
            Ok(SessionData::new(r.session.clone(), f.data, labels.labels)?)
        })
        .collect()
}

fn default_train_config(scheme: LabelScheme) -> TrainConfig {
    let mut model = ModelConfig::new(Arch::Bigru, 0, 32, 1, scheme.arity());
    model.dropout_rate = 0.1;
    let mut cfg = TrainConfig::new(model, scheme);
    cfg.max_epochs = 12;
    cfg
}

fn train(c: &Common, manifest_path: &Path, feats: &Path, scheme: usize, timing: bool) -> Result<()> {
    let mut cfg = match &c.config {
        Some(p) => TrainConfig::load(p)?,
        None => default_train_config(LabelScheme::try_from(scheme)?),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let index = read_index(feats)?;
    if index.recipe != cfg.features {
        bail!(
            "features were extracted with {:?}, config asks for {:?}",
            index.recipe,
            cfg.features
        );
    }
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let train = labelled(&manifest.train, &base, feats, cfg.scheme)?;
    let dev = labelled(&manifest.dev, &base, feats, cfg.scheme)?;
    let outcome = train_model(&cfg, &train, &dev, c.exec())?;

    let out = c.out()?;
    std::fs::create_dir_all(out)?;
    write_training_log(out.join("train_log.csv"), &outcome.log, timing)?;
    write_json(out.join("train_config.json"), &outcome.config)?;
    let ckpt = Checkpoint::new(
        outcome.model,
        cfg.scheme,
        index.recipe,
        index.stats,
        outcome.config.digest(),
        outcome.best_epoch,
        outcome.best_dev_error,
    )?;
    save_checkpoint(out.join("model.ckpt"), &ckpt)?;
    println!(
        "best epoch {} of {}, dev error {:.4}",
        outcome.best_epoch,
        outcome.log.len(),
        outcome.best_dev_error
    );
    Ok(())
}

fn predict_cmd(c: &Common, checkpoint: &Path, wav: &Path, recipe: &[String]) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let pred = predict(&ckpt, wav, recipe, c.exec()).with_context(|| format!("predicting {}", wav.display()))?;
    let stem = wav.file_stem().and_then(|s| s.to_str()).unwrap_or("session");
    let (trace, post) = write_prediction(c.out()?, stem, &pred, ckpt.scheme)?;
    println!(
        "{} frames -> {}, {}",
        pred.predicted.len(),
        trace.display(),
        post.display()
    );
    Ok(())
}

fn eval(
    c: &Common,
    manifest_path: &Path,
    split: &str,
    checkpoint: Option<&Path>,
    feats: Option<&Path>,
    predictions: Option<&Path>,
    scheme: usize,
) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let recs = records(&manifest, split)?;
    let (name, scheme, posts, targets) = match (checkpoint, feats, predictions) {
        (Some(ck), Some(feats), None) => {
            let ckpt = load_checkpoint(ck)?;
            if read_index(feats)?.stats.digest() != ckpt.stats.digest() {
                bail!(
                    "features in {} were standardized differently from the checkpoint",
                    feats.display()
                );
            }
            let data = labelled(recs, &base, feats, ckpt.scheme)?;
            let chunk = ckpt.model.config().arch.default_chunk_len();
            let mut posts = Vec::new();
            for s in &data {
                posts.push(ckpt.model.posteriors_chunked(&s.features, chunk, c.exec())?);
            }
            let targets = data.into_iter().map(|s| s.labels).collect::<Vec<_>>();
            (
                ckpt.model.config().arch.as_str().to_string(),
                ckpt.scheme,
                posts,
                targets,
            )
        }
        (None, _, Some(dir)) => {
            let scheme = LabelScheme::try_from(scheme)?;
            let mut posts = Vec::new();
            let mut targets = Vec::new();
            for r in recs {
                let f = read_feature_file(dir.join(format!("{}.posteriors.feat", r.session)))?;
                let annos = read_annotations(resolve(&base, &r.annotations))?;
                targets.push(intervals_to_frame_labels(&annos, f.frames(), f.spec.hop_ms, scheme, false)?.labels);
                posts.push(Posteriors::new(f.data)?);
            }
            ("posteriors".to_string(), scheme, posts, targets)
        }
        _ => bail!("eval needs either --checkpoint with --features, or --predictions"),
    };
    let pairs: Vec<(&Posteriors, &[usize])> = posts.iter().zip(&targets).map(|(p, t)| (p, t.as_slice())).collect();
    let report = evaluate(&name, split, scheme, &pairs)?;

    let out = c.out()?;
    std::fs::create_dir_all(out)?;
    write_json(out.join("report.json"), &report)?;
    write_confusion_csv(out.join("confusion.csv"), &report.confusion, scheme)?;
    write_pr_csv(out.join("pr.csv"), &report.pr_curves, scheme)?;
    std::fs::write(out.join("pr.svg"), pr_svg(&report.pr_curves, scheme.class_names()))?;
    for (r, (p, t)) in recs.iter().zip(posts.iter().zip(&targets)) {
        let pred = p.argmax();
        write_trace_csv(
            out.join(format!("{}.trace.csv", r.session)),
            &pred,
            Some(t),
            10.0,
            scheme,
        )?;
        std::fs::write(
            out.join(format!("{}.trace.svg", r.session)),
            trace_svg(&pred, Some(t), scheme.class_names(), 10.0),
        )?;
    }
    println!(
        "{split}: accuracy {:.4}, error {:.1}%, mAP {:.4}, weighted F1 {:.4}",
        report.accuracy,
        report.error_rate * 100.0,
        report.map,
        report.weighted_f1
    );
    Ok(())
}

fn aggregate(c: &Common, manifest_path: &Path, split: &str, predictions: &Path, scheme: usize) -> Result<()> {
    let scheme = LabelScheme::try_from(scheme)?;
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_dir(manifest_path);
    let mut pred = BTreeMap::new();
    let mut actual = BTreeMap::new();
    for r in records(&manifest, split)? {
        let (p, _) = read_trace_csv(predictions.join(format!("{}.trace.csv", r.session)), scheme)?;
        let annos = read_annotations(resolve(&base, &r.annotations))?;
        actual.insert(
            r.session.clone(),
            intervals_to_frame_labels(&annos, p.len(), 10.0, scheme, false)?.labels,
        );
        pred.insert(r.session.clone(), p);
    }
    let report = aggregate_time(&pred, &actual, scheme.class_names(), 10.0)?;
    let out = c.out()?;
    write_json(out, &report)?;
    std::fs::write(out.with_extension("svg"), aggregate_svg(&report))?;
    println!(
        "mean RMSE {:.2} min over {} sessions",
        report.mean_rmse_minutes,
        report.sessions.len()
    );
    Ok(())
}
