use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use egocol::data::{SourceDataset, Split};
use egocol::fcw::FcwConfig;
use egocol::head::HeadMode;
use egocol::metrics::{Aggregation, EvalOptions};
use egocol::pipeline::{self, AblateOptions, HeadOptions};
use egocol::prep::{LabelAnchor, PrepConfig, SplitFractions, SyntheticNegatives};
use egocol::synth::{self, SynthConfig};
use egocol::trainer::TrainConfig;

#[derive(Parser)]
#[command(
    name = "egocol",
    version,
    about = "Ego-centric collision anticipation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus (manifest, marks, detections, embeddings).
    Synth(SynthArgs),
    /// Fill alert times from annotator marks and report reaction statistics.
    Annotate(AnnotateArgs),
    /// Filter, compose, split and label a manifest.
    Prep(PrepCmd),
    /// Train a prediction head on prepared clips.
    Train(TrainCmd),
    /// Score prepared videos with a trained head.
    Score(ScoreArgs),
    /// Evaluate score traces per method and dataset.
    Eval(EvalCmd),
    /// Score detection traces with the rule-based warning baseline.
    Fcw(FcwCmd),
    /// Collect long-form plot data from earlier runs.
    Report(ReportArgs),
    /// Train and evaluate over a grid of settings.
    Ablate(Box<AblateCmd>),
}

#[derive(Args)]
struct OutArg {
    /// Output directory (default: $EGOCOL_OUT_ROOT/<command>-<config digest>).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutArg {
    fn resolve(&self, command: &str, config: &serde_json::Value) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| pipeline::default_out_dir(command, config))
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    out: OutArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = vec![SourceDataset::Nexar, SourceDataset::Dad])]
    datasets: Vec<SourceDataset>,
    #[arg(long, default_value_t = 40)]
    ego_positives: usize,
    #[arg(long, default_value_t = 6)]
    non_ego_positives: usize,
    #[arg(long, default_value_t = 40)]
    negatives: usize,
    #[arg(long, default_value_t = 2)]
    early_events: usize,
    #[arg(long, default_value_t = 8.0)]
    duration: f64,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    #[arg(long, default_value_t = 16)]
    clip_frames: usize,
    #[arg(long, default_value_t = 4)]
    patches: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    #[arg(long, default_value_t = 3.0)]
    signal: f64,
    #[arg(long, default_value_t = 2.0)]
    max_gap: f64,
    #[arg(long, default_value_t = 0.6)]
    min_strength: f64,
}

#[derive(Args)]
struct AnnotateArgs {
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    marks: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Keep alert times already present in the manifest.
    #[arg(long)]
    respect_existing: bool,
}

#[derive(Args, Clone)]
struct PrepArgs {
    #[arg(long, default_value_t = 2.0)]
    horizon: f64,
    #[arg(long, default_value_t = 4.0)]
    synth_neg_len: f64,
    #[arg(long, default_value_t = 4.5)]
    synth_neg_min_alert: f64,
    #[arg(long, default_value_t = 1.5)]
    label_window: f64,
    #[arg(long, default_value = "event")]
    label_anchor: LabelAnchor,
    #[arg(long, default_value_t = 2)]
    oversample: usize,
    #[arg(long, default_value_t = 16)]
    clip_frames: usize,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 0.8)]
    train_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    val_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    test_frac: f64,
    /// auto (datasets without real negatives), always or never.
    #[arg(long, default_value = "auto")]
    synthetic_negatives: SyntheticNegatives,
}

impl PrepArgs {
    fn config(&self) -> PrepConfig {
        PrepConfig {
            horizon_s: self.horizon,
            synth_neg_len_s: self.synth_neg_len,
            synth_neg_min_alert_s: self.synth_neg_min_alert,
            label_window_s: self.label_window,
            label_anchor: self.label_anchor,
            oversample_rate: self.oversample,
            clip_frames: self.clip_frames,
            split_seed: self.split_seed,
            fractions: SplitFractions {
                train: self.train_frac,
                val: self.val_frac,
                test: self.test_frac,
            },
            synthetic_negatives: self.synthetic_negatives,
        }
    }
}

#[derive(Args)]
struct PrepCmd {
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    prep: PrepArgs,
    /// Keep splits already assigned in the manifest.
    #[arg(long)]
    respect_existing: bool,
}

#[derive(Args, Clone)]
struct TrainArgs {
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    train_config: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr_min: Option<f64>,
}

impl TrainArgs {
    fn config(&self) -> Result<TrainConfig> {
        let mut c = match &self.train_config {
            Some(p) => TrainConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
            None => TrainConfig::default(),
        };
        macro_rules! apply {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        apply!(
            lr,
            weight_decay,
            clip_norm,
            beta1,
            beta2,
            eps,
            epochs,
            batch_size,
            patience,
            seed,
            lr_min
        );
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args, Clone)]
struct HeadArgs {
    /// linear, probe-linear or probe-mlp.
    #[arg(long, default_value = "probe-mlp")]
    mode: HeadMode,
    #[arg(long, default_value_t = 12)]
    num_queries: usize,
    #[arg(long, default_value_t = 64)]
    proj_dim: usize,
    #[arg(long, default_value_t = 768)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    dropout: f64,
}

impl HeadArgs {
    fn options(&self) -> HeadOptions {
        HeadOptions {
            mode: self.mode,
            num_queries: self.num_queries,
            proj_dim: self.proj_dim,
            hidden_dim: self.hidden_dim,
            dropout: self.dropout,
        }
    }
}

#[derive(Args)]
struct TrainCmd {
    #[command(flatten)]
    out: OutArg,
    /// Output directory of `prep`.
    #[arg(long)]
    prep: PathBuf,
    /// Embedding index CSV (`video_id,clip_end_t,path`).
    #[arg(long)]
    embeddings: PathBuf,
    #[command(flatten)]
    head: HeadArgs,
    #[command(flatten)]
    train: TrainArgs,
    /// Positive oversampling rate (default: the one recorded by `prep`).
    #[arg(long)]
    oversample: Option<usize>,
}

/// A split name, or `all`.
#[derive(Clone, Copy)]
struct SplitArg(Option<Split>);

impl std::str::FromStr for SplitArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "all" {
            Ok(SplitArg(None))
        } else {
            s.parse().map(|v| SplitArg(Some(v)))
        }
    }
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    prep: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    split: SplitArg,
}

#[derive(Args, Clone)]
struct EvalArgs {
    /// Alert threshold for mTTA, detection rate, precision and recall.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Threshold for the TTA distribution.
    #[arg(long, default_value_t = 0.8)]
    confidence: f64,
    #[arg(long, default_value_t = 0.85)]
    category_threshold: f64,
    #[arg(long, default_value = "vehicle")]
    reference_category: String,
    /// max or last.
    #[arg(long, default_value = "max")]
    aggregation: Aggregation,
    /// Also score positives on samples after their event.
    #[arg(long)]
    include_post_event: bool,
}

impl EvalArgs {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            aggregation: self.aggregation,
            threshold: self.threshold,
            confidence: self.confidence,
            category_threshold: self.category_threshold,
            reference_category: self.reference_category.clone(),
            truncate_at_event: !self.include_post_event,
        }
    }
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=PATH, got `{s}`"))?;
    if name.is_empty() || path.is_empty() {
        return Err(format!("expected NAME=PATH, got `{s}`"));
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

#[derive(Args)]
struct EvalCmd {
    #[command(flatten)]
    out: OutArg,
    /// Score traces per method as NAME=PATH; repeatable.
    #[arg(long = "scores", value_parser = parse_named, required = true)]
    scores: Vec<(String, PathBuf)>,
    #[arg(long)]
    manifest: PathBuf,
    /// train, val, test or all.
    #[arg(long, default_value = "test")]
    split: SplitArg,
    #[command(flatten)]
    eval: EvalArgs,
}

#[derive(Args)]
struct FcwCmd {
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    detections: PathBuf,
    #[arg(long, default_value_t = 15.0)]
    distance_threshold: f64,
    #[arg(long, default_value_t = 1.3)]
    camera_height: f64,
    #[arg(long, default_value_t = 1.0)]
    focal_ratio: f64,
    #[arg(long, value_delimiter = ',', default_values_t = ["car", "truck", "bus", "motorcycle"].map(String::from))]
    classes: Vec<String>,
    #[arg(long, default_value_t = 3)]
    smoothing_window: usize,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    out: OutArg,
    /// `eval_report.json` files; repeatable.
    #[arg(long = "eval")]
    eval_reports: Vec<PathBuf>,
    /// Training histories as NAME=PATH; repeatable.
    #[arg(long = "history", value_parser = parse_named)]
    histories: Vec<(String, PathBuf)>,
    /// `reaction_stats.json` from `annotate`.
    #[arg(long)]
    reaction_stats: Option<PathBuf>,
}

#[derive(Args)]
struct AblateCmd {
    #[command(flatten)]
    out: OutArg,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, value_delimiter = ',')]
    label_windows: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    oversample_rates: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    modes: Vec<HeadMode>,
    /// Subset-scaling runs over these fractions of the training videos.
    #[arg(long, value_delimiter = ',')]
    train_fractions: Vec<f64>,
    #[arg(long)]
    respect_existing: bool,
    #[command(flatten)]
    prep: PrepArgs,
    #[command(flatten)]
    head: HeadArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    eval: EvalArgs,
}

fn announce(out: &Path) {
    println!("outputs in {}", out.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let config = SynthConfig {
                seed: a.seed,
                datasets: a.datasets,
                ego_positives: a.ego_positives,
                non_ego_positives: a.non_ego_positives,
                negatives: a.negatives,
                early_events: a.early_events,
                duration_s: a.duration,
                fps: a.fps,
                clip_frames: a.clip_frames,
                patches: a.patches,
                dim: a.dim,
                noise: a.noise,
                signal: a.signal,
                max_gap_s: a.max_gap,
                min_strength: a.min_strength,
                ..SynthConfig::default()
            };
            let resolved = serde_json::to_value(&config)?;
            let out = a.out.resolve("synth", &resolved);
            pipeline::ensure_dir(&out)?;
            let corpus = synth::generate(&config)?;
            let paths = synth::write_corpus(&out, &corpus)?;
            pipeline::write_run_meta(
                &out,
                "synth",
                &[],
                &[
                    "manifest.csv",
                    "marks.csv",
                    "detections.jsonl",
                    "embeddings/index.csv",
                ],
                resolved,
            )?;
            println!(
                "{} videos, {} clips",
                corpus.records.len(),
                corpus.clips.len()
            );
            println!("manifest: {}", paths.manifest.display());
            println!("embedding index: {}", paths.embedding_index.display());
        }
        Command::Annotate(a) => {
            let resolved = json!({ "marks": a.marks, "manifest": a.manifest, "respect_existing": a.respect_existing });
            let out = a.out.resolve("annotate", &resolved);
            let s = pipeline::cmd_annotate(&a.marks, &a.manifest, &out, a.respect_existing)?;
            println!(
                "updated {}, kept {}, skipped {}, unknown {}",
                s.updated,
                s.kept_existing,
                s.skipped.len(),
                s.unknown.len()
            );
            if let Some(st) = &s.stats {
                println!(
                    "reaction time n={} median {:.2}s mean {:.2}s sd {:.2}s",
                    st.n, st.median_s, st.mean_s, st.sd_s
                );
            }
            announce(&out);
        }
        Command::Prep(a) => {
            let config = a.prep.config();
            let resolved = json!({ "manifest": a.manifest, "prep": config, "respect_existing": a.respect_existing });
            let out = a.out.resolve("prep", &resolved);
            let m = pipeline::cmd_prep(&a.manifest, &out, &config, a.respect_existing)?;
            println!(
                "{} records ({} train / {} val / {} test), {} clips ({} positive)",
                m.n_records,
                m.splits.train,
                m.splits.val,
                m.splits.test,
                m.n_clips,
                m.n_positive_clips
            );
            announce(&out);
        }
        Command::Train(a) => {
            let config = a.train.config()?;
            let head = a.head.options();
            let resolved = json!({ "prep": a.prep, "embeddings": a.embeddings, "head": head, "train": config, "oversample": a.oversample });
            let out = a.out.resolve("train", &resolved);
            let s =
                pipeline::cmd_train(&a.prep, &a.embeddings, &out, &head, &config, a.oversample)?;
            println!(
                "{} epochs, best val AP {:.4} at epoch {} ({} parameters)",
                s.epochs_run, s.best_val_ap, s.best_epoch, s.num_parameters
            );
            announce(&out);
        }
        Command::Score(a) => {
            let resolved = json!({ "checkpoint": a.checkpoint, "prep": a.prep, "embeddings": a.embeddings, "split": a.split.0.map(|s| s.to_string()) });
            let out = a.out.resolve("score", &resolved);
            let traces =
                pipeline::cmd_score(&a.checkpoint, &a.prep, &a.embeddings, &out, a.split.0)?;
            println!("scored {} videos", traces.len());
            announce(&out);
        }
        Command::Eval(a) => {
            let options = a.eval.options();
            let resolved = json!({ "scores": a.scores, "manifest": a.manifest, "split": a.split.0.map(|s| s.to_string()), "options": options });
            let out = a.out.resolve("eval", &resolved);
            let output = pipeline::cmd_eval(&a.scores, &a.manifest, &out, a.split.0, &options)?;
            for r in output.rows() {
                let mtta = r
                    .mtta_s
                    .map(|m| format!("{m:.2}s"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{:<16} {:<10} AP {:.4}  AUC {:.4}  mTTA {mtta}  detected {:.1}%",
                    r.method,
                    r.dataset,
                    r.ap,
                    r.auc,
                    100.0 * r.detection_rate
                );
            }
            announce(&out);
        }
        Command::Fcw(a) => {
            let config = FcwConfig {
                distance_threshold_m: a.distance_threshold,
                camera_height_m: a.camera_height,
                focal_ratio: a.focal_ratio,
                relevant_classes: a.classes.into_iter().collect(),
                smoothing_window: a.smoothing_window,
                ..FcwConfig::default()
            };
            let resolved = json!({ "detections": a.detections, "fcw": config });
            let out = a.out.resolve("fcw", &resolved);
            let traces = pipeline::cmd_fcw(&a.detections, &out, &config)?;
            println!("scored {} videos", traces.len());
            announce(&out);
        }
        Command::Report(a) => {
            let resolved = json!({ "eval": a.eval_reports, "history": a.histories, "reaction_stats": a.reaction_stats });
            let out = a.out.resolve("report", &resolved);
            let written = pipeline::cmd_report(
                &a.eval_reports,
                &a.histories,
                a.reaction_stats.as_deref(),
                &out,
            )?;
            println!("wrote {}", written.join(", "));
            announce(&out);
        }
        Command::Ablate(a) => {
            let mut opts = AblateOptions::new(
                a.prep.config(),
                a.train.config()?,
                a.head.options(),
                a.eval.options(),
            );
            opts.label_windows = a.label_windows;
            opts.oversample_rates = a.oversample_rates;
            opts.modes = a.modes;
            opts.train_fractions = a.train_fractions;
            opts.respect_existing = a.respect_existing;
            if opts.label_windows.is_empty()
                && opts.oversample_rates.is_empty()
                && opts.modes.is_empty()
                && opts.train_fractions.is_empty()
            {
                bail!("empty grid: give --label-windows, --oversample-rates, --modes or --train-fractions");
            }
            let resolved =
                json!({ "manifest": a.manifest, "embeddings": a.embeddings, "options": opts });
            let out = a.out.resolve("ablate", &resolved);
            let tables = pipeline::cmd_ablate(&a.manifest, &a.embeddings, &out, &opts)?;
            for (name, rows) in [
                ("label window", &tables.label_window),
                ("oversampling", &tables.oversampling),
                ("architecture", &tables.architecture),
                ("train fraction", &tables.scaling),
            ] {
                for r in rows.iter() {
                    println!(
                        "{name:<14} {:<12} AP {:.4}  AUC {:.4}  recall {:.3}",
                        r.value, r.ap, r.auc, r.recall
                    );
                }
            }
            announce(&out);
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
