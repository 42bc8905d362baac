use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use dines::features::{load_features, FeatureMatrix};
use dines::graph::EdgeSplit;
use dines::metrics::{mean_std, silhouette_score};
use dines::train::{
    degree_correlation, evaluate, predict_test, report_from_predictions, train, Checkpoint, DegreeCorrelation,
    EdgePrediction, EvalReport, Hyperparams, TrainConfig, Variant,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{parse_seeds, EvalArgs, ModelArgs, TrainArgs};
use crate::manifest::{write_json, RunManifest};
use crate::prepare::FEATURES_FILE;

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const REPORT_FILE: &str = "report.json";
pub const PROBS_FILE: &str = "probs.tsv";

/// Applies explicit flags over the dataset preset or global defaults.
pub fn resolve_config(model: &ModelArgs, d_in: usize, seed: u64) -> Result<TrainConfig> {
    let mut hp = model.dataset.map_or_else(Hyperparams::default, |d| d.hyperparams(model.tuned_for));
    if let Some(k) = model.k {
        hp.factors = k;
    }
    if let Some(l) = model.layers {
        hp.layers = l;
    }
    if let Some(d) = model.d_out {
        hp.d_out = d;
    }
    if let Some(v) = model.lambda_disc {
        hp.lambda_disc = v;
    }
    if let Some(v) = model.lr {
        hp.learning_rate = v;
    }
    if let Some(v) = model.weight_decay {
        hp.weight_decay = v;
    }
    if model.variant == Variant::Entangled && model.k.is_some_and(|k| k != 1) {
        log::warn!("the entangled variant uses K = 1; ignoring --k {}", hp.factors);
    }
    let mut cfg = TrainConfig::from_hyperparams(&hp, d_in, model.aggregator, seed).with_variant(model.variant);
    cfg.epochs = model.epochs;
    cfg.validate()?;
    Ok(cfg)
}

pub struct Prepared {
    pub split: EdgeSplit,
    pub features: FeatureMatrix,
}

pub fn load_prepared(dir: &Path) -> Result<Prepared> {
    let split = EdgeSplit::load(dir).with_context(|| format!("loading split from {}", dir.display()))?;
    let features = load_features(dir.join(FEATURES_FILE), split.node_count)
        .with_context(|| format!("loading features from {}", dir.display()))?;
    Ok(Prepared { split, features })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub silhouette: Option<f64>,
    pub degree_correlation: Option<Vec<DegreeCorrelation>>,
}

/// Contents of `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub model: String,
    pub seed: u64,
    #[serde(flatten)]
    pub report: EvalReport,
    pub final_loss: Option<f64>,
    pub diagnostics: Option<Diagnostics>,
    pub config: TrainConfig,
    pub data: PathBuf,
}

pub fn write_probs(path: &Path, preds: &[EdgePrediction]) -> Result<()> {
    let mut out = String::with_capacity(preds.len() * 32);
    out.push_str("src\tdst\tlabel\tprobability\n");
    for p in preds {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", p.src, p.dst, p.label.as_i8(), p.probability);
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn diagnostics(outcome: &dines::train::TrainOutcome, data: &Prepared, args: &TrainArgs, seed: u64) -> Result<Diagnostics> {
    let graph = data.split.train_graph();
    let z = outcome.model.embed(&outcome.store, &graph, data.features.values())?;
    let silhouette = match silhouette_score(&z, args.silhouette_sample, seed) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("silhouette skipped: {e}");
            None
        }
    };
    let degree = match degree_correlation(&outcome.model.encoder, &outcome.store, &graph, data.features.values()) {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("degree correlation skipped: {e}");
            None
        }
    };
    Ok(Diagnostics {
        silhouette,
        degree_correlation: degree,
    })
}

/// One training run written to `out`.
pub fn train_once(args: &TrainArgs, data: &Prepared, model: &ModelArgs, seed: u64, out: &Path) -> Result<ReportFile> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let cfg = resolve_config(model, data.features.dim(), seed)?;
    log::info!("training {} seed {seed} for {} epochs", cfg.variant.label(), cfg.epochs);
    let outcome = train(&data.split, &data.features, &cfg)?;
    let (report, preds) = evaluate(&outcome, &data.split, &data.features)?;

    Checkpoint::new(data.split.node_count, cfg.clone(), outcome.model.clone(), outcome.store.clone())
        .save(out.join(CHECKPOINT_FILE))?;
    write_probs(&out.join(PROBS_FILE), &preds)?;
    let mut losses = String::from("epoch\tloss\n");
    for (i, l) in outcome.losses.iter().enumerate() {
        let _ = writeln!(losses, "{}\t{l}", i + 1);
    }
    fs::write(out.join("losses.tsv"), losses)?;
    if args.save_embeddings {
        outcome
            .model
            .embed(&outcome.store, &data.split.train_graph(), data.features.values())?
            .save(out.join("embeddings.tsv"))?;
    }
    let diag = if args.diagnostics { Some(diagnostics(&outcome, data, args, seed)?) } else { None };
    let file = ReportFile {
        model: cfg.variant.label().to_string(),
        seed,
        report,
        final_loss: outcome.losses.last().copied(),
        diagnostics: diag,
        config: cfg,
        data: args.data.clone(),
    };
    write_json(&out.join(REPORT_FILE), &file)?;
    println!(
        "{} seed {seed}: AUC {:.2}  Macro-F1 {:.2}  ({:.4} s/epoch)",
        file.model, file.report.auc, file.report.macro_f1, file.report.train_seconds
    );
    Ok(file)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl MeanStd {
    pub fn of(values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        MeanStd { mean, std, values }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub seeds: Vec<u64>,
    pub auc: MeanStd,
    pub macro_f1: MeanStd,
    pub silhouette: Option<MeanStd>,
}

fn seeds_of(args: &TrainArgs) -> Result<Option<Vec<u64>>> {
    args.seeds
        .as_deref()
        .map(parse_seeds)
        .transpose()
        .map_err(anyhow::Error::msg)
}

/// Runs every requested seed, in per-seed subdirectories when more than one.
fn train_seeds(args: &TrainArgs, data: &Prepared, model: &ModelArgs, out: &Path) -> Result<Summary> {
    let seeds = seeds_of(args)?;
    let runs: Vec<ReportFile> = match &seeds {
        None => vec![train_once(args, data, model, args.seed, out)?],
        Some(seeds) => seeds
            .iter()
            .map(|&s| train_once(args, data, model, s, &out.join(format!("seed-{s}"))))
            .collect::<Result<_>>()?,
    };
    let sil: Option<Vec<f64>> = runs
        .iter()
        .map(|r| r.diagnostics.as_ref().and_then(|d| d.silhouette))
        .collect();
    let summary = Summary {
        model: runs[0].model.clone(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        auc: MeanStd::of(runs.iter().map(|r| r.report.auc).collect()),
        macro_f1: MeanStd::of(runs.iter().map(|r| r.report.macro_f1).collect()),
        silhouette: sil.map(MeanStd::of),
    };
    if seeds.is_some() {
        write_json(&out.join("summary.json"), &summary)?;
        println!(
            "{} over {} seeds: AUC {:.1}±{:.1}  Macro-F1 {:.1}±{:.1}",
            summary.model,
            summary.seeds.len(),
            summary.auc.mean,
            summary.auc.std,
            summary.macro_f1.mean,
            summary.macro_f1.std
        );
    }
    Ok(summary)
}

fn manifest_for(command: &str, raw_args: &[String], args: &TrainArgs, d_in: usize) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, raw_args, &args.out);
    m.inputs = vec![args.data.clone()];
    m.seeds = seeds_of(args)?.unwrap_or_else(|| vec![args.seed]);
    m.config = serde_json::to_value(resolve_config(&args.model, d_in, m.seeds[0])?)?;
    Ok(m)
}

pub fn run_train(args: &TrainArgs, raw_args: &[String]) -> Result<()> {
    let data = load_prepared(&args.data)?;
    let manifest = manifest_for("train", raw_args, args, data.features.dim())?;
    train_seeds(args, &data, &args.model, &args.out)?;
    manifest.finish(&args.out)
}

pub fn run_ablate(args: &TrainArgs, raw_args: &[String]) -> Result<()> {
    let data = load_prepared(&args.data)?;
    let mut manifest = manifest_for("ablate", raw_args, args, data.features.dim())?;
    let mut table = String::from("variant\tmodel\tauc_mean\tauc_std\tmacro_f1_mean\tmacro_f1_std\n");
    let mut configs = Vec::new();
    for variant in Variant::ALL {
        let model = ModelArgs {
            variant,
            ..args.model.clone()
        };
        configs.push(resolve_config(&model, data.features.dim(), args.seed)?);
        let s = train_seeds(args, &data, &model, &args.out.join(variant.name()))?;
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{}\t{}\t{}",
            variant.name(),
            s.model,
            s.auc.mean,
            s.auc.std,
            s.macro_f1.mean,
            s.macro_f1.std
        );
    }
    fs::write(args.out.join("ablation.tsv"), &table)?;
    print!("{table}");
    manifest.config = json!(configs);
    manifest.finish(&args.out)
}

pub fn run_eval(args: &EvalArgs, raw_args: &[String]) -> Result<()> {
    let ckpt = Checkpoint::load(&args.checkpoint).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let data = load_prepared(&args.data)?;
    ckpt.expect_nodes(data.split.node_count)?;
    let preds = predict_test(&ckpt.model, &ckpt.params, &data.split, &data.features)?;
    let report = report_from_predictions(&preds)?;
    println!(
        "{} seed {}: AUC {:.2}  Macro-F1 {:.2}  on {} test edges",
        ckpt.config.variant.label(),
        ckpt.config.seed,
        report.auc,
        report.macro_f1,
        report.test_edges
    );
    if let Some(out) = &args.out {
        fs::create_dir_all(out)?;
        let mut manifest = RunManifest::new("eval", raw_args, out);
        manifest.inputs = vec![args.checkpoint.clone(), args.data.clone()];
        manifest.seeds = vec![ckpt.config.seed];
        manifest.config = serde_json::to_value(&ckpt.config)?;
        write_probs(&out.join(PROBS_FILE), &preds)?;
        let file = ReportFile {
            model: ckpt.config.variant.label().to_string(),
            seed: ckpt.config.seed,
            report,
            final_loss: None,
            diagnostics: None,
            config: ckpt.config.clone(),
            data: args.data.clone(),
        };
        write_json(&out.join(REPORT_FILE), &file)?;
        manifest.finish(out)?;
    }
    Ok(())
}
