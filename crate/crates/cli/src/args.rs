use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dines::encoder::Aggregator;
use dines::graph::EdgeFormat;
use dines::train::{Dataset, Metric, Variant};

#[derive(Debug, Parser)]
#[command(name = "dines", version, about = "Disentangled signed graph neural network for link sign prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a raw edge list, split it, and compute TSVD features.
    Prepare(PrepareArgs),
    /// Train on a prepared split and report test metrics.
    Train(TrainArgs),
    /// Recompute test metrics from a saved checkpoint.
    Eval(EvalArgs),
    /// Train all four model variants on one prepared split.
    Ablate(TrainArgs),
    /// Measure per-epoch time on growing prefixes of a graph.
    Scale(ScaleArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PrepareArgs {
    /// Raw edge list, or a directory holding a dataset's release file.
    #[arg(long)]
    pub input: PathBuf,
    /// Raw file layout; inferred from `--dataset` when omitted.
    #[arg(long)]
    pub kind: Option<EdgeFormat>,
    #[arg(long)]
    pub dataset: Option<Dataset>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long, default_value_t = dines::graph::DEFAULT_TRAIN_RATIO)]
    pub ratio: f64,
    /// TSVD target rank (feature width).
    #[arg(long, default_value_t = 64)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub feature_seed: u64,
    /// Factorize the adjacency of all edges instead of the training edges.
    #[arg(long)]
    pub tsvd_full_graph: bool,
}

/// Model and optimizer flags; unset values come from the dataset preset or
/// the global defaults.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub dataset: Option<Dataset>,
    /// Metric whose validated preset is used with `--dataset`.
    #[arg(long, default_value = "auc")]
    pub tuned_for: Metric,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub d_out: Option<usize>,
    #[arg(long)]
    pub lambda_disc: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long, default_value = "sum")]
    pub aggregator: Aggregator,
    #[arg(long, default_value_t = dines::train::DEFAULT_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value = "full")]
    pub variant: Variant,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0, conflicts_with = "seeds")]
    pub seed: u64,
    /// Seed range such as `0..9` (inclusive) or a list `0,3,7`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Also write the final embeddings.
    #[arg(long)]
    pub save_embeddings: bool,
    /// Also compute factor silhouette and degree correlation.
    #[arg(long)]
    pub diagnostics: bool,
    /// Node subsample for the silhouette score.
    #[arg(long, default_value_t = 2000)]
    pub silhouette_sample: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write `report.json` and `probs.tsv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScaleArgs {
    /// Prepared directory whose training graph is swept.
    #[arg(long, conflicts_with_all = ["input", "nodes"])]
    pub data: Option<PathBuf>,
    /// Raw edge list to sweep.
    #[arg(long, requires = "kind", conflicts_with = "nodes")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub kind: Option<EdgeFormat>,
    /// Synthetic graph size.
    #[arg(long, requires = "edges")]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub edges: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    pub positive_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub graph_seed: u64,
    /// Ascending edge fractions in (0, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")]
    pub fractions: Vec<f64>,
    /// Width of the random input features.
    #[arg(long, default_value_t = 64)]
    pub d_in: usize,
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    #[arg(long, default_value_t = 20)]
    pub timing_epochs: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Output directory for the replay; defaults to the recorded one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `a..b` (inclusive) or a comma-separated list.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let spec = spec.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("invalid seed range '{spec}'"))?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| format!("invalid seed range '{spec}'"))?;
        if b < a {
            return Err(format!("empty seed range '{spec}'"));
        }
        (a..=b).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse().map_err(|_| format!("invalid seed '{s}'")))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}
