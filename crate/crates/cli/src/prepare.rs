use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dines::features::tsvd_features;
use dines::graph::{load_edge_list, save_edge_list, split_edges, GraphStats, IngestStats, SignedDigraph};
use dines::train::{Dataset, DatasetStats};
use serde::Serialize;
use serde_json::json;

use crate::args::PrepareArgs;
use crate::manifest::{write_json, RunManifest};

pub const GRAPH_FILE: &str = "graph.tsv";
pub const FEATURES_FILE: &str = "features.tsv";

#[derive(Serialize)]
struct StatsFile<'a> {
    dataset: Option<Dataset>,
    graph: &'a GraphStats,
    ingest: &'a IngestStats,
}

/// Locates a dataset's release file inside `dir`.
fn resolve_input(input: &Path, dataset: Option<Dataset>) -> Result<PathBuf> {
    if !input.is_dir() {
        return Ok(input.to_path_buf());
    }
    let Some(ds) = dataset else {
        bail!("{} is a directory; pass a file or name the --dataset", input.display());
    };
    ds.file_names()
        .iter()
        .map(|f| input.join(f))
        .find(|p| p.is_file())
        .with_context(|| format!("none of {:?} found in {}", ds.file_names(), input.display()))
}

pub fn print_stats(name: &str, s: &GraphStats) {
    println!("{:<12} {:>9} {:>10} {:>10} {:>10} {:>7}", "dataset", "|V|", "|E|", "|E+|", "|E-|", "ρ(+)");
    println!(
        "{:<12} {:>9} {:>10} {:>10} {:>10} {:>7.1}",
        name, s.nodes, s.edges, s.positive, s.negative, s.positive_ratio
    );
}

/// Whether loaded statistics agree with the published `n`, `m` and `ρ(+)`.
pub fn matches_published(s: &GraphStats, p: &DatasetStats) -> bool {
    let ratio = (s.positive_ratio * 10.0).round() as usize;
    s.nodes == p.nodes && s.edges == p.edges && ratio == p.positive_ratio_permille
}

pub fn run(args: &PrepareArgs, raw_args: &[String]) -> Result<()> {
    let mut manifest = RunManifest::new("prepare", raw_args, &args.out);
    let input = resolve_input(&args.input, args.dataset)?;
    let Some(format) = args.kind.or(args.dataset.map(Dataset::format)) else {
        bail!("pass --kind or --dataset to select the raw format");
    };
    let (graph, ingest) = load_edge_list(&input, format).with_context(|| format!("loading {}", input.display()))?;
    let stats = graph.stats();
    let name = args.dataset.map_or_else(
        || input.file_stem().map_or("graph".into(), |s| s.to_string_lossy().into_owned()),
        |d| d.name().to_string(),
    );
    print_stats(&name, &stats);
    log::info!(
        "{} records: {} self-loops, {} duplicates, {} neutral dropped",
        ingest.records,
        ingest.self_loops,
        ingest.duplicates,
        ingest.neutral
    );
    if let Some(ds) = args.dataset {
        let p = ds.stats();
        if matches_published(&stats, &p) {
            println!("matches published statistics");
        } else {
            println!(
                "differs from published statistics: n={} m={} ρ(+)={:.1}",
                p.nodes,
                p.edges,
                p.positive_ratio_permille as f64 / 10.0
            );
        }
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let split = split_edges(&graph, args.ratio, args.split_seed)?;
    split.save(&args.out)?;
    save_edge_list(args.out.join(GRAPH_FILE), graph.node_count(), graph.edges())?;
    println!("split: {} train / {} test edges", split.train.len(), split.test.len());

    let basis: SignedDigraph = if args.tsvd_full_graph { graph.clone() } else { split.train_graph() };
    let features = tsvd_features(&basis, args.rank, args.feature_seed)?;
    features.save(args.out.join(FEATURES_FILE))?;
    write_json(
        &args.out.join("stats.json"),
        &StatsFile {
            dataset: args.dataset,
            graph: &stats,
            ingest: &ingest,
        },
    )?;

    manifest.inputs = vec![input];
    manifest.seeds = vec![args.split_seed, args.feature_seed];
    manifest.config = json!({
        "format": format,
        "dataset": args.dataset,
        "ratio": args.ratio,
        "split_seed": args.split_seed,
        "rank": args.rank,
        "feature_seed": args.feature_seed,
        "tsvd_graph": if args.tsvd_full_graph { "all" } else { "train" },
    });
    manifest.finish(&args.out)
}
