use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use dines::graph::{generate_synthetic, load_edge_list, EdgeFormat, SignedDigraph, SyntheticSpec};
use dines::train::{timing_fit, timing_sweep, TimingConfig, TimingRow};
use dines::metrics::LinearFit;
use serde::Serialize;
use serde_json::json;

use crate::args::ScaleArgs;
use crate::manifest::{write_json, RunManifest};
use crate::prepare::GRAPH_FILE;
use crate::run::resolve_config;

#[derive(Serialize)]
struct TimingFile<'a> {
    rows: &'a [TimingRow],
    forward_fit: Option<LinearFit>,
    train_fit: Option<LinearFit>,
}

fn source_graph(args: &ScaleArgs) -> Result<(SignedDigraph, serde_json::Value)> {
    if let Some(dir) = &args.data {
        let path = dir.join(GRAPH_FILE);
        let (g, _) = load_edge_list(&path, EdgeFormat::Canonical).with_context(|| format!("loading {}", path.display()))?;
        return Ok((g, json!({ "data": dir })));
    }
    if let Some(path) = &args.input {
        let kind = args.kind.unwrap_or(EdgeFormat::Canonical);
        let (g, _) = load_edge_list(path, kind).with_context(|| format!("loading {}", path.display()))?;
        return Ok((g, json!({ "input": path, "kind": kind })));
    }
    let (Some(nodes), Some(edges)) = (args.nodes, args.edges) else {
        bail!("pass --data, --input, or --nodes with --edges");
    };
    let spec = SyntheticSpec::new(nodes, edges, args.positive_ratio, args.graph_seed);
    log::info!("generating synthetic graph n={nodes} m={edges}");
    let g = generate_synthetic(&spec)?;
    let source = json!({
        "synthetic": { "nodes": nodes, "edges": edges, "positive_ratio": args.positive_ratio, "skew": spec.skew, "seed": args.graph_seed }
    });
    Ok((g, source))
}

pub fn run(args: &ScaleArgs, raw_args: &[String]) -> Result<()> {
    let mut manifest = RunManifest::new("scale", raw_args, &args.out);
    let (graph, source) = source_graph(args)?;
    let train = resolve_config(&args.model, args.d_in, args.seed)?;
    let cfg = TimingConfig {
        train,
        warmup: args.warmup,
        epochs: args.timing_epochs,
        feature_seed: args.seed,
    };
    let rows = timing_sweep(&graph, &args.fractions, &cfg)?;

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut table = String::from("fraction\tnodes\tedges\tforward_seconds\ttrain_seconds\n");
    for r in &rows {
        let _ = writeln!(table, "{}\t{}\t{}\t{}\t{}", r.fraction, r.nodes, r.edges, r.forward_seconds, r.train_seconds);
    }
    fs::write(args.out.join("timing.tsv"), &table)?;
    print!("{table}");
    let (forward_fit, train_fit) = match timing_fit(&rows) {
        Ok((f, t)) => {
            println!("forward: slope {:.3e} s/edge, R² {:.4}", f.slope, f.r_squared);
            println!("train:   slope {:.3e} s/edge, R² {:.4}", t.slope, t.r_squared);
            (Some(f), Some(t))
        }
        Err(e) => {
            log::warn!("no linear fit: {e}");
            (None, None)
        }
    };
    write_json(
        &args.out.join("timing.json"),
        &TimingFile {
            rows: &rows,
            forward_fit,
            train_fit,
        },
    )?;
    if let Some(p) = &args.data {
        manifest.inputs.push(p.clone());
    }
    if let Some(p) = &args.input {
        manifest.inputs.push(p.clone());
    }
    manifest.seeds = vec![args.seed];
    manifest.config = json!({ "source": source, "fractions": args.fractions, "timing": cfg });
    manifest.finish(&args.out)
}
