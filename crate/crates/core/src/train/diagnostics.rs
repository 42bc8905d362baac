use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::trainer::Trainer;
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Provenance};
use crate::graph::{subgraph_prefix, Delta, SignedDigraph};
use crate::metrics::{linear_fit, spearman, LinearFit};
use crate::numerics::{ParamStore, Tape, Tensor};

/// Rank correlation between first-layer message norms and degrees for one
/// neighbor type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeCorrelation {
    pub delta: Delta,
    pub coefficient: f64,
    /// Nodes with at least one neighbor of this type.
    pub nodes: usize,
}

/// First-layer message norms `‖∥_k m_u,k^δ‖` for every node, per δ.
pub fn message_norms(encoder: &Encoder, store: &ParamStore, graph: &SignedDigraph, features: &Tensor) -> Result<[Vec<f64>; 4]> {
    let mut tape = Tape::new();
    let x = tape.leaf(features.clone())?;
    let trace = encoder.forward(&mut tape, store, graph, x)?;
    let first = trace.messages[0];
    Ok(Delta::ALL.map(|d| {
        let m = tape.value(first[d.index()]);
        (0..m.rows()).map(|u| m.row(u).iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }))
}

pub fn degree_correlation(
    encoder: &Encoder,
    store: &ParamStore,
    graph: &SignedDigraph,
    features: &Tensor,
) -> Result<Vec<DegreeCorrelation>> {
    let norms = message_norms(encoder, store, graph, features)?;
    Delta::ALL
        .iter()
        .map(|&d| {
            let (deg, norm): (Vec<f64>, Vec<f64>) = (0..graph.node_count())
                .filter(|&u| graph.degree(u, d) > 0)
                .map(|u| (graph.degree(u, d) as f64, norms[d.index()][u]))
                .unzip();
            if deg.len() < 3 {
                return Err(Error::UndefinedMetric(format!(
                    "only {} nodes have {} neighbors",
                    deg.len(),
                    d.name()
                )));
            }
            Ok(DegreeCorrelation {
                delta: d,
                coefficient: spearman(&norm, &deg)?,
                nodes: deg.len(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingConfig {
    pub train: TrainConfig,
    pub warmup: usize,
    pub epochs: usize,
    pub feature_seed: u64,
}

impl TimingConfig {
    pub fn new(train: TrainConfig) -> Self {
        TimingConfig {
            train,
            warmup: 3,
            epochs: 20,
            feature_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub fraction: f64,
    pub nodes: usize,
    pub edges: usize,
    /// Mean seconds per forward pass.
    pub forward_seconds: f64,
    /// Mean seconds per forward + backward + update.
    pub train_seconds: f64,
}

/// Standard normal `n × d` features; timing does not depend on their values.
pub fn random_features(n: usize, d: usize, seed: u64) -> Result<FeatureMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    FeatureMatrix::new(Tensor::matrix(n, d, data)?, Provenance::File)
}

/// Per-epoch wall-clock time on leading-block subgraphs holding the given
/// fractions of the edges.
pub fn timing_sweep(graph: &SignedDigraph, fractions: &[f64], cfg: &TimingConfig) -> Result<Vec<TimingRow>> {
    if fractions.is_empty() {
        return Err(Error::usage("no fractions given"));
    }
    if fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) || fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("fractions must be strictly ascending in (0, 1]"));
    }
    if cfg.epochs == 0 {
        return Err(Error::usage("timing needs at least one measured epoch"));
    }
    let m = graph.edge_count();
    let mut rows = Vec::with_capacity(fractions.len());
    for &fraction in fractions {
        let limit = ((fraction * m as f64).ceil() as usize).clamp(1, m);
        let sub = subgraph_prefix(graph, limit)?;
        let feats = random_features(sub.node_count(), cfg.train.encoder.d_in, cfg.feature_seed)?;
        let edges = sub.edges().to_vec();
        let (nodes, edge_count) = (sub.node_count(), sub.edge_count());
        let mut trainer = Trainer::new(&cfg.train, sub, &feats, &edges)?;
        for _ in 0..cfg.warmup {
            trainer.step()?;
        }
        let (mut fwd, mut total) = (0.0, 0.0);
        for _ in 0..cfg.epochs {
            let s = trainer.step()?;
            fwd += s.forward_seconds;
            total += s.step_seconds;
        }
        let row = TimingRow {
            fraction,
            nodes,
            edges: edge_count,
            forward_seconds: fwd / cfg.epochs as f64,
            train_seconds: total / cfg.epochs as f64,
        };
        log::info!(
            "m={} n={} forward {:.4}s train {:.4}s",
            row.edges,
            row.nodes,
            row.forward_seconds,
            row.train_seconds
        );
        rows.push(row);
    }
    Ok(rows)
}

/// Least-squares fits of forward and training time against edge count.
pub fn timing_fit(rows: &[TimingRow]) -> Result<(LinearFit, LinearFit)> {
    let m: Vec<f64> = rows.iter().map(|r| r.edges as f64).collect();
    let fwd: Vec<f64> = rows.iter().map(|r| r.forward_seconds).collect();
    let train: Vec<f64> = rows.iter().map(|r| r.train_seconds).collect();
    Ok((linear_fit(&m, &fwd)?, linear_fit(&m, &train)?))
}
