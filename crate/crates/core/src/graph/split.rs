use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::digraph::{Edge, SignedDigraph};
use super::io::{load_edge_list, save_edge_list, EdgeFormat};
use crate::error::{Error, Result};

pub const DEFAULT_TRAIN_RATIO: f64 = 0.8;

/// Disjoint train/test partition of a graph's edges.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeSplit {
    pub node_count: usize,
    pub train: Vec<Edge>,
    pub test: Vec<Edge>,
    pub seed: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub nodes: usize,
    pub train: usize,
    pub test: usize,
}

/// Metadata written next to the split edge lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMeta {
    pub seed: u64,
    pub ratio: f64,
    pub counts: SplitCounts,
}

/// Shuffles the edges with a seeded RNG and cuts at `round(ratio · m)`.
pub fn split_edges(graph: &SignedDigraph, ratio: f64, seed: u64) -> Result<EdgeSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::usage(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let m = graph.edge_count();
    if m < 10 {
        return Err(Error::usage(format!("need at least 10 edges to split, got {m}")));
    }
    let mut edges = graph.edges().to_vec();
    edges.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((ratio * m as f64).round() as usize).clamp(1, m - 1);
    let test = edges.split_off(cut);
    Ok(EdgeSplit {
        node_count: graph.node_count(),
        train: edges,
        test,
        seed,
        ratio,
    })
}

impl EdgeSplit {
    /// Graph over all nodes containing only the training edges.
    pub fn train_graph(&self) -> SignedDigraph {
        SignedDigraph::from_clean_edges(self.node_count, self.train.clone())
    }

    pub fn meta(&self) -> SplitMeta {
        SplitMeta {
            seed: self.seed,
            ratio: self.ratio,
            counts: SplitCounts {
                nodes: self.node_count,
                train: self.train.len(),
                test: self.test.len(),
            },
        }
    }

    /// Writes `train.tsv`, `test.tsv` and `split.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        save_edge_list(dir.join("train.tsv"), self.node_count, &self.train)?;
        save_edge_list(dir.join("test.tsv"), self.node_count, &self.test)?;
        fs::write(dir.join("split.json"), serde_json::to_string_pretty(&self.meta())?)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: SplitMeta = serde_json::from_str(&fs::read_to_string(dir.join("split.json"))?)?;
        let (train, _) = load_edge_list(dir.join("train.tsv"), EdgeFormat::Canonical)?;
        let (test, _) = load_edge_list(dir.join("test.tsv"), EdgeFormat::Canonical)?;
        let n = meta.counts.nodes;
        if train.node_count() > n || test.node_count() > n {
            return Err(Error::Schema(format!(
                "split.json declares {n} nodes but the edge lists reference more"
            )));
        }
        if train.edge_count() != meta.counts.train || test.edge_count() != meta.counts.test {
            return Err(Error::Schema("edge counts disagree with split.json".into()));
        }
        Ok(EdgeSplit {
            node_count: n,
            train: train.edges().to_vec(),
            test: test.edges().to_vec(),
            seed: meta.seed,
            ratio: meta.ratio,
        })
    }
}
