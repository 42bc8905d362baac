use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::digraph::{Edge, Sign, SignedDigraph};
use crate::error::{Error, Result};

/// Parameters of the recursive-quadrant (R-MAT style) signed graph generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub nodes: usize,
    pub edges: usize,
    /// Probability that an edge is positive.
    pub positive_ratio: f64,
    /// Probability of the top-left quadrant at every recursion level; the
    /// remaining mass goes 40/40/20 to the off-diagonal and bottom-right
    /// quadrants. 0.25 gives a uniform graph, larger values a heavier tail.
    pub skew: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(nodes: usize, edges: usize, positive_ratio: f64, seed: u64) -> Self {
        SyntheticSpec {
            nodes,
            edges,
            positive_ratio,
            skew: 0.57,
            seed,
        }
    }
}

/// Samples distinct directed edges by recursive quadrant descent until
/// `spec.edges` unique non-loop edges exist, then signs each one
/// independently.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SignedDigraph> {
    let (n, m) = (spec.nodes, spec.edges);
    if n < 2 {
        return Err(Error::usage("synthetic graph needs at least 2 nodes"));
    }
    if m < n {
        return Err(Error::usage(format!("edge target {m} below node target {n}")));
    }
    let capacity = (n as u128) * (n as u128 - 1);
    if m as u128 > capacity {
        return Err(Error::usage(format!(
            "{m} edges infeasible on {n} nodes without self-loops"
        )));
    }
    if !(0.0..=1.0).contains(&spec.positive_ratio) {
        return Err(Error::usage("positive_ratio must lie in [0, 1]"));
    }
    if !(spec.skew > 0.0 && spec.skew < 1.0) {
        return Err(Error::usage("skew must lie in (0, 1)"));
    }

    let rest = 1.0 - spec.skew;
    let (a, b, c) = (spec.skew, rest * 0.4, rest * 0.4);
    let levels = usize::BITS - (n - 1).leading_zeros();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    // Dense targets make the skewed sampler collide constantly; after a fixed
    // budget fall back to uniform sampling, which always terminates.
    let budget = 20 * m as u64 + 1000;
    let mut attempts = 0u64;
    while edges.len() < m {
        attempts += 1;
        let (src, dst) = if attempts <= budget {
            let (mut src, mut dst) = (0usize, 0usize);
            for _ in 0..levels {
                let r: f64 = rng.random();
                let (bit_src, bit_dst) = if r < a {
                    (0, 0)
                } else if r < a + b {
                    (0, 1)
                } else if r < a + b + c {
                    (1, 0)
                } else {
                    (1, 1)
                };
                src = (src << 1) | bit_src;
                dst = (dst << 1) | bit_dst;
            }
            (src, dst)
        } else {
            (rng.random_range(0..n), rng.random_range(0..n))
        };
        if src >= n || dst >= n || src == dst || !seen.insert((src, dst)) {
            continue;
        }
        let sign = if rng.random::<f64>() < spec.positive_ratio {
            Sign::Positive
        } else {
            Sign::Negative
        };
        edges.push(Edge::new(src, dst, sign));
    }
    Ok(SignedDigraph::from_clean_edges(n, edges))
}

/// Keeps the edges inside the smallest leading node block `0..t` that holds
/// at least `m_limit` edges (a principal submatrix of the adjacency matrix).
pub fn subgraph_prefix(graph: &SignedDigraph, m_limit: usize) -> Result<SignedDigraph> {
    let m = graph.edge_count();
    if m_limit == 0 || m_limit > m {
        return Err(Error::usage(format!("edge limit {m_limit} outside 1..={m}")));
    }
    let mut reach: Vec<usize> = graph.edges().iter().map(|e| e.src.max(e.dst) + 1).collect();
    reach.sort_unstable();
    let threshold = reach[m_limit - 1];
    let edges = graph
        .edges()
        .iter()
        .filter(|e| e.src < threshold && e.dst < threshold)
        .copied()
        .collect();
    Ok(SignedDigraph::from_clean_edges(threshold, edges))
}
