use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Csr;

/// Edge sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn from_weight(w: f64) -> Sign {
        if w > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }

    /// 1.0 for positive, 0.0 for negative.
    pub fn label(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => 0.0,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Sign::Positive
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub sign: Sign,
}

impl Edge {
    pub fn new(src: usize, dst: usize, sign: Sign) -> Self {
        Edge { src, dst, sign }
    }
}

/// Neighbor type of a node, by direction and sign. [`Delta::ALL`] fixes the
/// order in which per-type messages are concatenated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Delta {
    OutPositive,
    OutNegative,
    InPositive,
    InNegative,
}

impl Delta {
    pub const ALL: [Delta; 4] = [
        Delta::OutPositive,
        Delta::OutNegative,
        Delta::InPositive,
        Delta::InNegative,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Delta::OutPositive => "out+",
            Delta::OutNegative => "out-",
            Delta::InPositive => "in+",
            Delta::InNegative => "in-",
        }
    }
}

/// Counters reported while building a graph from raw records.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records: usize,
    pub self_loops: usize,
    pub duplicates: usize,
    pub neutral: usize,
}

/// Immutable signed directed graph with per-node neighbor lists for each
/// [`Delta`].
#[derive(Clone, Debug)]
pub struct SignedDigraph {
    n: usize,
    edges: Vec<Edge>,
    neighbors: [Arc<Csr>; 4],
}

impl PartialEq for SignedDigraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

impl SignedDigraph {
    /// Builds a graph over nodes `0..n`. Self-loops are dropped and repeated
    /// `(src, dst)` pairs collapse onto the first occurrence's position with
    /// the last occurrence's sign.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<(Self, IngestStats)> {
        let mut stats = IngestStats::default();
        let mut kept: Vec<Edge> = Vec::new();
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        for e in edges {
            stats.records += 1;
            if e.src >= n || e.dst >= n {
                return Err(Error::usage(format!(
                    "edge ({}, {}) references a node outside 0..{n}",
                    e.src, e.dst
                )));
            }
            if e.src == e.dst {
                stats.self_loops += 1;
                continue;
            }
            match seen.get(&(e.src, e.dst)) {
                Some(&pos) => {
                    stats.duplicates += 1;
                    kept[pos].sign = e.sign;
                }
                None => {
                    seen.insert((e.src, e.dst), kept.len());
                    kept.push(e);
                }
            }
        }
        if stats.duplicates > 0 {
            log::info!("collapsed {} duplicate directed pairs (last sign wins)", stats.duplicates);
        }
        if stats.self_loops > 0 {
            log::info!("dropped {} self-loops", stats.self_loops);
        }
        Ok((SignedDigraph::from_clean_edges(n, kept), stats))
    }

    /// Builds the neighbor index for edges already free of self-loops and duplicates.
    pub(crate) fn from_clean_edges(n: usize, edges: Vec<Edge>) -> Self {
        let pick = |delta: Delta| {
            let pairs = edges.iter().filter_map(move |e| match (delta, e.sign) {
                (Delta::OutPositive, Sign::Positive) | (Delta::OutNegative, Sign::Negative) => {
                    Some((e.src, e.dst))
                }
                (Delta::InPositive, Sign::Positive) | (Delta::InNegative, Sign::Negative) => {
                    Some((e.dst, e.src))
                }
                _ => None,
            });
            Arc::new(Csr::from_pairs(n, pairs))
        };
        let neighbors = Delta::ALL.map(pick);
        SignedDigraph { n, edges, neighbors }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn positive_count(&self) -> usize {
        self.edges.iter().filter(|e| e.sign.is_positive()).count()
    }

    /// Fraction of positive edges, in percent.
    pub fn positive_ratio(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        100.0 * self.positive_count() as f64 / self.edges.len() as f64
    }

    pub fn neighbors(&self, u: usize, delta: Delta) -> &[usize] {
        self.neighbors[delta.index()].row(u)
    }

    pub fn degree(&self, u: usize, delta: Delta) -> usize {
        self.neighbors[delta.index()].degree(u)
    }

    /// The neighbor index for one neighbor type.
    pub fn index(&self, delta: Delta) -> &Arc<Csr> {
        &self.neighbors[delta.index()]
    }

    /// Same node set, only the given edges.
    pub fn with_edges(&self, edges: &[Edge]) -> Self {
        SignedDigraph::from_clean_edges(self.n, edges.to_vec())
    }

    /// Relabels nodes with `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::shape("permuted", &[self.n], &[perm.len()]));
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(perm[e.src], perm[e.dst], e.sign))
            .collect();
        Ok(SignedDigraph::from_clean_edges(self.n, edges))
    }

    pub fn stats(&self) -> GraphStats {
        let positive = self.positive_count();
        GraphStats {
            nodes: self.n,
            edges: self.edges.len(),
            positive,
            negative: self.edges.len() - positive,
            positive_ratio: self.positive_ratio(),
        }
    }
}

/// Dataset summary in the usual table layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub positive: usize,
    pub negative: usize,
    /// Percent.
    pub positive_ratio: f64,
}

impl std::fmt::Display for GraphStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "|V|={} |E|={} |E+|={} |E-|={} rho(+)={:.1}",
            self.nodes, self.edges, self.positive, self.negative, self.positive_ratio
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: usize, d: usize, sign: i8) -> Edge {
        Edge::new(s, d, if sign > 0 { Sign::Positive } else { Sign::Negative })
    }

    #[test]
    fn dedup_keeps_last_sign() {
        let (g, stats) = SignedDigraph::from_edges(2, vec![e(0, 1, 1), e(1, 0, -1), e(0, 1, 1)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(stats.duplicates, 1);
        assert_eq!(g.neighbors(0, Delta::OutPositive), &[1]);
        assert_eq!(g.neighbors(0, Delta::InNegative), &[1]);
        assert_eq!(g.neighbors(1, Delta::OutNegative), &[0]);
        assert_eq!(g.neighbors(1, Delta::InPositive), &[0]);

        let (g, _) = SignedDigraph::from_edges(2, vec![e(0, 1, 1), e(0, 1, -1)]).unwrap();
        assert_eq!(g.edges(), &[e(0, 1, -1)]);
    }

    #[test]
    fn self_loops_dropped() {
        let (g, stats) = SignedDigraph::from_edges(3, vec![e(0, 0, 1), e(0, 2, -1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(stats.self_loops, 1);
    }

    #[test]
    fn out_of_range_node_rejected() {
        assert!(SignedDigraph::from_edges(2, vec![e(0, 2, 1)]).is_err());
    }
}
