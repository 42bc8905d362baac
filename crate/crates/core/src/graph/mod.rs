//! Signed directed graphs: ingestion, neighbor indexing, splitting and synthesis.

mod digraph;
mod io;
mod split;
mod synthetic;

pub use digraph::{Delta, Edge, GraphStats, IngestStats, Sign, SignedDigraph};
pub use io::{load_edge_list, parse_edge_list, save_edge_list, to_canonical, to_canonical_edges, EdgeFormat};
pub use split::{split_edges, EdgeSplit, SplitCounts, SplitMeta, DEFAULT_TRAIN_RATIO};
pub use synthetic::{generate_synthetic, subgraph_prefix, SyntheticSpec};
