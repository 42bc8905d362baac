use std::collections::HashSet;

use dines::graph::{
    generate_synthetic, parse_edge_list, split_edges, subgraph_prefix, to_canonical, Delta, Edge, EdgeFormat, Sign,
    SignedDigraph, SyntheticSpec,
};
use dines::Error;
use proptest::prelude::*;

fn arb_edges(max_n: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize, bool)>)> {
    (2..max_n).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n, any::<bool>()), 0..4 * n)))
}

fn build(n: usize, raw: &[(usize, usize, bool)]) -> SignedDigraph {
    let edges = raw.iter().map(|&(s, d, p)| {
        Edge::new(s, d, if p { Sign::Positive } else { Sign::Negative })
    });
    SignedDigraph::from_edges(n, edges).unwrap().0
}

#[test]
fn toy_file_indexes() {
    let (g, stats) = parse_edge_list("0\t1\t1\n1\t0\t-1\n0\t1\t1\n", EdgeFormat::Canonical).unwrap();
    assert_eq!(g.edge_count(), 2);
    assert_eq!(stats.duplicates, 1);
    assert_eq!(g.neighbors(0, Delta::OutPositive), &[1]);
    assert_eq!(g.neighbors(0, Delta::InNegative), &[1]);
    assert!(g.neighbors(0, Delta::OutNegative).is_empty());
}

#[test]
fn bad_record_reports_line_one() {
    match parse_edge_list("a b c\n", EdgeFormat::Canonical) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected parse error, got {other:?}"),
    }
}

proptest! {
    #[test]
    fn neighbor_index_consistent((n, raw) in arb_edges(30)) {
        let g = build(n, &raw);
        let total: usize = (0..n).flat_map(|u| Delta::ALL.map(|d| g.degree(u, d))).sum();
        prop_assert_eq!(total, 2 * g.edge_count());
        let mut pairs = HashSet::new();
        for e in g.edges() {
            prop_assert!(e.src != e.dst);
            prop_assert!(pairs.insert((e.src, e.dst)));
            let (out, inn) = match e.sign {
                Sign::Positive => (Delta::OutPositive, Delta::InPositive),
                Sign::Negative => (Delta::OutNegative, Delta::InNegative),
            };
            prop_assert_eq!(g.neighbors(e.src, out).iter().filter(|&&v| v == e.dst).count(), 1);
            prop_assert_eq!(g.neighbors(e.dst, inn).iter().filter(|&&v| v == e.src).count(), 1);
        }
    }

    #[test]
    fn canonical_round_trip_is_identity((n, raw) in arb_edges(30)) {
        let g = build(n, &raw);
        prop_assume!(g.edge_count() > 0);
        let (back, _) = parse_edge_list(&to_canonical(&g), EdgeFormat::Canonical).unwrap();
        prop_assert_eq!(&back, &g);
        let (again, _) = parse_edge_list(&to_canonical(&back), EdgeFormat::Canonical).unwrap();
        prop_assert_eq!(again, back);
    }

    #[test]
    fn split_is_disjoint_union(seed in 0u64..1000, m in 10usize..200) {
        let g = generate_synthetic(&SyntheticSpec::new(m.min(40), m.max(40), 0.7, seed)).unwrap();
        let s = split_edges(&g, 0.8, seed).unwrap();
        let total = g.edge_count();
        prop_assert_eq!(s.train.len() + s.test.len(), total);
        prop_assert!((s.train.len() as f64 - 0.8 * total as f64).abs() <= 1.0);
        let mut all: Vec<Edge> = s.train.iter().chain(&s.test).copied().collect();
        let mut orig = g.edges().to_vec();
        let key = |e: &Edge| (e.src, e.dst);
        all.sort_by_key(key);
        orig.sort_by_key(key);
        prop_assert_eq!(all, orig);
        prop_assert_eq!(split_edges(&g, 0.8, seed).unwrap(), s);
    }
}

#[test]
fn distinct_seeds_give_distinct_splits() {
    let g = generate_synthetic(&SyntheticSpec::new(400, 3000, 0.9, 5)).unwrap();
    let splits: HashSet<Vec<(usize, usize)>> = (0..10)
        .map(|seed| split_edges(&g, 0.8, seed).unwrap().test.iter().map(|e| (e.src, e.dst)).collect())
        .collect();
    assert_eq!(splits.len(), 10);
}

#[test]
fn synthetic_positive_count_concentrates() {
    for seed in 0..5 {
        let g = generate_synthetic(&SyntheticSpec::new(100, 1000, 0.8, seed)).unwrap();
        assert_eq!(g.edge_count(), 1000);
        let sigma = (1000.0f64 * 0.8 * 0.2).sqrt();
        let dev = (g.positive_count() as f64 - 800.0).abs();
        assert!(dev <= 3.0 * sigma, "seed {seed}: {} positives", g.positive_count());
    }
}

#[test]
fn synthetic_is_deterministic() {
    let spec = SyntheticSpec::new(200, 1500, 0.75, 42);
    assert_eq!(generate_synthetic(&spec).unwrap(), generate_synthetic(&spec).unwrap());
    let other = SyntheticSpec { seed: 43, ..spec };
    assert_ne!(generate_synthetic(&other).unwrap().edges(), generate_synthetic(&SyntheticSpec::new(200, 1500, 0.75, 42)).unwrap().edges());
}

#[test]
fn synthetic_degrees_are_skewed() {
    let g = generate_synthetic(&SyntheticSpec::new(1024, 8000, 0.8, 1)).unwrap();
    let mut deg: Vec<usize> = (0..g.node_count())
        .map(|u| Delta::ALL.iter().map(|&d| g.degree(u, d)).sum())
        .collect();
    deg.sort_unstable();
    let max = *deg.last().unwrap() as f64;
    let median = deg[deg.len() / 2].max(1) as f64;
    assert!(max > 5.0 * median, "max {max}, median {median}");
}

proptest! {
    #[test]
    fn prefix_meets_limit_minimally(seed in 0u64..200, frac in 0.05f64..1.0) {
        let g = generate_synthetic(&SyntheticSpec::new(60, 400, 0.8, seed)).unwrap();
        let limit = ((frac * 400.0) as usize).max(1);
        let p = subgraph_prefix(&g, limit).unwrap();
        let t = p.node_count();
        prop_assert!(p.edge_count() >= limit);
        let smaller = g.edges().iter().filter(|e| e.src < t - 1 && e.dst < t - 1).count();
        prop_assert!(smaller < limit);
        prop_assert!(p.edges().iter().all(|e| e.src < t && e.dst < t));
    }
}
