//! Edge-list readers and the canonical `src<TAB>dst<TAB>sign` writer.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::digraph::{Edge, IngestStats, Sign, SignedDigraph};
use crate::error::{Error, Result};

/// On-disk layout of an edge list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeFormat {
    /// `src<TAB>dst<TAB>sign` over contiguous ids with an optional `# n=<count>` header.
    Canonical,
    /// `src,dst,rating,time` (Bitcoin trust networks); rating 0 is dropped.
    BitcoinCsv,
    /// Whitespace-separated `src dst weight [...]`; `#` and `%` comment lines.
    Triple,
    /// `SRC:`/`TGT:`/`VOT:` blocks (Wikipedia admin elections); neutral votes dropped.
    WikiRfa,
}

impl std::str::FromStr for EdgeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" | "tsv" => Ok(EdgeFormat::Canonical),
            "bitcoin-csv" => Ok(EdgeFormat::BitcoinCsv),
            "triple-tsv" | "triple" => Ok(EdgeFormat::Triple),
            "wiki-rfa" => Ok(EdgeFormat::WikiRfa),
            other => Err(Error::usage(format!("unknown dataset kind '{other}'"))),
        }
    }
}

struct RawRecord {
    line: usize,
    src: String,
    dst: String,
    weight: f64,
}

pub fn load_edge_list(path: impl AsRef<Path>, format: EdgeFormat) -> Result<(SignedDigraph, IngestStats)> {
    let text = fs::read_to_string(path.as_ref())?;
    parse_edge_list(&text, format)
}

pub fn parse_edge_list(text: &str, format: EdgeFormat) -> Result<(SignedDigraph, IngestStats)> {
    let (graph, stats) = match format {
        EdgeFormat::Canonical => parse_canonical(text)?,
        EdgeFormat::BitcoinCsv => build_raw(parse_delimited(text, Some(','))?)?,
        EdgeFormat::Triple => build_raw(parse_delimited(text, None)?)?,
        EdgeFormat::WikiRfa => build_raw(parse_wiki_rfa(text)?)?,
    };
    if graph.edge_count() == 0 {
        return Err(Error::usage("edge list contains no edges"));
    }
    Ok((graph, stats))
}

fn parse_number(token: &str, line: usize, what: &str) -> Result<f64> {
    token
        .replace('\u{2212}', "-")
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("invalid {what} '{token}'"),
        })
}

fn is_comment(line: &str) -> bool {
    line.starts_with('#') || line.starts_with('%')
}

fn parse_canonical(text: &str) -> Result<(SignedDigraph, IngestStats)> {
    let mut declared_n = 0usize;
    let mut edges = Vec::new();
    let mut max_id = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            for field in header.split_whitespace() {
                if let Some(v) = field.strip_prefix("n=") {
                    declared_n = v.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        msg: format!("invalid node count '{v}'"),
                    })?;
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 'src dst sign', got '{line}'"),
            });
        }
        let id = |tok: &str| {
            tok.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid node id '{tok}'"),
            })
        };
        let (src, dst) = (id(fields[0])?, id(fields[1])?);
        let w = parse_number(fields[2], line_no, "sign")?;
        if w == 0.0 {
            return Err(Error::Parse {
                line: line_no,
                msg: "sign must be 1 or -1".into(),
            });
        }
        max_id = max_id.max(Some(src.max(dst)));
        edges.push(Edge::new(src, dst, Sign::from_weight(w)));
    }
    let n = declared_n.max(max_id.map_or(0, |m| m + 1));
    SignedDigraph::from_edges(n, edges)
}

fn parse_delimited(text: &str, delimiter: Option<char>) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || is_comment(line) {
            continue;
        }
        let fields: Vec<&str> = match delimiter {
            Some(d) => line.split(d).map(str::trim).collect(),
            None => line.split_whitespace().collect(),
        };
        if fields.len() < 3 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 'src dst weight', got '{line}'"),
            });
        }
        out.push(RawRecord {
            line: line_no,
            src: fields[0].to_string(),
            dst: fields[1].to_string(),
            weight: parse_number(fields[2], line_no, "weight")?,
        });
    }
    Ok(out)
}

fn parse_wiki_rfa(text: &str) -> Result<Vec<RawRecord>> {
    let mut out = Vec::new();
    let (mut src, mut dst, mut vote): (Option<String>, Option<String>, Option<(usize, f64)>) = (None, None, None);
    let mut flush = |src: &mut Option<String>, dst: &mut Option<String>, vote: &mut Option<(usize, f64)>| {
        if let (Some(s), Some(d), Some((line, w))) = (src.take(), dst.take(), vote.take()) {
            if !s.is_empty() && !d.is_empty() {
                out.push(RawRecord { line, src: s, dst: d, weight: w });
            }
        }
        *src = None;
        *dst = None;
        *vote = None;
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if let Some(v) = line.strip_prefix("SRC:") {
            flush(&mut src, &mut dst, &mut vote);
            src = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("TGT:") {
            dst = Some(v.trim().to_string());
        } else if let Some(v) = line.strip_prefix("VOT:") {
            vote = Some((line_no, parse_number(v.trim(), line_no, "vote")?));
        } else if line.is_empty() {
            flush(&mut src, &mut dst, &mut vote);
        }
    }
    flush(&mut src, &mut dst, &mut vote);
    Ok(out)
}

/// Maps raw ids onto `0..n`. Numeric ids keep their numeric order; otherwise
/// ids are numbered by first appearance.
fn build_raw(records: Vec<RawRecord>) -> Result<(SignedDigraph, IngestStats)> {
    let mut neutral = 0;
    let records: Vec<RawRecord> = records
        .into_iter()
        .filter(|r| {
            let keep = r.weight != 0.0;
            neutral += usize::from(!keep);
            keep
        })
        .collect();
    if neutral > 0 {
        log::info!("dropped {neutral} neutral records");
    }

    let numeric = records
        .iter()
        .all(|r| r.src.parse::<u64>().is_ok() && r.dst.parse::<u64>().is_ok());
    let mut ids: HashMap<&str, usize> = HashMap::new();
    if numeric {
        let mut raw: Vec<u64> = records
            .iter()
            .flat_map(|r| [r.src.parse::<u64>().unwrap(), r.dst.parse::<u64>().unwrap()])
            .collect();
        raw.sort_unstable();
        raw.dedup();
        let rank: HashMap<u64, usize> = raw.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        for r in &records {
            for tok in [&r.src, &r.dst] {
                ids.insert(tok.as_str(), rank[&tok.parse::<u64>().unwrap()]);
            }
        }
    } else {
        for r in &records {
            for tok in [&r.src, &r.dst] {
                let next = ids.len();
                ids.entry(tok.as_str()).or_insert(next);
            }
        }
    }
    let n = ids.values().copied().max().map_or(0, |m| m + 1);
    log::debug!("mapped {} raw records onto {n} nodes (last record line {})", records.len(), records.last().map_or(0, |r| r.line));
    let edges: Vec<Edge> = records
        .iter()
        .map(|r| Edge::new(ids[r.src.as_str()], ids[r.dst.as_str()], Sign::from_weight(r.weight)))
        .collect();
    let (graph, mut stats) = SignedDigraph::from_edges(n, edges)?;
    stats.records += neutral;
    stats.neutral = neutral;
    Ok((graph, stats))
}

/// Canonical text form of a graph, including the node-count header.
pub fn to_canonical(graph: &SignedDigraph) -> String {
    to_canonical_edges(graph.node_count(), graph.edges())
}

pub fn to_canonical_edges(n: usize, edges: &[Edge]) -> String {
    let mut out = String::with_capacity(edges.len() * 16 + 32);
    let _ = writeln!(out, "# n={} m={}", n, edges.len());
    for e in edges {
        let _ = writeln!(out, "{}\t{}\t{}", e.src, e.dst, e.sign.as_i8());
    }
    out
}

pub fn save_edge_list(path: impl AsRef<Path>, n: usize, edges: &[Edge]) -> Result<()> {
    fs::write(path, to_canonical_edges(n, edges))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Delta;

    #[test]
    fn toy_file_collapses_duplicate() {
        let (g, stats) = parse_edge_list("0 1 +1\n1 0 -1\n0 1 +1\n", EdgeFormat::Triple).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(stats.duplicates, 1);
        assert_eq!(g.neighbors(0, Delta::OutPositive), &[1]);
        assert_eq!(g.neighbors(0, Delta::InNegative), &[1]);
    }

    #[test]
    fn unparseable_record_names_line() {
        let err = parse_edge_list("a b c\n", EdgeFormat::Triple).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_edge_list("0\t1\t1\n0\tx\t1\n", EdgeFormat::Canonical).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(parse_edge_list("", EdgeFormat::Canonical).is_err());
        assert!(parse_edge_list("# only a header\n", EdgeFormat::Triple).is_err());
    }

    #[test]
    fn bitcoin_ratings_map_to_signs() {
        let text = "7188,1,10,1407470400\n430,1,-1,1376539200\n3134,1,1,1369713600\n";
        let (g, _) = parse_edge_list(text, EdgeFormat::BitcoinCsv).unwrap();
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.positive_count(), 2);
        // numeric ids keep their order: 1 → 0, 430 → 1, 3134 → 2, 7188 → 3
        assert!(g.edges().contains(&Edge::new(3, 0, Sign::Positive)));
        assert!(g.edges().contains(&Edge::new(1, 0, Sign::Negative)));
    }

    #[test]
    fn neutral_records_dropped() {
        let (g, stats) = parse_edge_list("1 2 1\n2 3 0\n3 1 -1\n", EdgeFormat::Triple).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(stats.neutral, 1);
    }

    #[test]
    fn konect_comments_skipped() {
        let text = "% sym signed\n% 3 3 3\n1 2 1\n2 3 -1\n";
        let (g, _) = parse_edge_list(text, EdgeFormat::Triple).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn wiki_rfa_blocks() {
        let text = "SRC:Alice\nTGT:Bob\nVOT:1\nRES:1\nYEA:2013\nDAT:x\nTXT:fine\n\n\
                    SRC:Carol\nTGT:Bob\nVOT:-1\nRES:1\n\n\
                    SRC:Dan\nTGT:Bob\nVOT:0\nRES:1\n";
        let (g, stats) = parse_edge_list(text, EdgeFormat::WikiRfa).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(stats.neutral, 1);
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn canonical_round_trip_keeps_isolated_nodes() {
        let (g, _) = SignedDigraph::from_edges(5, vec![Edge::new(0, 3, Sign::Negative)]).unwrap();
        let text = to_canonical(&g);
        let (back, _) = parse_edge_list(&text, EdgeFormat::Canonical).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.node_count(), 5);
    }
}
