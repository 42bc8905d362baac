use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Per-node factor vectors stored as an `n × K·w` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DisentangledEmbedding {
    values: Tensor,
    factors: usize,
}

impl DisentangledEmbedding {
    pub fn new(values: Tensor, factors: usize) -> Result<Self> {
        let (_, cols) = values.dims2();
        if values.shape().len() != 2 || factors == 0 || cols % factors != 0 {
            return Err(Error::Dimension {
                op: "embedding",
                msg: format!("{:?} cannot hold {factors} equal factors", values.shape()),
            });
        }
        Ok(DisentangledEmbedding { values, factors })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn node_count(&self) -> usize {
        self.values.rows()
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn factor_width(&self) -> usize {
        self.dim() / self.factors
    }

    /// Concatenated factors of node `u`.
    pub fn node(&self, u: usize) -> &[f64] {
        self.values.row(u)
    }

    pub fn factor(&self, u: usize, k: usize) -> &[f64] {
        let w = self.factor_width();
        &self.values.row(u)[k * w..(k + 1) * w]
    }

    /// Text export: a `# n=… K=… d=…` header, then one node per line.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let (n, d) = self.values.dims2();
        let mut out = String::with_capacity(n * d * 20 + 64);
        let _ = writeln!(out, "# n={n} K={} d={d}", self.factors);
        for u in 0..n {
            for (j, v) in self.node(u).iter().enumerate() {
                if j > 0 {
                    out.push('\t');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Schema("empty embedding file".into()))?;
        let field = |key: &str| -> Result<usize> {
            header
                .trim_start_matches('#')
                .split_whitespace()
                .find_map(|f| f.strip_prefix(key))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Schema(format!("embedding header lacks '{key}'")))
        };
        let (n, k, d) = (field("n=")?, field("K=")?, field("d=")?);
        let mut data = Vec::with_capacity(n * d);
        for (i, line) in lines.enumerate() {
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 2,
                    msg: format!("invalid value '{tok}'"),
                })?);
            }
            if data.len() - before != d {
                return Err(Error::Parse {
                    line: i + 2,
                    msg: format!("expected {d} values"),
                });
            }
        }
        if data.len() != n * d {
            return Err(Error::shape("embedding", &[data.len() / d.max(1), d], &[n, d]));
        }
        DisentangledEmbedding::new(Tensor::matrix(n, d, data)?, k)
    }
}
