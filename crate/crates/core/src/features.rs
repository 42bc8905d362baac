//! Initial node features from a truncated SVD of the signed adjacency matrix.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SignedDigraph;
use crate::numerics::Tensor;

pub const DEFAULT_FEATURE_DIM: usize = 64;
pub const OVERSAMPLING: usize = 10;
/// Minimum number of power iterations.
pub const POWER_ITERATIONS: usize = 4;
/// Power iterations continue past the minimum until the squared singular
/// mass captured in the top `rank` directions changes by less than this
/// relative amount.
pub const CONVERGENCE_TOL: f64 = 1e-13;
pub const MAX_POWER_ITERATIONS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "provenance", rename_all = "lowercase")]
pub enum Provenance {
    Tsvd { rank: usize, seed: u64 },
    File,
}

/// Dense `n × d_in` node features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    values: Tensor,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct FeatureMeta {
    rows: usize,
    cols: usize,
    #[serde(flatten)]
    provenance: Provenance,
}

impl FeatureMatrix {
    pub fn new(values: Tensor, provenance: Provenance) -> Result<Self> {
        if values.shape().len() != 2 {
            return Err(Error::Dimension {
                op: "features",
                msg: format!("expected an n × d matrix, got {:?}", values.shape()),
            });
        }
        if !values.is_finite() {
            return Err(Error::NonFinite { op: "features" });
        }
        Ok(FeatureMatrix { values, provenance })
    }

    pub fn values(&self) -> &Tensor {
        &self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    /// Rows reordered so that row `perm[i]` of the result is row `i` here.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let (n, d) = self.values.dims2();
        if perm.len() != n {
            return Err(Error::shape("permuted", &[n], &[perm.len()]));
        }
        let mut data = vec![0.0; n * d];
        for (old, &new) in perm.iter().enumerate() {
            data[new * d..(new + 1) * d].copy_from_slice(self.values.row(old));
        }
        FeatureMatrix::new(Tensor::matrix(n, d, data)?, self.provenance.clone())
    }

    /// Writes `features.tsv` style text plus a `.meta.json` sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let (n, d) = self.values.dims2();
        let mut out = String::with_capacity(n * d * 20);
        for r in 0..n {
            for (j, v) in self.values.row(r).iter().enumerate() {
                if j > 0 {
                    out.push('\t');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        let meta = FeatureMeta {
            rows: n,
            cols: d,
            provenance: self.provenance.clone(),
        };
        fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
        Ok(())
    }
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("features");
    path.with_file_name(format!("{stem}.meta.json"))
}

/// Parses whitespace-separated rows; the row count must equal `n`.
pub fn load_features(path: impl AsRef<Path>, n: usize) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut fm = parse_features(&text, n)?;
    if let Ok(meta) = fs::read_to_string(meta_path(path)) {
        let meta: FeatureMeta = serde_json::from_str(&meta)?;
        fm.provenance = meta.provenance;
    }
    Ok(fm)
}

pub fn parse_features(text: &str, n: usize) -> Result<FeatureMatrix> {
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("non-numeric feature '{tok}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("non-finite feature '{tok}'"),
                });
            }
            data.push(v);
        }
        let width = data.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected {c} columns, got {width}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::shape("load_features", &[rows], &[n]));
    }
    let values = Tensor::matrix(rows, cols.unwrap_or(0), data)?;
    FeatureMatrix::new(values, Provenance::File)
}

/// Rank-`d` factors `A ≈ U diag(σ) Vᵀ` with `U`, `V` as `n × d` row-major tensors.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: Tensor,
    pub singular_values: Vec<f64>,
    pub v: Tensor,
}

/// Sparse matrix in coordinate form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    /// Signed adjacency: `A[src][dst] = +1` or `-1`.
    pub fn signed_adjacency(graph: &SignedDigraph) -> Self {
        SparseMatrix {
            rows: graph.node_count(),
            cols: graph.node_count(),
            entries: graph
                .edges()
                .iter()
                .map(|e| (e.src, e.dst, f64::from(e.sign.as_i8())))
                .collect(),
        }
    }

    /// `A · X`
    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, x.ncols());
        for j in 0..x.ncols() {
            let (src_col, mut dst_col) = (x.column(j), out.column_mut(j));
            for &(r, c, v) in &self.entries {
                dst_col[r] += v * src_col[c];
            }
        }
        out
    }

    /// `Aᵀ · X`
    fn apply_t(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.cols, x.ncols());
        for j in 0..x.ncols() {
            let (src_col, mut dst_col) = (x.column(j), out.column_mut(j));
            for &(r, c, v) in &self.entries {
                dst_col[c] += v * src_col[r];
            }
        }
        out
    }
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

fn top_energy(b: &DMatrix<f64>, rank: usize) -> f64 {
    let mut sv: Vec<f64> = b.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv.iter().take(rank).map(|s| s * s).sum()
}

fn to_tensor(m: &DMatrix<f64>, cols: usize) -> Tensor {
    let rows = m.nrows();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            data.push(m[(r, c)]);
        }
    }
    Tensor::matrix(rows, cols, data).expect("sized from matrix")
}

/// Randomized range-finder SVD: Gaussian test matrix with `OVERSAMPLING`
/// extra columns and re-orthonormalized power iterations.
/// Singular vectors are sign-normalized so that each left vector's largest
/// magnitude entry is positive.
pub fn truncated_svd(a: &SparseMatrix, rank: usize, seed: u64) -> Result<TruncatedSvd> {
    let (n, cols) = (a.rows, a.cols);
    if rank == 0 || rank > n.min(cols) {
        return Err(Error::usage(format!("rank {rank} must lie in 1..={}", n.min(cols))));
    }
    let width = (rank + OVERSAMPLING).min(n).min(cols);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(cols, width, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormalize(a.apply(&omega));
    let mut captured = f64::NAN;
    let mut b;
    let mut iter = 0;
    loop {
        // B = Qᵀ A, built as (Aᵀ Q)ᵀ
        b = a.apply_t(&q).transpose();
        if iter >= POWER_ITERATIONS {
            let energy = top_energy(&b, rank);
            if (energy - captured).abs() <= CONVERGENCE_TOL * energy.max(f64::MIN_POSITIVE)
                || iter >= MAX_POWER_ITERATIONS
            {
                break;
            }
            captured = energy;
        }
        let z = orthonormalize(b.transpose());
        q = orthonormalize(a.apply(&z));
        iter += 1;
    }
    let svd = b.svd(true, true);
    let (ub, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    order.truncate(rank);

    let u_full = &q * &ub;
    let mut u = DMatrix::zeros(n, rank);
    let mut v = DMatrix::zeros(cols, rank);
    let mut sigma = Vec::with_capacity(rank);
    for (c, &k) in order.iter().enumerate() {
        let col = u_full.column(k);
        let pivot = col.iter().cloned().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let flip = if pivot < 0.0 { -1.0 } else { 1.0 };
        u.set_column(c, &(col * flip));
        v.set_column(c, &(vt.row(k).transpose() * flip));
        sigma.push(svd.singular_values[k].max(0.0));
    }
    Ok(TruncatedSvd {
        u: to_tensor(&u, rank),
        singular_values: sigma,
        v: to_tensor(&v, rank),
    })
}

/// `X = U_d Σ_d` from the truncated SVD of the graph's signed adjacency.
pub fn tsvd_features(graph: &SignedDigraph, rank: usize, seed: u64) -> Result<FeatureMatrix> {
    let n = graph.node_count();
    if rank == 0 || rank > n {
        return Err(Error::usage(format!("rank {rank} must lie in 1..={n}")));
    }
    let svd = truncated_svd(&SparseMatrix::signed_adjacency(graph), rank, seed)?;
    let (n, d) = svd.u.dims2();
    let mut data = svd.u.into_data();
    for r in 0..n {
        for (c, sigma) in svd.singular_values.iter().enumerate() {
            data[r * d + c] *= sigma;
        }
    }
    FeatureMatrix::new(Tensor::matrix(n, d, data)?, Provenance::Tsvd { rank, seed })
}
