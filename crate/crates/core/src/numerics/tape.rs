//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records every operation of a forward pass as a node holding the
//! output value and enough context to compute vector-Jacobian products.
//! [`Tape::backward`] walks the nodes in reverse and returns the gradients of
//! every leaf. Besides the usual dense ops the tape has fused operators for
//! neighborhood aggregation over a [`Csr`] index and for edge-wise decoding,
//! so that a whole graph is processed as a handful of matrix-shaped nodes.

use std::sync::Arc;

use super::params::ParamId;
use super::sparse::Csr;
use super::tensor::{axpy, dot, gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};
use crate::error::{Error, Result};

/// Slope of the negative half of LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.01;
/// Norms below this are treated as zero by the normalization ops.
pub const NORM_EPS: f64 = 1e-12;
/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    LeakyRelu(Var),
    NormalizeBlocks { x: Var, width: usize, norms: Vec<f64> },
    Softmax(Var),
    Concat(Vec<Var>),
    SliceCols { x: Var, start: usize },
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    NeighborSum { x: Var, csr: Arc<Csr>, mean: bool },
    BlockDot { x: Var, a: Var },
    EdgeGatherAdd { row: Var, nb: Var, csr: Arc<Csr> },
    SegmentSoftmax { x: Var, csr: Arc<Csr> },
    WeightedNeighborSum { alpha: Var, x: Var, csr: Arc<Csr> },
    SegmentMax { x: Var, argmax: Vec<usize> },
    BlockLinear { inputs: Vec<Var>, w: Var, b: Option<Var> },
    PairwiseScores { z: Var, ws: Var, edges: Arc<[(usize, usize)]> },
    ConcatScores { z: Var, w: Var, edges: Arc<[(usize, usize)]> },
    Bce { p: Var, labels: Arc<[f64]> },
    CrossEntropyRows { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every leaf of a tape.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    /// Gradient of a leaf, if it influenced the output.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// `(parameter, gradient)` pairs for every parameter read onto the tape.
    pub fn params(&self) -> impl Iterator<Item = (ParamId, Option<&[f64]>)> + '_ {
        self.params.iter().map(|&(id, v)| (id, self.grads[v.0].as_deref()))
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, a.shape(), b.shape()));
    }
    Ok(())
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect())
        .expect("shape preserved")
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn leaky(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a constant or input tensor.
    pub fn leaf(&mut self, t: Tensor) -> Result<Var> {
        self.push("leaf", t, Op::Leaf)
    }

    /// Records a trainable parameter; its gradient is reported under `id`.
    pub fn param(&mut self, id: ParamId, t: Tensor) -> Result<Var> {
        self.push("param", t, Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.shape()[1] != tb.shape()[0] {
            return Err(Error::shape("matmul", ta.shape(), tb.shape()));
        }
        let (p, q, r) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
        let mut out = vec![0.0; p * r];
        gemm_acc(ta.data(), tb.data(), &mut out, p, q, r);
        self.push("matmul", Tensor::matrix(p, r, out)?, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if ta.shape().len() != 2 {
            return Err(Error::Dimension {
                op: "transpose",
                msg: format!("expected a matrix, got shape {:?}", ta.shape()),
            });
        }
        let (r, c) = (ta.shape()[0], ta.shape()[1]);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = ta.data()[i * c + j];
            }
        }
        self.push("transpose", Tensor::matrix(c, r, out)?, Op::Transpose(a))
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape(name, ta, tb)?;
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let t = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(name, t, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a bias with one entry per column to every row of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(b));
        let (rows, cols) = tx.dims2();
        if tb.numel() != cols {
            return Err(Error::shape("add_bias", tx.shape(), tb.shape()));
        }
        let mut data = tx.data().to_vec();
        for r in 0..rows {
            axpy(1.0, tb.data(), &mut data[r * cols..(r + 1) * cols]);
        }
        let t = Tensor::new(tx.shape().to_vec(), data)?;
        self.push("add_bias", t, Op::AddBias(x, b))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        let t = map(self.value(x), |v| v * c);
        self.push("scale", t, Op::Scale(x, c))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let t = map(self.value(x), f64::tanh);
        self.push("tanh", t, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let t = map(self.value(x), sigmoid);
        self.push("sigmoid", t, Op::Sigmoid(x))
    }

    pub fn leaky_relu(&mut self, x: Var) -> Result<Var> {
        let t = map(self.value(x), leaky);
        self.push("leaky_relu", t, Op::LeakyRelu(x))
    }

    /// Row-wise `v / max(‖v‖₂, NORM_EPS)`; vectors are normalized as a whole.
    pub fn l2_normalize(&mut self, x: Var) -> Result<Var> {
        let width = self.value(x).cols();
        self.l2_normalize_blocks(x, width)
    }

    /// Normalizes every contiguous block of `width` columns of every row.
    pub fn l2_normalize_blocks(&mut self, x: Var, width: usize) -> Result<Var> {
        let tx = self.value(x);
        let cols = tx.cols();
        if width == 0 || cols % width != 0 {
            return Err(Error::Dimension {
                op: "l2_normalize",
                msg: format!("block width {width} does not divide {cols} columns"),
            });
        }
        let mut data = tx.data().to_vec();
        let mut norms = Vec::with_capacity(data.len() / width);
        for block in data.chunks_mut(width) {
            let norm = dot(block, block).sqrt();
            let denom = norm.max(NORM_EPS);
            block.iter_mut().for_each(|v| *v /= denom);
            norms.push(norm);
        }
        let t = Tensor::new(tx.shape().to_vec(), data)?;
        self.push("l2_normalize", t, Op::NormalizeBlocks { x, width, norms })
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let tx = self.value(x);
        let cols = tx.cols();
        if tx.numel() == 0 || cols == 0 {
            return Err(Error::Dimension {
                op: "softmax",
                msg: "empty input".into(),
            });
        }
        let mut data = tx.data().to_vec();
        for row in data.chunks_mut(cols) {
            softmax_in_place(row);
        }
        let t = Tensor::new(tx.shape().to_vec(), data)?;
        self.push("softmax", t, Op::Softmax(x))
    }

    /// Concatenates along the last axis. All parts need the same row count;
    /// the result is a vector when every part is a vector.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or_else(|| Error::Dimension {
            op: "concat",
            msg: "no parts".into(),
        })?;
        let rows = self.value(first).rows();
        let all_vectors = parts.iter().all(|&p| self.value(p).shape().len() == 1);
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(Error::shape("concat", self.value(first).shape(), t.shape()));
            }
            widths.push(t.cols());
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let shape = if all_vectors { vec![total] } else { vec![rows, total] };
        let t = Tensor::new(shape, data)?;
        self.push("concat", t, Op::Concat(parts.to_vec()))
    }

    /// Columns `start..start + len` of every row.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let tx = self.value(x);
        let (rows, cols) = tx.dims2();
        if start + len > cols {
            return Err(Error::Dimension {
                op: "slice_cols",
                msg: format!("columns {start}..{} out of {cols}", start + len),
            });
        }
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&tx.row(r)[start..start + len]);
        }
        let shape = if tx.shape().len() == 1 { vec![len] } else { vec![rows, len] };
        let t = Tensor::new(shape, data)?;
        self.push("slice_cols", t, Op::SliceCols { x, start })
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push("sum", Tensor::scalar(s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.numel() == 0 {
            return Err(Error::Dimension {
                op: "mean",
                msg: "empty input".into(),
            });
        }
        let s = t.data().iter().sum::<f64>() / t.numel() as f64;
        self.push("mean", Tensor::scalar(s), Op::Mean(x))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(x).clone().reshape(shape)?;
        self.push("reshape", t, Op::Reshape(x))
    }

    /// `out[r] = Σ_{t ∈ csr.row(r)} x[t]`, divided by the row degree when
    /// `mean` is set. Empty rows yield zeros.
    pub fn neighbor_sum(&mut self, x: Var, csr: &Arc<Csr>, mean: bool) -> Result<Var> {
        let tx = self.value(x);
        let (n, c) = tx.dims2();
        check_targets("neighbor_sum", csr, n)?;
        let rows = csr.rows();
        let mut out = vec![0.0; rows * c];
        for r in 0..rows {
            let nbrs = csr.row(r);
            if nbrs.is_empty() {
                continue;
            }
            let acc = &mut out[r * c..(r + 1) * c];
            if mean {
                // running mean: exact when all neighbors are identical
                for (i, &t) in nbrs.iter().enumerate() {
                    let inv = 1.0 / (i + 1) as f64;
                    for (a, &v) in acc.iter_mut().zip(tx.row(t)) {
                        *a += (v - *a) * inv;
                    }
                }
            } else {
                for &t in nbrs {
                    axpy(1.0, tx.row(t), acc);
                }
            }
        }
        let t = Tensor::matrix(rows, c, out)?;
        let op = Op::NeighborSum {
            x,
            csr: Arc::clone(csr),
            mean,
        };
        self.push("neighbor_sum", t, op)
    }

    /// Per-block inner products: `x` is `r × K·w`, `a` is `K × w`, result
    /// `out[i][k] = ⟨x[i, k-th block], a[k]⟩`.
    pub fn block_dot(&mut self, x: Var, a: Var) -> Result<Var> {
        let (tx, ta) = (self.value(x), self.value(a));
        let (rows, cols) = tx.dims2();
        let (k, w) = ta.dims2();
        if k * w != cols {
            return Err(Error::shape("block_dot", tx.shape(), ta.shape()));
        }
        let mut out = vec![0.0; rows * k];
        for i in 0..rows {
            let row = tx.row(i);
            for f in 0..k {
                out[i * k + f] = dot(&row[f * w..(f + 1) * w], ta.row(f));
            }
        }
        let t = Tensor::matrix(rows, k, out)?;
        self.push("block_dot", t, Op::BlockDot { x, a })
    }

    /// Per-edge score `out[e] = row[r] + nb[t]` for every CSR entry `e = (r, t)`.
    pub fn edge_gather_add(&mut self, row: Var, nb: Var, csr: &Arc<Csr>) -> Result<Var> {
        let (tr, tn) = (self.value(row), self.value(nb));
        let (rows, k) = tr.dims2();
        if rows != csr.rows() || tn.cols() != k {
            return Err(Error::shape("edge_gather_add", tr.shape(), tn.shape()));
        }
        check_targets("edge_gather_add", csr, tn.rows())?;
        let mut out = vec![0.0; csr.nnz() * k];
        for r in 0..rows {
            for e in csr.row_range(r) {
                let t = csr.targets()[e];
                let dst = &mut out[e * k..(e + 1) * k];
                for f in 0..k {
                    dst[f] = tr.row(r)[f] + tn.row(t)[f];
                }
            }
        }
        let t = Tensor::matrix(csr.nnz(), k, out)?;
        let op = Op::EdgeGatherAdd {
            row,
            nb,
            csr: Arc::clone(csr),
        };
        self.push("edge_gather_add", t, op)
    }

    /// Softmax over the entries of each CSR row, separately for every column.
    pub fn segment_softmax(&mut self, x: Var, csr: &Arc<Csr>) -> Result<Var> {
        let tx = self.value(x);
        let (e, k) = tx.dims2();
        if e != csr.nnz() {
            return Err(Error::shape("segment_softmax", tx.shape(), &[csr.nnz(), k]));
        }
        let mut out = tx.data().to_vec();
        let mut buf = Vec::new();
        for r in 0..csr.rows() {
            let range = csr.row_range(r);
            if range.is_empty() {
                continue;
            }
            for f in 0..k {
                buf.clear();
                buf.extend(range.clone().map(|e| out[e * k + f]));
                softmax_in_place(&mut buf);
                for (i, e) in range.clone().enumerate() {
                    out[e * k + f] = buf[i];
                }
            }
        }
        let t = Tensor::matrix(e, k, out)?;
        let op = Op::SegmentSoftmax {
            x,
            csr: Arc::clone(csr),
        };
        self.push("segment_softmax", t, op)
    }

    /// `out[r, k-th block] = Σ_{e=(r,t)} alpha[e][k] · x[t, k-th block]`.
    pub fn weighted_neighbor_sum(&mut self, alpha: Var, x: Var, csr: &Arc<Csr>) -> Result<Var> {
        let (ta, tx) = (self.value(alpha), self.value(x));
        let (e, k) = ta.dims2();
        let (n, cols) = tx.dims2();
        if e != csr.nnz() || k == 0 || cols % k != 0 {
            return Err(Error::shape("weighted_neighbor_sum", ta.shape(), tx.shape()));
        }
        check_targets("weighted_neighbor_sum", csr, n)?;
        let w = cols / k;
        let mut out = vec![0.0; csr.rows() * cols];
        for r in 0..csr.rows() {
            let acc = &mut out[r * cols..(r + 1) * cols];
            for e in csr.row_range(r) {
                let src = tx.row(csr.targets()[e]);
                for f in 0..k {
                    let a = ta.data()[e * k + f];
                    axpy(a, &src[f * w..(f + 1) * w], &mut acc[f * w..(f + 1) * w]);
                }
            }
        }
        let t = Tensor::matrix(csr.rows(), cols, out)?;
        let op = Op::WeightedNeighborSum {
            alpha,
            x,
            csr: Arc::clone(csr),
        };
        self.push("weighted_neighbor_sum", t, op)
    }

    /// Elementwise maximum over each CSR row's targets; empty rows yield zeros.
    pub fn segment_max(&mut self, x: Var, csr: &Arc<Csr>) -> Result<Var> {
        let tx = self.value(x);
        let (n, c) = tx.dims2();
        check_targets("segment_max", csr, n)?;
        let rows = csr.rows();
        let mut out = vec![0.0; rows * c];
        // usize::MAX marks "no source" (empty neighborhood)
        let mut argmax = vec![usize::MAX; rows * c];
        for r in 0..rows {
            for &t in csr.row(r) {
                let src = tx.row(t);
                for j in 0..c {
                    let slot = r * c + j;
                    if argmax[slot] == usize::MAX || src[j] > out[slot] {
                        out[slot] = src[j];
                        argmax[slot] = t;
                    }
                }
            }
        }
        let t = Tensor::matrix(rows, c, out)?;
        self.push("segment_max", t, Op::SegmentMax { x, argmax })
    }

    /// Factor-wise affine map. Every input is `r × K·a`; `w` is `K × P·a × b`
    /// for `P` inputs; `b` (optional) is `K × b`. For each factor `k`, the
    /// k-th blocks of all inputs are concatenated and multiplied by `w[k]`.
    pub fn block_linear(&mut self, inputs: &[Var], w: Var, b: Option<Var>) -> Result<Var> {
        let tw = self.value(w);
        if tw.shape().len() != 3 || inputs.is_empty() {
            return Err(Error::Dimension {
                op: "block_linear",
                msg: format!("weight must be K × in × out, got {:?}", tw.shape()),
            });
        }
        let (k, fan_in, fan_out) = (tw.shape()[0], tw.shape()[1], tw.shape()[2]);
        let p = inputs.len();
        if fan_in % p != 0 {
            return Err(Error::shape("block_linear", tw.shape(), &[p]));
        }
        let a = fan_in / p;
        let rows = self.value(inputs[0]).rows();
        for &inp in inputs {
            let t = self.value(inp);
            if t.dims2() != (rows, k * a) {
                return Err(Error::shape("block_linear", t.shape(), &[rows, k * a]));
            }
        }
        if let Some(b) = b {
            if self.value(b).numel() != k * fan_out {
                return Err(Error::shape("block_linear", self.value(b).shape(), &[k, fan_out]));
            }
        }
        let out_cols = k * fan_out;
        let mut out = vec![0.0; rows * out_cols];
        for i in 0..rows {
            let dst_row = &mut out[i * out_cols..(i + 1) * out_cols];
            for f in 0..k {
                let dst = &mut dst_row[f * fan_out..(f + 1) * fan_out];
                if let Some(b) = b {
                    dst.copy_from_slice(&self.nodes[b.0].value.data()[f * fan_out..(f + 1) * fan_out]);
                }
                let wf = &tw.data()[f * fan_in * fan_out..(f + 1) * fan_in * fan_out];
                for (pi, &inp) in inputs.iter().enumerate() {
                    let src = &self.nodes[inp.0].value.row(i)[f * a..(f + 1) * a];
                    let wp = &wf[pi * a * fan_out..(pi + 1) * a * fan_out];
                    gemm_acc(src, wp, dst, 1, a, fan_out);
                }
            }
        }
        let t = Tensor::matrix(rows, out_cols, out)?;
        let op = Op::BlockLinear {
            inputs: inputs.to_vec(),
            w,
            b,
        };
        self.push("block_linear", t, op)
    }

    /// Pairwise-correlation logits: for every edge `(u, v)`,
    /// `Σ_i Σ_j ws[i][j] · ⟨z_u,i, z_v,j⟩` where `z` is `n × K·w`, `ws` is `K × K`.
    pub fn pairwise_scores(&mut self, z: Var, ws: Var, edges: &Arc<[(usize, usize)]>) -> Result<Var> {
        let (tz, tw) = (self.value(z), self.value(ws));
        let (n, cols) = tz.dims2();
        let k = tw.rows();
        if tw.dims2() != (k, k) || k == 0 || cols % k != 0 {
            return Err(Error::shape("pairwise_scores", tz.shape(), tw.shape()));
        }
        check_edges("pairwise_scores", edges, n)?;
        let w = cols / k;
        let mut out = Vec::with_capacity(edges.len());
        let mut proj = vec![0.0; cols];
        for &(u, v) in edges.iter() {
            // proj[i-th block] = Σ_j ws[i][j] · z_v,j
            pairwise_project(tw.data(), tz.row(v), &mut proj, k, w);
            out.push(dot(tz.row(u), &proj));
        }
        let t = Tensor::vector(out);
        let op = Op::PairwiseScores {
            z,
            ws,
            edges: Arc::clone(edges),
        };
        self.push("pairwise_scores", t, op)
    }

    /// Concatenation logits `⟨w, [z_u ∥ z_v]⟩` with `w` of length `2·cols(z)`.
    pub fn concat_scores(&mut self, z: Var, w: Var, edges: &Arc<[(usize, usize)]>) -> Result<Var> {
        let (tz, tw) = (self.value(z), self.value(w));
        let (n, cols) = tz.dims2();
        if tw.numel() != 2 * cols {
            return Err(Error::shape("concat_scores", tz.shape(), tw.shape()));
        }
        check_edges("concat_scores", edges, n)?;
        let (wu, wv) = tw.data().split_at(cols);
        let out = edges
            .iter()
            .map(|&(u, v)| dot(wu, tz.row(u)) + dot(wv, tz.row(v)))
            .collect();
        let op = Op::ConcatScores {
            z,
            w,
            edges: Arc::clone(edges),
        };
        self.push("concat_scores", Tensor::vector(out), op)
    }

    /// Mean binary cross-entropy of probabilities `p` against 0/1 `labels`,
    /// with probabilities clamped to `[PROB_EPS, 1 - PROB_EPS]`.
    pub fn bce(&mut self, p: Var, labels: &Arc<[f64]>) -> Result<Var> {
        let tp = self.value(p);
        if tp.numel() == 0 {
            return Err(Error::usage("binary cross-entropy over an empty edge set"));
        }
        if tp.numel() != labels.len() {
            return Err(Error::shape("bce", tp.shape(), &[labels.len()]));
        }
        let total: f64 = tp
            .data()
            .iter()
            .zip(labels.iter())
            .map(|(&p, &y)| {
                let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum();
        let loss = total / labels.len() as f64;
        let op = Op::Bce {
            p,
            labels: Arc::clone(labels),
        };
        self.push("bce", Tensor::scalar(loss), op)
    }

    /// Mean over rows of `-log softmax(logits[r])[labels[r]]`.
    pub fn cross_entropy_rows(&mut self, logits: Var, labels: Vec<usize>) -> Result<Var> {
        let tl = self.value(logits);
        let (rows, classes) = tl.dims2();
        if rows != labels.len() || rows == 0 {
            return Err(Error::shape("cross_entropy_rows", tl.shape(), &[labels.len()]));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Dimension {
                op: "cross_entropy_rows",
                msg: format!("label {bad} out of {classes} classes"),
            });
        }
        let mut probs = tl.data().to_vec();
        let mut total = 0.0;
        for (r, row) in probs.chunks_mut(classes).enumerate() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[labels[r]];
            row.iter_mut().for_each(|v| *v = (*v - lse).exp());
        }
        let loss = total / rows as f64;
        let op = Op::CrossEntropyRows {
            logits,
            labels,
            probs,
        };
        self.push("cross_entropy_rows", Tensor::scalar(loss), op)
    }

    /// Reverse pass from a single-element output.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).numel() != 1 {
            return Err(Error::Dimension {
                op: "backward",
                msg: format!("output must be a scalar, got shape {:?}", self.value(output).shape()),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![1.0]);
        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            self.backprop_node(node, &g, &mut grads);
            if matches!(node.op, Op::Leaf | Op::Param(_)) {
                grads[i] = Some(g);
            }
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| match n.op {
                Op::Param(id) => Some((id, Var(i))),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.numel()]);
            f(slot);
        };
        let y = &node.value;
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (p, q, r) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                acc(*a, &mut |ga| gemm_nt_acc(g, tb.data(), ga, p, r, q));
                acc(*b, &mut |gb| gemm_tn_acc(ta.data(), g, gb, p, q, r));
            }
            Op::Transpose(a) => {
                let (r, c) = (y.shape()[0], y.shape()[1]);
                acc(*a, &mut |ga| {
                    for i in 0..r {
                        for j in 0..c {
                            ga[j * r + i] += g[i * c + j];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| axpy(1.0, g, ga));
                acc(*b, &mut |gb| axpy(1.0, g, gb));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| axpy(1.0, g, ga));
                acc(*b, &mut |gb| axpy(-1.0, g, gb));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                acc(*a, &mut |ga| {
                    for ((gi, &gv), &bv) in ga.iter_mut().zip(g).zip(tb.data()) {
                        *gi += gv * bv;
                    }
                });
                acc(*b, &mut |gb| {
                    for ((gi, &gv), &av) in gb.iter_mut().zip(g).zip(ta.data()) {
                        *gi += gv * av;
                    }
                });
            }
            Op::AddBias(x, b) => {
                acc(*x, &mut |gx| axpy(1.0, g, gx));
                let cols = val(*b).numel();
                acc(*b, &mut |gb| {
                    for row in g.chunks(cols) {
                        axpy(1.0, row, gb);
                    }
                });
            }
            Op::Scale(x, c) => acc(*x, &mut |gx| axpy(*c, g, gx)),
            Op::Tanh(x) => acc(*x, &mut |gx| {
                for ((gi, &gv), &yv) in gx.iter_mut().zip(g).zip(y.data()) {
                    *gi += gv * (1.0 - yv * yv);
                }
            }),
            Op::Sigmoid(x) => acc(*x, &mut |gx| {
                for ((gi, &gv), &yv) in gx.iter_mut().zip(g).zip(y.data()) {
                    *gi += gv * yv * (1.0 - yv);
                }
            }),
            Op::LeakyRelu(x) => {
                let tx = val(*x);
                acc(*x, &mut |gx| {
                    for ((gi, &gv), &xv) in gx.iter_mut().zip(g).zip(tx.data()) {
                        *gi += if xv >= 0.0 { gv } else { LEAKY_SLOPE * gv };
                    }
                });
            }
            Op::NormalizeBlocks { x, width, norms } => acc(*x, &mut |gx| {
                for (bi, &norm) in norms.iter().enumerate() {
                    let range = bi * width..(bi + 1) * width;
                    let (gy, yb) = (&g[range.clone()], &y.data()[range.clone()]);
                    let gxb = &mut gx[range];
                    if norm > NORM_EPS {
                        // (I - y yᵀ) g / ‖x‖
                        let proj = dot(yb, gy);
                        for ((gi, &gv), &yv) in gxb.iter_mut().zip(gy).zip(yb) {
                            *gi += (gv - proj * yv) / norm;
                        }
                    } else {
                        axpy(1.0 / NORM_EPS, gy, gxb);
                    }
                }
            }),
            Op::Softmax(x) => {
                let cols = y.cols();
                acc(*x, &mut |gx| {
                    for ((gxr, gr), yr) in gx.chunks_mut(cols).zip(g.chunks(cols)).zip(y.data().chunks(cols)) {
                        let inner = dot(gr, yr);
                        for ((gi, &gv), &yv) in gxr.iter_mut().zip(gr).zip(yr) {
                            *gi += yv * (gv - inner);
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let (rows, total) = y.dims2();
                let mut offset = 0;
                for &p in parts {
                    let w = val(p).cols();
                    acc(p, &mut |gp| {
                        for r in 0..rows {
                            axpy(1.0, &g[r * total + offset..r * total + offset + w], &mut gp[r * w..(r + 1) * w]);
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceCols { x, start } => {
                let (rows, len) = y.dims2();
                let cols = val(*x).cols();
                acc(*x, &mut |gx| {
                    for r in 0..rows {
                        axpy(1.0, &g[r * len..(r + 1) * len], &mut gx[r * cols + start..r * cols + start + len]);
                    }
                });
            }
            Op::Sum(x) => acc(*x, &mut |gx| gx.iter_mut().for_each(|v| *v += g[0])),
            Op::Mean(x) => {
                let scale = g[0] / val(*x).numel() as f64;
                acc(*x, &mut |gx| gx.iter_mut().for_each(|v| *v += scale));
            }
            Op::Reshape(x) => acc(*x, &mut |gx| axpy(1.0, g, gx)),
            Op::NeighborSum { x, csr, mean } => {
                let c = y.cols();
                acc(*x, &mut |gx| {
                    for r in 0..csr.rows() {
                        let nbrs = csr.row(r);
                        if nbrs.is_empty() {
                            continue;
                        }
                        let scale = if *mean { 1.0 / nbrs.len() as f64 } else { 1.0 };
                        let gr = &g[r * c..(r + 1) * c];
                        for &t in nbrs {
                            axpy(scale, gr, &mut gx[t * c..(t + 1) * c]);
                        }
                    }
                });
            }
            Op::BlockDot { x, a } => {
                let (tx, ta) = (val(*x), val(*a));
                let (k, w) = ta.dims2();
                let cols = k * w;
                acc(*x, &mut |gx| {
                    for (i, gxr) in gx.chunks_mut(cols).enumerate() {
                        for f in 0..k {
                            axpy(g[i * k + f], ta.row(f), &mut gxr[f * w..(f + 1) * w]);
                        }
                    }
                });
                acc(*a, &mut |ga| {
                    for (i, xr) in tx.data().chunks(cols).enumerate() {
                        for f in 0..k {
                            axpy(g[i * k + f], &xr[f * w..(f + 1) * w], &mut ga[f * w..(f + 1) * w]);
                        }
                    }
                });
            }
            Op::EdgeGatherAdd { row, nb, csr } => {
                let k = y.cols();
                acc(*row, &mut |gr| {
                    for r in 0..csr.rows() {
                        for e in csr.row_range(r) {
                            axpy(1.0, &g[e * k..(e + 1) * k], &mut gr[r * k..(r + 1) * k]);
                        }
                    }
                });
                acc(*nb, &mut |gn| {
                    for (e, &t) in csr.targets().iter().enumerate() {
                        axpy(1.0, &g[e * k..(e + 1) * k], &mut gn[t * k..(t + 1) * k]);
                    }
                });
            }
            Op::SegmentSoftmax { x, csr } => {
                let k = y.cols();
                acc(*x, &mut |gx| {
                    for r in 0..csr.rows() {
                        let range = csr.row_range(r);
                        for f in 0..k {
                            let inner: f64 = range.clone().map(|e| g[e * k + f] * y.data()[e * k + f]).sum();
                            for e in range.clone() {
                                gx[e * k + f] += y.data()[e * k + f] * (g[e * k + f] - inner);
                            }
                        }
                    }
                });
            }
            Op::WeightedNeighborSum { alpha, x, csr } => {
                let (ta, tx) = (val(*alpha), val(*x));
                let k = ta.cols();
                let cols = tx.cols();
                let w = cols / k;
                acc(*alpha, &mut |gal| {
                    for r in 0..csr.rows() {
                        let gr = &g[r * cols..(r + 1) * cols];
                        for e in csr.row_range(r) {
                            let src = tx.row(csr.targets()[e]);
                            for f in 0..k {
                                gal[e * k + f] += dot(&gr[f * w..(f + 1) * w], &src[f * w..(f + 1) * w]);
                            }
                        }
                    }
                });
                acc(*x, &mut |gx| {
                    for r in 0..csr.rows() {
                        let gr = &g[r * cols..(r + 1) * cols];
                        for e in csr.row_range(r) {
                            let t = csr.targets()[e];
                            let dst = &mut gx[t * cols..(t + 1) * cols];
                            for f in 0..k {
                                axpy(ta.data()[e * k + f], &gr[f * w..(f + 1) * w], &mut dst[f * w..(f + 1) * w]);
                            }
                        }
                    }
                });
            }
            Op::SegmentMax { x, argmax } => {
                let c = y.cols();
                acc(*x, &mut |gx| {
                    for (slot, &src) in argmax.iter().enumerate() {
                        if src != usize::MAX {
                            gx[src * c + slot % c] += g[slot];
                        }
                    }
                });
            }
            Op::BlockLinear { inputs, w, b } => {
                let tw = val(*w);
                let (k, fan_in, fan_out) = (tw.shape()[0], tw.shape()[1], tw.shape()[2]);
                let a = fan_in / inputs.len();
                let rows = y.rows();
                let out_cols = k * fan_out;
                for (pi, &inp) in inputs.iter().enumerate() {
                    let tin = val(inp);
                    acc(inp, &mut |gin| {
                        for i in 0..rows {
                            for f in 0..k {
                                let gy = &g[i * out_cols + f * fan_out..i * out_cols + (f + 1) * fan_out];
                                let wp = &tw.data()[f * fan_in * fan_out + pi * a * fan_out..][..a * fan_out];
                                let dst = &mut gin[i * k * a + f * a..i * k * a + (f + 1) * a];
                                gemm_nt_acc(gy, wp, dst, 1, fan_out, a);
                            }
                        }
                    });
                    acc(*w, &mut |gw| {
                        for i in 0..rows {
                            for f in 0..k {
                                let gy = &g[i * out_cols + f * fan_out..i * out_cols + (f + 1) * fan_out];
                                let src = &tin.row(i)[f * a..(f + 1) * a];
                                let dst = &mut gw[f * fan_in * fan_out + pi * a * fan_out..][..a * fan_out];
                                gemm_tn_acc(src, gy, dst, 1, a, fan_out);
                            }
                        }
                    });
                }
                if let Some(b) = b {
                    acc(*b, &mut |gb| {
                        for row in g.chunks(out_cols) {
                            axpy(1.0, row, gb);
                        }
                    });
                }
            }
            Op::PairwiseScores { z, ws, edges } => {
                let (tz, tw) = (val(*z), val(*ws));
                let k = tw.rows();
                let cols = tz.cols();
                let w = cols / k;
                let mut proj = vec![0.0; cols];
                acc(*z, &mut |gz| {
                    for (e, &(u, v)) in edges.iter().enumerate() {
                        let ge = g[e];
                        if ge == 0.0 {
                            continue;
                        }
                        // ∂s/∂z_u,i = Σ_j ws[i][j] z_v,j
                        pairwise_project(tw.data(), tz.row(v), &mut proj, k, w);
                        axpy(ge, &proj, &mut gz[u * cols..(u + 1) * cols]);
                        // ∂s/∂z_v,j = Σ_i ws[i][j] z_u,i
                        pairwise_project_t(tw.data(), tz.row(u), &mut proj, k, w);
                        axpy(ge, &proj, &mut gz[v * cols..(v + 1) * cols]);
                    }
                });
                acc(*ws, &mut |gw| {
                    for (e, &(u, v)) in edges.iter().enumerate() {
                        let (zu, zv) = (tz.row(u), tz.row(v));
                        for i in 0..k {
                            for j in 0..k {
                                gw[i * k + j] += g[e] * dot(&zu[i * w..(i + 1) * w], &zv[j * w..(j + 1) * w]);
                            }
                        }
                    }
                });
            }
            Op::ConcatScores { z, w, edges } => {
                let (tz, tw) = (val(*z), val(*w));
                let cols = tz.cols();
                let (wu, wv) = tw.data().split_at(cols);
                acc(*z, &mut |gz| {
                    for (e, &(u, v)) in edges.iter().enumerate() {
                        axpy(g[e], wu, &mut gz[u * cols..(u + 1) * cols]);
                        axpy(g[e], wv, &mut gz[v * cols..(v + 1) * cols]);
                    }
                });
                acc(*w, &mut |gw| {
                    for (e, &(u, v)) in edges.iter().enumerate() {
                        axpy(g[e], tz.row(u), &mut gw[..cols]);
                        axpy(g[e], tz.row(v), &mut gw[cols..]);
                    }
                });
            }
            Op::Bce { p, labels } => {
                let tp = val(*p);
                let scale = g[0] / labels.len() as f64;
                acc(*p, &mut |gp| {
                    for ((gi, &pv), &yv) in gp.iter_mut().zip(tp.data()).zip(labels.iter()) {
                        let pc = pv.clamp(PROB_EPS, 1.0 - PROB_EPS);
                        *gi += scale * (-(yv / pc) + (1.0 - yv) / (1.0 - pc));
                    }
                });
            }
            Op::CrossEntropyRows { logits, labels, probs } => {
                let classes = val(*logits).cols();
                let scale = g[0] / labels.len() as f64;
                acc(*logits, &mut |gl| {
                    for (r, (glr, pr)) in gl.chunks_mut(classes).zip(probs.chunks(classes)).enumerate() {
                        for (c, (gi, &pv)) in glr.iter_mut().zip(pr).enumerate() {
                            let target = if c == labels[r] { 1.0 } else { 0.0 };
                            *gi += scale * (pv - target);
                        }
                    }
                });
            }
        }
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

/// `out[i-th block] = Σ_j ws[i][j] · z[j-th block]`.
fn pairwise_project(ws: &[f64], z: &[f64], out: &mut [f64], k: usize, w: usize) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..k {
        let dst = &mut out[i * w..(i + 1) * w];
        for j in 0..k {
            axpy(ws[i * k + j], &z[j * w..(j + 1) * w], dst);
        }
    }
}

/// `out[j-th block] = Σ_i ws[i][j] · z[i-th block]`.
fn pairwise_project_t(ws: &[f64], z: &[f64], out: &mut [f64], k: usize, w: usize) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..k {
        let src = &z[i * w..(i + 1) * w];
        for j in 0..k {
            axpy(ws[i * k + j], src, &mut out[j * w..(j + 1) * w]);
        }
    }
}

fn check_targets(op: &'static str, csr: &Csr, rows: usize) -> Result<()> {
    if csr.max_target() > rows {
        return Err(Error::Dimension {
            op,
            msg: format!("neighbor id {} out of {} rows", csr.max_target() - 1, rows),
        });
    }
    Ok(())
}

fn check_edges(op: &'static str, edges: &[(usize, usize)], rows: usize) -> Result<()> {
    if let Some(&(u, v)) = edges.iter().find(|&&(u, v)| u >= rows || v >= rows) {
        return Err(Error::Dimension {
            op,
            msg: format!("edge ({u}, {v}) out of {rows} nodes"),
        });
    }
    Ok(())
}
