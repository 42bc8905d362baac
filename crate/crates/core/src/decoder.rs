//! Edge decoders, the factor discriminator and the loss terms.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::{read, DisentangledEmbedding};
use crate::error::{Error, Result};
use crate::graph::Sign;
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var, PROB_EPS};

/// `K × K` matrix of factor inner products `H[i][j] = ⟨z_u,i, z_v,j⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeFeatureMap {
    k: usize,
    values: Vec<f64>,
}

impl EdgeFeatureMap {
    pub fn factors(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    pub fn transpose(&self) -> Self {
        let k = self.k;
        let values = (0..k * k).map(|e| self.values[(e % k) * k + e / k]).collect();
        EdgeFeatureMap { k, values }
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::matrix(self.k, self.k, self.values.clone()).expect("k × k")
    }
}

pub fn edge_feature_map(z_u: &[f64], z_v: &[f64], k: usize) -> Result<EdgeFeatureMap> {
    if k == 0 || z_u.len() != z_v.len() || z_u.len() % k != 0 {
        return Err(Error::shape("edge_feature_map", &[z_u.len(), k], &[z_v.len(), k]));
    }
    let w = z_u.len() / k;
    let mut values = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let (a, b) = (&z_u[i * w..(i + 1) * w], &z_v[j * w..(j + 1) * w]);
            values.push(a.iter().zip(b).map(|(x, y)| x * y).sum());
        }
    }
    Ok(EdgeFeatureMap { k, values })
}

/// `Σ_ij W_s[i][j] · H[i][j]`
pub fn score_pairwise(h: &EdgeFeatureMap, ws: &Tensor) -> Result<f64> {
    if ws.dims2() != (h.k, h.k) {
        return Err(Error::shape("score_pairwise", &[h.k, h.k], ws.shape()));
    }
    Ok(h.values.iter().zip(ws.data()).map(|(a, b)| a * b).sum())
}

/// `⟨w, [z_u ∥ z_v]⟩`
pub fn score_concat(z_u: &[f64], z_v: &[f64], w: &[f64]) -> Result<f64> {
    if w.len() != z_u.len() + z_v.len() {
        return Err(Error::shape("score_concat", &[z_u.len() + z_v.len()], &[w.len()]));
    }
    Ok(z_u.iter().chain(z_v).zip(w).map(|(a, b)| a * b).sum())
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy with probabilities clamped to `[PROB_EPS, 1 − PROB_EPS]`.
pub fn bce_loss(p: &[f64], y: &[f64]) -> Result<f64> {
    if p.is_empty() {
        return Err(Error::usage("bce over an empty edge set"));
    }
    if p.len() != y.len() {
        return Err(Error::shape("bce_loss", &[p.len()], &[y.len()]));
    }
    let total: f64 = p
        .iter()
        .zip(y)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / p.len() as f64)
}

/// Mean cross-entropy of classifying every factor `z_u,k` as class `k` with
/// the shared classifier `softmax(W_disc z + b_disc)`.
pub fn disc_loss(z: &DisentangledEmbedding, w_disc: &Tensor, b_disc: &[f64]) -> Result<f64> {
    let (k, w) = (z.factors(), z.factor_width());
    if w_disc.dims2() != (k, w) || b_disc.len() != k {
        return Err(Error::shape("disc_loss", &[k, w], w_disc.shape()));
    }
    let mut total = 0.0;
    let mut logits = vec![0.0; k];
    for u in 0..z.node_count() {
        for f in 0..k {
            let x = z.factor(u, f);
            for (c, l) in logits.iter_mut().enumerate() {
                *l = b_disc[c] + w_disc.row(c).iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            total += lse - logits[f];
        }
    }
    Ok(total / (z.node_count() * k) as f64)
}

pub fn total_loss(bce: f64, disc: f64, lambda_disc: f64) -> f64 {
    bce + lambda_disc * disc
}

/// `+` iff `p ≥ 0.5`.
pub fn predict_sign(p: f64) -> Sign {
    if p >= 0.5 {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    /// Learnable weighting of the factor correlation matrix.
    Pairwise,
    /// Linear scoring of the concatenated endpoint embeddings.
    Concat,
}

/// Edge scorer with its trainable weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoder {
    pub kind: DecoderKind,
    /// `W_s` (`K × K`) or `w` (`2·d_out`).
    pub weight: ParamId,
}

impl Decoder {
    pub fn new<R: Rng>(kind: DecoderKind, factors: usize, d_out: usize, store: &mut ParamStore, rng: &mut R) -> Self {
        let weight = match kind {
            DecoderKind::Pairwise => store.insert_glorot("decoder.ws", &[factors, factors], factors, factors, rng),
            DecoderKind::Concat => store.insert_glorot("decoder.w", &[2 * d_out], 2 * d_out, 1, rng),
        };
        Decoder { kind, weight }
    }

    /// Logits for every `(src, dst)` pair, as a vector.
    pub fn logits(&self, tape: &mut Tape, store: &ParamStore, z: Var, edges: &Arc<[(usize, usize)]>) -> Result<Var> {
        let w = read(tape, store, self.weight)?;
        match self.kind {
            DecoderKind::Pairwise => tape.pairwise_scores(z, w, edges),
            DecoderKind::Concat => tape.concat_scores(z, w, edges),
        }
    }
}

/// Shared factor classifier `FC_disc`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    /// `K × w`
    pub w: ParamId,
    /// `K`
    pub b: ParamId,
}

impl Discriminator {
    pub fn new<R: Rng>(factors: usize, width: usize, store: &mut ParamStore, rng: &mut R) -> Self {
        let w = store.insert_glorot("discriminator.w", &[factors, width], width, factors, rng);
        let b = store.insert("discriminator.b", Tensor::zeros(&[factors]));
        Discriminator { w, b }
    }

    /// Mean factor-classification cross-entropy of the `n × K·w` embedding `z`.
    pub fn loss(&self, tape: &mut Tape, store: &ParamStore, z: Var) -> Result<Var> {
        let w = read(tape, store, self.w)?;
        let b = read(tape, store, self.b)?;
        let (k, width) = tape.value(w).dims2();
        let (n, cols) = tape.value(z).dims2();
        if cols != k * width {
            return Err(Error::shape("discriminator", &[n, cols], &[k, width]));
        }
        let rows = tape.reshape(z, vec![n * k, width])?;
        let wt = tape.transpose(w)?;
        let logits = tape.matmul(rows, wt)?;
        let logits = tape.add_bias(logits, b)?;
        tape.cross_entropy_rows(logits, (0..n * k).map(|r| r % k).collect())
    }
}
