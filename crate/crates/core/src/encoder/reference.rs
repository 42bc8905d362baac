//! Single-node evaluation of the encoder steps, without a tape.

use super::config::Aggregator;
use crate::error::{Error, Result};
use crate::numerics::{Tensor, LEAKY_SLOPE, NORM_EPS};

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= NORM_EPS {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// `x · W` for a row vector `x` and an `len(x) × c` matrix.
fn vec_mat(x: &[f64], w: &Tensor, op: &'static str) -> Result<Vec<f64>> {
    let (r, c) = w.dims2();
    if r != x.len() {
        return Err(Error::shape(op, &[x.len()], w.shape()));
    }
    let mut out = vec![0.0; c];
    for (i, &xi) in x.iter().enumerate() {
        for (o, wij) in out.iter_mut().zip(w.row(i)) {
            *o += xi * wij;
        }
    }
    Ok(out)
}

/// `normalize(tanh(W_kᵀ x + b_k))` with `W_k` of shape `d_in × w`.
pub fn initial_disentangle(x: &[f64], w: &Tensor, b: &[f64]) -> Result<Vec<f64>> {
    let mut h = vec_mat(x, w, "initial_disentangle")?;
    if b.len() != h.len() {
        return Err(Error::shape("initial_disentangle", &[h.len()], &[b.len()]));
    }
    h.iter_mut().zip(b).for_each(|(v, bi)| *v = (*v + bi).tanh());
    Ok(normalize(h))
}

/// Attention weights of `u` over `neighbors`: softmax of
/// `LeakyReLU(⟨a, [f_u ∥ f_v]⟩)`. Empty neighborhoods give no weights.
pub fn attention_weights(own: &[f64], neighbors: &[&[f64]], a: &[f64]) -> Result<Vec<f64>> {
    let w = own.len();
    if a.len() != 2 * w {
        return Err(Error::shape("attention", &[2 * w], &[a.len()]));
    }
    let self_term: f64 = own.iter().zip(&a[..w]).map(|(x, y)| x * y).sum();
    let mut scores: Vec<f64> = neighbors
        .iter()
        .map(|nb| {
            let s = self_term + nb.iter().zip(&a[w..]).map(|(x, y)| x * y).sum::<f64>();
            if s >= 0.0 {
                s
            } else {
                LEAKY_SLOPE * s
            }
        })
        .collect();
    if scores.is_empty() {
        return Ok(scores);
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores.iter_mut().for_each(|s| *s = (*s - max).exp());
    let total: f64 = scores.iter().sum();
    scores.iter_mut().for_each(|s| *s /= total);
    Ok(scores)
}

/// Message slice `m_{u,k}^δ` of one factor. `param` is the attention vector
/// (length `2w`, as a `1 × 2w` or `2w` tensor) or the `w × w` max-pool map.
pub fn aggregate(kind: Aggregator, own: &[f64], neighbors: &[&[f64]], param: Option<&Tensor>) -> Result<Vec<f64>> {
    let w = own.len();
    if let Some(nb) = neighbors.iter().find(|nb| nb.len() != w) {
        return Err(Error::shape("aggregate", &[w], &[nb.len()]));
    }
    let mut out = vec![0.0; w];
    if neighbors.is_empty() {
        return Ok(out);
    }
    let need = || Error::usage(format!("{kind} aggregator needs a weight"));
    match kind {
        Aggregator::Sum => {
            for nb in neighbors {
                out.iter_mut().zip(nb.iter()).for_each(|(o, x)| *o += x);
            }
        }
        Aggregator::Mean => {
            for (i, nb) in neighbors.iter().enumerate() {
                let inv = 1.0 / (i + 1) as f64;
                out.iter_mut().zip(nb.iter()).for_each(|(o, x)| *o += (x - *o) * inv);
            }
        }
        Aggregator::Attention => {
            let alpha = attention_weights(own, neighbors, param.ok_or_else(need)?.data())?;
            for (nb, a) in neighbors.iter().zip(alpha) {
                out.iter_mut().zip(nb.iter()).for_each(|(o, x)| *o += a * x);
            }
        }
        Aggregator::Max => {
            let wd = param.ok_or_else(need)?;
            for (i, nb) in neighbors.iter().enumerate() {
                let t = vec_mat(nb, wd, "aggregate")?;
                if t.len() != w {
                    return Err(Error::shape("aggregate", &[w, w], wd.shape()));
                }
                for (o, v) in out.iter_mut().zip(t) {
                    if i == 0 || v > *o {
                        *o = v;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// `normalize(tanh([f ∥ m_out+ ∥ m_out− ∥ m_in+ ∥ m_in−] · W + b))` with
/// `W` of shape `5a × b`.
pub fn dsg_conv(own: &[f64], messages: &[Vec<f64>; 4], w: &Tensor, b: &[f64]) -> Result<Vec<f64>> {
    let mut input = own.to_vec();
    for m in messages {
        if m.len() != own.len() {
            return Err(Error::shape("dsg_conv", &[own.len()], &[m.len()]));
        }
        input.extend_from_slice(m);
    }
    let mut h = vec_mat(&input, w, "dsg_conv")?;
    if b.len() != h.len() {
        return Err(Error::shape("dsg_conv", &[h.len()], &[b.len()]));
    }
    h.iter_mut().zip(b).for_each(|(v, bi)| *v = (*v + bi).tanh());
    Ok(normalize(h))
}
