use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{Aggregator, EncoderConfig};
use super::embedding::DisentangledEmbedding;
use crate::error::{Error, Result};
use crate::graph::{Delta, SignedDigraph};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};

/// Parameters of one convolution layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// `K × 5a × b` update weight over `[f ∥ m_out+ ∥ m_out− ∥ m_in+ ∥ m_in−]`.
    pub update_w: ParamId,
    /// `K × b`
    pub update_b: ParamId,
    /// Per-δ aggregator weights, in `Delta::ALL` order. Attention vectors are
    /// `K × 2a` (self half first); max-pool maps are `K × a × a`, applied
    /// as `f · W`.
    pub aggregator: Option<[ParamId; 4]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// `d_in × K·w_0`; columns of factor `k` form `W_k`.
    pub init_w: ParamId,
    /// `K·w_0`
    pub init_b: ParamId,
    pub layers: Vec<LayerParams>,
}

/// Disentangled signed directed graph encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    config: EncoderConfig,
    params: EncoderParams,
}

/// Tape handles produced by one forward pass.
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    /// `n × d_L` final embeddings, factor `k` in columns `k·w..(k+1)·w`.
    pub embeddings: Var,
    /// Per layer, the four `n × d_{l−1}` message blocks in `Delta::ALL` order.
    pub messages: Vec<[Var; 4]>,
}

pub(crate) fn read(tape: &mut Tape, store: &ParamStore, id: ParamId) -> Result<Var> {
    tape.param(id, store.get(id).clone())
}

impl Encoder {
    /// Registers Glorot-initialized weights and zero biases in `store`.
    pub fn new<R: Rng>(config: EncoderConfig, store: &mut ParamStore, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let k = config.factors;
        let w0 = config.factor_width(0);
        let init_w = store.insert_glorot("encoder.init.w", &[config.d_in, k * w0], config.d_in, w0, rng);
        let init_b = store.insert("encoder.init.b", Tensor::zeros(&[k * w0]));
        let mut layers = Vec::with_capacity(config.layers);
        for l in 1..=config.layers {
            let (a, b) = (config.factor_width(l - 1), config.factor_width(l));
            let aggregator = match config.aggregator {
                Aggregator::Sum | Aggregator::Mean => None,
                Aggregator::Attention => Some(Delta::ALL.map(|d| {
                    store.insert_glorot(format!("encoder.layer{l}.attention.{}", d.name()), &[k, 2 * a], 2 * a, 1, rng)
                })),
                Aggregator::Max => Some(Delta::ALL.map(|d| {
                    store.insert_glorot(format!("encoder.layer{l}.max.{}", d.name()), &[k, a, a], a, a, rng)
                })),
            };
            let update_w = store.insert_glorot(format!("encoder.layer{l}.update.w"), &[k, 5 * a, b], 5 * a, b, rng);
            let update_b = store.insert(format!("encoder.layer{l}.update.b"), Tensor::zeros(&[k, b]));
            layers.push(LayerParams {
                update_w,
                update_b,
                aggregator,
            });
        }
        Ok(Encoder {
            config,
            params: EncoderParams { init_w, init_b, layers },
        })
    }

    pub fn from_parts(config: EncoderConfig, params: EncoderParams) -> Result<Self> {
        config.validate()?;
        if params.layers.len() != config.layers {
            return Err(Error::config("layer parameter count disagrees with L"));
        }
        Ok(Encoder { config, params })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &EncoderParams {
        &self.params
    }

    /// Records the full forward pass on `tape`. `features` is `n × d_in`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, graph: &SignedDigraph, features: Var) -> Result<EncoderTrace> {
        let cfg = &self.config;
        let (n, d_in) = tape.value(features).dims2();
        if d_in != cfg.d_in || n != graph.node_count() {
            return Err(Error::shape("encode", &[n, d_in], &[graph.node_count(), cfg.d_in]));
        }
        let w = read(tape, store, self.params.init_w)?;
        let b = read(tape, store, self.params.init_b)?;
        let h = tape.matmul(features, w)?;
        let h = tape.add_bias(h, b)?;
        let h = tape.tanh(h)?;
        let mut f = tape.l2_normalize_blocks(h, cfg.factor_width(0))?;

        let mut messages = Vec::with_capacity(cfg.layers);
        for (li, layer) in self.params.layers.iter().enumerate() {
            let mut m = [f; 4];
            for delta in Delta::ALL {
                let extra = layer.aggregator.map(|p| p[delta.index()]);
                m[delta.index()] = self.aggregate(tape, store, graph, f, delta, extra)?;
            }
            let uw = read(tape, store, layer.update_w)?;
            let ub = read(tape, store, layer.update_b)?;
            let h = tape.block_linear(&[f, m[0], m[1], m[2], m[3]], uw, Some(ub))?;
            let h = tape.tanh(h)?;
            f = tape.l2_normalize_blocks(h, cfg.factor_width(li + 1))?;
            messages.push(m);
        }
        Ok(EncoderTrace { embeddings: f, messages })
    }

    fn aggregate(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &SignedDigraph,
        f: Var,
        delta: Delta,
        param: Option<ParamId>,
    ) -> Result<Var> {
        let csr = graph.index(delta);
        let missing = || Error::config("aggregator weights missing");
        match self.config.aggregator {
            Aggregator::Sum => tape.neighbor_sum(f, csr, false),
            Aggregator::Mean => tape.neighbor_sum(f, csr, true),
            Aggregator::Max => {
                let wd = read(tape, store, param.ok_or_else(missing)?)?;
                let t = tape.block_linear(&[f], wd, None)?;
                tape.segment_max(t, csr)
            }
            Aggregator::Attention => {
                let a = read(tape, store, param.ok_or_else(missing)?)?;
                let width = tape.value(a).cols() / 2;
                let a_self = tape.slice_cols(a, 0, width)?;
                let a_nb = tape.slice_cols(a, width, width)?;
                let s_self = tape.block_dot(f, a_self)?;
                let s_nb = tape.block_dot(f, a_nb)?;
                let e = tape.edge_gather_add(s_self, s_nb, csr)?;
                let e = tape.leaky_relu(e)?;
                let alpha = tape.segment_softmax(e, csr)?;
                tape.weighted_neighbor_sum(alpha, f, csr)
            }
        }
    }

    /// Inference-only forward pass.
    pub fn encode(&self, store: &ParamStore, graph: &SignedDigraph, features: &Tensor) -> Result<DisentangledEmbedding> {
        let mut tape = Tape::new();
        let x = tape.leaf(features.clone())?;
        let trace = self.forward(&mut tape, store, graph, x)?;
        DisentangledEmbedding::new(tape.value(trace.embeddings).clone(), self.config.factors)
    }
}
