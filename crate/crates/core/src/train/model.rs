use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::decoder::{Decoder, Discriminator};
use crate::encoder::{DisentangledEmbedding, Encoder, EncoderTrace};
use crate::error::Result;
use crate::graph::SignedDigraph;
use crate::numerics::{ParamStore, Tape, Tensor, Var};

/// Encoder, decoder and optional discriminator. Weights live in a
/// [`ParamStore`] owned by the caller.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DinesModel {
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub discriminator: Option<Discriminator>,
}

/// Tape handles of one forward pass over a set of labelled edges.
#[derive(Clone, Debug)]
pub struct Forward {
    pub loss: Var,
    pub bce: Var,
    pub disc: Option<Var>,
    pub probs: Var,
    pub trace: EncoderTrace,
}

impl DinesModel {
    /// Initializes every parameter from `cfg.seed`. The discriminator is
    /// drawn last, so runs with and without it share all other weights.
    pub fn new(cfg: &TrainConfig, store: &mut ParamStore) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let enc = cfg.encoder.clone();
        let (k, d_out) = (enc.factors, enc.output_dim());
        let encoder = Encoder::new(enc, store, &mut rng)?;
        let decoder = Decoder::new(cfg.variant.decoder(), k, d_out, store, &mut rng);
        let discriminator = cfg
            .uses_discriminator()
            .then(|| Discriminator::new(k, d_out / k, store, &mut rng));
        Ok(DinesModel {
            encoder,
            decoder,
            discriminator,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        graph: &SignedDigraph,
        features: Var,
        edges: &Arc<[(usize, usize)]>,
        labels: &Arc<[f64]>,
        lambda_disc: f64,
    ) -> Result<Forward> {
        let trace = self.encoder.forward(tape, store, graph, features)?;
        let logits = self.decoder.logits(tape, store, trace.embeddings, edges)?;
        let probs = tape.sigmoid(logits)?;
        let bce = tape.bce(probs, labels)?;
        let (loss, disc) = match &self.discriminator {
            Some(d) => {
                let disc = d.loss(tape, store, trace.embeddings)?;
                let weighted = tape.scale(disc, lambda_disc)?;
                (tape.add(bce, weighted)?, Some(disc))
            }
            None => (bce, None),
        };
        Ok(Forward {
            loss,
            bce,
            disc,
            probs,
            trace,
        })
    }

    /// `p_uv` for every pair, encoding over `graph`.
    pub fn predict(&self, store: &ParamStore, graph: &SignedDigraph, features: &Tensor, edges: &[(usize, usize)]) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let x = tape.leaf(features.clone())?;
        let trace = self.encoder.forward(&mut tape, store, graph, x)?;
        let edges: Arc<[(usize, usize)]> = edges.into();
        let logits = self.decoder.logits(&mut tape, store, trace.embeddings, &edges)?;
        let probs = tape.sigmoid(logits)?;
        Ok(tape.value(probs).data().to_vec())
    }

    pub fn embed(&self, store: &ParamStore, graph: &SignedDigraph, features: &Tensor) -> Result<DisentangledEmbedding> {
        self.encoder.encode(store, graph, features)
    }
}
