use rand::Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::tape::Gradients;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Owns every trainable tensor together with its accumulated gradient and
/// optimizer state.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    #[serde(skip)]
    grads: Vec<Option<Tensor>>,
    #[serde(skip)]
    adam: Vec<Option<AdamState>>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        self.grads.push(None);
        self.adam.push(None);
        ParamId(self.values.len() - 1)
    }

    /// Glorot-uniform initialized parameter with the given fans.
    pub fn insert_glorot<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.random_range(-bound..=bound)).collect();
        let t = Tensor::new(shape.to_vec(), data).expect("numel matches shape");
        self.insert(name, t)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    /// Adds the tape's parameter gradients into the stored ones (`+=`).
    /// A parameter that was on the tape but did not reach the output gets a
    /// zero gradient.
    pub fn accumulate(&mut self, grads: &Gradients) {
        self.ensure_slots();
        for (id, g) in grads.params() {
            let shape = self.values[id.0].shape().to_vec();
            let slot = self.grads[id.0].get_or_insert_with(|| Tensor::zeros(&shape));
            if let Some(g) = g {
                for (a, b) in slot.data_mut().iter_mut().zip(g) {
                    *a += b;
                }
            }
        }
    }

    /// Applies one Adam step to every parameter. Parameters that received no
    /// gradient are an error.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        self.ensure_slots();
        for i in 0..self.values.len() {
            let grad = self.grads[i].as_ref().ok_or_else(|| {
                Error::usage(format!("parameter '{}' has no gradient", self.names[i]))
            })?;
            let state = self.adam[i].get_or_insert_with(|| AdamState::new(self.values[i].shape(), cfg));
            state.step(&mut self.values[i], grad, cfg.learning_rate, cfg.weight_decay)?;
        }
        Ok(())
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    fn ensure_slots(&mut self) {
        self.grads.resize(self.values.len(), None);
        self.adam.resize(self.values.len(), None);
    }
}
