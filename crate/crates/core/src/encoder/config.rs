use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Neighborhood aggregation used inside every convolution layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Sum,
    Mean,
    Max,
    Attention,
}

impl Aggregator {
    pub const ALL: [Aggregator; 4] = [Aggregator::Sum, Aggregator::Mean, Aggregator::Max, Aggregator::Attention];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Sum => "sum",
            Aggregator::Mean => "mean",
            Aggregator::Max => "max",
            Aggregator::Attention => "attention",
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregator::Sum),
            "mean" => Ok(Aggregator::Mean),
            "max" => Ok(Aggregator::Max),
            "attention" | "attn" => Ok(Aggregator::Attention),
            other => Err(Error::usage(format!(
                "unknown aggregator '{other}' (expected sum, mean, max or attention)"
            ))),
        }
    }
}

/// Shape of the encoder: `K` factors, `L` layers and widths `d_0..d_L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub factors: usize,
    pub layers: usize,
    pub d_in: usize,
    /// `d_0, …, d_L`; `widths.len() == layers + 1`.
    pub widths: Vec<usize>,
    pub aggregator: Aggregator,
}

impl EncoderConfig {
    /// Every layer `d_out` wide.
    pub fn new(d_in: usize, factors: usize, layers: usize, d_out: usize, aggregator: Aggregator) -> Self {
        EncoderConfig {
            factors,
            layers,
            d_in,
            widths: vec![d_out; layers + 1],
            aggregator,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.factors == 0 {
            return Err(Error::config("K must be at least 1"));
        }
        if self.layers == 0 {
            return Err(Error::config("L must be at least 1"));
        }
        if self.d_in == 0 {
            return Err(Error::config("input feature width must be positive"));
        }
        if self.widths.len() != self.layers + 1 {
            return Err(Error::config(format!(
                "expected {} layer widths, got {}",
                self.layers + 1,
                self.widths.len()
            )));
        }
        for (l, &d) in self.widths.iter().enumerate() {
            if d == 0 || d % self.factors != 0 {
                return Err(Error::config(format!(
                    "width d_{l} = {d} is not a positive multiple of K = {}",
                    self.factors
                )));
            }
        }
        Ok(())
    }

    /// Per-factor width `d_l / K`.
    pub fn factor_width(&self, layer: usize) -> usize {
        self.widths[layer] / self.factors
    }

    /// Final embedding width `d_L`.
    pub fn output_dim(&self) -> usize {
        self.widths[self.layers]
    }
}
