use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::presets::Hyperparams;
use crate::decoder::DecoderKind;
use crate::encoder::{Aggregator, EncoderConfig};
use crate::error::{Error, Result};

pub const DEFAULT_EPOCHS: usize = 100;

/// Model variants compared in the ablation study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Pairwise decoder with the factor discriminator.
    Full,
    /// Pairwise decoder, no discriminator.
    NoSsl,
    /// Concatenation decoder, no discriminator.
    NoSslNoPairwise,
    /// `NoSslNoPairwise` with a single factor.
    Entangled,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoSsl, Variant::NoSslNoPairwise, Variant::Entangled];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoSsl => "no-ssl",
            Variant::NoSslNoPairwise => "no-ssl-no-pairwise",
            Variant::Entangled => "entangled",
        }
    }

    /// Label used in the published ablation table.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "DINES",
            Variant::NoSsl => "DINES-s",
            Variant::NoSslNoPairwise => "DINES-sp",
            Variant::Entangled => "DINES-spd",
        }
    }

    pub fn decoder(self) -> DecoderKind {
        match self {
            Variant::Full | Variant::NoSsl => DecoderKind::Pairwise,
            Variant::NoSslNoPairwise | Variant::Entangled => DecoderKind::Concat,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "dines" => Ok(Variant::Full),
            "no-ssl" | "dines-s" => Ok(Variant::NoSsl),
            "no-ssl-no-pairwise" | "dines-sp" => Ok(Variant::NoSslNoPairwise),
            "entangled" | "dines-spd" => Ok(Variant::Entangled),
            other => Err(Error::usage(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lambda_disc: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub variant: Variant,
    pub encoder: EncoderConfig,
}

impl TrainConfig {
    /// Full-model configuration from a hyperparameter set.
    pub fn from_hyperparams(hp: &Hyperparams, d_in: usize, aggregator: Aggregator, seed: u64) -> Self {
        TrainConfig {
            epochs: DEFAULT_EPOCHS,
            learning_rate: hp.learning_rate,
            lambda_disc: hp.lambda_disc,
            weight_decay: hp.weight_decay,
            seed,
            variant: Variant::Full,
            encoder: EncoderConfig::new(d_in, hp.factors, hp.layers, hp.d_out, aggregator),
        }
    }

    /// Switches the variant; `Entangled` also sets `K = 1`.
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        if variant == Variant::Entangled {
            self.encoder.factors = 1;
        }
        self
    }

    /// Whether the factor discriminator contributes to the loss.
    pub fn uses_discriminator(&self) -> bool {
        self.variant == Variant::Full && self.lambda_disc > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(self.lambda_disc >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::config("λ_disc and λ_reg must be non-negative"));
        }
        if self.variant == Variant::Entangled && self.encoder.factors != 1 {
            return Err(Error::config("the entangled variant requires K = 1"));
        }
        self.encoder.validate()
    }
}
