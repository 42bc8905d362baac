use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeFormat;

/// Metric a hyperparameter set was validated for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Auc,
    MacroF1,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auc" => Ok(Metric::Auc),
            "macro-f1" | "f1" | "macro_f1" => Ok(Metric::MacroF1),
            other => Err(Error::usage(format!("unknown metric '{other}' (expected auc or macro-f1)"))),
        }
    }
}

/// `L, K, d, λ_disc, η, λ_reg`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub layers: usize,
    pub factors: usize,
    pub d_out: usize,
    pub lambda_disc: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            layers: 2,
            factors: 8,
            d_out: 64,
            lambda_disc: 0.1,
            learning_rate: 0.005,
            weight_decay: 0.005,
        }
    }
}

/// Published summary statistics of a benchmark graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetStats {
    pub nodes: usize,
    pub edges: usize,
    pub positive: usize,
    pub negative: usize,
    /// Percent positive, one decimal.
    pub positive_ratio_permille: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dataset {
    BcAlpha,
    BcOtc,
    WikiRfa,
    Slashdot,
    Epinions,
}

const fn hp(layers: usize, factors: usize, lambda_disc: f64, learning_rate: f64, weight_decay: f64) -> Hyperparams {
    Hyperparams {
        layers,
        factors,
        d_out: 64,
        lambda_disc,
        learning_rate,
        weight_decay,
    }
}

impl Dataset {
    pub const ALL: [Dataset; 5] = [
        Dataset::BcAlpha,
        Dataset::BcOtc,
        Dataset::WikiRfa,
        Dataset::Slashdot,
        Dataset::Epinions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::BcAlpha => "bc-alpha",
            Dataset::BcOtc => "bc-otc",
            Dataset::WikiRfa => "wiki-rfa",
            Dataset::Slashdot => "slashdot",
            Dataset::Epinions => "epinions",
        }
    }

    /// Validated hyperparameters for `metric`.
    pub fn hyperparams(self, metric: Metric) -> Hyperparams {
        match (metric, self) {
            (Metric::Auc, Dataset::BcAlpha) => hp(2, 8, 0.1, 0.01, 0.005),
            (Metric::Auc, Dataset::BcOtc) => hp(2, 8, 0.1, 0.005, 0.01),
            (Metric::Auc, Dataset::WikiRfa) => hp(2, 8, 0.1, 0.005, 0.005),
            (Metric::Auc, Dataset::Slashdot) => hp(2, 8, 0.5, 0.01, 0.01),
            (Metric::Auc, Dataset::Epinions) => hp(2, 8, 0.1, 0.005, 0.005),
            (Metric::MacroF1, Dataset::BcAlpha) => hp(2, 16, 0.1, 0.005, 0.005),
            (Metric::MacroF1, Dataset::BcOtc) => hp(2, 8, 0.1, 0.005, 0.005),
            (Metric::MacroF1, Dataset::WikiRfa) => hp(2, 16, 0.1, 0.005, 0.005),
            (Metric::MacroF1, Dataset::Slashdot) => hp(2, 8, 0.1, 0.005, 0.01),
            (Metric::MacroF1, Dataset::Epinions) => hp(2, 8, 0.1, 0.005, 0.01),
        }
    }

    pub fn stats(self) -> DatasetStats {
        let (nodes, edges, positive, negative, positive_ratio_permille) = match self {
            Dataset::BcAlpha => (3_783, 24_186, 22_650, 1_536, 936),
            Dataset::BcOtc => (5_881, 35_592, 32_029, 3_563, 900),
            Dataset::WikiRfa => (11_258, 178_096, 138_473, 38_623, 783),
            Dataset::Slashdot => (79_120, 515_397, 392_326, 123_255, 761),
            Dataset::Epinions => (131_828, 841_372, 717_667, 123_705, 853),
        };
        DatasetStats {
            nodes,
            edges,
            positive,
            negative,
            positive_ratio_permille,
        }
    }

    /// Raw file layout of the public release.
    pub fn format(self) -> EdgeFormat {
        match self {
            Dataset::BcAlpha | Dataset::BcOtc => EdgeFormat::BitcoinCsv,
            Dataset::WikiRfa => EdgeFormat::WikiRfa,
            Dataset::Slashdot | Dataset::Epinions => EdgeFormat::Triple,
        }
    }

    /// File names under which the raw release is usually distributed.
    pub fn file_names(self) -> &'static [&'static str] {
        match self {
            Dataset::BcAlpha => &["soc-sign-bitcoinalpha.csv", "bc-alpha.csv"],
            Dataset::BcOtc => &["soc-sign-bitcoinotc.csv", "bc-otc.csv"],
            Dataset::WikiRfa => &["wiki-RfA.txt", "wiki-rfa.txt"],
            Dataset::Slashdot => &["out.slashdot-zoo", "slashdot.tsv", "soc-sign-Slashdot090221.txt"],
            Dataset::Epinions => &["soc-sign-epinions.txt", "epinions.tsv"],
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.to_ascii_lowercase().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
        match key.as_str() {
            "bcalpha" | "bitcoinalpha" => Ok(Dataset::BcAlpha),
            "bcotc" | "bitcoinotc" => Ok(Dataset::BcOtc),
            "wikirfa" => Ok(Dataset::WikiRfa),
            "slashdot" => Ok(Dataset::Slashdot),
            "epinions" => Ok(Dataset::Epinions),
            _ => Err(Error::usage(format!("unknown dataset '{s}'"))),
        }
    }
}
