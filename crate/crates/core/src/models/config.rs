use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autodiff::OptimizerConfig;

use super::Negatives;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// Four stride-2 conv stages (8, 16, 32, 32 channels) and one linear map.
    Simple,
    /// Doubled channels, an extra stride-1 stage and a two-layer head.
    Deep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    pub latent_dim: usize,
    pub input_height: usize,
    pub input_width: usize,
}

impl EncoderConfig {
    pub fn simple(latent_dim: usize) -> Self {
        Self {
            kind: EncoderKind::Simple,
            latent_dim,
            input_height: 64,
            input_width: 64,
        }
    }

    pub fn deep(latent_dim: usize) -> Self {
        Self {
            kind: EncoderKind::Deep,
            ..Self::simple(latent_dim)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    /// `T(z) = z + dT(z)`.
    Residual,
    /// `T(z) = dT(z)`.
    NonResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextKind {
    Markov,
    Rnn,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    InfoNce,
    NoContrast,
    Relation,
}

impl Objective {
    pub fn is_predictive(self) -> bool {
        !matches!(self, Objective::Relation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub predictor: PredictorKind,
    pub context: ContextKind,
    pub objective: Objective,
    pub negatives: Negatives,
    pub optimizer: OptimizerConfig,
}

impl ModelConfig {
    pub fn latent_dim(&self) -> usize {
        self.encoder.latent_dim
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.encoder.latent_dim == 0 {
            return Err("latent dimension must be positive".into());
        }
        if self.encoder.input_height < 16 || self.encoder.input_width < 16 {
            return Err("encoder input must be at least 16x16".into());
        }
        if self.objective == Objective::Relation && self.context != ContextKind::Markov {
            return Err("relation models have no recurrent context".into());
        }
        self.optimizer.validate()
    }
}

/// Named model variants with stable identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Mcpc,
    McpcNonres,
    McpcNocontrast,
    McpcDim(usize),
    McpcSgd,
    RnnCpc,
    LstmCpc,
    Rn,
    RnDeep,
}

impl Variant {
    pub const LATENT_DIMS: [usize; 4] = [1, 10, 100, 1000];

    pub fn all() -> Vec<Variant> {
        let mut v = vec![Variant::Mcpc, Variant::McpcNonres, Variant::McpcNocontrast];
        v.extend(Self::LATENT_DIMS.iter().map(|&d| Variant::McpcDim(d)));
        v.extend([
            Variant::McpcSgd,
            Variant::RnnCpc,
            Variant::LstmCpc,
            Variant::Rn,
            Variant::RnDeep,
        ]);
        v
    }

    pub fn id(&self) -> String {
        match self {
            Variant::Mcpc => "mcpc".into(),
            Variant::McpcNonres => "mcpc-nonres".into(),
            Variant::McpcNocontrast => "mcpc-nocontrast".into(),
            Variant::McpcDim(d) => format!("mcpc-d{d}"),
            Variant::McpcSgd => "mcpc-sgd".into(),
            Variant::RnnCpc => "rnn-cpc".into(),
            Variant::LstmCpc => "lstm-cpc".into(),
            Variant::Rn => "rn".into(),
            Variant::RnDeep => "rn-deep".into(),
        }
    }

    pub fn config(&self) -> ModelConfig {
        let base = ModelConfig {
            encoder: EncoderConfig::simple(1),
            predictor: PredictorKind::Residual,
            context: ContextKind::Markov,
            objective: Objective::InfoNce,
            negatives: Negatives::All,
            optimizer: OptimizerConfig::rmsprop(OptimizerConfig::DEFAULT_LR),
        };
        match *self {
            Variant::Mcpc => base,
            Variant::McpcNonres => ModelConfig {
                predictor: PredictorKind::NonResidual,
                ..base
            },
            Variant::McpcNocontrast => ModelConfig {
                objective: Objective::NoContrast,
                ..base
            },
            Variant::McpcDim(d) => ModelConfig {
                encoder: EncoderConfig::simple(d),
                ..base
            },
            Variant::McpcSgd => ModelConfig {
                optimizer: OptimizerConfig::sgd(OptimizerConfig::SGD_LR),
                ..base
            },
            Variant::RnnCpc => ModelConfig {
                context: ContextKind::Rnn,
                ..base
            },
            Variant::LstmCpc => ModelConfig {
                context: ContextKind::Lstm,
                ..base
            },
            Variant::Rn => ModelConfig {
                objective: Objective::Relation,
                ..base
            },
            Variant::RnDeep => ModelConfig {
                encoder: EncoderConfig::deep(1),
                objective: Objective::Relation,
                optimizer: OptimizerConfig::rmsprop(OptimizerConfig::SLOW_LR),
                ..base
            },
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.id())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(d) = s.strip_prefix("mcpc-d") {
            return match d.parse::<usize>() {
                Ok(d) if Self::LATENT_DIMS.contains(&d) => Ok(Variant::McpcDim(d)),
                _ => Err(format!("unsupported latent dimension in `{s}` (1|10|100|1000)")),
            };
        }
        Variant::all().into_iter().find(|v| v.id() == s).ok_or_else(|| {
            let ids: Vec<String> = Variant::all().iter().map(Variant::id).collect();
            format!("unknown model `{s}` (expected one of {})", ids.join(", "))
        })
    }
}
