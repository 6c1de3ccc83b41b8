use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Pairwise objective applied to both projected spaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// Positive pull `1 - s` plus hinge `max(0, s - margin)` on negatives.
    GoyaContrastive,
    Triplet,
    Ntxent,
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "goya-contrastive" => Ok(Ablation::GoyaContrastive),
            "triplet" => Ok(Ablation::Triplet),
            "ntxent" => Ok(Ablation::Ntxent),
            other => Err(Error::InvalidArgument(format!(
                "unknown ablation {other:?} (expected goya-contrastive, triplet or ntxent)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Text cosine-distance threshold for content positives.
    pub eps_t: f64,
    pub eps_c: f64,
    pub eps_s: f64,
    pub lambda_c: f64,
    pub lambda_s: f64,
    pub lambda_sc: f64,
    pub ablation: Ablation,
    pub use_classifier: bool,
    pub ntxent_temperature: f64,
    pub triplet_margin: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            eps_t: 0.25,
            eps_c: 0.5,
            eps_s: 0.5,
            lambda_c: 1.0,
            lambda_s: 1.0,
            lambda_sc: 1.0,
            ablation: Ablation::GoyaContrastive,
            use_classifier: true,
            ntxent_temperature: 0.5,
            triplet_margin: 0.5,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let in_open = |v: f64, name: &str| {
            if v > 0.0 && v < 2.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 2), got {v}")))
            }
        };
        in_open(self.eps_c, "eps_c")?;
        in_open(self.eps_s, "eps_s")?;
        in_open(self.triplet_margin, "triplet_margin")?;
        if !(0.0..=2.0).contains(&self.eps_t) {
            return Err(Error::Config(format!("eps_t must lie in [0, 2], got {}", self.eps_t)));
        }
        for (name, v) in [
            ("lambda_c", self.lambda_c),
            ("lambda_s", self.lambda_s),
            ("lambda_sc", self.lambda_sc),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.ntxent_temperature > 0.0 && self.ntxent_temperature.is_finite()) {
            return Err(Error::Config(format!(
                "ntxent_temperature must be positive, got {}",
                self.ntxent_temperature
            )));
        }
        Ok(())
    }

    /// Weight of the classification term, zero when the classifier is disabled.
    pub fn classifier_weight(&self) -> f64 {
        if self.use_classifier {
            self.lambda_sc
        } else {
            0.0
        }
    }
}
