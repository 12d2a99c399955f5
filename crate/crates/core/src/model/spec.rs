use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Link parametrization for the discriminating parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Parametrization {
    /// All discriminations fixed to one.
    #[serde(rename = "rasch")]
    Rasch,
    /// Free discriminations apart from the identifying anchors.
    #[serde(rename = "2pl")]
    TwoPl,
}

impl fmt::Display for Parametrization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Parametrization::Rasch => "rasch",
            Parametrization::TwoPl => "2pl",
        })
    }
}

impl std::str::FromStr for Parametrization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rasch" => Ok(Parametrization::Rasch),
            "2pl" | "twopl" => Ok(Parametrization::TwoPl),
            other => Err(Error::config(format!(
                "parametrization must be `rasch` or `2pl`, got `{other}`"
            ))),
        }
    }
}

/// How the response indicators enter the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MissingMode {
    /// Missingness ignored; the indicators are dropped from the model.
    #[serde(rename = "mar")]
    MarIgnore,
    /// Response indicators driven by the propensity only (all gamma1 = 0).
    #[serde(rename = "mnar-noability")]
    MnarNoAbility,
    /// Response indicators driven by ability and propensity.
    #[serde(rename = "mnar-full")]
    MnarFull,
}

impl fmt::Display for MissingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissingMode::MarIgnore => "mar",
            MissingMode::MnarNoAbility => "mnar-noability",
            MissingMode::MnarFull => "mnar-full",
        })
    }
}

impl std::str::FromStr for MissingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "mar" | "mar-ignore" => Ok(MissingMode::MarIgnore),
            "mnar-noability" | "noability" => Ok(MissingMode::MnarNoAbility),
            "mnar-full" | "mnar" | "full" => Ok(MissingMode::MnarFull),
            other => Err(Error::config(format!(
                "missingness must be `mar`, `mnar-noability` or `mnar-full`, got `{other}`"
            ))),
        }
    }
}

/// Structural configuration of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Number of ability dimensions `s`.
    pub dims: usize,
    /// Ability classes `k1`.
    pub ability_classes: usize,
    /// Propensity classes `k2` (always 1 when missingness is ignored).
    pub propensity_classes: usize,
    /// Item count `m`.
    pub items: usize,
    /// Covariate count `c`.
    pub covariates: usize,
    pub parametrization: Parametrization,
    pub missing_mode: MissingMode,
}

impl ModelSpec {
    pub fn new(
        dims: usize,
        ability_classes: usize,
        propensity_classes: usize,
        items: usize,
        covariates: usize,
        parametrization: Parametrization,
        missing_mode: MissingMode,
    ) -> Result<Self> {
        let spec = ModelSpec {
            dims,
            ability_classes,
            propensity_classes: if missing_mode == MissingMode::MarIgnore {
                1
            } else {
                propensity_classes
            },
            items,
            covariates,
            parametrization,
            missing_mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims < 1 {
            return Err(Error::config("dims must be at least 1"));
        }
        if self.ability_classes < 1 {
            return Err(Error::config("k1 must be at least 1"));
        }
        if self.propensity_classes < 1 {
            return Err(Error::config("k2 must be at least 1"));
        }
        if self.items < self.dims + 1 {
            return Err(Error::config(format!(
                "need at least dims + 1 = {} items, got {}",
                self.dims + 1,
                self.items
            )));
        }
        if self.missing_mode == MissingMode::MarIgnore && self.propensity_classes != 1 {
            return Err(Error::config("k2 must be 1 when missingness is ignored"));
        }
        Ok(())
    }

    /// Whether the response indicators are part of the likelihood.
    pub fn models_missingness(&self) -> bool {
        self.missing_mode != MissingMode::MarIgnore
    }

    /// Whether a propensity variable (support points, gamma2, Psi) exists.
    pub fn has_propensity(&self) -> bool {
        self.models_missingness() && self.propensity_classes > 1
    }

    pub fn is_two_pl(&self) -> bool {
        self.parametrization == Parametrization::TwoPl
    }

    /// Number of joint latent classes `k1 * k2`.
    pub fn components(&self) -> usize {
        self.ability_classes * self.propensity_classes
    }

    pub fn with_parametrization(mut self, parametrization: Parametrization) -> Self {
        self.parametrization = parametrization;
        self
    }

    pub fn with_missing_mode(mut self, mode: MissingMode) -> Self {
        self.missing_mode = mode;
        if mode == MissingMode::MarIgnore {
            self.propensity_classes = 1;
        }
        self
    }

    pub fn with_classes(mut self, k1: usize, k2: usize) -> Self {
        self.ability_classes = k1;
        self.propensity_classes = if self.models_missingness() { k2 } else { 1 };
        self
    }

    /// Short label such as `2pl/mnar-full/k1=3/k2=3`.
    pub fn label(&self) -> String {
        format!(
            "{}/{}/k1={}/k2={}",
            self.parametrization, self.missing_mode, self.ability_classes, self.propensity_classes
        )
    }
}

/// Number of free parameters of a model.
///
/// Starts from `(k1+k2-2)(c+1) + s k1 + k2 + 2m - (s+1) + 1{2PL}[3m - (s+1)]`
/// and removes the gamma1 under `MnarNoAbility` and the free gamma2 when
/// `k2 = 1`; the ignorable model counts only the response side.
pub fn count_parameters(spec: &ModelSpec) -> Result<usize> {
    spec.validate()?;
    let k1 = spec.ability_classes;
    let k2 = spec.propensity_classes;
    let s = spec.dims;
    let m = spec.items;
    let c = spec.covariates;
    let two_pl = spec.is_two_pl();

    if !spec.models_missingness() {
        let mut count = (k1 - 1) * (c + 1) + s * k1 + (m - s);
        if two_pl {
            count += m - s;
        }
        return Ok(count);
    }

    let mut count = (k1 + k2 - 2) * (c + 1) + s * k1 + k2 + 2 * m - (s + 1);
    if two_pl {
        count += 3 * m - (s + 1);
        if spec.missing_mode == MissingMode::MnarNoAbility {
            count -= m;
        }
        if k2 == 1 {
            count -= m - 1;
        }
    }
    Ok(count)
}
