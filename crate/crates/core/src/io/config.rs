use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::EmConfig;
use crate::model::{MissingMode, ModelSpec, Parametrization};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub ability_classes: usize,
    pub propensity_classes: usize,
    pub parametrization: Parametrization,
    pub missing_mode: MissingMode,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            ability_classes: 3,
            propensity_classes: 3,
            parametrization: Parametrization::TwoPl,
            missing_mode: MissingMode::MnarFull,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        BootstrapSection {
            replicates: 199,
            seed: 1,
        }
    }
}

/// One model of a selection grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridEntry {
    pub ability_classes: usize,
    pub propensity_classes: usize,
    pub parametrization: Parametrization,
    pub missing_mode: MissingMode,
}

/// Run configuration read from TOML; command-line flags override fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub em: EmConfig,
    pub bootstrap: BootstrapSection,
    /// Covariate columns; all non-item columns when absent.
    pub covariates: Option<Vec<String>>,
    /// Models fitted by `select`; defaults to the Rasch/2PL x
    /// no-ability/full grid at the configured class counts.
    pub grid: Vec<GridEntry>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("{name}: {what}")))
            }
        };
        field("model.ability_classes", self.model.ability_classes >= 1, "must be at least 1")?;
        field(
            "model.propensity_classes",
            self.model.propensity_classes >= 1,
            "must be at least 1",
        )?;
        field("bootstrap.replicates", self.bootstrap.replicates >= 2, "must be at least 2")?;
        for (i, g) in self.grid.iter().enumerate() {
            field(
                &format!("grid[{i}]"),
                g.ability_classes >= 1 && g.propensity_classes >= 1,
                "class counts must be at least 1",
            )?;
        }
        self.em
            .validate()
            .map_err(|e| Error::config(format!("em: {e}")))
    }

    /// Model for a data layout with `dims` dimensions, `items` items and
    /// `covariates` covariates.
    pub fn spec(&self, dims: usize, items: usize, covariates: usize) -> Result<ModelSpec> {
        ModelSpec::new(
            dims,
            self.model.ability_classes,
            self.model.propensity_classes,
            items,
            covariates,
            self.model.parametrization,
            self.model.missing_mode,
        )
    }

    /// The configured grid, or Rasch/2PL crossed with no-ability/full at
    /// the configured class counts.
    pub fn selection_grid(&self) -> Vec<GridEntry> {
        if !self.grid.is_empty() {
            return self.grid.clone();
        }
        let mut out = Vec::new();
        for parametrization in [Parametrization::Rasch, Parametrization::TwoPl] {
            for missing_mode in [MissingMode::MnarNoAbility, MissingMode::MnarFull] {
                out.push(GridEntry {
                    ability_classes: self.model.ability_classes,
                    propensity_classes: self.model.propensity_classes,
                    parametrization,
                    missing_mode,
                });
            }
        }
        out
    }
}
