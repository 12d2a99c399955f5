use serde::{Deserialize, Serialize};
use std::fmt;

use super::data::ItemDesign;
use super::spec::{MissingMode, ModelSpec, Parametrization};
use crate::error::{Error, Result};
use crate::numeric::{log_softmax, softmax};

/// Whether a parameter is estimated or held at a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slot {
    Free,
    Fixed(f64),
}

impl Slot {
    pub fn is_free(self) -> bool {
        matches!(self, Slot::Free)
    }
}

/// Per-item constraint pattern of the five item-parameter families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMask {
    pub alpha: Vec<Slot>,
    pub beta: Vec<Slot>,
    pub gamma1: Vec<Slot>,
    pub gamma2: Vec<Slot>,
    pub delta: Vec<Slot>,
}

impl ConstraintMask {
    /// Identifying constraints for `spec`: per dimension the first item has
    /// alpha = 1 and beta = 0; item 1 additionally fixes gamma2 = 1 and
    /// delta = 0 whenever a propensity variable exists.
    pub fn for_model(spec: &ModelSpec, design: &ItemDesign) -> Self {
        let m = spec.items;
        let rasch = spec.parametrization == Parametrization::Rasch;
        let mut mask = ConstraintMask::unconstrained(m);
        for j in 0..m {
            let anchor = design.is_dimension_anchor(j);
            mask.alpha[j] = if rasch || anchor { Slot::Fixed(1.0) } else { Slot::Free };
            mask.beta[j] = if anchor { Slot::Fixed(0.0) } else { Slot::Free };

            if !spec.models_missingness() {
                mask.gamma1[j] = Slot::Fixed(0.0);
                mask.gamma2[j] = Slot::Fixed(0.0);
                mask.delta[j] = Slot::Fixed(0.0);
                continue;
            }
            mask.gamma1[j] = match (spec.missing_mode, rasch) {
                (MissingMode::MnarNoAbility, _) => Slot::Fixed(0.0),
                (_, true) => Slot::Fixed(1.0),
                _ => Slot::Free,
            };
            if spec.has_propensity() {
                mask.gamma2[j] = if rasch || j == 0 { Slot::Fixed(1.0) } else { Slot::Free };
                mask.delta[j] = if j == 0 { Slot::Fixed(0.0) } else { Slot::Free };
            } else {
                mask.gamma2[j] = Slot::Fixed(0.0);
                mask.delta[j] = Slot::Free;
            }
        }
        mask
    }

    /// Every item parameter free (used for ground truth and standardized
    /// parametrizations, which do not satisfy the anchors).
    pub fn unconstrained(m: usize) -> Self {
        ConstraintMask {
            alpha: vec![Slot::Free; m],
            beta: vec![Slot::Free; m],
            gamma1: vec![Slot::Free; m],
            gamma2: vec![Slot::Free; m],
            delta: vec![Slot::Free; m],
        }
    }

    pub fn slot(&self, family: ItemFamily, item: usize) -> Slot {
        match family {
            ItemFamily::Alpha => self.alpha[item],
            ItemFamily::Beta => self.beta[item],
            ItemFamily::Gamma1 => self.gamma1[item],
            ItemFamily::Gamma2 => self.gamma2[item],
            ItemFamily::Delta => self.delta[item],
        }
    }
}

/// The five item-parameter families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemFamily {
    Alpha,
    Beta,
    Gamma1,
    Gamma2,
    Delta,
}

impl ItemFamily {
    pub const ALL: [ItemFamily; 5] = [
        ItemFamily::Alpha,
        ItemFamily::Beta,
        ItemFamily::Gamma1,
        ItemFamily::Gamma2,
        ItemFamily::Delta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ItemFamily::Alpha => "alpha",
            ItemFamily::Beta => "beta",
            ItemFamily::Gamma1 => "gamma1",
            ItemFamily::Gamma2 => "gamma2",
            ItemFamily::Delta => "delta",
        }
    }

    /// Families present for a given spec.
    pub fn active(spec: &ModelSpec) -> Vec<ItemFamily> {
        let mut families = vec![ItemFamily::Alpha, ItemFamily::Beta];
        if spec.models_missingness() {
            families.push(ItemFamily::Gamma1);
            if spec.has_propensity() {
                families.push(ItemFamily::Gamma2);
            }
            families.push(ItemFamily::Delta);
        }
        families
    }
}

/// Item parameters of both logistic links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma2: Vec<f64>,
    pub delta: Vec<f64>,
    pub mask: ConstraintMask,
}

impl ItemParams {
    pub fn family(&self, family: ItemFamily) -> &[f64] {
        match family {
            ItemFamily::Alpha => &self.alpha,
            ItemFamily::Beta => &self.beta,
            ItemFamily::Gamma1 => &self.gamma1,
            ItemFamily::Gamma2 => &self.gamma2,
            ItemFamily::Delta => &self.delta,
        }
    }

    pub fn family_mut(&mut self, family: ItemFamily) -> &mut [f64] {
        match family {
            ItemFamily::Alpha => &mut self.alpha,
            ItemFamily::Beta => &mut self.beta,
            ItemFamily::Gamma1 => &mut self.gamma1,
            ItemFamily::Gamma2 => &mut self.gamma2,
            ItemFamily::Delta => &mut self.delta,
        }
    }

    /// Writes every FIXED value into the parameter vectors.
    pub fn apply_mask(&mut self) {
        for family in ItemFamily::ALL {
            for j in 0..self.alpha.len() {
                if let Slot::Fixed(v) = self.mask.slot(family, j) {
                    self.family_mut(family)[j] = v;
                }
            }
        }
    }
}

/// Which multinomial-logit system a weight computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatentSystem {
    Ability,
    Propensity,
}

/// Support points of the latent distributions and the weight regressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentStructure {
    /// `k1 x s`; row `h` holds `(u_{1h}, ..., u_{sh})`.
    pub ability_support: Vec<Vec<f64>>,
    /// `k2` propensity support points.
    pub propensity_support: Vec<f64>,
    /// `(k1 - 1) x (c + 1)`; row `h` is `(phi_0h, phi_1h, ..., phi_ch)` for
    /// the logit of class `h + 1` against class 1.
    pub ability_coef: Vec<Vec<f64>>,
    /// `(k2 - 1) x (c + 1)`, same layout as `ability_coef`.
    pub propensity_coef: Vec<Vec<f64>>,
}

impl LatentStructure {
    pub fn class_weights(&self, x: &[f64], system: LatentSystem) -> Result<Vec<f64>> {
        class_weights(self.coef(system), x)
    }

    pub fn log_class_weights(&self, x: &[f64], system: LatentSystem) -> Result<Vec<f64>> {
        Ok(log_softmax(&class_logits(self.coef(system), x)?))
    }

    pub fn coef(&self, system: LatentSystem) -> &[Vec<f64>] {
        match system {
            LatentSystem::Ability => &self.ability_coef,
            LatentSystem::Propensity => &self.propensity_coef,
        }
    }
}

/// Logits `(0, phi_0h + x' phi_1h, ...)` with class 1 as reference.
pub fn class_logits(coef: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>> {
    let mut logits = Vec::with_capacity(coef.len() + 1);
    logits.push(0.0);
    for (h, row) in coef.iter().enumerate() {
        if row.len() != x.len() + 1 {
            return Err(Error::shape(format!(
                "logit {} has {} coefficients but {} covariates were supplied",
                h + 1,
                row.len(),
                x.len()
            )));
        }
        logits.push(row[0] + row[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>());
    }
    Ok(logits)
}

/// Multinomial-logit class probabilities.
pub fn class_weights(coef: &[Vec<f64>], x: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&class_logits(coef, x)?))
}

/// Identifies one scalar model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParamKey {
    Item { family: ItemFamily, item: usize },
    Ability { dim: usize, class: usize },
    Propensity { class: usize },
    /// Coefficient of covariate `covariate` (0 = intercept) in logit `logit`
    /// (class `logit + 2` against class 1).
    AbilityCoef { covariate: usize, logit: usize },
    PropensityCoef { covariate: usize, logit: usize },
}

impl fmt::Display for ParamKey {
    /// One-based names: `alpha[3]`, `u[1,2]`, `v[3]`, `phi[0,1]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ParamKey::Item { family, item } => write!(f, "{}[{}]", family.name(), item + 1),
            ParamKey::Ability { dim, class } => write!(f, "u[{},{}]", dim + 1, class + 1),
            ParamKey::Propensity { class } => write!(f, "v[{}]", class + 1),
            ParamKey::AbilityCoef { covariate, logit } => {
                write!(f, "phi[{},{}]", covariate, logit + 1)
            }
            ParamKey::PropensityCoef { covariate, logit } => {
                write!(f, "psi[{},{}]", covariate, logit + 1)
            }
        }
    }
}

/// Full parameter vector of a model together with its specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub spec: ModelSpec,
    pub items: ItemParams,
    pub latent: LatentStructure,
}

impl Parameters {
    /// Zero-valued parameters with the identifying mask of `spec` applied.
    pub fn zeros(spec: &ModelSpec, design: &ItemDesign) -> Result<Self> {
        spec.validate()?;
        if design.n_items() != spec.items || design.n_dims() != spec.dims {
            return Err(Error::shape(format!(
                "design has {} items on {} dimensions, spec expects {} on {}",
                design.n_items(),
                design.n_dims(),
                spec.items,
                spec.dims
            )));
        }
        let m = spec.items;
        let c = spec.covariates;
        let k1 = spec.ability_classes;
        let k2 = spec.propensity_classes;
        let mut items = ItemParams {
            alpha: vec![1.0; m],
            beta: vec![0.0; m],
            gamma1: vec![0.0; m],
            gamma2: vec![0.0; m],
            delta: vec![0.0; m],
            mask: ConstraintMask::for_model(spec, design),
        };
        items.apply_mask();
        let latent = LatentStructure {
            ability_support: vec![vec![0.0; spec.dims]; k1],
            propensity_support: vec![0.0; k2],
            ability_coef: vec![vec![0.0; c + 1]; k1 - 1],
            propensity_coef: vec![vec![0.0; c + 1]; k2 - 1],
        };
        Ok(Parameters {
            spec: *spec,
            items,
            latent,
        })
    }

    pub fn check_shapes(&self, design: &ItemDesign) -> Result<()> {
        let spec = &self.spec;
        let m = spec.items;
        let ok = design.n_items() == m
            && design.n_dims() == spec.dims
            && [
                &self.items.alpha,
                &self.items.beta,
                &self.items.gamma1,
                &self.items.gamma2,
                &self.items.delta,
            ]
            .iter()
            .all(|v| v.len() == m)
            && self.latent.ability_support.len() == spec.ability_classes
            && self.latent.ability_support.iter().all(|r| r.len() == spec.dims)
            && self.latent.propensity_support.len() == spec.propensity_classes
            && self.latent.ability_coef.len() == spec.ability_classes - 1
            && self.latent.propensity_coef.len() == spec.propensity_classes - 1
            && self
                .latent
                .ability_coef
                .iter()
                .chain(&self.latent.propensity_coef)
                .all(|r| r.len() == spec.covariates + 1);
        if ok {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "parameter shapes inconsistent with {}",
                spec.label()
            )))
        }
    }

    /// All parameters that enter the likelihood of this spec, in canonical
    /// order: item families, ability support, propensity support, Phi, Psi.
    pub fn keys(&self) -> Vec<ParamKey> {
        let spec = &self.spec;
        let mut keys = Vec::new();
        for family in ItemFamily::active(spec) {
            keys.extend((0..spec.items).map(|item| ParamKey::Item { family, item }));
        }
        for class in 0..spec.ability_classes {
            keys.extend((0..spec.dims).map(|dim| ParamKey::Ability { dim, class }));
        }
        if spec.has_propensity() {
            keys.extend((0..spec.propensity_classes).map(|class| ParamKey::Propensity { class }));
        }
        for logit in 0..spec.ability_classes - 1 {
            keys.extend(
                (0..=spec.covariates).map(|covariate| ParamKey::AbilityCoef { covariate, logit }),
            );
        }
        if spec.has_propensity() {
            for logit in 0..spec.propensity_classes - 1 {
                keys.extend(
                    (0..=spec.covariates)
                        .map(|covariate| ParamKey::PropensityCoef { covariate, logit }),
                );
            }
        }
        keys
    }

    pub fn is_free(&self, key: ParamKey) -> bool {
        match key {
            ParamKey::Item { family, item } => self.items.mask.slot(family, item).is_free(),
            _ => true,
        }
    }

    pub fn get(&self, key: ParamKey) -> f64 {
        match key {
            ParamKey::Item { family, item } => self.items.family(family)[item],
            ParamKey::Ability { dim, class } => self.latent.ability_support[class][dim],
            ParamKey::Propensity { class } => self.latent.propensity_support[class],
            ParamKey::AbilityCoef { covariate, logit } => self.latent.ability_coef[logit][covariate],
            ParamKey::PropensityCoef { covariate, logit } => {
                self.latent.propensity_coef[logit][covariate]
            }
        }
    }

    pub fn set(&mut self, key: ParamKey, value: f64) {
        match key {
            ParamKey::Item { family, item } => self.items.family_mut(family)[item] = value,
            ParamKey::Ability { dim, class } => self.latent.ability_support[class][dim] = value,
            ParamKey::Propensity { class } => self.latent.propensity_support[class] = value,
            ParamKey::AbilityCoef { covariate, logit } => {
                self.latent.ability_coef[logit][covariate] = value
            }
            ParamKey::PropensityCoef { covariate, logit } => {
                self.latent.propensity_coef[logit][covariate] = value
            }
        }
    }

    pub fn free_keys(&self) -> Vec<ParamKey> {
        self.keys().into_iter().filter(|k| self.is_free(*k)).collect()
    }

    pub fn free_count(&self) -> usize {
        self.free_keys().len()
    }

    pub fn free_values(&self) -> Vec<f64> {
        self.free_keys().into_iter().map(|k| self.get(k)).collect()
    }

    pub fn set_free_values(&mut self, values: &[f64]) -> Result<()> {
        let keys = self.free_keys();
        if keys.len() != values.len() {
            return Err(Error::shape(format!(
                "expected {} free values, got {}",
                keys.len(),
                values.len()
            )));
        }
        for (k, v) in keys.into_iter().zip(values) {
            self.set(k, *v);
        }
        Ok(())
    }

    /// Largest absolute difference over the free parameters of two
    /// parameter sets with the same spec.
    pub fn max_abs_diff(&self, other: &Parameters) -> f64 {
        self.free_keys()
            .into_iter()
            .map(|k| (self.get(k) - other.get(k)).abs())
            .fold(0.0, f64::max)
    }

    /// Re-expresses these values under a less restricted `target` spec with
    /// the same class counts (Rasch into 2PL, no-ability into full). Fails if
    /// a value this model holds fixed disagrees with a constraint of the
    /// target.
    pub fn embed_into(&self, target: &ModelSpec, design: &ItemDesign) -> Result<Parameters> {
        let spec = &self.spec;
        if target.dims != spec.dims
            || target.items != spec.items
            || target.covariates != spec.covariates
            || target.ability_classes != spec.ability_classes
            || target.propensity_classes != spec.propensity_classes
            || target.models_missingness() != spec.models_missingness()
        {
            return Err(Error::config(format!(
                "cannot embed {} into {}",
                spec.label(),
                target.label()
            )));
        }
        let mut out = self.clone();
        out.spec = *target;
        out.items.mask = ConstraintMask::for_model(target, design);
        for family in ItemFamily::active(target) {
            for j in 0..target.items {
                if let Slot::Fixed(v) = out.items.mask.slot(family, j) {
                    if (out.items.family(family)[j] - v).abs() > 1e-12 {
                        return Err(Error::config(format!(
                            "{}[{}] = {} violates the constraint {} of {}",
                            family.name(),
                            j + 1,
                            out.items.family(family)[j],
                            v,
                            target.label()
                        )));
                    }
                }
            }
        }
        out.items.apply_mask();
        Ok(out)
    }

    /// True when every FIXED entry holds its value exactly.
    pub fn respects_mask(&self) -> bool {
        ItemFamily::ALL.iter().all(|&family| {
            (0..self.spec.items).all(|j| match self.items.mask.slot(family, j) {
                Slot::Fixed(v) => self.items.family(family)[j] == v,
                Slot::Free => true,
            })
        })
    }
}
