use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::align::align_classes;
use super::standardize::standardize;
use crate::error::{Error, Result};
use crate::estimator::{fit, EmConfig, FitResult};
use crate::model::{Dataset, ItemDesign, MissingMode, ModelSpec, Parameters};

/// Deviances down to this value are treated as optimizer noise.
pub const DEVIANCE_SLACK: f64 = 1e-6;

/// Headline numbers of one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub label: String,
    pub loglik: f64,
    pub npar: usize,
    pub bic: f64,
    pub aic: f64,
}

impl FitSummary {
    pub fn of(fit: &FitResult) -> Self {
        FitSummary {
            label: fit.spec().label(),
            loglik: fit.loglik,
            npar: fit.npar,
            bic: fit.bic,
            aic: fit.aic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRatio {
    pub deviance: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Per-item differences `full - restricted` of the standardized response
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemDelta {
    pub item: usize,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub full: FitSummary,
    pub restricted: FitSummary,
    /// Present only for nested models.
    pub likelihood_ratio: Option<LikelihoodRatio>,
    /// `BIC_restricted - BIC_full`, positive when the full model is
    /// preferred. Absent when the two likelihoods are not comparable.
    pub bic_difference: Option<f64>,
    /// Average ability-class weight differences `full - restricted`.
    pub weight_deltas: Vec<f64>,
    pub item_deltas: Vec<ItemDelta>,
}

/// Deviance test from published or fitted summary numbers.
pub fn likelihood_ratio(
    loglik_full: f64,
    npar_full: usize,
    loglik_restricted: f64,
    npar_restricted: usize,
) -> Result<LikelihoodRatio> {
    if npar_full <= npar_restricted {
        return Err(Error::config(format!(
            "full model must have more parameters than the restricted one ({npar_full} <= {npar_restricted})"
        )));
    }
    let deviance = 2.0 * (loglik_full - loglik_restricted);
    if deviance < -DEVIANCE_SLACK {
        return Err(Error::NegativeDeviance { deviance });
    }
    let df = npar_full - npar_restricted;
    let chi = ChiSquared::new(df as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(LikelihoodRatio {
        deviance,
        df,
        p_value: chi.sf(deviance.max(0.0)),
    })
}

/// Likelihood-ratio test of `restricted` nested in `full`.
pub fn lr_test(full: &FitResult, restricted: &FitResult) -> Result<ComparisonReport> {
    let a = full.spec();
    let b = restricted.spec();
    if a.items != b.items || a.dims != b.dims || a.covariates != b.covariates {
        return Err(Error::config(format!(
            "{} and {} are not fitted to the same data layout",
            a.label(),
            b.label()
        )));
    }
    if a.models_missingness() != b.models_missingness() {
        return Err(Error::config(
            "likelihoods with and without the missingness model are not comparable",
        ));
    }
    let lr = likelihood_ratio(full.loglik, full.npar, restricted.loglik, restricted.npar)?;
    Ok(ComparisonReport {
        full: FitSummary::of(full),
        restricted: FitSummary::of(restricted),
        likelihood_ratio: Some(lr),
        bic_difference: Some(restricted.bic - full.bic),
        weight_deltas: Vec::new(),
        item_deltas: Vec::new(),
    })
}

/// Differences in average ability weights and standardized response-item
/// parameters between two fits with the same ability classes. The second
/// fit is relabeled to the first by its ability support.
pub fn ability_side_deltas(
    full: &Parameters,
    other: &Parameters,
    design: &ItemDesign,
    data: &Dataset,
) -> Result<(Vec<f64>, Vec<ItemDelta>)> {
    let sf = standardize(full, design, data)?;
    // Alignment needs matching spec shapes; compare in the ability space only.
    let mut other_as_full = full.clone();
    other_as_full.latent.ability_support = other.latent.ability_support.clone();
    other_as_full.latent.ability_coef = other.latent.ability_coef.clone();
    let aligned = align_classes(full, &other_as_full)?;
    let mut relabeled = other.clone();
    relabeled.latent.ability_support = aligned.params.latent.ability_support;
    relabeled.latent.ability_coef = aligned.params.latent.ability_coef;
    let so = standardize(&relabeled, design, data)?;
    let weights = sf
        .lambda_bar
        .iter()
        .zip(&so.lambda_bar)
        .map(|(a, b)| a - b)
        .collect();
    let items = (0..full.spec.items)
        .map(|j| ItemDelta {
            item: j + 1,
            alpha: sf.items_star.alpha[j] - so.items_star.alpha[j],
            beta: sf.items_star.beta[j] - so.items_star.beta[j],
        })
        .collect();
    Ok((weights, items))
}

/// Fits the MNAR_FULL and MAR_IGNORE variants of `spec` and compares their
/// ability side. No likelihood-ratio test is reported: the MAR likelihood
/// omits the response indicators.
pub fn compare_mar(
    spec: &ModelSpec,
    design: &ItemDesign,
    data: &Dataset,
    config: &EmConfig,
) -> Result<(ComparisonReport, FitResult, FitResult)> {
    let mnar_spec = spec.with_missing_mode(MissingMode::MnarFull);
    let mar_spec = spec.with_missing_mode(MissingMode::MarIgnore);
    let mnar = fit(&mnar_spec, design, data, config)?;
    let mar = fit(&mar_spec, design, data, config)?;
    let (weight_deltas, item_deltas) = ability_side_deltas(&mnar.params, &mar.params, design, data)?;
    let report = ComparisonReport {
        full: FitSummary::of(&mnar),
        restricted: FitSummary::of(&mar),
        likelihood_ratio: None,
        bic_difference: None,
        weight_deltas,
        item_deltas,
    };
    Ok((report, mnar, mar))
}
