use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::model::{
    ConstraintMask, Dataset, ItemDesign, ItemParams, LatentSystem, Parameters,
};
use crate::numeric::weighted_moments;

/// Latent distributions rescaled to mean 0 and variance 1 under the
/// sample-average class weights, with item parameters transformed so that
/// every fitted probability is unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedReport {
    pub lambda_bar: Vec<f64>,
    pub pi_bar: Vec<f64>,
    pub ability_mean: Vec<f64>,
    pub ability_sd: Vec<f64>,
    /// `k1 x s`.
    pub u_star: Vec<Vec<f64>>,
    /// Absent when the model has no propensity variable.
    pub v_star: Option<Vec<f64>>,
    pub propensity_mean: Option<f64>,
    pub propensity_sd: Option<f64>,
    pub items_star: ItemParams,
    /// `s x s` correlations of the abilities under `lambda_bar`.
    pub corr: Vec<Vec<f64>>,
}

impl StandardizedReport {
    /// The standardized solution as a parameter set (unconstrained mask,
    /// unchanged weight regressions).
    pub fn to_parameters(&self, original: &Parameters) -> Parameters {
        let mut out = original.clone();
        out.items = self.items_star.clone();
        out.latent.ability_support = self.u_star.clone();
        if let Some(v) = &self.v_star {
            out.latent.propensity_support = v.clone();
        }
        out
    }
}

/// Average class weights `(1/n) sum_i weights(x_i)`.
pub fn average_weights(params: &Parameters, data: &Dataset, system: LatentSystem) -> Result<Vec<f64>> {
    let k = match system {
        LatentSystem::Ability => params.spec.ability_classes,
        LatentSystem::Propensity => params.latent.propensity_support.len(),
    };
    let n = data.n_subjects();
    if n == 0 {
        return Err(Error::shape("average weights need at least one subject"));
    }
    let mut acc = vec![0.0; k];
    for i in 0..n {
        let w = params.latent.class_weights(data.covariates(i), system)?;
        for (a, b) in acc.iter_mut().zip(&w) {
            *a += b;
        }
    }
    Ok(acc.into_iter().map(|a| a / n as f64).collect())
}

/// Standardizes `params` using the covariates of `data`.
pub fn standardize(params: &Parameters, design: &ItemDesign, data: &Dataset) -> Result<StandardizedReport> {
    params.check_shapes(design)?;
    let spec = &params.spec;
    let s = spec.dims;
    let lambda_bar = average_weights(params, data, LatentSystem::Ability)?;
    let support = &params.latent.ability_support;

    let mut mean = vec![0.0; s];
    let mut sd = vec![0.0; s];
    for d in 0..s {
        let col: Vec<f64> = support.iter().map(|row| row[d]).collect();
        let (mu, var) = weighted_moments(&col, &lambda_bar);
        if !(var > 0.0) {
            return Err(Error::DegenerateDimension {
                dimension: format!("U{}", d + 1),
            });
        }
        mean[d] = mu;
        sd[d] = var.sqrt();
    }
    let u_star: Vec<Vec<f64>> = support
        .iter()
        .map(|row| (0..s).map(|d| (row[d] - mean[d]) / sd[d]).collect())
        .collect();

    let mut corr = vec![vec![0.0; s]; s];
    for d in 0..s {
        for e in 0..s {
            corr[d][e] = if d == e {
                1.0
            } else {
                let c: f64 = lambda_bar
                    .iter()
                    .zip(&u_star)
                    .map(|(w, u)| w * u[d] * u[e])
                    .sum();
                c.clamp(-1.0, 1.0)
            };
        }
    }

    let (pi_bar, v_star, mu_v, sd_v) = if spec.has_propensity() {
        let pi_bar = average_weights(params, data, LatentSystem::Propensity)?;
        let (mu, var) = weighted_moments(&params.latent.propensity_support, &pi_bar);
        if !(var > 0.0) {
            return Err(Error::DegenerateDimension {
                dimension: "V".into(),
            });
        }
        let sdv = var.sqrt();
        let v = params
            .latent
            .propensity_support
            .iter()
            .map(|v| (v - mu) / sdv)
            .collect();
        (pi_bar, Some(v), Some(mu), Some(sdv))
    } else {
        (
            vec![1.0; params.latent.propensity_support.len()],
            None,
            None,
            None,
        )
    };

    let it = &params.items;
    let mut items_star = it.clone();
    items_star.mask = ConstraintMask::unconstrained(spec.items);
    for j in 0..spec.items {
        let d = design.dimension(j);
        items_star.alpha[j] = it.alpha[j] * sd[d];
        items_star.beta[j] = it.beta[j] - it.alpha[j] * mean[d];
        items_star.gamma1[j] = it.gamma1[j] * sd[d];
        let (gamma2, shift_v) = match (sd_v, mu_v) {
            (Some(sv), Some(mv)) => (it.gamma2[j] * sv, it.gamma2[j] * mv),
            _ => (it.gamma2[j], 0.0),
        };
        items_star.gamma2[j] = gamma2;
        items_star.delta[j] = it.delta[j] - it.gamma1[j] * mean[d] - shift_v;
    }

    Ok(StandardizedReport {
        lambda_bar,
        pi_bar,
        ability_mean: mean,
        ability_sd: sd,
        u_star,
        v_star,
        propensity_mean: mu_v,
        propensity_sd: sd_v,
        items_star,
        corr,
    })
}

/// Standardizes a fitted model.
pub fn standardize_report(fit: &FitResult, design: &ItemDesign, data: &Dataset) -> Result<StandardizedReport> {
    standardize(&fit.params, design, data)
}
