use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_replicate, SimulatedSample};
use super::scenario::{reference_covariates, Scenario};
use crate::error::{Error, Result};
use crate::estimator::{fit, EmConfig};
use crate::inference::{align_classes, standardize};
use crate::model::{ItemFamily, ParamKey, Parameters};

/// Estimates handed back by a fitter.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: Parameters,
    pub converged: bool,
}

/// Bias and RMSE of one scalar parameter over the replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryCell {
    pub name: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
}

/// Item-parameter family averaged over items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub family: String,
    pub mean_abs_bias: f64,
    pub mean_rmse: f64,
    pub mean_estimate: f64,
    pub mean_abs_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub scenario: String,
    pub replications: usize,
    pub used: usize,
    pub non_converged: usize,
    pub failed: usize,
    /// `u[d,h]` and `v[h]` on the standardized scale.
    pub support: Vec<RecoveryCell>,
    /// `phi[j,h]` and `psi[j,h]`.
    pub coefficients: Vec<RecoveryCell>,
    pub items: Vec<FamilyRow>,
    pub warnings: Vec<String>,
}

impl RecoveryReport {
    pub fn cell(&self, name: &str) -> Option<&RecoveryCell> {
        self.support
            .iter()
            .chain(&self.coefficients)
            .find(|c| c.name == name)
    }

    pub fn family(&self, family: ItemFamily) -> Option<&FamilyRow> {
        self.items.iter().find(|r| r.family == family.name())
    }
}

fn cell(name: String, truth: f64, draws: &[f64]) -> RecoveryCell {
    let r = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / r;
    let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / r;
    let bias = mean - truth;
    RecoveryCell {
        name,
        truth,
        mean_estimate: mean,
        bias,
        rmse: (bias * bias + var).sqrt(),
    }
}

/// Quantities compared with the truth, in report order: supports, weight
/// coefficients, then every item of every active family.
fn compared_keys(params: &Parameters) -> (Vec<ParamKey>, Vec<ParamKey>, Vec<(ItemFamily, Vec<ParamKey>)>) {
    let spec = &params.spec;
    let keys = params.keys();
    let support = keys
        .iter()
        .copied()
        .filter(|k| matches!(k, ParamKey::Ability { .. } | ParamKey::Propensity { .. }))
        .collect();
    let coef = keys
        .iter()
        .copied()
        .filter(|k| matches!(k, ParamKey::AbilityCoef { .. } | ParamKey::PropensityCoef { .. }))
        .collect();
    let items = ItemFamily::active(spec)
        .into_iter()
        .map(|family| {
            (
                family,
                (0..spec.items).map(|item| ParamKey::Item { family, item }).collect(),
            )
        })
        .collect();
    (support, coef, items)
}

/// Standardizes an estimate on the reference covariate sample and relabels
/// it to the truth.
pub fn comparable(scenario: &Scenario, estimate: &Parameters) -> Result<Parameters> {
    let report = standardize(estimate, &scenario.design, reference_covariates())?;
    let starred = report.to_parameters(estimate);
    Ok(align_classes(&scenario.truth, &starred)?.params)
}

enum Outcome {
    Used(Parameters),
    NonConverged,
    Failed(String),
}

/// Recovery study with a caller-supplied fitter, which receives the sample
/// and the replication index.
pub fn recovery_study_with<F>(scenario: &Scenario, replications: usize, fitter: F) -> Result<RecoveryReport>
where
    F: Fn(&SimulatedSample, usize) -> Result<FitOutcome> + Sync,
{
    if replications < 2 {
        return Err(Error::config("recovery study needs at least 2 replications"));
    }
    let outcomes: Vec<Outcome> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Outcome> {
                let sample = generate_replicate(scenario, r as u64)?;
                let est = fitter(&sample, r)?;
                if !est.converged {
                    return Ok(Outcome::NonConverged);
                }
                Ok(Outcome::Used(comparable(scenario, &est.params)?))
            };
            run().unwrap_or_else(|e| Outcome::Failed(format!("replication {}: {e}", r + 1)))
        })
        .collect();

    let truth = &scenario.truth;
    let (support_keys, coef_keys, family_keys) = compared_keys(truth);
    let mut estimates = Vec::new();
    let (mut non_converged, mut failed) = (0, 0);
    let mut warnings = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Used(p) => estimates.push(p),
            Outcome::NonConverged => non_converged += 1,
            Outcome::Failed(msg) => {
                failed += 1;
                warnings.push(msg);
            }
        }
    }
    if estimates.len() < 2 {
        return Err(Error::Numerical(format!(
            "only {} of {replications} replications usable",
            estimates.len()
        )));
    }
    let summarize = |k: ParamKey| {
        let draws: Vec<f64> = estimates.iter().map(|p| p.get(k)).collect();
        cell(k.to_string(), truth.get(k), &draws)
    };
    let support = support_keys.into_iter().map(summarize).collect();
    let coefficients = coef_keys.into_iter().map(summarize).collect();
    let items = family_keys
        .into_iter()
        .map(|(family, keys)| {
            let cells: Vec<RecoveryCell> = keys.into_iter().map(summarize).collect();
            let m = cells.len() as f64;
            let mean_abs_estimates: f64 = keys_abs_mean(&estimates, family);
            FamilyRow {
                family: family.name().to_string(),
                mean_abs_bias: cells.iter().map(|c| c.bias.abs()).sum::<f64>() / m,
                mean_rmse: cells.iter().map(|c| c.rmse).sum::<f64>() / m,
                mean_estimate: cells.iter().map(|c| c.mean_estimate).sum::<f64>() / m,
                mean_abs_estimate: mean_abs_estimates,
            }
        })
        .collect();
    Ok(RecoveryReport {
        scenario: scenario.label(),
        replications,
        used: estimates.len(),
        non_converged,
        failed,
        support,
        coefficients,
        items,
        warnings,
    })
}

/// Mean of `|estimate|` over items and replications.
fn keys_abs_mean(estimates: &[Parameters], family: ItemFamily) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for p in estimates {
        for x in p.items.family(family) {
            total += x.abs();
            count += 1;
        }
    }
    total / count as f64
}

/// Recovery study fitting the scenario's own model (2PL, three classes
/// each) by EM with `config`.
pub fn recovery_study(scenario: &Scenario, replications: usize, config: &EmConfig) -> Result<RecoveryReport> {
    let spec = scenario.fit_spec();
    recovery_study_with(scenario, replications, |sample, _| {
        let result = fit(&spec, &scenario.design, &sample.data, config)?;
        Ok(FitOutcome {
            converged: result.converged,
            params: result.params,
        })
    })
}
