use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::{write_json, write_table, ItemMap};
use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::inference::{BootstrapReport, SelectionReport, StandardizedReport};
use crate::model::{ItemDesign, ModelSpec, ParamKey, Parameters};
use crate::simulate::RecoveryReport;

/// Version of every machine-readable output written by this crate.
pub const FORMAT_VERSION: u32 = 1;

fn num(x: f64) -> String {
    x.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub name: String,
    pub value: f64,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRow {
    pub item: String,
    pub dimension: String,
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta: f64,
    pub alpha_std: f64,
    pub beta_std: f64,
    pub gamma1_std: f64,
    pub gamma2_std: f64,
    pub delta_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportRow {
    /// Dimension label for abilities, `V` for the propensity.
    pub variable: String,
    pub class: usize,
    pub value: f64,
    pub standardized: f64,
    pub average_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    /// `ability` or `propensity`.
    pub system: String,
    /// Class whose logit against class 1 the coefficient enters.
    pub class: usize,
    /// `intercept` or a covariate name.
    pub covariate: String,
    pub value: f64,
}

/// Machine-readable result of `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub format_version: u32,
    pub model: ModelSpec,
    pub n_subjects: usize,
    pub missing_cells: usize,
    pub item_names: Vec<String>,
    pub dimension_labels: Vec<String>,
    pub covariate_names: Vec<String>,
    pub loglik: f64,
    pub npar: usize,
    pub bic: f64,
    pub aic: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub start: usize,
    pub warnings: Vec<String>,
    pub parameters: Vec<ParameterRow>,
    pub items: Vec<ItemRow>,
    pub support: Vec<SupportRow>,
    pub coefficients: Vec<CoefficientRow>,
    /// Latent ability correlations, row-major `s x s`.
    pub correlations: Vec<Vec<f64>>,
}

impl FitReport {
    pub fn build(
        fit: &FitResult,
        std: &StandardizedReport,
        map: &ItemMap,
        covariate_names: &[String],
        n_subjects: usize,
        missing_cells: usize,
    ) -> Self {
        let p = &fit.params;
        let spec = p.spec;
        let parameters = p
            .keys()
            .into_iter()
            .map(|k| ParameterRow {
                name: k.to_string(),
                value: p.get(k),
                fixed: !p.is_free(k),
            })
            .collect();
        let is = &std.items_star;
        let items = (0..spec.items)
            .map(|j| ItemRow {
                item: map.items[j].clone(),
                dimension: map.dimension_labels[map.design.dimension(j)].clone(),
                alpha: p.items.alpha[j],
                beta: p.items.beta[j],
                gamma1: p.items.gamma1[j],
                gamma2: p.items.gamma2[j],
                delta: p.items.delta[j],
                alpha_std: is.alpha[j],
                beta_std: is.beta[j],
                gamma1_std: is.gamma1[j],
                gamma2_std: is.gamma2[j],
                delta_std: is.delta[j],
            })
            .collect();
        let mut support = Vec::new();
        for d in 0..spec.dims {
            for h in 0..spec.ability_classes {
                support.push(SupportRow {
                    variable: map.dimension_labels[d].clone(),
                    class: h + 1,
                    value: p.latent.ability_support[h][d],
                    standardized: std.u_star[h][d],
                    average_weight: std.lambda_bar[h],
                });
            }
        }
        if let Some(v) = &std.v_star {
            for (h, vs) in v.iter().enumerate() {
                support.push(SupportRow {
                    variable: "V".into(),
                    class: h + 1,
                    value: p.latent.propensity_support[h],
                    standardized: *vs,
                    average_weight: std.pi_bar[h],
                });
            }
        }
        let mut coefficients = Vec::new();
        for (system, coef) in [
            ("ability", &p.latent.ability_coef),
            ("propensity", &p.latent.propensity_coef),
        ] {
            for (h, row) in coef.iter().enumerate() {
                for (j, value) in row.iter().enumerate() {
                    coefficients.push(CoefficientRow {
                        system: system.into(),
                        class: h + 2,
                        covariate: if j == 0 {
                            "intercept".into()
                        } else {
                            covariate_names[j - 1].clone()
                        },
                        value: *value,
                    });
                }
            }
        }
        FitReport {
            format_version: FORMAT_VERSION,
            model: spec,
            n_subjects,
            missing_cells,
            item_names: map.items.clone(),
            dimension_labels: map.dimension_labels.clone(),
            covariate_names: covariate_names.to_vec(),
            loglik: fit.loglik,
            npar: fit.npar,
            bic: fit.bic,
            aic: fit.aic,
            converged: fit.converged,
            n_iter: fit.n_iter,
            start: fit.start,
            warnings: fit.warnings.clone(),
            parameters,
            items,
            support,
            coefficients,
            correlations: std.corr.clone(),
        }
    }

    /// Rebuilds the raw parameter set from the `parameters` table.
    pub fn to_parameters(&self, design: &ItemDesign) -> Result<Parameters> {
        let mut params = Parameters::zeros(&self.model, design)?;
        let values: HashMap<&str, f64> = self
            .parameters
            .iter()
            .map(|r| (r.name.as_str(), r.value))
            .collect();
        let keys: Vec<ParamKey> = params.keys();
        for k in keys {
            let name = k.to_string();
            let v = values
                .get(name.as_str())
                .ok_or_else(|| Error::Serialization(format!("report lacks parameter {name}")))?;
            params.set(k, *v);
        }
        Ok(params)
    }

    /// Writes `fit.json` plus one CSV per section into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(dir.join("fit.json"), self)?;
        let rows: Vec<Vec<String>> = self
            .parameters
            .iter()
            .map(|r| vec![r.name.clone(), num(r.value), r.fixed.to_string()])
            .collect();
        write_table(dir.join("parameters.csv"), &["name", "value", "fixed"], &rows)?;
        let rows: Vec<Vec<String>> = self
            .items
            .iter()
            .map(|r| {
                vec![
                    r.item.clone(),
                    r.dimension.clone(),
                    num(r.alpha),
                    num(r.beta),
                    num(r.gamma1),
                    num(r.gamma2),
                    num(r.delta),
                    num(r.alpha_std),
                    num(r.beta_std),
                    num(r.gamma1_std),
                    num(r.gamma2_std),
                    num(r.delta_std),
                ]
            })
            .collect();
        write_table(
            dir.join("items.csv"),
            &[
                "item", "dimension", "alpha", "beta", "gamma1", "gamma2", "delta", "alpha_std",
                "beta_std", "gamma1_std", "gamma2_std", "delta_std",
            ],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = self
            .support
            .iter()
            .map(|r| {
                vec![
                    r.variable.clone(),
                    r.class.to_string(),
                    num(r.value),
                    num(r.standardized),
                    num(r.average_weight),
                ]
            })
            .collect();
        write_table(
            dir.join("support.csv"),
            &["variable", "class", "value", "standardized", "average_weight"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = self
            .coefficients
            .iter()
            .map(|r| vec![r.system.clone(), r.class.to_string(), r.covariate.clone(), num(r.value)])
            .collect();
        write_table(
            dir.join("coefficients.csv"),
            &["system", "class", "covariate", "value"],
            &rows,
        )?;
        let mut header = vec!["dimension".to_string()];
        header.extend(self.dimension_labels.iter().cloned());
        let rows: Vec<Vec<String>> = self
            .correlations
            .iter()
            .enumerate()
            .map(|(d, row)| {
                let mut r = vec![self.dimension_labels[d].clone()];
                r.extend(row.iter().map(|x| num(*x)));
                r
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_table(dir.join("correlations.csv"), &header, &rows)?;
        let rows = vec![vec![
            num(self.loglik),
            self.npar.to_string(),
            num(self.aic),
            num(self.bic),
            self.converged.to_string(),
            self.n_iter.to_string(),
        ]];
        write_table(
            dir.join("summary.csv"),
            &["loglik", "npar", "aic", "bic", "converged", "n_iter"],
            &rows,
        )
    }
}

/// Writes `selection.json`, `selection.csv` and `lr_tests.csv` into `dir`.
pub fn write_selection(report: &SelectionReport, dir: &Path) -> Result<()> {
    write_json(dir.join("selection.json"), report)?;
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                r.label.clone(),
                r.model.parametrization.to_string(),
                r.model.missing_mode.to_string(),
                r.model.ability_classes.to_string(),
                r.model.propensity_classes.to_string(),
                opt(r.loglik),
                r.npar.to_string(),
                opt(r.aic),
                opt(r.bic),
                r.converged.to_string(),
                r.best.to_string(),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_table(
        dir.join("selection.csv"),
        &[
            "label", "parametrization", "missing_mode", "k1", "k2", "loglik", "npar", "aic",
            "bic", "converged", "best", "error",
        ],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = report
        .tests
        .iter()
        .filter_map(|t| {
            t.likelihood_ratio.as_ref().map(|lr| {
                vec![
                    t.full.label.clone(),
                    t.restricted.label.clone(),
                    num(lr.deviance),
                    lr.df.to_string(),
                    num(lr.p_value),
                ]
            })
        })
        .collect();
    write_table(
        dir.join("lr_tests.csv"),
        &["full", "restricted", "deviance", "df", "p_value"],
        &rows,
    )
}

/// Machine-readable result of `bootstrap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOutput {
    pub format_version: u32,
    pub model: ModelSpec,
    pub loglik: f64,
    pub bootstrap: BootstrapReport,
}

impl BootstrapOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(dir.join("bootstrap.json"), self)?;
        let rows: Vec<Vec<String>> = self
            .bootstrap
            .parameters
            .iter()
            .chain(&self.bootstrap.standardized)
            .map(|e| {
                vec![
                    e.name.clone(),
                    num(e.estimate),
                    num(e.se),
                    num(e.lower),
                    num(e.upper),
                    e.fixed.to_string(),
                    if e.significant() { "*".into() } else { String::new() },
                ]
            })
            .collect();
        write_table(
            dir.join("bootstrap.csv"),
            &["name", "estimate", "se", "lower", "upper", "fixed", "star"],
            &rows,
        )
    }
}

/// Machine-readable result of `recovery`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOutput {
    pub format_version: u32,
    pub seed: u64,
    pub recovery: RecoveryReport,
}

impl RecoveryOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(dir.join("recovery.json"), self)?;
        let cells = |cells: &[crate::simulate::RecoveryCell]| -> Vec<Vec<String>> {
            cells
                .iter()
                .map(|c| {
                    vec![
                        c.name.clone(),
                        num(c.truth),
                        num(c.mean_estimate),
                        num(c.bias),
                        num(c.rmse),
                    ]
                })
                .collect()
        };
        let header = ["parameter", "truth", "mean_estimate", "bias", "rmse"];
        write_table(dir.join("support.csv"), &header, &cells(&self.recovery.support))?;
        write_table(
            dir.join("coefficients.csv"),
            &header,
            &cells(&self.recovery.coefficients),
        )?;
        let rows: Vec<Vec<String>> = self
            .recovery
            .items
            .iter()
            .map(|r| {
                vec![
                    r.family.clone(),
                    num(r.mean_abs_bias),
                    num(r.mean_rmse),
                    num(r.mean_estimate),
                    num(r.mean_abs_estimate),
                ]
            })
            .collect();
        write_table(
            dir.join("items.csv"),
            &["family", "mean_abs_bias", "mean_rmse", "mean_estimate", "mean_abs_estimate"],
            &rows,
        )
    }
}
