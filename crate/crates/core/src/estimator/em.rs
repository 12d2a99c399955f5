use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::EmConfig;
use super::estep::{e_step_with_loglik, Posteriors};
use super::init::{initialize, InitMode};
use super::mstep::{m_step_items_with_stats, m_step_weights, ItemStats};
use crate::error::{Error, Result};
use crate::model::{count_parameters, Dataset, ItemDesign, ModelSpec, Parameters};

/// A fitted model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Parameters,
    pub loglik: f64,
    pub npar: usize,
    pub bic: f64,
    pub aic: f64,
    pub posteriors: Posteriors,
    /// Observed-data log-likelihood after every iteration, starting with the
    /// starting values.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub n_iter: usize,
    /// Index of the start that produced this fit (0 is the deterministic
    /// start, then random starts, then any warm starts).
    pub start: usize,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn spec(&self) -> &ModelSpec {
        &self.params.spec
    }
}

fn push_unique(warnings: &mut Vec<String>, msg: String) {
    if !warnings.contains(&msg) {
        warnings.push(msg);
    }
}

fn check_inputs(spec: &ModelSpec, design: &ItemDesign, data: &Dataset) -> Result<()> {
    spec.validate()?;
    if design.n_items() != spec.items || design.n_dims() != spec.dims {
        return Err(Error::shape(format!(
            "item design has {} items on {} dimensions, model expects {} on {}",
            design.n_items(),
            design.n_dims(),
            spec.items,
            spec.dims
        )));
    }
    if data.n_items() != spec.items || data.n_covariates() != spec.covariates {
        return Err(Error::shape(format!(
            "dataset has {} items and {} covariates, model expects {} and {}",
            data.n_items(),
            data.n_covariates(),
            spec.items,
            spec.covariates
        )));
    }
    if data.n_subjects() == 0 {
        return Err(Error::shape("dataset has no subjects"));
    }
    Ok(())
}

/// Runs EM from `start` until one of the stopping rules fires.
pub fn fit_from(
    start: &Parameters,
    design: &ItemDesign,
    data: &Dataset,
    config: &EmConfig,
) -> Result<FitResult> {
    config.validate()?;
    check_inputs(&start.spec, design, data)?;
    start.check_shapes(design)?;
    if !start.respects_mask() {
        return Err(Error::config("starting values violate the constraint mask"));
    }
    let spec = start.spec;
    let mut params = start.clone();
    let mut warnings = Vec::new();
    let (mut post, mut loglik) = e_step_with_loglik(&params, design, data)?;
    let mut trace = vec![loglik];
    let mut converged = false;
    let mut n_iter = 0;

    while n_iter < config.max_iter {
        n_iter += 1;
        let previous = params.clone();

        let weights = m_step_weights(&post, data, &params.latent, config)?;
        params.latent.ability_coef = weights.ability_coef;
        params.latent.propensity_coef = weights.propensity_coef;
        for w in weights.warnings {
            push_unique(&mut warnings, w);
        }

        let stats = ItemStats::collect(&post, data);
        let items = m_step_items_with_stats(&stats, design, &params, config);
        params = items.params;
        for w in items.warnings {
            push_unique(&mut warnings, w);
        }

        let (new_post, new_loglik) = e_step_with_loglik(&params, design, data)?;
        trace.push(new_loglik);
        let scale = loglik.abs().max(1.0);
        if new_loglik < loglik - 1e-9 * scale {
            push_unique(
                &mut warnings,
                format!(
                    "log-likelihood decreased at iteration {n_iter} ({loglik:.6} -> {new_loglik:.6})"
                ),
            );
        }
        let rel = (new_loglik - loglik).abs() / loglik.abs().max(f64::MIN_POSITIVE);
        let moved = params.max_abs_diff(&previous);
        post = new_post;
        loglik = new_loglik;
        if rel < config.rel_tol_loglik || moved < config.abs_tol_param {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "EM stopped at max_iter = {} without meeting a convergence criterion",
            config.max_iter
        ));
    }

    let npar = count_parameters(&spec)?;
    let n = data.n_subjects() as f64;
    Ok(FitResult {
        bic: -2.0 * loglik + n.ln() * npar as f64,
        aic: -2.0 * loglik + 2.0 * npar as f64,
        params,
        loglik,
        npar,
        posteriors: post,
        trace,
        converged,
        n_iter,
        start: 0,
        warnings,
    })
}

/// Multi-start EM: the deterministic start plus `n_starts - 1` random
/// starts. The fit with the highest log-likelihood is returned; ties go to
/// the lowest start index.
pub fn fit(
    spec: &ModelSpec,
    design: &ItemDesign,
    data: &Dataset,
    config: &EmConfig,
) -> Result<FitResult> {
    fit_with_warm_starts(spec, design, data, config, &[])
}

/// Like [`fit`], with additional caller-supplied starting values (for
/// example the solution of a nested model embedded into `spec`).
pub fn fit_with_warm_starts(
    spec: &ModelSpec,
    design: &ItemDesign,
    data: &Dataset,
    config: &EmConfig,
    warm: &[Parameters],
) -> Result<FitResult> {
    config.validate()?;
    check_inputs(spec, design, data)?;
    let mut starts = Vec::with_capacity(config.n_starts + warm.len());
    let mut init_warnings = Vec::new();
    for s in 0..config.n_starts {
        let mode = if s == 0 {
            InitMode::Deterministic
        } else {
            InitMode::Random {
                seed: config.seed,
                stream: s as u64,
            }
        };
        let init = initialize(spec, design, data, mode)?;
        if s == 0 {
            init_warnings = init.warnings;
        }
        starts.push(init.params);
    }
    for w in warm {
        if w.spec != *spec {
            return Err(Error::config(format!(
                "warm start for {} cannot seed {}",
                w.spec.label(),
                spec.label()
            )));
        }
        starts.push(w.clone());
    }

    let results: Vec<Result<FitResult>> = starts
        .par_iter()
        .map(|start| fit_from(start, design, data, config))
        .collect();

    let mut best: Option<FitResult> = None;
    let mut first_error = None;
    let mut failed = 0;
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(mut r) => {
                r.start = index;
                let better = best.as_ref().is_none_or(|b| r.loglik > b.loglik);
                if better {
                    best = Some(r);
                }
            }
            Err(e) => {
                failed += 1;
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    match best {
        Some(mut r) => {
            let mut warnings = init_warnings;
            if failed > 0 {
                warnings.push(format!("{failed} of {} starts failed", starts.len()));
            }
            warnings.append(&mut r.warnings);
            r.warnings = warnings;
            Ok(r)
        }
        None => Err(first_error.expect("at least one start ran")),
    }
}
