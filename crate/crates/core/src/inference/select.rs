use serde::{Deserialize, Serialize};

use super::compare::{lr_test, ComparisonReport};
use crate::error::Result;
use crate::estimator::{fit_with_warm_starts, EmConfig, FitResult};
use crate::model::{count_parameters, Dataset, ItemDesign, MissingMode, ModelSpec, Parametrization};

/// One row of a model-selection table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub label: String,
    pub model: ModelSpec,
    pub loglik: Option<f64>,
    pub npar: usize,
    pub aic: Option<f64>,
    pub bic: Option<f64>,
    pub converged: bool,
    /// Lowest BIC among the successful fits.
    pub best: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub format_version: u32,
    pub n_subjects: usize,
    pub rows: Vec<SelectionRow>,
    /// Likelihood-ratio tests of every nested pair in the grid.
    pub tests: Vec<ComparisonReport>,
}

impl SelectionReport {
    pub fn best(&self) -> Option<&SelectionRow> {
        self.rows.iter().find(|r| r.best)
    }
}

/// True when `restricted` is `full` with extra equality constraints:
/// Rasch inside 2PL (same missingness), or the no-ability model inside the
/// full one (2PL only; under Rasch both fix gamma1).
pub fn is_nested(restricted: &ModelSpec, full: &ModelSpec) -> bool {
    let same_shape = restricted.ability_classes == full.ability_classes
        && restricted.propensity_classes == full.propensity_classes
        && restricted.items == full.items
        && restricted.dims == full.dims
        && restricted.covariates == full.covariates;
    if !same_shape || restricted == full {
        return false;
    }
    let rasch_in_2pl = restricted.parametrization == Parametrization::Rasch
        && full.parametrization == Parametrization::TwoPl
        && restricted.missing_mode == full.missing_mode;
    let noability_in_full = restricted.parametrization == Parametrization::TwoPl
        && full.parametrization == Parametrization::TwoPl
        && restricted.missing_mode == MissingMode::MnarNoAbility
        && full.missing_mode == MissingMode::MnarFull;
    rasch_in_2pl || noability_in_full
}

/// Fits every model of the grid, marks the BIC minimizer and tests the
/// nested pairs. Restricted models are fitted first and their solutions
/// seed the models that contain them, so nested log-likelihoods are
/// ordered.
pub fn select_models(
    grid: &[ModelSpec],
    design: &ItemDesign,
    data: &Dataset,
    config: &EmConfig,
    format_version: u32,
) -> Result<(SelectionReport, Vec<Option<FitResult>>)> {
    // Fit in order of increasing parameter count so that restricted
    // solutions exist before the models that nest them.
    let mut order: Vec<usize> = (0..grid.len()).collect();
    let counts: Vec<usize> = grid
        .iter()
        .map(|s| count_parameters(s).unwrap_or(usize::MAX))
        .collect();
    order.sort_by_key(|&i| (counts[i], i));

    let mut fits: Vec<Option<FitResult>> = vec![None; grid.len()];
    let mut errors: Vec<Option<String>> = vec![None; grid.len()];
    for &i in &order {
        let spec = &grid[i];
        let warm: Vec<_> = (0..grid.len())
            .filter(|&r| is_nested(&grid[r], spec))
            .filter_map(|r| fits[r].as_ref())
            .filter_map(|f| f.params.embed_into(spec, design).ok())
            .collect();
        match spec
            .validate()
            .and_then(|_| fit_with_warm_starts(spec, design, data, config, &warm))
        {
            Ok(f) => fits[i] = Some(f),
            Err(e) => errors[i] = Some(e.to_string()),
        }
    }

    let best = fits
        .iter()
        .enumerate()
        .filter_map(|(i, f)| f.as_ref().map(|f| (i, f.bic)))
        .fold(None::<(usize, f64)>, |acc, (i, b)| match acc {
            Some((_, bb)) if bb <= b => acc,
            _ => Some((i, b)),
        })
        .map(|(i, _)| i);

    let rows = grid
        .iter()
        .enumerate()
        .map(|(i, spec)| SelectionRow {
            label: spec.label(),
            model: *spec,
            loglik: fits[i].as_ref().map(|f| f.loglik),
            npar: counts[i],
            aic: fits[i].as_ref().map(|f| f.aic),
            bic: fits[i].as_ref().map(|f| f.bic),
            converged: fits[i].as_ref().is_some_and(|f| f.converged),
            best: best == Some(i),
            error: errors[i].clone(),
        })
        .collect();

    let mut tests = Vec::new();
    for (r, rs) in grid.iter().enumerate() {
        for (f, fs) in grid.iter().enumerate() {
            if !is_nested(rs, fs) {
                continue;
            }
            if let (Some(full), Some(restricted)) = (&fits[f], &fits[r]) {
                if let Ok(t) = lr_test(full, restricted) {
                    tests.push(t);
                }
            }
        }
    }
    Ok((
        SelectionReport {
            format_version,
            n_subjects: data.n_subjects(),
            rows,
            tests,
        },
        fits,
    ))
}
