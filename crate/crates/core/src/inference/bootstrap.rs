use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::align::align_classes;
use super::standardize::{standardize, StandardizedReport};
use crate::error::{Error, Result};
use crate::estimator::{fit, fit_from, EmConfig, FitResult};
use crate::model::{Dataset, ItemDesign, ItemFamily, ModelSpec, Parameters};

/// Bootstrap summary of one scalar quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEntry {
    pub name: String,
    pub estimate: f64,
    pub fixed: bool,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
}

impl BootstrapEntry {
    /// `|estimate| > 1.96 SE`; never true for fixed or zero-SE entries.
    pub fn significant(&self) -> bool {
        !self.fixed && self.se > 0.0 && self.estimate.abs() > 1.96 * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub replicates: usize,
    pub used: usize,
    pub non_converged: usize,
    /// Replicates whose refit or standardization raised an error.
    pub failed: usize,
    pub seed: u64,
    /// Raw parameters in canonical order.
    pub parameters: Vec<BootstrapEntry>,
    /// Standardized supports, item parameters and latent correlations.
    pub standardized: Vec<BootstrapEntry>,
    pub warnings: Vec<String>,
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (N - 1) p`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(name: String, estimate: f64, fixed: bool, draws: &[f64]) -> BootstrapEntry {
    let b = draws.len();
    let mean = draws.iter().sum::<f64>() / b as f64;
    let var = if b > 1 {
        draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (b - 1) as f64
    } else {
        0.0
    };
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lower, upper) = if sorted.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (quantile(&sorted, 0.025), quantile(&sorted, 0.975))
    };
    BootstrapEntry {
        name,
        estimate,
        fixed,
        se: if fixed { 0.0 } else { var.sqrt() },
        lower,
        upper,
    }
}

/// Names and values of the standardized quantities tracked by the bootstrap.
pub fn standardized_quantities(params: &Parameters, report: &StandardizedReport) -> Vec<(String, f64)> {
    let spec = &params.spec;
    let mut out = Vec::new();
    for (h, row) in report.u_star.iter().enumerate() {
        for (d, u) in row.iter().enumerate() {
            out.push((format!("std.u[{},{}]", d + 1, h + 1), *u));
        }
    }
    if let Some(v) = &report.v_star {
        for (h, x) in v.iter().enumerate() {
            out.push((format!("std.v[{}]", h + 1), *x));
        }
    }
    for (h, w) in report.lambda_bar.iter().enumerate() {
        out.push((format!("lambda_bar[{}]", h + 1), *w));
    }
    if spec.has_propensity() {
        for (h, w) in report.pi_bar.iter().enumerate() {
            out.push((format!("pi_bar[{}]", h + 1), *w));
        }
    }
    for family in ItemFamily::active(spec) {
        for (j, x) in report.items_star.family(family).iter().enumerate() {
            out.push((format!("std.{}[{}]", family.name(), j + 1), *x));
        }
    }
    for d in 0..spec.dims {
        for e in d + 1..spec.dims {
            out.push((format!("corr[{},{}]", d + 1, e + 1), report.corr[d][e]));
        }
    }
    out
}

enum Replicate {
    Used { raw: Vec<f64>, std: Vec<f64> },
    NonConverged,
    Failed(String),
}

fn resample(data: &Dataset, seed: u64, index: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let n = data.n_subjects();
    let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    data.select_rows(&rows)
}

/// Nonparametric bootstrap around an existing fit. Each replicate is a
/// with-replacement resample of subjects, refitted from `original`'s
/// estimate and relabeled to its classes.
pub fn bootstrap_fit(
    original: &FitResult,
    design: &ItemDesign,
    data: &Dataset,
    config: &EmConfig,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapReport> {
    if replicates < 2 {
        return Err(Error::config("bootstrap needs at least 2 replicates"));
    }
    let params = &original.params;
    let keys = params.keys();
    let base_std = standardize(params, design, data)?;
    let base_quantities = standardized_quantities(params, &base_std);

    let outcomes: Vec<Replicate> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let sample = resample(data, seed, b);
            let refit = match fit_from(params, design, &sample, config) {
                Ok(r) => r,
                Err(e) => return Replicate::Failed(format!("replicate {}: {e}", b + 1)),
            };
            if !refit.converged {
                return Replicate::NonConverged;
            }
            let aligned = match align_classes(params, &refit.params) {
                Ok(a) => a.params,
                Err(e) => return Replicate::Failed(format!("replicate {}: {e}", b + 1)),
            };
            let std = match standardize(&aligned, design, &sample) {
                Ok(s) => s,
                Err(e) => return Replicate::Failed(format!("replicate {}: {e}", b + 1)),
            };
            Replicate::Used {
                raw: keys.iter().map(|&k| aligned.get(k)).collect(),
                std: standardized_quantities(&aligned, &std)
                    .into_iter()
                    .map(|(_, v)| v)
                    .collect(),
            }
        })
        .collect();

    let mut raw_draws = vec![Vec::new(); keys.len()];
    let mut std_draws = vec![Vec::new(); base_quantities.len()];
    let (mut non_converged, mut failed) = (0, 0);
    let mut warnings = Vec::new();
    for outcome in outcomes {
        match outcome {
            Replicate::Used { raw, std } => {
                for (d, x) in raw_draws.iter_mut().zip(raw) {
                    d.push(x);
                }
                for (d, x) in std_draws.iter_mut().zip(std) {
                    d.push(x);
                }
            }
            Replicate::NonConverged => non_converged += 1,
            Replicate::Failed(msg) => {
                failed += 1;
                warnings.push(msg);
            }
        }
    }
    let used = raw_draws.first().map_or(0, Vec::len);
    if used < 2 {
        return Err(Error::Numerical(format!(
            "only {used} of {replicates} bootstrap replicates usable"
        )));
    }

    let parameters = keys
        .iter()
        .zip(&raw_draws)
        .map(|(&k, d)| summarize(k.to_string(), params.get(k), !params.is_free(k), d))
        .collect();
    let standardized = base_quantities
        .into_iter()
        .zip(&std_draws)
        .map(|((name, est), d)| summarize(name, est, false, d))
        .collect();
    Ok(BootstrapReport {
        replicates,
        used,
        non_converged,
        failed,
        seed,
        parameters,
        standardized,
        warnings,
    })
}

/// Fits `spec` and bootstraps the result.
pub fn bootstrap(
    spec: &ModelSpec,
    design: &ItemDesign,
    data: &Dataset,
    config: &EmConfig,
    replicates: usize,
    seed: u64,
) -> Result<(FitResult, BootstrapReport)> {
    let original = fit(spec, design, data, config)?;
    let report = bootstrap_fit(&original, design, data, config, replicates, seed)?;
    Ok((original, report))
}
