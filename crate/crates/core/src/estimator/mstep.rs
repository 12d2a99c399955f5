//! M-step: weighted multinomial logits for the class weights, then cyclic
//! Newton blocks over item parameters and support points on posterior-
//! weighted sufficient statistics.

use super::config::EmConfig;
use super::estep::Posteriors;
use crate::error::{Error, Result};
use crate::model::{
    log_joint_weights, Dataset, ItemDesign, LatentStructure, Parameters, Slot,
};
use crate::numeric::{
    log1m_logistic, log_logistic, logistic, logsumexp, maximize, LocalModel, NewtonOptions,
    NewtonReport,
};

const MIN_CLASS_MASS: f64 = 1e-8;

/// Maximizes `sum_i sum_h t_ih log lambda_h(x_i)` over the coefficients of a
/// reference-class multinomial logit. With `intercept_only` the slope
/// columns of `coef` are held at their current values.
pub(crate) fn fit_weighted_multinomial(
    x: &[f64],
    n: usize,
    c: usize,
    targets: &[f64],
    coef: &mut [Vec<f64>],
    intercept_only: bool,
    opts: &NewtonOptions,
) -> NewtonReport {
    let k = coef.len() + 1;
    debug_assert_eq!(targets.len(), n * k);
    let ncols = if intercept_only { 1 } else { c + 1 };
    let dim = (k - 1) * ncols;
    let mut theta: Vec<f64> = coef
        .iter()
        .flat_map(|row| row[..ncols].iter().copied())
        .collect();
    let fixed: Vec<Vec<f64>> = coef.to_vec();

    let eval = |theta: &[f64]| -> LocalModel {
        let mut model = LocalModel::zeros(dim);
        let mut logits = vec![0.0; k];
        let mut xt = vec![1.0; c + 1];
        for i in 0..n {
            xt[1..].copy_from_slice(&x[i * c..(i + 1) * c]);
            let t = &targets[i * k..(i + 1) * k];
            let total: f64 = t.iter().sum();
            for h in 1..k {
                let row = &fixed[h - 1];
                let mut eta = 0.0;
                for col in 0..=c {
                    let b = if col < ncols {
                        theta[(h - 1) * ncols + col]
                    } else {
                        row[col]
                    };
                    eta += b * xt[col];
                }
                logits[h] = eta;
            }
            let lse = logsumexp(&logits);
            model.value += t.iter().zip(&logits).map(|(a, b)| a * b).sum::<f64>() - total * lse;
            let lambda: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
            for h in 1..k {
                let resid = t[h] - total * lambda[h];
                for a in 0..ncols {
                    let ra = (h - 1) * ncols + a;
                    model.gradient[ra] += resid * xt[a];
                    for g in 1..k {
                        let cov = if g == h {
                            lambda[h] * (1.0 - lambda[h])
                        } else {
                            -lambda[h] * lambda[g]
                        };
                        for b in 0..ncols {
                            let cb = (g - 1) * ncols + b;
                            model.hessian[ra * dim + cb] -= total * cov * xt[a] * xt[b];
                        }
                    }
                }
            }
        }
        model
    };

    let report = maximize(&mut theta, opts, eval);
    for (h, row) in coef.iter_mut().enumerate() {
        row[..ncols].copy_from_slice(&theta[h * ncols..(h + 1) * ncols]);
    }
    report
}

/// Updated class-weight regressions.
#[derive(Debug, Clone)]
pub struct WeightUpdate {
    pub ability_coef: Vec<Vec<f64>>,
    pub propensity_coef: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

fn solve_system(
    label: &str,
    data: &Dataset,
    targets: Vec<f64>,
    k: usize,
    start: &[Vec<f64>],
    config: &EmConfig,
    warnings: &mut Vec<String>,
) -> Vec<Vec<f64>> {
    let mut coef = start.to_vec();
    if k < 2 {
        return coef;
    }
    let n = data.n_subjects();
    let mut masses = vec![0.0; k];
    for i in 0..n {
        for h in 0..k {
            masses[h] += targets[i * k + h];
        }
    }
    let mut opts = NewtonOptions {
        tol: config.inner_newton_tol,
        max_iter: config.inner_newton_max,
        ..NewtonOptions::default()
    };
    if let Some(h) = masses.iter().position(|&w| w < MIN_CLASS_MASS) {
        opts.ridge = 1e-8;
        warnings.push(format!(
            "{label} class {} has posterior mass {:.3e}; ridge added to the weight Hessian",
            h + 1,
            masses[h]
        ));
    }
    let covariates: Vec<f64> = (0..n).flat_map(|i| data.covariates(i).to_vec()).collect();
    let report = fit_weighted_multinomial(
        &covariates,
        n,
        data.n_covariates(),
        &targets,
        &mut coef,
        false,
        &opts,
    );
    if report.nonfinite {
        warnings.push(format!("{label} weight regression produced a non-finite step"));
    }
    coef
}

/// Weighted multinomial-logit updates of Phi and Psi given the posteriors.
pub fn m_step_weights(
    posteriors: &Posteriors,
    data: &Dataset,
    latent: &LatentStructure,
    config: &EmConfig,
) -> Result<WeightUpdate> {
    let n = data.n_subjects();
    if posteriors.n_subjects() != n {
        return Err(Error::shape("posteriors and dataset have different subject counts"));
    }
    let (k1, k2) = posteriors.classes();
    let mut warnings = Vec::new();
    let ability_targets: Vec<f64> = (0..n).flat_map(|i| posteriors.ability_marginal(i)).collect();
    let propensity_targets: Vec<f64> =
        (0..n).flat_map(|i| posteriors.propensity_marginal(i)).collect();
    let ability_coef = solve_system(
        "ability",
        data,
        ability_targets,
        k1,
        &latent.ability_coef,
        config,
        &mut warnings,
    );
    let propensity_coef = solve_system(
        "propensity",
        data,
        propensity_targets,
        k2,
        &latent.propensity_coef,
        config,
        &mut warnings,
    );
    Ok(WeightUpdate {
        ability_coef,
        propensity_coef,
        warnings,
    })
}

/// Posterior-weighted counts that determine the item part of the expected
/// complete-data log-likelihood.
#[derive(Debug, Clone)]
pub(crate) struct ItemStats {
    k1: usize,
    k2: usize,
    /// `[j * k1 + h1]`: weighted correct answers and answers.
    correct: Vec<f64>,
    answered: Vec<f64>,
    /// `[j * k1 * k2 + h1 * k2 + h2]`: weighted answers (indicator = 1).
    present: Vec<f64>,
    /// `[h1 * k2 + h2]`: total posterior mass of each joint class.
    mass: Vec<f64>,
}

impl ItemStats {
    pub(crate) fn collect(posteriors: &Posteriors, data: &Dataset) -> Self {
        let (k1, k2) = posteriors.classes();
        let kk = k1 * k2;
        let m = data.n_items();
        let mut stats = ItemStats {
            k1,
            k2,
            correct: vec![0.0; m * k1],
            answered: vec![0.0; m * k1],
            present: vec![0.0; m * kk],
            mass: vec![0.0; kk],
        };
        let mut w1 = vec![0.0; k1];
        for i in 0..data.n_subjects() {
            let w = posteriors.subject(i);
            for (a, b) in stats.mass.iter_mut().zip(w) {
                *a += b;
            }
            for (h1, slot) in w1.iter_mut().enumerate() {
                *slot = w[h1 * k2..(h1 + 1) * k2].iter().sum();
            }
            for (j, resp) in data.responses(i).iter().enumerate() {
                if !resp.observed() {
                    continue;
                }
                let base = j * k1;
                for h1 in 0..k1 {
                    stats.answered[base + h1] += w1[h1];
                }
                if resp.is_correct() {
                    for h1 in 0..k1 {
                        stats.correct[base + h1] += w1[h1];
                    }
                }
                for (p, b) in stats.present[j * kk..(j + 1) * kk].iter_mut().zip(w) {
                    *p += b;
                }
            }
        }
        stats
    }
}

#[inline]
fn accumulate(model: &mut LocalModel, successes: f64, trials: f64, z: f64, dz: &[f64]) {
    if trials == 0.0 {
        return;
    }
    let dim = dz.len();
    model.value += successes * log_logistic(z) + (trials - successes) * log1m_logistic(z);
    let p = logistic(z);
    let resid = successes - trials * p;
    let curv = trials * p * (1.0 - p);
    for a in 0..dim {
        model.gradient[a] += resid * dz[a];
        for b in 0..dim {
            model.hessian[a * dim + b] -= curv * dz[a] * dz[b];
        }
    }
}

/// Item part of the expected complete-data log-likelihood.
pub(crate) fn item_objective(params: &Parameters, design: &ItemDesign, stats: &ItemStats) -> f64 {
    let spec = &params.spec;
    let (k1, k2) = (stats.k1, stats.k2);
    let kk = k1 * k2;
    let it = &params.items;
    let lat = &params.latent;
    let mut total = 0.0;
    for j in 0..spec.items {
        let d = design.dimension(j);
        for h1 in 0..k1 {
            let u = lat.ability_support[h1][d];
            let z = it.alpha[j] * u - it.beta[j];
            let a = stats.correct[j * k1 + h1];
            let b = stats.answered[j * k1 + h1];
            total += a * log_logistic(z) + (b - a) * log1m_logistic(z);
            if spec.models_missingness() {
                for h2 in 0..k2 {
                    let c = h1 * k2 + h2;
                    let zq = it.gamma1[j] * u + it.gamma2[j] * lat.propensity_support[h2]
                        - it.delta[j];
                    let s = stats.present[j * kk + c];
                    total += s * log_logistic(zq) + (stats.mass[c] - s) * log1m_logistic(zq);
                }
            }
        }
    }
    total
}

/// Newton on the subset of `values` flagged in `free`.
fn newton_on_free<F>(values: &mut [f64], free: &[bool], opts: &NewtonOptions, eval: F) -> NewtonReport
where
    F: Fn(&[f64]) -> LocalModel,
{
    let idx: Vec<usize> = (0..values.len()).filter(|&i| free[i]).collect();
    if idx.is_empty() {
        return NewtonReport {
            converged: true,
            ..NewtonReport::default()
        };
    }
    let dim = values.len();
    let mut full = values.to_vec();
    let mut sub: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
    let report = maximize(&mut sub, opts, |s| {
        for (k, &i) in idx.iter().enumerate() {
            full[i] = s[k];
        }
        let lm = eval(&full);
        let d = idx.len();
        let mut out = LocalModel::zeros(d);
        out.value = lm.value;
        for (a, &ia) in idx.iter().enumerate() {
            out.gradient[a] = lm.gradient[ia];
            for (b, &ib) in idx.iter().enumerate() {
                out.hessian[a * d + b] = lm.hessian[ia * dim + ib];
            }
        }
        out
    });
    for (k, &i) in idx.iter().enumerate() {
        values[i] = sub[k];
    }
    report
}

fn note(report: NewtonReport, what: String, warnings: &mut Vec<String>) {
    if report.nonfinite {
        warnings.push(format!("{what}: non-finite Newton step, block skipped"));
    }
}

/// Result of the item/support M-step.
#[derive(Debug, Clone)]
pub struct ItemStepOutcome {
    pub params: Parameters,
    /// Item part of the expected complete-data log-likelihood before the
    /// first cycle and after every block cycle.
    pub objective_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Maximizes the item part of the expected complete-data log-likelihood
/// over free item parameters and support points.
pub fn m_step_items_and_support(
    posteriors: &Posteriors,
    data: &Dataset,
    design: &ItemDesign,
    params: &Parameters,
    config: &EmConfig,
) -> Result<ItemStepOutcome> {
    params.check_shapes(design)?;
    let stats = ItemStats::collect(posteriors, data);
    Ok(m_step_items_with_stats(&stats, design, params, config))
}

pub(crate) fn m_step_items_with_stats(
    stats: &ItemStats,
    design: &ItemDesign,
    params: &Parameters,
    config: &EmConfig,
) -> ItemStepOutcome {
    let spec = params.spec;
    let (k1, k2) = (stats.k1, stats.k2);
    let kk = k1 * k2;
    let opts = NewtonOptions {
        tol: config.inner_newton_tol,
        max_iter: config.inner_newton_max,
        ..NewtonOptions::default()
    };
    let mut p = params.clone();
    let mut warnings = Vec::new();
    let mut trace = vec![item_objective(&p, design, stats)];

    for _cycle in 0..config.max_block_cycles {
        // Response-side item blocks (alpha_j, beta_j).
        for j in 0..spec.items {
            let d = design.dimension(j);
            let free = [
                p.items.mask.alpha[j] == Slot::Free,
                p.items.mask.beta[j] == Slot::Free,
            ];
            let mut vals = [p.items.alpha[j], p.items.beta[j]];
            let support = &p.latent.ability_support;
            let report = newton_on_free(&mut vals, &free, &opts, |v| {
                let mut lm = LocalModel::zeros(2);
                for h1 in 0..k1 {
                    let u = support[h1][d];
                    accumulate(
                        &mut lm,
                        stats.correct[j * k1 + h1],
                        stats.answered[j * k1 + h1],
                        v[0] * u - v[1],
                        &[u, -1.0],
                    );
                }
                lm
            });
            note(report, format!("item {} response block", j + 1), &mut warnings);
            p.items.alpha[j] = vals[0];
            p.items.beta[j] = vals[1];
        }

        // Indicator-side item blocks (gamma1_j, gamma2_j, delta_j).
        if spec.models_missingness() {
            for j in 0..spec.items {
                let d = design.dimension(j);
                let free = [
                    p.items.mask.gamma1[j] == Slot::Free,
                    p.items.mask.gamma2[j] == Slot::Free,
                    p.items.mask.delta[j] == Slot::Free,
                ];
                let mut vals = [p.items.gamma1[j], p.items.gamma2[j], p.items.delta[j]];
                let lat = &p.latent;
                let report = newton_on_free(&mut vals, &free, &opts, |v| {
                    let mut lm = LocalModel::zeros(3);
                    for h1 in 0..k1 {
                        let u = lat.ability_support[h1][d];
                        for h2 in 0..k2 {
                            let c = h1 * k2 + h2;
                            let vv = lat.propensity_support[h2];
                            accumulate(
                                &mut lm,
                                stats.present[j * kk + c],
                                stats.mass[c],
                                v[0] * u + v[1] * vv - v[2],
                                &[u, vv, -1.0],
                            );
                        }
                    }
                    lm
                });
                note(report, format!("item {} indicator block", j + 1), &mut warnings);
                p.items.gamma1[j] = vals[0];
                p.items.gamma2[j] = vals[1];
                p.items.delta[j] = vals[2];
            }
        }

        // Ability support points u_{d h1}.
        for h1 in 0..k1 {
            for d in 0..spec.dims {
                let mut vals = [p.latent.ability_support[h1][d]];
                let it = &p.items;
                let vsup = &p.latent.propensity_support;
                let models_r = spec.models_missingness();
                let report = newton_on_free(&mut vals, &[true], &opts, |v| {
                    let mut lm = LocalModel::zeros(1);
                    let u = v[0];
                    for j in design.items_of(d) {
                        accumulate(
                            &mut lm,
                            stats.correct[j * k1 + h1],
                            stats.answered[j * k1 + h1],
                            it.alpha[j] * u - it.beta[j],
                            &[it.alpha[j]],
                        );
                        if models_r {
                            for h2 in 0..k2 {
                                let c = h1 * k2 + h2;
                                accumulate(
                                    &mut lm,
                                    stats.present[j * kk + c],
                                    stats.mass[c],
                                    it.gamma1[j] * u + it.gamma2[j] * vsup[h2] - it.delta[j],
                                    &[it.gamma1[j]],
                                );
                            }
                        }
                    }
                    lm
                });
                note(
                    report,
                    format!("support u[{},{}]", d + 1, h1 + 1),
                    &mut warnings,
                );
                p.latent.ability_support[h1][d] = vals[0];
            }
        }

        // Propensity support points v_{h2}.
        if spec.has_propensity() {
            for h2 in 0..k2 {
                let mut vals = [p.latent.propensity_support[h2]];
                let it = &p.items;
                let usup = &p.latent.ability_support;
                let report = newton_on_free(&mut vals, &[true], &opts, |v| {
                    let mut lm = LocalModel::zeros(1);
                    for j in 0..spec.items {
                        let d = design.dimension(j);
                        for h1 in 0..k1 {
                            let c = h1 * k2 + h2;
                            accumulate(
                                &mut lm,
                                stats.present[j * kk + c],
                                stats.mass[c],
                                it.gamma1[j] * usup[h1][d] + it.gamma2[j] * v[0] - it.delta[j],
                                &[it.gamma2[j]],
                            );
                        }
                    }
                    lm
                });
                note(report, format!("support v[{}]", h2 + 1), &mut warnings);
                p.latent.propensity_support[h2] = vals[0];
            }
        }

        let q = item_objective(&p, design, stats);
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(q);
        if q - prev < config.inner_newton_tol {
            break;
        }
    }
    ItemStepOutcome {
        params: p,
        objective_trace: trace,
        warnings,
    }
}

/// Full expected complete-data log-likelihood `E[l*]` under `posteriors`.
pub fn expected_complete_loglik(
    params: &Parameters,
    design: &ItemDesign,
    data: &Dataset,
    posteriors: &Posteriors,
) -> Result<f64> {
    let stats = ItemStats::collect(posteriors, data);
    let mut total = item_objective(params, design, &stats);
    for i in 0..data.n_subjects() {
        let lw = log_joint_weights(params, data.covariates(i))?;
        total += posteriors
            .subject(i)
            .iter()
            .zip(&lw)
            .map(|(w, l)| w * l)
            .sum::<f64>();
    }
    Ok(total)
}
