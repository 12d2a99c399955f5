//! Scalar kernels and the small dense Newton solver shared by the M-step blocks.

use nalgebra::{DMatrix, DVector};

#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(logistic(z))` without cancellation for large |z|.
#[inline]
pub fn log_logistic(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `log(1 - logistic(z))`.
#[inline]
pub fn log1m_logistic(z: f64) -> f64 {
    log_logistic(-z)
}

pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log-probabilities of a softmax over `logits` (max-subtracted).
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = logsumexp(logits);
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Value, gradient and row-major Hessian of an objective at a point.
#[derive(Debug, Clone)]
pub struct LocalModel {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl LocalModel {
    pub fn zeros(dim: usize) -> Self {
        LocalModel {
            value: 0.0,
            gradient: vec![0.0; dim],
            hessian: vec![0.0; dim * dim],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Ridge added to the negated Hessian before factorization.
    pub ridge: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-8,
            max_iter: 50,
            max_halvings: 30,
            ridge: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NewtonReport {
    pub iterations: usize,
    pub converged: bool,
    /// A non-finite step or objective was produced and the block was abandoned.
    pub nonfinite: bool,
    pub gradient_norm: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Solves `(-H + ridge I) step = g`, escalating the ridge if the
/// factorization fails.
fn newton_direction(model: &LocalModel, ridge: f64) -> Option<Vec<f64>> {
    let dim = model.gradient.len();
    let neg_h = DMatrix::from_row_slice(dim, dim, &model.hessian).map(|v| -v);
    let g = DVector::from_column_slice(&model.gradient);
    let mut lambda = ridge;
    for _ in 0..12 {
        let mut a = neg_h.clone();
        for i in 0..dim {
            a[(i, i)] += lambda;
        }
        if let Some(chol) = a.cholesky() {
            let step = chol.solve(&g);
            if step.iter().all(|v| v.is_finite()) {
                return Some(step.iter().copied().collect());
            }
        }
        let scale = (0..dim).map(|i| neg_h[(i, i)].abs()).fold(1e-8, f64::max);
        lambda = if lambda == 0.0 { 1e-8 * scale } else { lambda * 10.0 };
    }
    None
}

/// Maximizes a (locally) concave objective by Newton-Raphson with step
/// halving. Accepted steps never decrease the objective. `eval` must return
/// the value, gradient and Hessian at the given point.
pub fn maximize<F>(x: &mut [f64], opts: &NewtonOptions, mut eval: F) -> NewtonReport
where
    F: FnMut(&[f64]) -> LocalModel,
{
    let mut report = NewtonReport::default();
    if x.is_empty() {
        report.converged = true;
        return report;
    }
    let mut current = eval(x);
    if !current.value.is_finite() {
        report.nonfinite = true;
        return report;
    }
    let mut trial = vec![0.0; x.len()];
    for it in 0..opts.max_iter {
        let gnorm = inf_norm(&current.gradient);
        report.gradient_norm = gnorm;
        report.iterations = it;
        if gnorm < opts.tol {
            report.converged = true;
            return report;
        }
        let step = match newton_direction(&current, opts.ridge) {
            Some(s) => s,
            None => {
                report.nonfinite = true;
                return report;
            }
        };
        // Predicted gain below the resolution of the objective: nothing
        // left for Newton to do.
        let decrement: f64 = current.gradient.iter().zip(&step).map(|(g, s)| g * s).sum();
        if 0.5 * decrement <= 8.0 * f64::EPSILON * (1.0 + current.value.abs()) {
            report.converged = true;
            return report;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            for ((tr, xi), si) in trial.iter_mut().zip(x.iter()).zip(&step) {
                *tr = xi + t * si;
            }
            let candidate = eval(&trial);
            if candidate.value.is_finite() && candidate.value >= current.value {
                x.copy_from_slice(&trial);
                current = candidate;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No ascent available at floating-point resolution.
            report.gradient_norm = inf_norm(&current.gradient);
            report.converged = report.gradient_norm < opts.tol.sqrt();
            return report;
        }
    }
    report.iterations = opts.max_iter;
    report.gradient_norm = inf_norm(&current.gradient);
    report.converged = report.gradient_norm < opts.tol;
    report
}

/// Mean and population variance of `values` under `weights`.
pub fn weighted_moments(values: &[f64], weights: &[f64]) -> (f64, f64) {
    let mean: f64 = values.iter().zip(weights).map(|(v, w)| v * w).sum();
    let var: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - mean) * (v - mean))
        .sum();
    (mean, var)
}

/// Evenly spaced points from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count)
            .map(|i| start + (end - start) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
