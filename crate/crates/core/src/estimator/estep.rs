use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{log_joint_weights, ComponentTables, Dataset, ItemDesign, Parameters};
use crate::numeric::logsumexp;

/// Posterior probabilities `w_{h1 h2 i}` of the joint latent classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posteriors {
    n: usize,
    k1: usize,
    k2: usize,
    /// `[i * k1 * k2 + h1 * k2 + h2]`
    weights: Vec<f64>,
}

impl Posteriors {
    pub fn new(n: usize, k1: usize, k2: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n * k1 * k2 {
            return Err(Error::shape(format!(
                "posterior array has {} entries, expected {}",
                weights.len(),
                n * k1 * k2
            )));
        }
        Ok(Posteriors { n, k1, k2, weights })
    }

    pub fn n_subjects(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> (usize, usize) {
        (self.k1, self.k2)
    }

    #[inline]
    pub fn get(&self, i: usize, h1: usize, h2: usize) -> f64 {
        self.weights[i * self.k1 * self.k2 + h1 * self.k2 + h2]
    }

    /// Joint posterior of subject `i`, flattened with `h1` major.
    #[inline]
    pub fn subject(&self, i: usize) -> &[f64] {
        let kk = self.k1 * self.k2;
        &self.weights[i * kk..(i + 1) * kk]
    }

    /// Posterior of the ability class, summed over propensity classes.
    pub fn ability_marginal(&self, i: usize) -> Vec<f64> {
        self.subject(i)
            .chunks(self.k2)
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Posterior of the propensity class, summed over ability classes.
    pub fn propensity_marginal(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.k2];
        for row in self.subject(i).chunks(self.k2) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += w;
            }
        }
        out
    }

    /// Maximum a posteriori ability class of every subject.
    pub fn modal_ability_classes(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| {
                let marg = self.ability_marginal(i);
                marg.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (h, &w)| {
                        if w > best.1 {
                            (h, w)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }
}

/// Posterior class probabilities under `params`.
pub fn e_step(params: &Parameters, design: &ItemDesign, data: &Dataset) -> Result<Posteriors> {
    Ok(e_step_with_loglik(params, design, data)?.0)
}

/// E-step that also returns the observed-data log-likelihood it computes
/// as a by-product.
pub fn e_step_with_loglik(
    params: &Parameters,
    design: &ItemDesign,
    data: &Dataset,
) -> Result<(Posteriors, f64)> {
    params.check_shapes(design)?;
    if data.n_items() != params.spec.items || data.n_covariates() != params.spec.covariates {
        return Err(Error::shape("dataset does not match model dimensions"));
    }
    let spec = &params.spec;
    let (k1, k2) = (spec.ability_classes, spec.propensity_classes);
    let kk = k1 * k2;
    let n = data.n_subjects();
    let tables = ComponentTables::new(params, design);
    let mut weights = vec![0.0; n * kk];
    let mut loglik = 0.0;
    let mut buf = vec![0.0; kk];
    for i in 0..n {
        tables.subject_logprobs(data.responses(i), &mut buf);
        let lw = log_joint_weights(params, data.covariates(i))?;
        for (b, w) in buf.iter_mut().zip(&lw) {
            *b += w;
        }
        let lse = logsumexp(&buf);
        if !lse.is_finite() {
            return Err(Error::Numerical(format!(
                "subject {} has non-finite manifest log-probability",
                i + 1
            )));
        }
        loglik += lse;
        for (w, b) in weights[i * kk..(i + 1) * kk].iter_mut().zip(&buf) {
            *w = (b - lse).exp();
        }
    }
    Ok((Posteriors { n, k1, k2, weights }, loglik))
}
