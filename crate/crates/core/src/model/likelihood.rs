//! Conditional and manifest probabilities of responses and response
//! indicators, evaluated in the log domain.

use super::data::{Dataset, ItemDesign, Response};
use super::params::{ItemParams, LatentSystem, Parameters};
use crate::error::{Error, Result};
use crate::numeric::{log1m_logistic, log_logistic, logistic, logsumexp};

fn check_item(items: &ItemParams, design: &ItemDesign, u_row: &[f64], j: usize) -> Result<()> {
    if u_row.len() != design.n_dims() {
        return Err(Error::shape(format!(
            "ability vector has length {}, design has {} dimensions",
            u_row.len(),
            design.n_dims()
        )));
    }
    if j >= items.alpha.len() || j >= design.n_items() {
        return Err(Error::shape(format!("item index {} out of range", j + 1)));
    }
    Ok(())
}

#[inline]
fn response_logit(items: &ItemParams, design: &ItemDesign, u_row: &[f64], j: usize) -> f64 {
    items.alpha[j] * u_row[design.dimension(j)] - items.beta[j]
}

#[inline]
fn answer_logit(items: &ItemParams, design: &ItemDesign, u_row: &[f64], v: f64, j: usize) -> f64 {
    items.gamma1[j] * u_row[design.dimension(j)] + items.gamma2[j] * v - items.delta[j]
}

/// `p_{h j}`: probability of a correct response to item `j` at ability `u_row`.
pub fn response_prob(items: &ItemParams, design: &ItemDesign, u_row: &[f64], j: usize) -> Result<f64> {
    check_item(items, design, u_row, j)?;
    Ok(logistic(response_logit(items, design, u_row, j)))
}

/// `q_{h1 h2 j}`: probability of answering item `j` at ability `u_row` and
/// propensity `v`.
pub fn answer_prob(
    items: &ItemParams,
    design: &ItemDesign,
    u_row: &[f64],
    v: f64,
    j: usize,
) -> Result<f64> {
    check_item(items, design, u_row, j)?;
    if !v.is_finite() {
        return Err(Error::shape("propensity value must be finite"));
    }
    Ok(logistic(answer_logit(items, design, u_row, v, j)))
}

/// `log p_{h1 h2}(y_obs, r)` for one subject and one joint class.
pub fn joint_conditional_logprob(
    params: &Parameters,
    design: &ItemDesign,
    row: &[Response],
    h1: usize,
    h2: usize,
) -> f64 {
    let items = &params.items;
    let u_row = &params.latent.ability_support[h1];
    let v = params.latent.propensity_support[h2];
    let models_r = params.spec.models_missingness();
    let mut total = 0.0;
    for (j, &resp) in row.iter().enumerate() {
        if resp.observed() {
            let z = response_logit(items, design, u_row, j);
            total += if resp.is_correct() {
                log_logistic(z)
            } else {
                log1m_logistic(z)
            };
        }
        if models_r {
            let z = answer_logit(items, design, u_row, v, j);
            total += if resp.observed() {
                log_logistic(z)
            } else {
                log1m_logistic(z)
            };
        }
    }
    total
}

/// Log of the joint class weights `log lambda_{h1}(x) + log pi_{h2}(x)`,
/// flattened with `h1` major.
pub fn log_joint_weights(params: &Parameters, x: &[f64]) -> Result<Vec<f64>> {
    let la = params.latent.log_class_weights(x, LatentSystem::Ability)?;
    let lp = params.latent.log_class_weights(x, LatentSystem::Propensity)?;
    let mut out = Vec::with_capacity(la.len() * lp.len());
    for a in &la {
        for b in &lp {
            out.push(a + b);
        }
    }
    Ok(out)
}

/// `log p(y_obs, r | x)`, the manifest distribution of one subject.
pub fn manifest_logprob(
    params: &Parameters,
    design: &ItemDesign,
    row: &[Response],
    x: &[f64],
) -> Result<f64> {
    if row.len() != params.spec.items {
        return Err(Error::shape(format!(
            "response row has {} items, model has {}",
            row.len(),
            params.spec.items
        )));
    }
    let k2 = params.spec.propensity_classes;
    let mut terms = log_joint_weights(params, x)?;
    for (idx, t) in terms.iter_mut().enumerate() {
        *t += joint_conditional_logprob(params, design, row, idx / k2, idx % k2);
    }
    Ok(logsumexp(&terms))
}

/// Precomputed log-probabilities of every (class, item) cell, laid out with
/// the item index major so that one subject row is a contiguous sweep.
#[derive(Debug, Clone)]
pub struct ComponentTables {
    k1: usize,
    k2: usize,
    m: usize,
    models_r: bool,
    /// `[j * k1 + h1]` -> log p, log (1 - p)
    log_p: Vec<f64>,
    log_1mp: Vec<f64>,
    /// `[j * K + h1 * k2 + h2]` -> log q - log (1 - q)
    log_q_ratio: Vec<f64>,
    /// `[h1 * k2 + h2]` -> sum_j log (1 - q)
    base_absent: Vec<f64>,
}

impl ComponentTables {
    pub fn new(params: &Parameters, design: &ItemDesign) -> Self {
        let spec = &params.spec;
        let (k1, k2, m) = (spec.ability_classes, spec.propensity_classes, spec.items);
        let kk = k1 * k2;
        let items = &params.items;
        let latent = &params.latent;
        let mut log_p = vec![0.0; m * k1];
        let mut log_1mp = vec![0.0; m * k1];
        let mut log_q_ratio = vec![0.0; m * kk];
        let mut base_absent = vec![0.0; kk];
        for j in 0..m {
            for h1 in 0..k1 {
                let z = response_logit(items, design, &latent.ability_support[h1], j);
                log_p[j * k1 + h1] = log_logistic(z);
                log_1mp[j * k1 + h1] = log1m_logistic(z);
                if spec.models_missingness() {
                    for h2 in 0..k2 {
                        let zq = answer_logit(
                            items,
                            design,
                            &latent.ability_support[h1],
                            latent.propensity_support[h2],
                            j,
                        );
                        let l1 = log_logistic(zq);
                        let l0 = log1m_logistic(zq);
                        log_q_ratio[j * kk + h1 * k2 + h2] = l1 - l0;
                        base_absent[h1 * k2 + h2] += l0;
                    }
                }
            }
        }
        ComponentTables {
            k1,
            k2,
            m,
            models_r: spec.models_missingness(),
            log_p,
            log_1mp,
            log_q_ratio,
            base_absent,
        }
    }

    pub fn components(&self) -> usize {
        self.k1 * self.k2
    }

    /// Fills `out[h1 * k2 + h2]` with `log p_{h1 h2}(y_obs, r)`.
    pub fn subject_logprobs(&self, row: &[Response], out: &mut [f64]) {
        let (k1, k2) = (self.k1, self.k2);
        let kk = k1 * k2;
        debug_assert_eq!(row.len(), self.m);
        debug_assert_eq!(out.len(), kk);
        if self.models_r {
            out.copy_from_slice(&self.base_absent);
        } else {
            out.fill(0.0);
        }
        for (j, &resp) in row.iter().enumerate() {
            if !resp.observed() {
                continue;
            }
            let yp = if resp.is_correct() {
                &self.log_p[j * k1..(j + 1) * k1]
            } else {
                &self.log_1mp[j * k1..(j + 1) * k1]
            };
            if self.models_r {
                let qr = &self.log_q_ratio[j * kk..(j + 1) * kk];
                for h1 in 0..k1 {
                    for h2 in 0..k2 {
                        let c = h1 * k2 + h2;
                        out[c] += yp[h1] + qr[c];
                    }
                }
            } else {
                for h1 in 0..k1 {
                    out[h1] += yp[h1];
                }
            }
        }
    }
}

/// Observed-data log-likelihood `sum_i log p(y_i,obs, r_i | x_i)`.
pub fn log_likelihood(params: &Parameters, design: &ItemDesign, data: &Dataset) -> Result<f64> {
    params.check_shapes(design)?;
    if data.n_items() != params.spec.items || data.n_covariates() != params.spec.covariates {
        return Err(Error::shape(format!(
            "dataset has {} items and {} covariates, model expects {} and {}",
            data.n_items(),
            data.n_covariates(),
            params.spec.items,
            params.spec.covariates
        )));
    }
    let tables = ComponentTables::new(params, design);
    let mut buf = vec![0.0; tables.components()];
    let mut total = 0.0;
    for i in 0..data.n_subjects() {
        tables.subject_logprobs(data.responses(i), &mut buf);
        let weights = log_joint_weights(params, data.covariates(i))?;
        for (b, w) in buf.iter_mut().zip(&weights) {
            *b += w;
        }
        total += logsumexp(&buf);
    }
    Ok(total)
}
