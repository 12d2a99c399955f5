use itertools::Itertools;
use log::warn;

use crate::error::{Error, Result};
use crate::model::Parameters;

/// Largest class count searched exhaustively.
pub const MAX_EXHAUSTIVE_CLASSES: usize = 5;

/// A relabeled candidate. `ability_perm[h]` is the candidate class that
/// became class `h`.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub params: Parameters,
    pub ability_perm: Vec<usize>,
    pub propensity_perm: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Reorders the coefficient rows of a reference-class logit system so that
/// new class `h` is old class `perm[h]`, re-expressing every logit against
/// the new first class.
pub fn permute_logits(coef: &[Vec<f64>], perm: &[usize]) -> Vec<Vec<f64>> {
    if coef.is_empty() {
        return Vec::new();
    }
    let width = coef[0].len();
    let full = |h: usize| -> Vec<f64> {
        if h == 0 {
            vec![0.0; width]
        } else {
            coef[h - 1].clone()
        }
    };
    let base = full(perm[0]);
    perm[1..]
        .iter()
        .map(|&h| full(h).iter().zip(&base).map(|(a, b)| a - b).collect())
        .collect()
}

/// Applies class permutations to support points and weight regressions.
pub fn permute_classes(
    params: &Parameters,
    ability_perm: &[usize],
    propensity_perm: &[usize],
) -> Parameters {
    let mut out = params.clone();
    let lat = &params.latent;
    out.latent.ability_support = ability_perm
        .iter()
        .map(|&h| lat.ability_support[h].clone())
        .collect();
    out.latent.ability_coef = permute_logits(&lat.ability_coef, ability_perm);
    if !propensity_perm.is_empty() {
        out.latent.propensity_support = propensity_perm
            .iter()
            .map(|&h| lat.propensity_support[h])
            .collect();
        out.latent.propensity_coef = permute_logits(&lat.propensity_coef, propensity_perm);
    }
    out
}

fn ability_cost(reference: &Parameters, candidate: &Parameters, perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(h, &g)| {
            reference.latent.ability_support[h]
                .iter()
                .zip(&candidate.latent.ability_support[g])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

fn propensity_cost(reference: &Parameters, candidate: &Parameters, perm: &[usize]) -> f64 {
    perm.iter()
        .enumerate()
        .map(|(h, &g)| {
            let d = reference.latent.propensity_support[h] - candidate.latent.propensity_support[g];
            d * d
        })
        .sum()
}

/// Squared support distance between `reference` and `candidate` relabeled
/// by the given permutations.
pub fn alignment_cost(
    reference: &Parameters,
    candidate: &Parameters,
    ability_perm: &[usize],
    propensity_perm: &[usize],
) -> f64 {
    ability_cost(reference, candidate, ability_perm)
        + propensity_cost(reference, candidate, propensity_perm)
}

fn best_permutation(k: usize, cost: impl Fn(&[usize]) -> f64) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..k).permutations(k) {
        let c = cost(&perm);
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, perm));
        }
    }
    best.map(|(_, p)| p).unwrap_or_default()
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    idx
}

/// Relabels the classes of `candidate` to best match `reference`.
///
/// The joint cost separates into an ability and a propensity part, so the
/// two permutations are searched independently; among equal costs the
/// first permutation in lexicographic order (identity first) wins. Above
/// [`MAX_EXHAUSTIVE_CLASSES`] classes, both solutions are ordered by their
/// first-dimension support instead.
pub fn align_classes(reference: &Parameters, candidate: &Parameters) -> Result<Alignment> {
    let (r, c) = (&reference.spec, &candidate.spec);
    if r.dims != c.dims
        || r.ability_classes != c.ability_classes
        || r.propensity_classes != c.propensity_classes
        || r.covariates != c.covariates
        || candidate.latent.ability_support.len() != r.ability_classes
    {
        return Err(Error::shape(format!(
            "cannot align {} to {}",
            c.label(),
            r.label()
        )));
    }
    let k1 = r.ability_classes;
    let k2 = if r.has_propensity() && c.has_propensity() {
        r.propensity_classes
    } else {
        0
    };
    let mut warnings = Vec::new();
    let (ability_perm, propensity_perm) = if k1.max(k2) > MAX_EXHAUSTIVE_CLASSES {
        let msg = format!(
            "{} classes exceed the exhaustive limit of {MAX_EXHAUSTIVE_CLASSES}; classes ordered by support",
            k1.max(k2)
        );
        warn!("{msg}");
        warnings.push(msg);
        let first: Vec<f64> = candidate.latent.ability_support.iter().map(|u| u[0]).collect();
        let ref_first: Vec<f64> = reference.latent.ability_support.iter().map(|u| u[0]).collect();
        // Candidate class with the i-th smallest support goes where the
        // reference has its i-th smallest support.
        let (cand_order, ref_order) = (sorted_order(&first), sorted_order(&ref_first));
        let mut ap = vec![0; k1];
        for (rank, &h) in ref_order.iter().enumerate() {
            ap[h] = cand_order[rank];
        }
        let mut pp = vec![0; k2];
        if k2 > 0 {
            let cand_order = sorted_order(&candidate.latent.propensity_support);
            let ref_order = sorted_order(&reference.latent.propensity_support);
            for (rank, &h) in ref_order.iter().enumerate() {
                pp[h] = cand_order[rank];
            }
        }
        (ap, pp)
    } else {
        (
            best_permutation(k1, |p| ability_cost(reference, candidate, p)),
            best_permutation(k2, |p| propensity_cost(reference, candidate, p)),
        )
    };
    Ok(Alignment {
        params: permute_classes(candidate, &ability_perm, &propensity_perm),
        ability_perm,
        propensity_perm,
        warnings,
    })
}
