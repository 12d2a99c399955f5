use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::scenario::{Missingness, Scenario};
use crate::error::{Error, Result};
use crate::model::{answer_prob, response_prob, Dataset, LatentSystem, Response};

/// A simulated dataset with the latent classes that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSample {
    pub data: Dataset,
    pub ability_class: Vec<usize>,
    /// All zero when the truth has no propensity variable.
    pub propensity_class: Vec<usize>,
}

/// RNG of replicate `index` of a scenario.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_class<R: Rng>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.len() == 1 {
        return Ok(0);
    }
    let dist = WeightedIndex::new(weights).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Draws `n` subjects from `scenario.truth` with the given RNG.
pub fn generate_with_rng<R: Rng>(scenario: &Scenario, n: usize, rng: &mut R) -> Result<SimulatedSample> {
    let truth = &scenario.truth;
    let spec = &truth.spec;
    let (m, c) = (spec.items, spec.covariates);
    let modeled = scenario.missingness != Missingness::None;
    let mut responses = Vec::with_capacity(n * m);
    let mut covariates = Vec::with_capacity(n * c);
    let mut ability_class = Vec::with_capacity(n);
    let mut propensity_class = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..c).map(|_| StandardNormal.sample(rng)).collect();
        let h1 = draw_class(&truth.latent.class_weights(&x, LatentSystem::Ability)?, rng)?;
        let h2 = if modeled {
            draw_class(&truth.latent.class_weights(&x, LatentSystem::Propensity)?, rng)?
        } else {
            0
        };
        let u = &truth.latent.ability_support[h1];
        let v = truth.latent.propensity_support[h2];
        for j in 0..m {
            let answered = if modeled {
                rng.random_bool(answer_prob(&truth.items, &scenario.design, u, v, j)?)
            } else {
                true
            };
            let correct = rng.random_bool(response_prob(&truth.items, &scenario.design, u, j)?);
            responses.push(if answered {
                Response::from_bool(correct)
            } else {
                Response::Missing
            });
        }
        covariates.extend(x);
        ability_class.push(h1);
        propensity_class.push(h2);
    }
    Ok(SimulatedSample {
        data: Dataset::new(m, c, responses, covariates)?,
        ability_class,
        propensity_class,
    })
}

/// Replicate `index` of the scenario.
pub fn generate_replicate(scenario: &Scenario, index: u64) -> Result<SimulatedSample> {
    let mut rng = replicate_rng(scenario.seed, index);
    generate_with_rng(scenario, scenario.n, &mut rng)
}

/// The scenario's primary dataset (replicate 0).
pub fn generate(scenario: &Scenario) -> Result<SimulatedSample> {
    generate_replicate(scenario, 0)
}
