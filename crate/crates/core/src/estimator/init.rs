use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{Dataset, ItemDesign, ModelSpec, Parameters};

/// Starting-value strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Deterministic,
    /// Deterministic values plus uniform(-0.5, 0.5) noise on every free
    /// entry, drawn from ChaCha stream `stream` of `seed`.
    Random { seed: u64, stream: u64 },
}

#[derive(Debug, Clone)]
pub struct Initialization {
    pub params: Parameters,
    pub warnings: Vec<String>,
}

/// `k` equally spaced, centred points with unit variance under uniform
/// weights (`{0}` for a single class).
pub fn unit_variance_grid(k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![0.0];
    }
    let raw: Vec<f64> = (0..k).map(|i| i as f64 - (k - 1) as f64 / 2.0).collect();
    let var = raw.iter().map(|v| v * v).sum::<f64>() / k as f64;
    let scale = var.sqrt();
    raw.into_iter().map(|v| v / scale).collect()
}

fn neg_logit(p: f64) -> f64 {
    let p = p.clamp(0.05, 0.95);
    -(p / (1.0 - p)).ln()
}

pub fn initialize(
    spec: &ModelSpec,
    design: &ItemDesign,
    data: &Dataset,
    mode: InitMode,
) -> Result<Initialization> {
    let mut params = Parameters::zeros(spec, design)?;
    let mut warnings = Vec::new();

    let grid_u = unit_variance_grid(spec.ability_classes);
    for (h, row) in params.latent.ability_support.iter_mut().enumerate() {
        row.fill(grid_u[h]);
    }
    params.latent.propensity_support = if spec.has_propensity() {
        unit_variance_grid(spec.propensity_classes)
    } else {
        vec![0.0; spec.propensity_classes]
    };

    for j in 0..spec.items {
        let (correct_rate, response_rate) = data.item_rates(j);
        match correct_rate {
            Some(p) => params.items.beta[j] = neg_logit(p),
            None => {
                params.items.beta[j] = 0.0;
                warnings.push(format!(
                    "item {} has no observed responses; difficulty initialised at 0",
                    j + 1
                ));
            }
        }
        if spec.models_missingness() {
            params.items.delta[j] = neg_logit(response_rate);
            params.items.gamma2[j] = if spec.has_propensity() { 1.0 } else { 0.0 };
            params.items.gamma1[j] = 1.0;
        }
        params.items.alpha[j] = 1.0;
    }
    params.items.apply_mask();

    if let InitMode::Random { seed, stream } = mode {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        for key in params.free_keys() {
            let noise: f64 = rng.random_range(-0.5..0.5);
            let value = params.get(key) + noise;
            params.set(key, value);
        }
    }
    debug_assert!(params.respects_mask());
    Ok(Initialization { params, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MissingMode, Parametrization, Response};

    fn balanced_data() -> (ModelSpec, ItemDesign, Dataset) {
        let m = 4;
        let mut responses = Vec::new();
        for i in 0..8 {
            for j in 0..m {
                responses.push(Response::from_bool((i + j) % 2 == 0));
            }
        }
        let data = Dataset::new(m, 0, responses, vec![]).unwrap();
        let design = ItemDesign::contiguous(&[2, 2]).unwrap();
        let spec =
            ModelSpec::new(2, 3, 2, m, 0, Parametrization::TwoPl, MissingMode::MnarFull).unwrap();
        (spec, design, data)
    }

    #[test]
    fn half_correct_gives_zero_difficulty() {
        let (spec, design, data) = balanced_data();
        let init = initialize(&spec, &design, &data, InitMode::Deterministic).unwrap();
        assert!(init.params.items.beta.iter().all(|&b| b == 0.0));
        assert!(init.warnings.is_empty());
    }

    #[test]
    fn three_class_grid_has_unit_variance() {
        let g = unit_variance_grid(3);
        assert!((g[2] - 1.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(g[1], 0.0);
        assert!((g[0] + g[2]).abs() < 1e-15);
        let var: f64 = g.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-15);
        let (spec, design, data) = balanced_data();
        let init = initialize(&spec, &design, &data, InitMode::Deterministic).unwrap();
        assert_eq!(init.params.latent.ability_support[2], vec![g[2], g[2]]);
    }

    #[test]
    fn random_start_is_reproducible() {
        let (spec, design, data) = balanced_data();
        let a = initialize(&spec, &design, &data, InitMode::Random { seed: 7, stream: 1 }).unwrap();
        let b = initialize(&spec, &design, &data, InitMode::Random { seed: 7, stream: 1 }).unwrap();
        let c = initialize(&spec, &design, &data, InitMode::Random { seed: 7, stream: 2 }).unwrap();
        assert_eq!(a.params, b.params);
        assert_ne!(a.params, c.params);
        assert!(a.params.respects_mask());
    }

    #[test]
    fn unanswered_item_warns() {
        let responses = vec![
            Response::Correct,
            Response::Missing,
            Response::Incorrect,
            Response::Missing,
        ];
        let data = Dataset::new(2, 0, responses, vec![]).unwrap();
        let design = ItemDesign::contiguous(&[2]).unwrap();
        let spec =
            ModelSpec::new(1, 2, 2, 2, 0, Parametrization::TwoPl, MissingMode::MnarFull).unwrap();
        let init = initialize(&spec, &design, &data, InitMode::Deterministic).unwrap();
        assert_eq!(init.params.items.beta[1], 0.0);
        assert_eq!(init.warnings.len(), 1);
    }
}
