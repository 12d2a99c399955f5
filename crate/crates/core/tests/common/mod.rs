#![allow(dead_code)]

use lcirt::estimator::EmConfig;
use lcirt::model::{
    log_likelihood, Dataset, ItemDesign, MissingMode, ModelSpec, Parameters, Parametrization, Response, Slot,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Plain softmax with class 1 as reference, written independently of the
/// library.
pub fn weights(coef: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut e = vec![1.0];
    for row in coef {
        let mut z = row[0];
        for (b, xv) in row[1..].iter().zip(x) {
            z += b * xv;
        }
        e.push(z.exp());
    }
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Linear-domain manifest probability of one subject.
pub fn brute_subject(p: &Parameters, design: &ItemDesign, row: &[Response], x: &[f64]) -> f64 {
    let lam = weights(&p.latent.ability_coef, x);
    let pi = weights(&p.latent.propensity_coef, x);
    let it = &p.items;
    let mut total = 0.0;
    for (h1, l) in lam.iter().enumerate() {
        for (h2, q) in pi.iter().enumerate() {
            let mut prod = l * q;
            for (j, r) in row.iter().enumerate() {
                let u = p.latent.ability_support[h1][design.dimension(j)];
                let py = sigmoid(it.alpha[j] * u - it.beta[j]);
                match r {
                    Response::Correct => prod *= py,
                    Response::Incorrect => prod *= 1.0 - py,
                    Response::Missing => {}
                }
                if p.spec.missing_mode != MissingMode::MarIgnore {
                    let v = p.latent.propensity_support[h2];
                    let pr = sigmoid(it.gamma1[j] * u + it.gamma2[j] * v - it.delta[j]);
                    prod *= if *r == Response::Missing { 1.0 - pr } else { pr };
                }
            }
            total += prod;
        }
    }
    total
}

pub fn brute_loglik(p: &Parameters, design: &ItemDesign, data: &Dataset) -> f64 {
    (0..data.n_subjects())
        .map(|i| brute_subject(p, design, data.responses(i), data.covariates(i)).ln())
        .sum()
}

/// Free entries drawn uniformly in moderate ranges; fixed entries keep their
/// mask values.
pub fn random_params<R: Rng>(spec: &ModelSpec, design: &ItemDesign, rng: &mut R) -> Parameters {
    let mut p = Parameters::zeros(spec, design).unwrap();
    let m = spec.items;
    let draw = |rng: &mut R, slot: Slot, lo: f64, hi: f64| match slot {
        Slot::Free => rng.random_range(lo..hi),
        Slot::Fixed(v) => v,
    };
    for j in 0..m {
        let mask = p.items.mask.clone();
        p.items.alpha[j] = draw(rng, mask.alpha[j], 0.5, 2.0);
        p.items.beta[j] = draw(rng, mask.beta[j], -1.5, 1.5);
        p.items.gamma1[j] = draw(rng, mask.gamma1[j], -1.0, 1.0);
        p.items.gamma2[j] = draw(rng, mask.gamma2[j], 0.5, 1.5);
        p.items.delta[j] = draw(rng, mask.delta[j], -1.5, 0.5);
    }
    for row in p.latent.ability_support.iter_mut() {
        for u in row.iter_mut() {
            *u = rng.random_range(-2.0..2.0);
        }
    }
    if spec.propensity_classes > 1 {
        for v in p.latent.propensity_support.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
    }
    for row in p
        .latent
        .ability_coef
        .iter_mut()
        .chain(p.latent.propensity_coef.iter_mut())
    {
        for c in row.iter_mut() {
            *c = rng.random_range(-1.0..1.0);
        }
    }
    p
}

/// Draws `n` subjects from `p` with standard-normal-ish covariates.
pub fn sample_from<R: Rng>(p: &Parameters, design: &ItemDesign, n: usize, rng: &mut R) -> Dataset {
    let spec = &p.spec;
    let (m, c) = (spec.items, spec.covariates);
    let mut responses = Vec::with_capacity(n * m);
    let mut xs = Vec::with_capacity(n * c);
    for _ in 0..n {
        let x: Vec<f64> = (0..c).map(|_| rng.random_range(-1.5..1.5)).collect();
        let pick = |w: &[f64], rng: &mut R| {
            let r: f64 = rng.random();
            let mut acc = 0.0;
            for (h, wh) in w.iter().enumerate() {
                acc += wh;
                if r < acc {
                    return h;
                }
            }
            w.len() - 1
        };
        let h1 = pick(&weights(&p.latent.ability_coef, &x), rng);
        let h2 = pick(&weights(&p.latent.propensity_coef, &x), rng);
        for j in 0..m {
            let u = p.latent.ability_support[h1][design.dimension(j)];
            let answered = if spec.missing_mode == MissingMode::MarIgnore {
                true
            } else {
                let v = p.latent.propensity_support[h2];
                let it = &p.items;
                rng.random_bool(sigmoid(it.gamma1[j] * u + it.gamma2[j] * v - it.delta[j]))
            };
            let correct = rng.random_bool(sigmoid(p.items.alpha[j] * u - p.items.beta[j]));
            responses.push(if !answered {
                Response::Missing
            } else {
                Response::from_bool(correct)
            });
        }
        xs.extend(x);
    }
    Dataset::new(m, c, responses, xs).unwrap()
}

/// Responses and covariates drawn without any model structure.
pub fn noise_data<R: Rng>(n: usize, m: usize, c: usize, missing: f64, rng: &mut R) -> Dataset {
    let responses = (0..n * m)
        .map(|_| {
            if rng.random_bool(missing) {
                Response::Missing
            } else {
                Response::from_bool(rng.random_bool(0.5))
            }
        })
        .collect();
    let xs = (0..n * c).map(|_| rng.random_range(-1.0..1.0)).collect();
    Dataset::new(m, c, responses, xs).unwrap()
}

pub fn spec(
    dims: usize,
    k1: usize,
    k2: usize,
    m: usize,
    c: usize,
    par: Parametrization,
    mode: MissingMode,
) -> ModelSpec {
    ModelSpec::new(dims, k1, k2, m, c, par, mode).unwrap()
}

/// Two dimensions with the first half of the items on the first.
pub fn halves(m: usize) -> ItemDesign {
    ItemDesign::contiguous(&[m / 2, m - m / 2]).unwrap()
}

pub fn small_truth(mode: MissingMode, par: Parametrization, seed: u64) -> (Parameters, ItemDesign) {
    let design = ItemDesign::contiguous(&[4]).unwrap();
    let s = spec(1, 2, 2, 4, 1, par, mode);
    let mut p = random_params(&s, &design, &mut rng(seed));
    // Well separated classes keep the small fits away from flat ridges.
    p.latent.ability_support = vec![vec![-1.5], vec![1.5]];
    if s.has_propensity() {
        p.latent.propensity_support = vec![-1.0, 1.5];
    }
    (p, design)
}

pub fn observed_loglik_gradient(p: &Parameters, design: &ItemDesign, data: &Dataset) -> Vec<f64> {
    let x0 = p.free_values();
    let mut q = p.clone();
    (0..x0.len())
        .map(|i| {
            let h = 1e-5 * (1.0 + x0[i].abs());
            let mut x = x0.clone();
            x[i] = x0[i] + h;
            q.set_free_values(&x).unwrap();
            let up = log_likelihood(&q, design, data).unwrap();
            x[i] = x0[i] - h;
            q.set_free_values(&x).unwrap();
            let down = log_likelihood(&q, design, data).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn assert_monotone(trace: &[f64]) {
    for w in trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-10, "loglik decreased: {} -> {}", w[0], w[1]);
    }
}

/// Tolerances tight enough that EM sits on the stationary point; the
/// default rules may stop earlier on slowly converging fits.
pub fn tight() -> EmConfig {
    EmConfig {
        rel_tol_loglik: 1e-13,
        abs_tol_param: 1e-10,
        max_iter: 100_000,
        ..EmConfig::default()
    }
}
