use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::fit_weighted_multinomial;
use crate::model::{
    class_weights, ConstraintMask, Dataset, ItemDesign, ItemParams, LatentStructure,
    MissingMode, ModelSpec, Parametrization, Parameters, Response,
};
use crate::numeric::{linspace, NewtonOptions};

/// Fixed seed of the covariate sample used to solve for the true
/// intercepts, so every scenario shares the same truth.
pub const INTERCEPT_SEED: u64 = 0x1c_1a55;
pub const INTERCEPT_DRAWS: usize = 200_000;
pub const TARGET_WEIGHTS: [f64; 3] = [0.25, 0.5, 0.25];

/// Which latent variables drive the response indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Missingness {
    /// Every response observed.
    None,
    /// Indicators depend on the propensity only.
    VOnly,
    /// Indicators depend on the abilities and the propensity.
    UAndV,
}

impl fmt::Display for Missingness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Missingness::None => "none",
            Missingness::VOnly => "v-only",
            Missingness::UAndV => "u-and-v",
        })
    }
}

impl FromStr for Missingness {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Missingness::None),
            "v-only" | "v" => Ok(Missingness::VOnly),
            "u-and-v" | "uv" => Ok(Missingness::UAndV),
            _ => Err(Error::config(format!(
                "unknown missingness `{s}` (expected none, v-only or u-and-v)"
            ))),
        }
    }
}

impl Missingness {
    /// Missingness mode of the model that generated (and is fitted to) the data.
    pub fn fit_mode(self) -> MissingMode {
        match self {
            Missingness::None => MissingMode::MarIgnore,
            _ => MissingMode::MnarFull,
        }
    }
}

/// A simulation design with its exact ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// 1..=12 for the standard grid, `None` for custom designs.
    pub id: Option<u8>,
    pub n: usize,
    pub m: usize,
    pub missingness: Missingness,
    pub design: ItemDesign,
    pub truth: Parameters,
    pub seed: u64,
}

/// `(n, m, missingness)` of the standard scenarios.
pub fn scenario_grid(id: u8) -> Result<(usize, usize, Missingness)> {
    if !(1..=12).contains(&id) {
        return Err(Error::config(format!("scenario id must be in 1..=12, got {id}")));
    }
    let k = (id - 1) as usize;
    let missingness = [Missingness::None, Missingness::VOnly, Missingness::UAndV][k % 3];
    let n = if (k / 3) % 2 == 0 { 1000 } else { 2000 };
    let m = if k < 6 { 20 } else { 40 };
    Ok((n, m, missingness))
}

/// Standard scenario `id` (1..=12).
pub fn build_scenario(id: u8, seed: u64) -> Result<Scenario> {
    let (n, m, missingness) = scenario_grid(id)?;
    let mut s = Scenario::custom(n, m, missingness, seed)?;
    s.id = Some(id);
    Ok(s)
}

/// Intercepts of a reference-class multinomial logit whose average weights
/// over standard-normal covariates equal `targets`, on a fixed Monte Carlo
/// sample of `draws` covariate vectors. `slopes` is `(k - 1) x c`.
pub fn solve_intercepts(slopes: &[Vec<f64>], targets: &[f64], draws: usize, seed: u64) -> Result<Vec<f64>> {
    let k = targets.len();
    if k < 2 || slopes.len() != k - 1 {
        return Err(Error::shape(format!(
            "{} slope rows for {} target weights",
            slopes.len(),
            k
        )));
    }
    if targets.iter().any(|&t| !(t > 0.0)) || (targets.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config("target weights must be positive and sum to 1"));
    }
    let c = slopes[0].len();
    if slopes.iter().any(|r| r.len() != c) || draws == 0 {
        return Err(Error::shape("ragged slope matrix or empty Monte Carlo sample"));
    }
    let x = covariate_draws(draws, c, seed);
    let t: Vec<f64> = (0..draws).flat_map(|_| targets.iter().copied()).collect();
    // Start from the covariate-free solution log(t_h / t_1).
    let mut coef: Vec<Vec<f64>> = slopes
        .iter()
        .enumerate()
        .map(|(h, row)| {
            let mut full = vec![(targets[h + 1] / targets[0]).ln()];
            full.extend_from_slice(row);
            full
        })
        .collect();
    let opts = NewtonOptions {
        tol: 1e-10,
        max_iter: 100,
        ..NewtonOptions::default()
    };
    let report = fit_weighted_multinomial(&x, draws, c, &t, &mut coef, true, &opts);

    let mut avg = vec![0.0; k];
    for i in 0..draws {
        let w = class_weights(&coef, &x[i * c..(i + 1) * c])?;
        for (a, b) in avg.iter_mut().zip(&w) {
            *a += b / draws as f64;
        }
    }
    let residual = avg
        .iter()
        .zip(targets)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if !(residual < 1e-4) {
        return Err(Error::RootFinding {
            residual,
            iterations: report.iterations,
        });
    }
    Ok(coef.into_iter().map(|row| row[0]).collect())
}

fn covariate_draws(draws: usize, c: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..draws * c).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// The covariate sample on which the true intercepts were solved, as a
/// dataset with one unanswered item. The truth is standardized with respect
/// to it, so estimates standardized on it are on the scale of the truth.
pub fn reference_covariates() -> &'static Dataset {
    static SAMPLE: OnceLock<Dataset> = OnceLock::new();
    SAMPLE.get_or_init(|| {
        let c = 2;
        let x = covariate_draws(INTERCEPT_DRAWS, c, INTERCEPT_SEED);
        Dataset::new(1, c, vec![Response::Missing; INTERCEPT_DRAWS], x)
            .expect("reference covariates are finite and well shaped")
    })
}

/// True weight-regression coefficients: covariate 1 has no effect, covariate
/// 2 raises the logit of class 2 by one unit.
pub fn true_coefficients() -> Result<Vec<Vec<f64>>> {
    static CACHE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    if let Some(c) = CACHE.get() {
        return Ok(c.clone());
    }
    let slopes = vec![vec![0.0, 1.0], vec![0.0, 0.0]];
    let intercepts = solve_intercepts(&slopes, &TARGET_WEIGHTS, INTERCEPT_DRAWS, INTERCEPT_SEED)?;
    let coef: Vec<Vec<f64>> = intercepts
        .iter()
        .zip(&slopes)
        .map(|(b0, s)| {
            let mut row = vec![*b0];
            row.extend_from_slice(s);
            row
        })
        .collect();
    Ok(CACHE.get_or_init(|| coef).clone())
}

impl Scenario {
    /// A design with the standard truth at arbitrary `n` and even `m >= 4`.
    pub fn custom(n: usize, m: usize, missingness: Missingness, seed: u64) -> Result<Scenario> {
        if m < 4 || m % 2 != 0 {
            return Err(Error::config(format!("item count must be even and at least 4, got {m}")));
        }
        let half = m / 2;
        let design = ItemDesign::contiguous(&[half, half])?;
        let spec = ModelSpec::new(
            2,
            3,
            3,
            m,
            2,
            Parametrization::TwoPl,
            missingness.fit_mode(),
        )?;
        let coef = true_coefficients()?;
        let r2 = std::f64::consts::SQRT_2;
        let s76 = 0.76f64.sqrt();
        let u1 = [-r2, 0.0, r2];
        let u2 = [-1.0 / s76, -0.2 / s76, 1.4 / s76];

        let beta_half = linspace(-2.0, 2.0, half);
        let mut alpha = linspace(1.0, 2.0, half);
        alpha.extend(linspace(2.0, 1.0, half));
        let mut beta = beta_half.clone();
        beta.extend(beta_half);
        let modeled = missingness != Missingness::None;
        let gamma1 = if missingness == Missingness::UAndV { 1.0 } else { 0.0 };
        let items = ItemParams {
            alpha,
            beta,
            gamma1: vec![if modeled { gamma1 } else { 0.0 }; m],
            gamma2: vec![if modeled { 1.0 } else { 0.0 }; m],
            delta: vec![if modeled { -1.0 } else { 0.0 }; m],
            mask: ConstraintMask::unconstrained(m),
        };
        let latent = LatentStructure {
            ability_support: (0..3).map(|h| vec![u1[h], u2[h]]).collect(),
            propensity_support: if modeled { vec![-r2, 0.0, r2] } else { vec![0.0] },
            ability_coef: coef.clone(),
            propensity_coef: if modeled { coef } else { Vec::new() },
        };
        let truth = Parameters { spec, items, latent };
        truth.check_shapes(&design)?;
        Ok(Scenario {
            id: None,
            n,
            m,
            missingness,
            design,
            truth,
            seed,
        })
    }

    /// Model fitted in the recovery study: 2PL, three classes each, with
    /// the missingness mode matching the generating mechanism.
    pub fn fit_spec(&self) -> ModelSpec {
        self.truth.spec
    }

    pub fn label(&self) -> String {
        match self.id {
            Some(id) => format!("scenario {id}"),
            None => format!("custom (n={}, m={}, {})", self.n, self.m, self.missingness),
        }
    }
}
