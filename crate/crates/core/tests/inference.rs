mod common;

use common::*;
use itertools::Itertools;
use lcirt::estimator::{fit, EmConfig};
use lcirt::inference::*;
use lcirt::model::*;
use proptest::prelude::*;

fn three_class(seed: u64) -> (Parameters, ItemDesign) {
    let design = halves(4);
    let s = spec(2, 3, 3, 4, 1, Parametrization::TwoPl, MissingMode::MnarFull);
    (random_params(&s, &design, &mut rng(seed)), design)
}

fn patterns(m: usize) -> impl Iterator<Item = Vec<Response>> {
    (0..m)
        .map(|_| [Response::Correct, Response::Incorrect, Response::Missing])
        .multi_cartesian_product()
}

#[test]
fn swapped_classes_align_back_exactly() {
    let (p, _) = three_class(1);
    let swapped = permute_classes(&p, &[2, 0, 1], &[1, 2, 0]);
    let a = align_classes(&p, &swapped).unwrap();
    assert_eq!(a.params.latent.ability_support, p.latent.ability_support);
    assert_eq!(a.params.latent.propensity_support, p.latent.propensity_support);
    for (x, y) in a
        .params
        .latent
        .ability_coef
        .iter()
        .flatten()
        .zip(p.latent.ability_coef.iter().flatten())
    {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn aligning_reference_to_itself_is_identity() {
    let (p, _) = three_class(2);
    let a = align_classes(&p, &p).unwrap();
    assert_eq!(a.ability_perm, vec![0, 1, 2]);
    assert_eq!(a.propensity_perm, vec![0, 1, 2]);
    assert_eq!(a.params, p);
}

#[test]
fn alignment_beats_all_36_joint_permutations() {
    for seed in 0..20 {
        let (reference, _) = three_class(100 + seed);
        let (candidate, _) = three_class(200 + seed);
        let a = align_classes(&reference, &candidate).unwrap();
        let best = alignment_cost(&reference, &candidate, &a.ability_perm, &a.propensity_perm);
        let mut count = 0;
        for ap in (0..3).permutations(3) {
            for pp in (0..3).permutations(3) {
                count += 1;
                assert!(best <= alignment_cost(&reference, &candidate, &ap, &pp) + 1e-12);
            }
        }
        assert_eq!(count, 36);
    }
}

#[test]
fn relabeling_leaves_the_likelihood_unchanged() {
    let (p, design) = three_class(3);
    let data = noise_data(15, 4, 1, 0.2, &mut rng(3));
    let q = permute_classes(&p, &[1, 2, 0], &[2, 1, 0]);
    let a = log_likelihood(&p, &design, &data).unwrap();
    let b = log_likelihood(&q, &design, &data).unwrap();
    assert!((a - b).abs() < 1e-10);
}

#[test]
fn large_class_counts_fall_back_to_sorting() {
    let design = ItemDesign::contiguous(&[4]).unwrap();
    let s = spec(1, 6, 1, 4, 0, Parametrization::TwoPl, MissingMode::MarIgnore);
    let p = random_params(&s, &design, &mut rng(4));
    let shuffled = permute_classes(&p, &[3, 5, 0, 2, 1, 4], &[]);
    let a = align_classes(&p, &shuffled).unwrap();
    assert!(!a.warnings.is_empty());
    assert_eq!(a.params.latent.ability_support, p.latent.ability_support);
}

#[test]
fn standardization_keeps_every_pattern_probability() {
    for seed in 0..5 {
        let (p, design) = three_class(10 + seed);
        let data = noise_data(30, 4, 1, 0.2, &mut rng(seed));
        let report = standardize(&p, &design, &data).unwrap();
        let q = report.to_parameters(&p);
        for x in [[-0.7], [0.0], [1.3]] {
            let mut total = 0.0;
            for row in patterns(4) {
                let a = manifest_logprob(&p, &design, &row, &x).unwrap().exp();
                let b = manifest_logprob(&q, &design, &row, &x).unwrap().exp();
                assert!((a - b).abs() < 1e-12);
                total += a;
            }
            assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn standardized_scale_has_unit_moments() {
    let (p, design) = three_class(21);
    let data = noise_data(50, 4, 1, 0.2, &mut rng(21));
    let r = standardize(&p, &design, &data).unwrap();
    let lam = average_weights(&p, &data, LatentSystem::Ability).unwrap();
    // Independent average of the weights.
    for h in 0..3 {
        let want: f64 = (0..50)
            .map(|i| weights(&p.latent.ability_coef, data.covariates(i))[h])
            .sum::<f64>()
            / 50.0;
        assert!((lam[h] - want).abs() < 1e-12);
    }
    for d in 0..2 {
        let mean: f64 = (0..3).map(|h| lam[h] * r.u_star[h][d]).sum();
        let var: f64 = (0..3).map(|h| lam[h] * r.u_star[h][d].powi(2)).sum();
        assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10);
    }
    let v = r.v_star.as_ref().unwrap();
    let mean: f64 = (0..3).map(|h| r.pi_bar[h] * v[h]).sum();
    let var: f64 = (0..3).map(|h| r.pi_bar[h] * v[h] * v[h]).sum();
    assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10);
}

#[test]
fn standardizing_twice_is_identity() {
    let (p, design) = three_class(22);
    let data = noise_data(40, 4, 1, 0.2, &mut rng(22));
    let once = standardize(&p, &design, &data).unwrap().to_parameters(&p);
    let twice = standardize(&once, &design, &data).unwrap();
    for (a, b) in twice.u_star.iter().flatten().zip(once.latent.ability_support.iter().flatten()) {
        assert!((a - b).abs() < 1e-10);
    }
    for (a, b) in twice.items_star.beta.iter().zip(&once.items.beta) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn hand_computed_three_point_support() {
    let design = ItemDesign::contiguous(&[3]).unwrap();
    let s = spec(1, 3, 1, 3, 0, Parametrization::TwoPl, MissingMode::MarIgnore);
    let mut p = Parameters::zeros(&s, &design).unwrap();
    let g = 2f64.sqrt();
    p.latent.ability_support = vec![vec![-g], vec![0.0], vec![g]];
    p.latent.ability_coef = vec![vec![2f64.ln()], vec![0.0]];
    let data = noise_data(5, 3, 0, 0.0, &mut rng(1));
    let r = standardize(&p, &design, &data).unwrap();
    assert!((r.lambda_bar[0] - 0.25).abs() < 1e-12 && (r.lambda_bar[1] - 0.5).abs() < 1e-12);
    assert!(r.ability_mean[0].abs() < 1e-12 && (r.ability_sd[0] - 1.0).abs() < 1e-12);
    for h in 0..3 {
        assert!((r.u_star[h][0] - p.latent.ability_support[h][0]).abs() < 1e-12);
    }
}

#[test]
fn collapsed_dimension_is_an_error() {
    let (mut p, design) = three_class(23);
    for row in p.latent.ability_support.iter_mut() {
        row[1] = 0.4;
    }
    let data = noise_data(10, 4, 1, 0.2, &mut rng(23));
    let err = standardize(&p, &design, &data).unwrap_err();
    assert!(err.to_string().contains("U2"), "{err}");
}

#[test]
fn published_likelihood_ratios() {
    let m2_m1 = likelihood_ratio(-32974.23, 200, -33528.28, 96).unwrap();
    assert!((m2_m1.deviance - 1108.10).abs() <= 0.02);
    assert_eq!(m2_m1.df, 104);
    let m2_m3 = likelihood_ratio(-32974.23, 200, -33256.2, 164).unwrap();
    assert!((m2_m3.deviance - 563.94).abs() <= 0.02);
    assert_eq!(m2_m3.df, 36);
    assert!(m2_m1.p_value < 1e-100);
}

#[test]
fn deviance_edge_cases() {
    let same = likelihood_ratio(-10.0, 5, -10.0, 3).unwrap();
    assert_eq!(same.deviance, 0.0);
    assert_eq!(same.p_value, 1.0);
    assert!(matches!(
        likelihood_ratio(-11.0, 5, -10.0, 3),
        Err(lcirt::Error::NegativeDeviance { .. })
    ));
    assert!(likelihood_ratio(-10.0, 3, -11.0, 3).is_err());
    // df = 1 chi-square tail at its 95% point.
    let t = likelihood_ratio(-10.0, 2, -10.0 - 3.841458820694124 / 2.0, 1).unwrap();
    assert!((t.p_value - 0.05).abs() < 1e-9);
}

#[test]
fn type_seven_quantiles() {
    let v = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert_eq!(quantile(&v, 0.0), 1.0);
    assert_eq!(quantile(&v, 1.0), 5.0);
    assert_eq!(quantile(&v, 0.5), 3.0);
    assert!((quantile(&v, 0.025) - 1.1).abs() < 1e-12);
    assert!((quantile(&[1.0, 2.0], 0.25) - 1.25).abs() < 1e-12);
}

fn bootstrap_case() -> (ModelSpec, ItemDesign, Dataset) {
    let design = halves(6);
    let s = spec(2, 2, 2, 6, 1, Parametrization::TwoPl, MissingMode::MnarFull);
    let mut truth = random_params(&s, &design, &mut rng(31));
    truth.latent.ability_support = vec![vec![-1.5, -1.2], vec![1.5, 1.2]];
    truth.latent.propensity_support = vec![-1.0, 1.5];
    let data = sample_from(&truth, &design, 400, &mut rng(31));
    (s, design, data)
}

#[test]
fn bootstrap_is_reproducible_and_fixed_entries_have_no_spread() {
    let (s, design, data) = bootstrap_case();
    let cfg = EmConfig::default();
    let (fit_a, a) = bootstrap(&s, &design, &data, &cfg, 12, 5).unwrap();
    let (_, b) = bootstrap(&s, &design, &data, &cfg, 12, 5).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.used + a.non_converged + a.failed, 12);
    assert!(a.used >= 10);
    for e in &a.parameters {
        assert!(e.se >= 0.0 && e.lower <= e.upper, "{}", e.name);
        if e.fixed {
            assert_eq!(e.se, 0.0);
            assert!(!e.significant());
        }
    }
    let alpha1 = a.parameters.iter().find(|e| e.name == "alpha[1]").unwrap();
    assert!(alpha1.fixed && alpha1.estimate == 1.0);
    let corr = a.standardized.iter().find(|e| e.name == "corr[1,2]").unwrap();
    assert!(corr.lower >= -1.0 - 1e-12 && corr.upper <= 1.0 + 1e-12);
    let weights: f64 = a
        .standardized
        .iter()
        .filter(|e| e.name.starts_with("lambda_bar"))
        .map(|e| e.estimate)
        .sum();
    assert!((weights - 1.0).abs() < 1e-12);
    assert!(fit_a.converged);
}

#[test]
fn bootstrap_rejects_too_few_replicates() {
    let (s, design, data) = bootstrap_case();
    assert!(bootstrap(&s, &design, &data, &EmConfig::default(), 1, 5).is_err());
}

#[test]
fn lr_test_on_nested_fits() {
    let (s, design, data) = bootstrap_case();
    let cfg = EmConfig::default();
    let grid = [s.with_parametrization(Parametrization::Rasch), s];
    let (report, fits) = select_models(&grid, &design, &data, &cfg, 1).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.rows.iter().filter(|r| r.best).count(), 1);
    for (row, spec) in report.rows.iter().zip(&grid) {
        assert_eq!(row.npar, count_parameters(spec).unwrap());
    }
    assert_eq!(report.tests.len(), 1);
    let t = &report.tests[0];
    let lr = t.likelihood_ratio.as_ref().unwrap();
    assert!(lr.deviance >= -1e-6);
    assert_eq!(lr.df, count_parameters(&s).unwrap() - count_parameters(&grid[0]).unwrap());
    let (f0, f1) = (fits[0].as_ref().unwrap(), fits[1].as_ref().unwrap());
    assert!(f1.loglik >= f0.loglik - 1e-8);
    let bic = -2.0 * f1.loglik + (data.n_subjects() as f64).ln() * f1.npar as f64;
    assert_eq!(bic, f1.bic);
}

#[test]
fn single_model_grid_is_marked_best() {
    let (s, design, data) = bootstrap_case();
    let (report, _) = select_models(&[s], &design, &data, &EmConfig::default(), 1).unwrap();
    assert!(report.rows[0].best);
    assert!(report.tests.is_empty());
}

#[test]
fn mar_comparison_without_missing_data() {
    let design = halves(6);
    let s = spec(2, 2, 1, 6, 0, Parametrization::TwoPl, MissingMode::MarIgnore);
    let mut truth = random_params(&s, &design, &mut rng(41));
    truth.latent.ability_support = vec![vec![-1.5, -1.2], vec![1.5, 1.2]];
    let data = sample_from(&truth, &design, 800, &mut rng(41));
    let full = s.with_missing_mode(MissingMode::MnarFull).with_classes(2, 2);
    let (report, mnar, mar) = compare_mar(&full, &design, &data, &EmConfig::default()).unwrap();
    assert!(report.likelihood_ratio.is_none());
    assert_eq!(mnar.spec().missing_mode, MissingMode::MnarFull);
    assert_eq!(mar.spec().missing_mode, MissingMode::MarIgnore);
    // No indicator is ever zero, so the response side must agree closely.
    for d in &report.item_deltas {
        assert!(d.alpha.abs() < 0.05 && d.beta.abs() < 0.05, "{d:?}");
    }
}

#[test]
fn refit_preserves_fit_quality_after_standardization() {
    let (s, design, data) = bootstrap_case();
    let f = fit(&s, &design, &data, &EmConfig::default()).unwrap();
    let r = standardize_report(&f, &design, &data).unwrap();
    let q = r.to_parameters(&f.params);
    let l = log_likelihood(&q, &design, &data).unwrap();
    assert!((l - f.loglik).abs() < 1e-8);
}

proptest! {
    #[test]
    fn correlation_matrix_is_valid(seed in any::<u64>()) {
        let design = ItemDesign::contiguous(&[2, 2, 2]).unwrap();
        let s = spec(3, 4, 1, 6, 1, Parametrization::TwoPl, MissingMode::MarIgnore);
        let p = random_params(&s, &design, &mut rng(seed));
        let data = noise_data(20, 6, 1, 0.0, &mut rng(seed ^ 1));
        let r = standardize(&p, &design, &data).unwrap();
        let c = nalgebra::DMatrix::from_fn(3, 3, |i, j| r.corr[i][j]);
        for i in 0..3 {
            prop_assert!((c[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..3 {
                prop_assert!((c[(i, j)] - c[(j, i)]).abs() < 1e-15);
                prop_assert!(c[(i, j)].abs() <= 1.0 + 1e-12);
            }
        }
        let eig = c.symmetric_eigen().eigenvalues;
        prop_assert!(eig.iter().all(|&e| e >= -1e-10));
    }

    #[test]
    fn alignment_is_idempotent(seed_r in any::<u64>(), seed_c in any::<u64>()) {
        let (reference, _) = three_class(seed_r);
        let (candidate, _) = three_class(seed_c);
        let once = align_classes(&reference, &candidate).unwrap().params;
        let again = align_classes(&reference, &once).unwrap();
        prop_assert_eq!(again.ability_perm, vec![0, 1, 2]);
        prop_assert_eq!(again.propensity_perm, vec![0, 1, 2]);
    }

    #[test]
    fn reparametrization_is_pure(seed in any::<u64>(), mode in 0usize..3) {
        let modes = [MissingMode::MarIgnore, MissingMode::MnarNoAbility, MissingMode::MnarFull];
        let design = halves(3);
        let s = spec(2, 3, 2, 3, 1, Parametrization::TwoPl, modes[mode]);
        let p = random_params(&s, &design, &mut rng(seed));
        let data = noise_data(10, 3, 1, 0.2, &mut rng(seed ^ 7));
        let q = standardize(&p, &design, &data).unwrap().to_parameters(&p);
        for row in patterns(3) {
            let a = manifest_logprob(&p, &design, &row, &[0.4]).unwrap().exp();
            let b = manifest_logprob(&q, &design, &row, &[0.4]).unwrap().exp();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
