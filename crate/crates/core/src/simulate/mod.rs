//! Simulation scenarios with known truth and the parameter-recovery study.

mod generate;
mod recovery;
mod scenario;

pub use generate::{generate, generate_replicate, generate_with_rng, replicate_rng, SimulatedSample};
pub use recovery::{
    comparable, recovery_study, recovery_study_with, FamilyRow, FitOutcome, RecoveryCell,
    RecoveryReport,
};
pub use scenario::{
    build_scenario, reference_covariates, scenario_grid, solve_intercepts, true_coefficients, Missingness, Scenario,
    INTERCEPT_DRAWS, INTERCEPT_SEED, TARGET_WEIGHTS,
};
