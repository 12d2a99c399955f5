//! EM estimation.

mod config;
mod em;
mod estep;
mod init;
mod mstep;

pub use config::EmConfig;
pub use em::{fit, fit_from, fit_with_warm_starts, FitResult};
pub use estep::{e_step, e_step_with_loglik, Posteriors};
pub use init::{initialize, unit_variance_grid, InitMode, Initialization};
pub use mstep::{
    expected_complete_loglik, m_step_items_and_support, m_step_weights, ItemStepOutcome,
    WeightUpdate,
};
pub(crate) use mstep::fit_weighted_multinomial;
