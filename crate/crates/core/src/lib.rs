//! Multidimensional latent class IRT models with a non-ignorable missingness
//! mechanism.
//!
//! Abilities `U_1..U_s` and a propensity to respond `V` have discrete
//! distributions whose class weights depend on covariates through
//! multinomial logits. Responses follow a Rasch or 2PL link on the ability
//! measured by each item; response indicators follow a logistic link on the
//! item's ability and on `V`. Estimation is by EM.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod io;
pub mod model;
pub mod numeric;
pub mod simulate;

pub use error::{Error, Result};
