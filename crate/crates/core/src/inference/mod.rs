//! Post-fit inference: class alignment, standardization, bootstrap and
//! model comparison.

mod align;
mod bootstrap;
mod compare;
mod select;
mod standardize;

pub use align::{
    align_classes, alignment_cost, permute_classes, permute_logits, Alignment,
    MAX_EXHAUSTIVE_CLASSES,
};
pub use bootstrap::{
    bootstrap, bootstrap_fit, quantile, standardized_quantities, BootstrapEntry, BootstrapReport,
};
pub use compare::{
    ability_side_deltas, compare_mar, likelihood_ratio, lr_test, ComparisonReport, FitSummary,
    ItemDelta, LikelihoodRatio, DEVIANCE_SLACK,
};
pub use select::{is_nested, select_models, SelectionReport, SelectionRow};
pub use standardize::{average_weights, standardize, standardize_report, StandardizedReport};
