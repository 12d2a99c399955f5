//! Domain types and the probability kernels of the latent class IRT model.

mod data;
mod likelihood;
mod params;
mod spec;

pub use data::{Dataset, ItemDesign, Response};
pub use likelihood::{
    answer_prob, joint_conditional_logprob, log_joint_weights, log_likelihood, manifest_logprob,
    response_prob, ComponentTables,
};
pub use params::{
    class_logits, class_weights, ConstraintMask, ItemFamily, ItemParams, LatentStructure,
    LatentSystem, ParamKey, Parameters, Slot,
};
pub use spec::{count_parameters, MissingMode, ModelSpec, Parametrization};
