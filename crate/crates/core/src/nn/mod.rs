//! Small dense-network core shared by the detector and the scheduler.
//!
//! Parameters live in one flat [`ParamVector`]. For layer `l` with `in` inputs
//! and `out` outputs the layout is the `in x out` weight matrix stored
//! input-major (`w[i * out + o]`) followed by the `out` biases.

mod adam;
mod mlp;
mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{
    backward_input, backward_into, forward, forward_trace, gp_param_grad, gp_penalty_into, grad_input, grad_params, init_params,
    Activation, MlpSpec, Trace,
};
pub use params::ParamVector;
