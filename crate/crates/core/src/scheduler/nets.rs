use crate::nn::{self, adam_step, AdamState, MlpSpec, ParamVector};
use crate::{Error, Result};

/// `a ++ b` without touching either.
pub(crate) fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

pub(crate) fn scalar(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<f64> {
    Ok(nn::forward(spec, params, input)?[0])
}

/// Mean squared error of a scalar network against fixed targets; the gradient
/// is applied with one Adam step. Returns the loss before the step.
pub(crate) fn regression_step(
    spec: &MlpSpec,
    params: &mut ParamVector,
    opt: &mut AdamState,
    inputs: &[Vec<f64>],
    targets: &[f64],
) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::Empty("minibatch".into()));
    }
    let m = inputs.len() as f64;
    let mut grad = ParamVector::zeros(params.len());
    let mut loss = 0.0;
    for (x, y) in inputs.iter().zip(targets) {
        let trace = nn::forward_trace(spec, params.as_slice(), x)?;
        let err = trace.output()[0] - y;
        loss += err * err / m;
        nn::backward_into(spec, params.as_slice(), &trace, &[2.0 * err / m], grad.as_mut_slice())?;
    }
    adam_step(params, grad.as_slice(), opt)?;
    Ok(loss)
}

/// Objective `J = mean_i Q(prefix_i ++ pi(actor_input_i))` and the gradient of
/// `-J` with respect to the actor parameters, chained through the critic's
/// continuous-action inputs (the trailing entries of its input).
pub(crate) fn policy_gradient(
    actor_spec: &MlpSpec,
    actor: &ParamVector,
    critic_spec: &MlpSpec,
    critic: &ParamVector,
    actor_inputs: &[Vec<f64>],
    critic_prefixes: &[Vec<f64>],
) -> Result<(f64, ParamVector)> {
    if actor_inputs.is_empty() {
        return Err(Error::Empty("minibatch".into()));
    }
    let m = actor_inputs.len() as f64;
    let cont = actor_spec.output_width();
    let mut grad = ParamVector::zeros(actor.len());
    let mut objective = 0.0;
    for (xa, prefix) in actor_inputs.iter().zip(critic_prefixes) {
        let ta = nn::forward_trace(actor_spec, actor.as_slice(), xa)?;
        let xc = concat(prefix, ta.output());
        let tc = nn::forward_trace(critic_spec, critic.as_slice(), &xc)?;
        objective += tc.output()[0] / m;
        let dq_dx = nn::backward_input(critic_spec, critic.as_slice(), &tc, &[-1.0 / m])?;
        nn::backward_into(actor_spec, actor.as_slice(), &ta, &dq_dx[dq_dx.len() - cont..], grad.as_mut_slice())?;
    }
    Ok((objective, grad))
}
