//! Single-step white-box FGSM attack and clean-versus-adversarial metrics.

use crate::error::{Error, Result};
use crate::net::{input_gradient, LossHead, MlpSpec, ParamVector};
use crate::tensor::Tensor;
use crate::trainer::{evaluate, EvalMetrics};

/// Clean/adversarial comparison at one perturbation radius.
#[derive(Debug, Clone)]
pub struct AttackReport {
    pub epsilon: f64,
    pub clean_accuracy: f64,
    pub adversarial_accuracy: f64,
    /// 100 * (clean - adversarial) / clean; 0 when clean accuracy is 0.
    pub percent_drop: f64,
    pub n_examples: usize,
    pub seed: u64,
}

/// `x + epsilon * sign(grad_x CE(softmax(f(x)), y))`, with sign(0) = 0.
/// Inputs are not clipped; the feature space is unbounded.
pub fn fgsm(
    spec: &MlpSpec,
    params: &ParamVector,
    x: &Tensor,
    y_onehot: &Tensor,
    epsilon: f64,
) -> Result<Tensor> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let grad = input_gradient(spec, params, x, &LossHead::CrossEntropySoft(y_onehot))?;
    let mut out = x.clone();
    for (v, &g) in out.data_mut().iter_mut().zip(grad.data()) {
        // signum(0.0) is +1 in IEEE terms, so spell out the zero case
        let sign = if g > 0.0 {
            1.0
        } else if g < 0.0 {
            -1.0
        } else {
            0.0
        };
        *v += epsilon * sign;
    }
    out.debug_assert_finite("fgsm");
    Ok(out)
}

/// Evaluates the same labeled examples clean and under FGSM at `epsilon`
/// (white-box, untargeted, true labels as the attack target).
pub fn attack_eval(
    spec: &MlpSpec,
    params: &ParamVector,
    features: &Tensor,
    labels: &Tensor,
    epsilon: f64,
    seed: u64,
) -> Result<AttackReport> {
    if features.n_rows() == 0 {
        return Err(Error::EmptyInput("attack evaluation set"));
    }
    let clean: EvalMetrics = evaluate(spec, params, features, labels)?;
    let x_adv = fgsm(spec, params, features, labels, epsilon)?;
    let adv = evaluate(spec, params, &x_adv, labels)?;
    let percent_drop = if clean.accuracy > 0.0 {
        100.0 * (clean.accuracy - adv.accuracy) / clean.accuracy
    } else {
        0.0
    };
    Ok(AttackReport {
        epsilon,
        clean_accuracy: clean.accuracy,
        adversarial_accuracy: adv.accuracy,
        percent_drop,
        n_examples: features.n_rows(),
        seed,
    })
}
