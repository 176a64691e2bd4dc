//! Checkable inequalities relating loss, value error and step sizes.

use crate::error::Result;
use crate::features::{FeatureMap, LossModel};
use crate::linalg::Vector;
use crate::mdp::ValueOracle;

/// `2C/(1-γ(1-λ))²`, or `2C/λ²` when `γ = 1`.
pub fn value_error_constant(gamma: f64, lambda: f64, c: f64) -> f64 {
    let denom = if gamma < 1.0 { 1.0 - gamma * (1.0 - lambda) } else { lambda };
    2.0 * c / (denom * denom)
}

/// `2C/(1-γ)²`, which bounds the discounted case without the gap.
pub fn value_error_constant_gapless(gamma: f64, c: f64) -> f64 {
    2.0 * c / ((1.0 - gamma) * (1.0 - gamma))
}

/// `Σ_s μ^π(s)(V^π(s) - V_θ(s))²`; for `γ = 1` the additive constant is
/// removed by `μ^π`-centering and `(r̄^π - r̄_θ)²` is added.
pub fn weighted_value_error(oracle: &ValueOracle, features: &FeatureMap, mu_pi: &Vector, theta: &Vector) -> f64 {
    let mut diff = oracle.values() - features.values(theta);
    match oracle {
        ValueOracle::Discounted { .. } => {}
        ValueOracle::Average { average_reward, .. } => {
            let shift = mu_pi.dot(&diff);
            diff.add_scalar_mut(-shift);
            let r = average_reward - features.average_reward(theta);
            return mu_pi.dot(&diff.component_mul(&diff)) + r * r;
        }
    }
    mu_pi.dot(&diff.component_mul(&diff))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueErrorCheck {
    pub lhs: f64,
    pub loss_gap: f64,
    pub constant: f64,
}

impl ValueErrorCheck {
    pub fn slack(&self) -> f64 {
        self.constant * self.loss_gap - self.lhs
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.slack() >= -tol * (1.0 + self.lhs)
    }
}

pub fn check_value_error(
    model: &LossModel,
    oracle: &ValueOracle,
    features: &FeatureMap,
    mu_pi: &Vector,
    theta: &Vector,
    constant: f64,
) -> Result<ValueErrorCheck> {
    Ok(ValueErrorCheck {
        lhs: weighted_value_error(oracle, features, mu_pi, theta),
        loss_gap: model.loss_gap(theta),
        constant,
    })
}

/// `exp(-½c Σ_{k=t}^{T-1} η_k) η_t` from a table `etas[k-1] = η_k`.
pub fn telescoped_step(etas: &[f64], c: f64, t: usize, t_end: usize) -> f64 {
    let sum: f64 = etas[t - 1..t_end - 1].iter().sum();
    libm::exp(-0.5 * c * sum) * etas[t - 1]
}
