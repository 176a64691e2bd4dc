//! Stochastic update directions for direct-SGD, TD-SGD and TD(0).

use crate::error::{Error, Result};
use crate::estimation::EmpiricalModel;
use crate::features::{ContractionKind, FeatureMap, LossModel};
use crate::linalg::Vector;
use crate::mdp::{Mdp, Policy};
use crate::trajectory::Transition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    DirectSgd,
    TdSgd,
    Td0,
}

impl RuleKind {
    pub const ALL: [RuleKind; 3] = [RuleKind::DirectSgd, RuleKind::TdSgd, RuleKind::Td0];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::DirectSgd => "direct-sgd",
            RuleKind::TdSgd => "td-sgd",
            RuleKind::Td0 => "td0",
        }
    }

    pub fn contraction_kind(self) -> ContractionKind {
        match self {
            RuleKind::DirectSgd | RuleKind::TdSgd => ContractionKind::Sgd,
            RuleKind::Td0 => ContractionKind::Td0,
        }
    }

    fn uses_ratio(self) -> bool {
        !matches!(self, RuleKind::DirectSgd)
    }
}

/// Whether the moments come from the true model or from running estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    Oracle,
    #[default]
    Empirical,
}

/// Source of `ξ`, `φ^π` and `μ^b` for one direction evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Estimates<'a> {
    Oracle(&'a LossModel),
    Empirical(&'a EmpiricalModel),
}

#[derive(Debug, Clone)]
pub struct UpdateRule {
    pub kind: RuleKind,
    pub target: Policy,
    pub behavior: Policy,
    pub features: FeatureMap,
    pub gamma: f64,
    pub mode: EvalMode,
}

impl UpdateRule {
    pub fn new(
        mdp: &Mdp,
        kind: RuleKind,
        target: Policy,
        behavior: Policy,
        features: FeatureMap,
        mode: EvalMode,
    ) -> Result<Self> {
        mdp.check_policy(&target)?;
        mdp.check_policy(&behavior)?;
        features.check(mdp)?;
        if kind.uses_ratio() {
            for s in 0..mdp.n_states() {
                for a in 0..mdp.n_actions() {
                    if target.prob(s, a) > 0.0 && behavior.prob(s, a) == 0.0 {
                        return Err(Error::UnsupportedAction { state: s, action: a });
                    }
                }
            }
        }
        Ok(Self { kind, target, behavior, features, gamma: mdp.gamma(), mode })
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }

    fn ratio(&self, s: usize, a: usize) -> f64 {
        let p = self.target.prob(s, a);
        if p == 0.0 {
            0.0
        } else {
            p / self.behavior.prob(s, a)
        }
    }

    /// `g(θ, z)` (or `ĝ_t` when given empirical estimates).
    pub fn direction(&self, theta: &Vector, z: &Transition, est: Estimates<'_>) -> Vector {
        let f = &self.features;
        let (s, a) = (z.s, z.a);
        match self.kind {
            RuleKind::DirectSgd => {
                let (xi, phi_next) = self.moments(est, s);
                let w = phi_next * self.gamma - f.phi(s) - f.zeta();
                let delta = xi + w.dot(theta);
                w * delta
            }
            RuleKind::TdSgd => {
                let ratio = self.ratio(s, a);
                let mut out = Vector::zeros(self.dim());
                if ratio == 0.0 {
                    return out;
                }
                let (xi, phi_next) = self.moments(est, s);
                let delta = xi + (phi_next * self.gamma - f.phi(s) - f.zeta()).dot(theta);
                out.axpy(self.gamma, f.phi(z.s_next), 0.0);
                out -= f.phi(s);
                out -= f.zeta();
                out * (ratio * delta)
            }
            RuleKind::Td0 => {
                let ratio = self.ratio(s, a);
                let mut out = f.phi(s) + f.zeta();
                if ratio == 0.0 {
                    out.fill(0.0);
                    return out;
                }
                let mu = match est {
                    Estimates::Oracle(m) => m.mu_b()[s],
                    Estimates::Empirical(m) => m.clamped_invariant(s),
                };
                let td = z.r - f.zeta().dot(theta) + self.gamma * f.phi(z.s_next).dot(theta) - f.phi(s).dot(theta);
                out *= -ratio * td / mu;
                out
            }
        }
    }

    fn moments(&self, est: Estimates<'_>, s: usize) -> (f64, Vector) {
        match est {
            Estimates::Oracle(m) => (m.moments().xi[s], m.moments().phi_next[s].clone()),
            Estimates::Empirical(m) => m.estimate_moments(&self.target, &self.features, s),
        }
    }

    /// `ḡ(θ)` by exhaustive summation over `μ^b(s) b(a|s) P(s'|s,a) P(r|s,a)`.
    pub fn mean_direction(&self, mdp: &Mdp, model: &LossModel, theta: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim());
        let mu = model.mu_b();
        for s in 0..mdp.n_states() {
            if mu[s] == 0.0 {
                continue;
            }
            for a in 0..mdp.n_actions() {
                let pa = mu[s] * self.behavior.prob(s, a);
                if pa == 0.0 {
                    continue;
                }
                for (next, &p) in mdp.successors(s, a).iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for o in mdp.rewards(s, a) {
                        let z = Transition { s, a, r: o.value, s_next: next };
                        out.axpy(pa * p * o.prob, &self.direction(theta, &z, Estimates::Oracle(model)), 1.0);
                    }
                }
            }
        }
        out
    }

    /// `e_t = ‖ĝ_t(θ,z) - g(θ,z)‖`.
    pub fn direction_error(&self, theta: &Vector, z: &Transition, empirical: &EmpiricalModel, oracle: &LossModel) -> f64 {
        (self.direction(theta, z, Estimates::Empirical(empirical)) - self.direction(theta, z, Estimates::Oracle(oracle))).norm()
    }
}

/// Closed-form bound constants for one rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleConstants {
    /// `C_0`: bound on `‖g‖`, `‖ĝ‖`, `‖ḡ‖`.
    pub grad_bound: f64,
    /// `G`: Lipschitz constant of `g(·, z)`.
    pub lipschitz: f64,
    /// `e_t ≤ error_factor · ẽ_t`.
    pub error_factor: f64,
}

/// Constants in terms of `C̃_0` (feature and reward bound), `C̃_1`
/// (projection radius) and the policy ratio constant `C`.
pub fn rule_constants(kind: RuleKind, c0: f64, c1: f64, ratio_c: f64) -> RuleConstants {
    match kind {
        RuleKind::DirectSgd => RuleConstants {
            grad_bound: (c0 + 2.0 * c0 * c1) * 3.0 * c0,
            lipschitz: 9.0 * c0 * c0,
            error_factor: c0 * c0 * (4.0 + 6.0 * c1),
        },
        RuleKind::TdSgd => RuleConstants {
            grad_bound: (c0 + 2.0 * c0 * c1) * 3.0 * ratio_c * c0,
            lipschitz: 9.0 * ratio_c * c0 * c0,
            error_factor: 3.0 * ratio_c * c0 * (c0 + c0 * c1),
        },
        RuleKind::Td0 => RuleConstants {
            grad_bound: ratio_c * (c0 + 3.0 * c0 * c1) * 2.0 * c0,
            lipschitz: 6.0 * ratio_c * c0 * c0,
            error_factor: ratio_c * (c0 + 3.0 * c0 * c1) * 2.0 * c0,
        },
    }
}

/// `C̃_0 = max(‖φ(s)‖, ‖ζ‖, r_max)`.
pub fn feature_reward_bound(mdp: &Mdp, features: &FeatureMap) -> f64 {
    features.norm_bound().max(mdp.r_max())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::RewardOutcome;
    use alloc::vec;

    fn one_state() -> Mdp {
        Mdp::new(0.5, vec![vec![vec![1.0]]], vec![vec![vec![RewardOutcome::new(1.0, 1.0)]]]).unwrap()
    }

    #[test]
    fn one_state_directions() {
        let m = one_state();
        let pi = Policy::uniform(1, 1);
        let f = FeatureMap::tabular(1, 0.5);
        let model = LossModel::build(&m, &pi, &pi, &f).unwrap();
        let z = Transition { s: 0, a: 0, r: 1.0, s_next: 0 };
        let theta = Vector::zeros(1);
        let rule = |k| UpdateRule::new(&m, k, pi.clone(), pi.clone(), f.clone(), EvalMode::Oracle).unwrap();
        assert!((rule(RuleKind::DirectSgd).direction(&theta, &z, Estimates::Oracle(&model))[0] + 0.5).abs() < 1e-15);
        assert!((rule(RuleKind::Td0).direction(&theta, &z, Estimates::Oracle(&model))[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn coverage_is_checked() {
        let m = Mdp::new(
            0.5,
            vec![vec![vec![1.0], vec![1.0]]],
            vec![vec![vec![RewardOutcome::new(1.0, 1.0)], vec![RewardOutcome::new(0.0, 1.0)]]],
        )
        .unwrap();
        let pi = Policy::deterministic(&[1], 2).unwrap();
        let b = Policy::deterministic(&[0], 2).unwrap();
        let f = FeatureMap::tabular(1, 0.5);
        assert!(matches!(
            UpdateRule::new(&m, RuleKind::Td0, pi.clone(), b.clone(), f.clone(), EvalMode::Oracle),
            Err(Error::UnsupportedAction { state: 0, action: 1 })
        ));
        assert!(UpdateRule::new(&m, RuleKind::DirectSgd, pi, b, f, EvalMode::Oracle).is_ok());
    }

    #[test]
    fn mean_fields_match_closed_forms() {
        let r = |v: f64| vec![RewardOutcome::new(v, 0.5), RewardOutcome::new(v + 1.0, 0.5)];
        let m = Mdp::new(
            0.8,
            vec![vec![vec![0.9, 0.1], vec![0.3, 0.7]], vec![vec![0.1, 0.9], vec![0.6, 0.4]]],
            vec![vec![r(1.0), r(0.0)], vec![r(-1.0), r(2.0)]],
        )
        .unwrap();
        let pi = Policy::new(vec![vec![0.2, 0.8], vec![0.7, 0.3]]).unwrap();
        let b = Policy::uniform(2, 2);
        let f = FeatureMap::tabular(2, 0.8);
        let model = LossModel::build(&m, &pi, &b, &f).unwrap();
        let theta = Vector::from_vec(vec![1.0, -1.0]);
        let grad = model.loss_and_grad(&theta).1;
        for kind in [RuleKind::DirectSgd, RuleKind::TdSgd] {
            let rule = UpdateRule::new(&m, kind, pi.clone(), b.clone(), f.clone(), EvalMode::Oracle).unwrap();
            assert!((rule.mean_direction(&m, &model, &theta) - &grad).norm() < 1e-12);
        }
        let rule = UpdateRule::new(&m, RuleKind::Td0, pi.clone(), b.clone(), f.clone(), EvalMode::Oracle).unwrap();
        let expect = model.td0_mean_field(&f, &theta);
        assert!((rule.mean_direction(&m, &model, &theta) - expect).norm() < 1e-12);
        assert!(rule.mean_direction(&m, &model, model.theta_star()).norm() < 1e-12);
    }
}
