//! Exact dynamic-programming oracles and approximate policy iteration.

use alloc::vec::Vec;

use rand::Rng;

use crate::chain;
use crate::engine::{self, ProjectionSet, RunOptions, StepSchedule};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, LossModel};
use crate::linalg::Vector;
use crate::mdp::{exact_values, transition_kernel, Mdp, Policy};
use crate::trajectory::{SamplerConfig, Sampler};
use crate::updates::{EvalMode, RuleKind, UpdateRule};

fn require_discounted(mdp: &Mdp) -> Result<()> {
    if mdp.is_average_reward() {
        Err(Error::InvalidConfig("policy iteration needs gamma < 1".into()))
    } else {
        Ok(())
    }
}

/// `Q(s,a) = E[r|s,a] + γ Σ_{s'} P(s'|s,a) V(s')`.
pub fn q_value(mdp: &Mdp, values: &Vector, s: usize, a: usize) -> f64 {
    let next: f64 = mdp.successors(s, a).iter().zip(values.iter()).map(|(p, v)| p * v).sum();
    mdp.expected_reward(s, a) + mdp.gamma() * next
}

/// Deterministic greedy policy; ties go to the lowest action index.
pub fn greedy_improve(mdp: &Mdp, values: &Vector) -> Result<Policy> {
    if values.len() != mdp.n_states() {
        return Err(Error::DimensionMismatch { what: "value estimate", expected: mdp.n_states(), found: values.len() });
    }
    let actions: Vec<usize> = (0..mdp.n_states())
        .map(|s| {
            let mut best = 0;
            let mut best_q = q_value(mdp, values, s, 0);
            for a in 1..mdp.n_actions() {
                let q = q_value(mdp, values, s, a);
                if q > best_q {
                    best = a;
                    best_q = q;
                }
            }
            best
        })
        .collect();
    Policy::deterministic(&actions, mdp.n_actions())
}

/// `π*`, `V*` and the limiting state law `μ*` of `π*`.
#[derive(Debug, Clone)]
pub struct OptimalOracle {
    pub policy: Policy,
    pub values: Vector,
    pub stationary: Vector,
}

impl OptimalOracle {
    /// `Σ_s μ*(s)(V*(s) - V^π(s))`.
    pub fn suboptimality(&self, mdp: &Mdp, policy: &Policy) -> Result<f64> {
        let v = exact_values(mdp, policy)?;
        Ok(self.stationary.dot(&(&self.values - v.values())))
    }
}

/// Value iteration to a sup-norm residual of `1e-12`, greedy extraction,
/// then exact policy iteration until the policy is stable.
pub fn optimal_oracle(mdp: &Mdp) -> Result<OptimalOracle> {
    require_discounted(mdp)?;
    let n = mdp.n_states();
    let mut v = Vector::zeros(n);
    for _ in 0..1_000_000 {
        let next = Vector::from_iterator(
            n,
            (0..n).map(|s| (0..mdp.n_actions()).map(|a| q_value(mdp, &v, s, a)).fold(f64::NEG_INFINITY, f64::max)),
        );
        let residual = (&next - &v).amax();
        v = next;
        if residual <= 1e-12 {
            break;
        }
    }
    let mut policy = greedy_improve(mdp, &v)?;
    loop {
        let values = exact_values(mdp, &policy)?.values().clone();
        let improved = greedy_improve(mdp, &values)?;
        if improved == policy {
            let stationary = chain::limiting_distribution(&transition_kernel(mdp, &policy)?);
            return Ok(OptimalOracle { policy, values, stationary });
        }
        policy = improved;
    }
}

/// `max_s [max_a Q(s,a) - V(s)]` in absolute value.
pub fn optimality_residual(mdp: &Mdp, values: &Vector) -> f64 {
    (0..mdp.n_states())
        .map(|s| {
            let best = (0..mdp.n_actions()).map(|a| q_value(mdp, values, s, a)).fold(f64::NEG_INFINITY, f64::max);
            (best - values[s]).abs()
        })
        .fold(0.0, f64::max)
}

/// Exact policy iteration from `initial`; returns every policy visited,
/// ending with the first repeated one.
pub fn policy_iteration(mdp: &Mdp, initial: &Policy) -> Result<Vec<Policy>> {
    require_discounted(mdp)?;
    mdp.check_policy(initial)?;
    let mut seq = alloc::vec![initial.clone()];
    loop {
        let current = seq.last().expect("nonempty");
        let values = exact_values(mdp, current)?.values().clone();
        let next = greedy_improve(mdp, &values)?;
        if &next == current {
            return Ok(seq);
        }
        seq.push(next);
    }
}

/// `max(max_s μ*(s)/μ^{π_k}(s), max_s μ^{π_k}(s)/μ^{π_{k-1}}(s))`, with
/// `0/0` treated as `0` and `x/0` as infinite.
pub fn round_shift_constant(mu_star: &Vector, mu_new: &Vector, mu_old: &Vector) -> f64 {
    let ratio = |num: &Vector, den: &Vector| {
        num.iter()
            .zip(den.iter())
            .map(|(&n, &d)| if n == 0.0 { 0.0 } else if d == 0.0 { f64::INFINITY } else { n / d })
            .fold(0.0, f64::max)
    };
    ratio(mu_star, mu_new).max(ratio(mu_new, mu_old))
}

/// `γ^K Δ_0 + Σ_{k=1}^K γ^{K-k} C² ε_k / (1-γ)`.
pub fn error_propagation_bound(gamma: f64, delta0: f64, c: f64, eps: &[f64]) -> f64 {
    let k_total = eps.len() as i32;
    let tail: f64 = eps.iter().enumerate().map(|(i, e)| libm::pow(gamma, (k_total - 1 - i as i32) as f64) * e).sum();
    libm::pow(gamma, k_total as f64) * delta0 + c * c * tail / (1.0 - gamma)
}

/// Step schedule for each evaluation round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalSchedule {
    Fixed(StepSchedule),
    /// Contraction schedule with `c` from the round's exact loss model.
    ContractionFromModel,
}

#[derive(Debug, Clone)]
pub struct PolicyIterConfig {
    pub rounds: usize,
    pub t_eval: usize,
    pub rule: RuleKind,
    pub mode: EvalMode,
    pub schedule: EvalSchedule,
    /// Defaults to the cube of half-width `r_max/(1-γ)`.
    pub projection: Option<ProjectionSet>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RoundReport {
    pub k: usize,
    /// `π_k`.
    pub policy: Policy,
    /// `Σ_s μ^{π_{k-1}}(s)|V^{π_{k-1}}(s) - V̂(s)|`; absent for `k = 0`.
    pub eps_hat: Option<f64>,
    /// `Σ_s μ*(s)(V*(s) - V^{π_k}(s))`.
    pub suboptimality: f64,
    /// Distribution-shift constant of this round; absent for `k = 0`.
    pub shift_c: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    pub rounds: Vec<RoundReport>,
    pub optimal: OptimalOracle,
    /// Set when the behavior policy misses an action of the evaluated policy.
    pub coverage_diagnostic: Option<Error>,
}

impl IterationReport {
    pub fn final_policy(&self) -> &Policy {
        &self.rounds.last().expect("round 0 always present").policy
    }

    /// The error-propagation bound with `C` the largest round constant.
    pub fn bound(&self, gamma: f64) -> f64 {
        let eps: Vec<f64> = self.rounds.iter().filter_map(|r| r.eps_hat).collect();
        let c = self.rounds.iter().filter_map(|r| r.shift_c).fold(1.0, f64::max);
        error_propagation_bound(gamma, self.rounds[0].suboptimality, c, &eps)
    }

    /// Bound after each of rounds `1..=K`, with `C` taken over that prefix.
    pub fn prefix_bounds(&self, gamma: f64) -> Vec<f64> {
        let delta0 = self.rounds[0].suboptimality;
        (1..self.rounds.len())
            .map(|k| {
                let prefix = &self.rounds[1..=k];
                let eps: Vec<f64> = prefix.iter().filter_map(|r| r.eps_hat).collect();
                let c = prefix.iter().filter_map(|r| r.shift_c).fold(1.0, f64::max);
                error_propagation_bound(gamma, delta0, c, &eps)
            })
            .collect()
    }
}

/// Policy iteration where each evaluation is the exact value plus noise of
/// `μ^{π}`-weighted L1 size `eps`.
pub fn injected_error_iteration(mdp: &Mdp, initial: &Policy, rounds: usize, eps: f64, seed: u64) -> Result<IterationReport> {
    let mut rng = crate::trajectory::stream_rng(seed, 0);
    policy_iteration_with(mdp, initial, rounds, |_, target| {
        let mu = chain::limiting_distribution(&transition_kernel(mdp, target)?);
        let noise = Vector::from_iterator(mdp.n_states(), (0..mdp.n_states()).map(|_| 2.0 * rng.random::<f64>() - 1.0));
        let size = mu.dot(&noise.abs());
        let scale = if size > 0.0 { eps / size } else { 0.0 };
        Ok(exact_values(mdp, target)?.values() + noise * scale)
    })
}

/// Policy iteration where round `k` evaluates `π_{k-1}` with `evaluate`
/// and improves greedily against the estimate.
pub fn policy_iteration_with<F>(mdp: &Mdp, initial: &Policy, rounds: usize, mut evaluate: F) -> Result<IterationReport>
where
    F: FnMut(usize, &Policy) -> Result<Vector>,
{
    require_discounted(mdp)?;
    mdp.check_policy(initial)?;
    let optimal = optimal_oracle(mdp)?;
    let mut mu_prev = chain::limiting_distribution(&transition_kernel(mdp, initial)?);
    let mut report = IterationReport {
        rounds: alloc::vec![RoundReport {
            k: 0,
            policy: initial.clone(),
            eps_hat: None,
            suboptimality: optimal.suboptimality(mdp, initial)?,
            shift_c: None,
        }],
        optimal,
        coverage_diagnostic: None,
    };
    for k in 1..=rounds {
        let current = report.final_policy().clone();
        let v_hat = match evaluate(k, &current) {
            Ok(v) => v,
            Err(e @ Error::UnsupportedAction { .. }) => {
                report.coverage_diagnostic = Some(e);
                break;
            }
            Err(Error::Diverged { gap, start, .. }) => return Err(Error::Diverged { round: k, gap, start }),
            Err(e) => return Err(e),
        };
        let v_true = exact_values(mdp, &current)?.values().clone();
        let eps_hat = mu_prev.dot(&(&v_true - &v_hat).abs());
        let next = greedy_improve(mdp, &v_hat)?;
        let mu_next = chain::limiting_distribution(&transition_kernel(mdp, &next)?);
        let shift_c = round_shift_constant(&report.optimal.stationary, &mu_next, &mu_prev);
        let suboptimality = report.optimal.suboptimality(mdp, &next)?;
        report.rounds.push(RoundReport { k, policy: next, eps_hat: Some(eps_hat), suboptimality, shift_c: Some(shift_c) });
        mu_prev = mu_next;
    }
    Ok(report)
}

/// Approximate policy iteration with tabular features; each round evaluates
/// the current policy on a fresh behavior trajectory (stream `k` of the
/// configured seed) and sets `V̂(s) = φ(s)ᵀθ̄_T`.
pub fn approximate_policy_iteration(
    mdp: &Mdp,
    behavior: &Policy,
    initial: &Policy,
    config: &PolicyIterConfig,
) -> Result<IterationReport> {
    require_discounted(mdp)?;
    if config.t_eval == 0 {
        return Err(Error::InvalidConfig("t_eval must be at least 1".into()));
    }
    let features = FeatureMap::tabular(mdp.n_states(), mdp.gamma());
    let set = config
        .projection
        .clone()
        .unwrap_or_else(|| ProjectionSet::cube(features.dim(), mdp.r_max() / (1.0 - mdp.gamma())));
    let options = RunOptions { divergence_factor: Some(10.0), ..RunOptions::default() };
    let sampler_config = SamplerConfig::markov(config.t_eval, config.seed);
    let theta0 = Vector::zeros(features.dim());

    policy_iteration_with(mdp, initial, config.rounds, |k, target| {
        let rule = UpdateRule::new(mdp, config.rule, target.clone(), behavior.clone(), features.clone(), config.mode)?;
        let model = LossModel::build(mdp, target, behavior, &features)?;
        let schedule = match config.schedule {
            EvalSchedule::Fixed(s) => s,
            EvalSchedule::ContractionFromModel => {
                StepSchedule::contraction(model.contraction_constant(config.rule.contraction_kind()))
            }
        };
        let data = Sampler::new(mdp, behavior, &sampler_config, sampler_config.rng(k as u64))?;
        let out = engine::run(mdp, &rule, data, &schedule, &set, &theta0, Some(&model), &options)?;
        Ok(features.values(&out.theta_bar))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::RewardOutcome;
    use alloc::vec;

    /// Action 0 stays, action 1 swaps; reward depends on the state only.
    pub(crate) fn stay_or_swap(gamma: f64) -> Mdp {
        let r = |v: f64| vec![RewardOutcome::new(v, 1.0)];
        Mdp::new(
            gamma,
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, 1.0], vec![1.0, 0.0]]],
            vec![vec![r(1.0), r(1.0)], vec![r(0.0), r(0.0)]],
        )
        .unwrap()
    }

    #[test]
    fn greedy_examples() {
        let m = stay_or_swap(0.9);
        let pi = greedy_improve(&m, &Vector::from_vec(vec![10.0, 0.0])).unwrap();
        assert_eq!(pi.as_deterministic().unwrap(), vec![0, 1]);
        // all Q values tie at V = 0 in state 1
        let pi = greedy_improve(&m, &Vector::zeros(2)).unwrap();
        assert_eq!(pi.as_deterministic().unwrap(), vec![0, 0]);
    }

    #[test]
    fn optimal_examples() {
        let m = stay_or_swap(0.9);
        let opt = optimal_oracle(&m).unwrap();
        assert_eq!(opt.policy.as_deterministic().unwrap(), vec![0, 1]);
        assert!(optimality_residual(&m, &opt.values) < 1e-10);
        assert!((opt.values[0] - 10.0).abs() < 1e-10);

        let one = Mdp::new(0.8, vec![vec![vec![1.0]]], vec![vec![vec![RewardOutcome::new(2.0, 1.0)]]]).unwrap();
        assert!((optimal_oracle(&one).unwrap().values[0] - 10.0).abs() < 1e-10);

        for start in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let seq = policy_iteration(&m, &Policy::deterministic(&start, 2).unwrap()).unwrap();
            assert!(seq.len() <= 3);
            assert_eq!(seq.last().unwrap(), &opt.policy);
        }
    }

    #[test]
    fn exact_evaluation_reaches_optimum() {
        let m = stay_or_swap(0.9);
        let start = Policy::deterministic(&[1, 0], 2).unwrap();
        let report = policy_iteration_with(&m, &start, 3, |_, p| Ok(exact_values(&m, p)?.values().clone())).unwrap();
        assert_eq!(report.final_policy(), &report.optimal.policy);
        assert!(report.rounds.iter().skip(1).all(|r| r.eps_hat.unwrap() < 1e-12));
        let zero = policy_iteration_with(&m, &start, 0, |_, _| unreachable!()).unwrap();
        assert_eq!(zero.rounds.len(), 1);
    }

    #[test]
    fn bound_formula() {
        assert_eq!(error_propagation_bound(0.5, 4.0, 1.0, &[]), 4.0);
        // γ²Δ0 + (γ ε1 + ε2) C² / (1-γ)
        let b = error_propagation_bound(0.5, 4.0, 2.0, &[1.0, 2.0]);
        assert!((b - (1.0 + (0.5 + 2.0) * 4.0 / 0.5)).abs() < 1e-12);
    }
}
